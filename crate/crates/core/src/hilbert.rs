//! Finite-dimensional Hilbert spaces, kets and dense operators.
//!
//! Every space is a [`ProductSpace`]: an ordered list of labeled factor
//! spaces. A single [`HilbertSpace`] converts into a one-factor product.
//! Index arithmetic is row-major over factor order, so the first factor is
//! the most significant digit of a composite basis index.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::tolerance::Tolerances;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Largest entry modulus of a complex matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// A labeled orthonormal basis.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HilbertSpace {
    name: String,
    labels: Vec<String>,
}

impl HilbertSpace {
    pub fn new(name: impl Into<String>, labels: Vec<String>) -> Result<Arc<Self>> {
        let name = name.into();
        if labels.is_empty() {
            return Err(Error::InvalidParameter {
                field: "basis_labels",
                reason: format!("space `{name}` needs at least one basis vector"),
            });
        }
        let mut sorted: Vec<&String> = labels.iter().collect();
        sorted.sort();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter {
                field: "basis_labels",
                reason: format!("space `{name}` has repeated basis labels"),
            });
        }
        Ok(Arc::new(Self { name, labels }))
    }

    /// Space with labels `prefix_0 .. prefix_{dim-1}`.
    pub fn indexed(name: impl Into<String>, prefix: &str, dim: usize) -> Result<Arc<Self>> {
        Self::new(name, (0..dim).map(|k| format!("{prefix}_{k}")).collect())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Ordered tensor product of factor spaces. Factor order is part of identity.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ProductSpace {
    factors: Vec<Arc<HilbertSpace>>,
}

impl ProductSpace {
    pub fn new(factors: Vec<Arc<HilbertSpace>>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::InvalidParameter {
                field: "factors",
                reason: "a product space needs at least one factor".into(),
            });
        }
        let mut names: Vec<&str> = factors.iter().map(|f| f.name()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidParameter {
                field: "factors",
                reason: "factor names must be distinct".into(),
            });
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[Arc<HilbertSpace>] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(|f| f.dim()).product()
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name() == name)
    }

    /// `self ⊗ other`, panicking on a repeated factor name.
    pub fn tensor(&self, other: &ProductSpace) -> ProductSpace {
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        ProductSpace::new(factors).expect("tensor of spaces sharing a factor")
    }

    /// Composite index of per-factor indices.
    pub fn index(&self, digits: &[usize]) -> usize {
        debug_assert_eq!(digits.len(), self.factors.len());
        self.factors
            .iter()
            .zip(digits)
            .fold(0, |acc, (f, &d)| acc * f.dim() + d)
    }

    /// Per-factor indices of a composite index.
    pub fn digits(&self, mut index: usize) -> Vec<usize> {
        let mut out = vec![0; self.factors.len()];
        for (slot, f) in out.iter_mut().zip(&self.factors).rev() {
            *slot = index % f.dim();
            index /= f.dim();
        }
        out
    }

    /// Start position of `sub` as a contiguous run of factors.
    fn locate(&self, sub: &ProductSpace) -> Option<usize> {
        let n = sub.factors.len();
        (0..=self.factors.len().checked_sub(n)?).find(|&start| self.factors[start..start + n] == sub.factors[..])
    }

    fn describe(&self) -> String {
        self.factors.iter().map(|f| f.name()).collect::<Vec<_>>().join("⊗")
    }
}

impl From<Arc<HilbertSpace>> for ProductSpace {
    fn from(space: Arc<HilbertSpace>) -> Self {
        Self { factors: vec![space] }
    }
}

impl fmt::Display for ProductSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

/// A vector in a product space.
#[derive(Debug, Clone, PartialEq)]
pub struct Ket {
    space: ProductSpace,
    amps: CVector,
}

impl Ket {
    pub fn new(space: impl Into<ProductSpace>, amps: CVector) -> Result<Self> {
        let space = space.into();
        if amps.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: amps.len(),
            });
        }
        Ok(Self { space, amps })
    }

    /// A physical state: Σ|amp|² must equal one within the normalization tolerance.
    pub fn normalized(space: impl Into<ProductSpace>, amps: CVector) -> Result<Self> {
        let ket = Self::new(space, amps)?;
        let total = ket.norm_sqr();
        if (total - 1.0).abs() > Tolerances::DEFAULT.normalization {
            return Err(Error::Normalization {
                constraint: "state_norm",
                field: "amps",
                total,
            });
        }
        Ok(ket)
    }

    pub fn basis(space: impl Into<ProductSpace>, index: usize) -> Self {
        let space = space.into();
        let mut amps = CVector::zeros(space.dim());
        amps[index] = ONE;
        Self { space, amps }
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn amps(&self) -> &CVector {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `self ⊗ other`.
    pub fn tensor(&self, other: &Ket) -> Ket {
        let space = self.space.tensor(&other.space);
        let amps = self.amps.kronecker(&other.amps);
        Ket { space, amps }
    }

    pub fn inner(&self, other: &Ket) -> Result<C64> {
        same_space(&self.space, &other.space)?;
        Ok(self.amps.dotc(&other.amps))
    }
}

/// A dense linear operator on a product space.
#[derive(Debug, Clone, PartialEq)]
pub struct LinOp {
    space: ProductSpace,
    mat: CMatrix,
}

impl LinOp {
    pub fn new(space: impl Into<ProductSpace>, mat: CMatrix) -> Result<Self> {
        let space = space.into();
        let dim = space.dim();
        if mat.nrows() != dim || mat.ncols() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: if mat.nrows() != dim { mat.nrows() } else { mat.ncols() },
            });
        }
        Ok(Self { space, mat })
    }

    pub fn identity(space: impl Into<ProductSpace>) -> Self {
        let space = space.into();
        let dim = space.dim();
        Self {
            space,
            mat: CMatrix::identity(dim, dim),
        }
    }

    pub fn zero(space: impl Into<ProductSpace>) -> Self {
        let space = space.into();
        let dim = space.dim();
        Self {
            space,
            mat: CMatrix::zeros(dim, dim),
        }
    }

    /// Diagonal operator with real eigenvalues in basis order.
    pub fn diagonal(space: impl Into<ProductSpace>, values: &[f64]) -> Result<Self> {
        let space = space.into();
        if values.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: values.len(),
            });
        }
        let diag = CVector::from_iterator(values.len(), values.iter().map(|&v| C64::new(v, 0.0)));
        Ok(Self {
            space,
            mat: CMatrix::from_diagonal(&diag),
        })
    }

    /// `|ket⟩⟨bra|`.
    pub fn outer(ket: &Ket, bra: &Ket) -> Result<Self> {
        same_space(ket.space(), bra.space())?;
        Ok(Self {
            space: ket.space.clone(),
            mat: &ket.amps * bra.amps.adjoint(),
        })
    }

    /// `|ket⟩⟨ket|`.
    pub fn projector_onto(ket: &Ket) -> Self {
        Self {
            space: ket.space.clone(),
            mat: &ket.amps * ket.amps.adjoint(),
        }
    }

    pub fn space(&self) -> &ProductSpace {
        &self.space
    }

    pub fn mat(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_mat(self) -> CMatrix {
        self.mat
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn adjoint(&self) -> LinOp {
        LinOp {
            space: self.space.clone(),
            mat: self.mat.adjoint(),
        }
    }

    pub fn scale(&self, c: C64) -> LinOp {
        LinOp {
            space: self.space.clone(),
            mat: &self.mat * c,
        }
    }

    pub fn trace(&self) -> C64 {
        self.mat.trace()
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        same_space(&self.space, ket.space())?;
        Ok(Ket {
            space: ket.space.clone(),
            amps: &self.mat * &ket.amps,
        })
    }

    /// `[self, other]`.
    pub fn commutator(&self, other: &LinOp) -> LinOp {
        &(self * other) - &(other * self)
    }

    /// Largest entry modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &LinOp) -> f64 {
        assert_eq!(self.space, other.space, "comparing operators on different spaces");
        max_abs(&(&self.mat - &other.mat))
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.mat)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        max_abs(&(&self.mat - self.mat.adjoint()))
    }

    pub fn unitary_deviation(&self) -> f64 {
        let dim = self.dim();
        max_abs(&(matmul(&self.mat.adjoint(), &self.mat) - CMatrix::identity(dim, dim)))
    }

    pub fn idempotence_deviation(&self) -> f64 {
        max_abs(&(matmul(&self.mat, &self.mat) - &self.mat))
    }

    /// Worst of the Hermitian and idempotence deviations.
    pub fn projector_deviation(&self) -> f64 {
        self.hermitian_deviation().max(self.idempotence_deviation())
    }

    pub fn is_hermitian(&self, tol: &Tolerances) -> bool {
        self.hermitian_deviation() <= tol.hermitian
    }

    pub fn is_unitary(&self, tol: &Tolerances) -> bool {
        self.unitary_deviation() <= tol.unitary
    }

    pub fn is_projector(&self, tol: &Tolerances) -> bool {
        self.hermitian_deviation() <= tol.hermitian && self.idempotence_deviation() <= tol.projector
    }

    /// Ascending eigenvalues of a Hermitian operator.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut values: Vec<f64> = hermitian_part(&self.mat)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .collect();
        values.sort_by(f64::total_cmp);
        values
    }
}

/// Complex matrix product through real kernels, which are blocked and
/// vectorized where the generic complex path is not.
pub fn matmul(a: &CMatrix, b: &CMatrix) -> CMatrix {
    assert_eq!(a.ncols(), b.nrows(), "matrix product dimension mismatch");
    if a.nrows() * a.ncols() * b.ncols() < 32 * 32 * 32 {
        return a * b;
    }
    let (ar, ai) = (a.map(|z| z.re), a.map(|z| z.im));
    let (br, bi) = (b.map(|z| z.re), b.map(|z| z.im));
    let re = &ar * &br - &ai * &bi;
    let im = &ar * &bi + &ai * &br;
    re.zip_map(&im, C64::new)
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn same_space(a: &ProductSpace, b: &ProductSpace) -> Result<()> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.dim(),
        });
    }
    if a != b {
        return Err(Error::SpaceMismatch(format!("{a} vs {b}")));
    }
    Ok(())
}

impl Add for &LinOp {
    type Output = LinOp;
    fn add(self, rhs: &LinOp) -> LinOp {
        assert_eq!(self.space, rhs.space, "adding operators on different spaces");
        LinOp {
            space: self.space.clone(),
            mat: &self.mat + &rhs.mat,
        }
    }
}

impl Sub for &LinOp {
    type Output = LinOp;
    fn sub(self, rhs: &LinOp) -> LinOp {
        assert_eq!(self.space, rhs.space, "subtracting operators on different spaces");
        LinOp {
            space: self.space.clone(),
            mat: &self.mat - &rhs.mat,
        }
    }
}

impl Mul for &LinOp {
    type Output = LinOp;
    fn mul(self, rhs: &LinOp) -> LinOp {
        assert_eq!(self.space, rhs.space, "composing operators on different spaces");
        LinOp {
            space: self.space.clone(),
            mat: matmul(&self.mat, &rhs.mat),
        }
    }
}

impl Neg for &LinOp {
    type Output = LinOp;
    fn neg(self) -> LinOp {
        LinOp {
            space: self.space.clone(),
            mat: -&self.mat,
        }
    }
}

/// Sum of operators on a common space.
pub fn sum_ops<'a, I: IntoIterator<Item = &'a LinOp>>(space: &ProductSpace, ops: I) -> LinOp {
    let mut acc = LinOp::zero(space.clone());
    for op in ops {
        assert_eq!(&op.space, space, "summing operators on different spaces");
        acc.mat += &op.mat;
    }
    acc
}

/// Kronecker product `a ⊗ b` on `A ⊗ B`.
pub fn kron(a: &LinOp, b: &LinOp) -> LinOp {
    LinOp {
        space: a.space.tensor(&b.space),
        mat: a.mat.kronecker(&b.mat),
    }
}

/// Kronecker product of a non-empty list of operators, left to right.
pub fn kron_all(ops: &[&LinOp]) -> LinOp {
    let (first, rest) = ops.split_first().expect("kron_all of an empty list");
    rest.iter().fold((*first).clone(), |acc, op| kron(&acc, op))
}

/// Lift an operator into `space`, padding with identities on every other
/// factor. The operator's factors may sit anywhere in `space`, in any order.
pub fn embed(op: &LinOp, space: &ProductSpace) -> Result<LinOp> {
    if let Some(start) = space.locate(op.space()) {
        let n = op.space().factors().len();
        let before: usize = space.factors()[..start].iter().map(|f| f.dim()).product();
        let after: usize = space.factors()[start + n..].iter().map(|f| f.dim()).product();
        let mut mat = op.mat.clone();
        if before > 1 {
            mat = CMatrix::identity(before, before).kronecker(&mat);
        }
        if after > 1 {
            mat = mat.kronecker(&CMatrix::identity(after, after));
        }
        return Ok(LinOp {
            space: space.clone(),
            mat,
        });
    }
    let positions = op
        .space()
        .factors()
        .iter()
        .map(|f| {
            space
                .position(f.name())
                .filter(|&p| space.factors()[p] == *f)
                .ok_or_else(|| Error::UnknownFactor(op.space().describe()))
        })
        .collect::<Result<Vec<_>>>()?;
    let full_strides = strides(space);
    // Offset in the full index contributed by each sub-index.
    let contrib: Vec<usize> = (0..op.dim())
        .map(|s| {
            op.space()
                .digits(s)
                .iter()
                .zip(&positions)
                .map(|(d, &p)| d * full_strides[p])
                .sum()
        })
        .collect();
    let n = space.dim();
    let mut mat = CMatrix::zeros(n, n);
    for r in 0..n {
        let digits = space.digits(r);
        let sub: Vec<usize> = positions.iter().map(|&p| digits[p]).collect();
        let s = op.space().index(&sub);
        let base = r - contrib[s];
        for (t, offset) in contrib.iter().enumerate() {
            mat[(r, base + offset)] = op.mat[(s, t)];
        }
    }
    Ok(LinOp {
        space: space.clone(),
        mat,
    })
}

fn strides(space: &ProductSpace) -> Vec<usize> {
    let dims: Vec<usize> = space.factors().iter().map(|f| f.dim()).collect();
    let mut out = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        out[k] = out[k + 1] * dims[k + 1];
    }
    out
}

/// `exp(-i h t)` via the spectral decomposition of `h`.
pub fn unitary_exp(h: &LinOp, t: f64) -> Result<LinOp> {
    let dev = h.hermitian_deviation();
    if dev > Tolerances::DEFAULT.hermitian {
        return Err(Error::NotHermitian(dev));
    }
    let eig = hermitian_part(&h.mat).symmetric_eigen();
    let phases = CVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&e| C64::from_polar(1.0, -e * t)),
    );
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (mut col, phase) in scaled.column_iter_mut().zip(phases.iter()) {
        col *= *phase;
    }
    Ok(LinOp {
        space: h.space.clone(),
        mat: matmul(&scaled, &v.adjoint()),
    })
}

/// Heisenberg-picture evolution `u† o u`.
pub fn heisenberg_evolve(o: &LinOp, u: &LinOp) -> Result<LinOp> {
    same_space(o.space(), u.space())?;
    let dev = u.unitary_deviation();
    if dev > Tolerances::DEFAULT.unitary {
        return Err(Error::NotUnitary(dev));
    }
    Ok(LinOp {
        space: o.space.clone(),
        mat: matmul(&matmul(&u.mat.adjoint(), &o.mat), &u.mat),
    })
}

/// `⟨state|op|state⟩`.
pub fn expectation(state: &Ket, op: &LinOp) -> Result<C64> {
    same_space(state.space(), op.space())?;
    Ok(state.amps.dotc(&(&op.mat * &state.amps)))
}
