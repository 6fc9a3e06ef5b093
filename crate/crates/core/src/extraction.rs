//! Recover `Σ b_i ⊗ Q_i` from an operator on `O ⊗ V` and a reference ket
//! of `O`, and check that the answer does not depend on how the input
//! was assembled.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::branch::{projector_family_deviation, Branch, BranchDecomposition};
use crate::error::{Error, Result};
use crate::hilbert::{kron, matmul, max_abs, CMatrix, Ket, LinOp, ProductSpace, C64};
use crate::sampling::random_unitary;
use crate::tolerance::Tolerances;

#[derive(Debug, Clone)]
pub struct ExtractionInput {
    /// Hermitian operator whose first factor is `O`; the remaining factors
    /// together form `V`.
    pub op: LinOp,
    pub ref_ket: Ket,
    pub expected_branch_count: usize,
}

impl ExtractionInput {
    pub fn new(op: LinOp, ref_ket: Ket, expected_branch_count: usize) -> Result<Self> {
        let input = Self {
            op,
            ref_ket,
            expected_branch_count,
        };
        input.validate(&Tolerances::DEFAULT)?;
        Ok(input)
    }

    fn validate(&self, tol: &Tolerances) -> Result<()> {
        let factors = self.op.space().factors();
        if factors.len() < 2 {
            return Err(Error::SpaceMismatch(format!(
                "extraction needs O ⊗ V, got {}",
                self.op.space()
            )));
        }
        let ref_space = self.ref_ket.space().factors();
        if ref_space.len() != 1 || ref_space[0] != factors[0] {
            return Err(Error::SpaceMismatch(format!(
                "reference ket lives in {}, operator's first factor is {}",
                self.ref_ket.space(),
                factors[0].name()
            )));
        }
        let herm = self.op.hermitian_deviation();
        if herm > tol.hermitian {
            return Err(Error::NotHermitian(herm));
        }
        let norm = (self.ref_ket.norm_sqr() - 1.0).abs();
        if norm > tol.normalization {
            return Err(Error::Normalization {
                constraint: "refket",
                field: "ref_ket",
                total: self.ref_ket.norm_sqr(),
            });
        }
        if self.expected_branch_count == 0 {
            return Err(Error::InvalidParameter {
                field: "expected_branch_count",
                reason: "must be at least 1".into(),
            });
        }
        Ok(())
    }

    pub fn v_space(&self) -> ProductSpace {
        ProductSpace::new(self.op.space().factors()[1..].to_vec()).expect("factors already distinct")
    }
}

#[derive(Debug, Clone)]
pub struct ExtractedDecomposition {
    /// Sorted by ascending `beta`; `label` is the projector on `V`.
    pub branches: Vec<Branch>,
    pub residual: f64,
    /// `omega[i][k] = ⟨v_k|Q_i|v_k⟩` over the eigenvectors `v_k` of the
    /// reference matrix element.
    pub omega: Vec<Vec<f64>>,
    /// Orthonormal basis of each projector's range, as columns.
    pub bases: Vec<CMatrix>,
}

impl ExtractedDecomposition {
    pub fn betas(&self) -> Vec<f64> {
        self.branches.iter().map(|b| b.beta).collect()
    }

    pub fn projectors(&self) -> Vec<&LinOp> {
        self.branches.iter().map(|b| &b.label).collect()
    }

    pub fn to_decomposition(&self) -> BranchDecomposition {
        BranchDecomposition {
            branches: self.branches.clone(),
        }
    }

    pub fn projector_deviation(&self) -> f64 {
        projector_family_deviation(&self.projectors())
    }

    /// Every column of `omega` holds a single 1 and zeros elsewhere.
    pub fn eigenvectors_partitioned(&self, tol: f64) -> bool {
        let cols = self.omega.first().map_or(0, Vec::len);
        (0..cols).all(|k| {
            let mut ones = 0;
            for row in &self.omega {
                let w = row[k];
                if (w - 1.0).abs() <= tol {
                    ones += 1;
                } else if w.abs() > tol {
                    return false;
                }
            }
            ones == 1
        })
    }
}

fn block(op: &CMatrix, nv: usize, o: usize, o2: usize) -> CMatrix {
    op.view((o * nv, o2 * nv), (nv, nv)).into_owned()
}

pub fn extract_decomposition(input: &ExtractionInput) -> Result<ExtractedDecomposition> {
    extract_decomposition_with(input, &Tolerances::DEFAULT)
}

pub fn extract_decomposition_with(input: &ExtractionInput, tol: &Tolerances) -> Result<ExtractedDecomposition> {
    input.validate(tol)?;
    let o_space = input.op.space().factors()[0].clone();
    let v_space = input.v_space();
    let no = o_space.dim();
    let nv = v_space.dim();
    let op = input.op.mat();
    let r = input.ref_ket.amps();

    let mut vmat = CMatrix::zeros(nv, nv);
    for o in 0..no {
        for o2 in 0..no {
            let c = r[o].conj() * r[o2];
            if c.norm() != 0.0 {
                vmat += block(op, nv, o, o2) * c;
            }
        }
    }
    vmat = (&vmat + vmat.adjoint()) * C64::new(0.5, 0.0);
    let eig = vmat.symmetric_eigen();
    let mut order: Vec<usize> = (0..nv).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for &k in &order {
        let lambda = eig.eigenvalues[k];
        if clusters.is_empty() || lambda - last > tol.cluster {
            clusters.push(Vec::new());
        }
        clusters.last_mut().expect("just pushed").push(k);
        last = lambda;
    }
    if clusters.len() != input.expected_branch_count {
        return Err(Error::BranchCountMismatch {
            expected: input.expected_branch_count,
            found: clusters.len(),
        });
    }

    let mut branches = Vec::with_capacity(clusters.len());
    let mut bases = Vec::with_capacity(clusters.len());
    for (index, cluster) in clusters.iter().enumerate() {
        let beta = cluster.iter().map(|&k| eig.eigenvalues[k]).sum::<f64>() / cluster.len() as f64;
        let basis = CMatrix::from_fn(nv, cluster.len(), |row, c| eig.eigenvectors[(row, cluster[c])]);
        let q = matmul(&basis, &basis.adjoint());
        // Least squares for op·(1⊗Q) = b ⊗ Q: b[o,o'] = tr(Q·op_{oo'}) / tr Q.
        let rank = cluster.len() as f64;
        let b = CMatrix::from_fn(no, no, |o, o2| {
            let blk = block(op, nv, o, o2);
            (q.component_mul(&blk.transpose())).sum() / rank
        });
        let b = (&b + b.adjoint()) * C64::new(0.5, 0.0);
        branches.push(Branch {
            index,
            beta,
            b_op: LinOp::new(o_space.clone(), b)?,
            label: LinOp::new(v_space.clone(), q)?,
        });
        bases.push(basis);
    }

    let mut rebuilt = CMatrix::zeros(no * nv, no * nv);
    for br in &branches {
        rebuilt += kron(&br.b_op, &br.label).into_mat();
    }
    let residual = max_abs(&(op - rebuilt));
    if residual > tol.residual {
        return Err(Error::NotDecomposable(residual));
    }

    let omega = branches
        .iter()
        .map(|br| {
            (0..nv)
                .map(|k| {
                    let v = eig.eigenvectors.column(k);
                    (v.adjoint() * br.label.mat() * v)[(0, 0)].re
                })
                .collect()
        })
        .collect();

    let out = ExtractedDecomposition {
        branches,
        residual,
        omega,
        bases,
    };
    let dev = out.projector_deviation();
    if dev > tol.projector {
        return Err(Error::InvalidDecomposition(format!(
            "projector family deviation {dev:e}"
        )));
    }
    if !out.eigenvectors_partitioned(tol.cluster) {
        return Err(Error::InvalidDecomposition(
            "eigenvector shared between branches".into(),
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniquenessReport {
    pub trials: usize,
    pub worst_beta_deviation: f64,
    pub worst_projector_deviation: f64,
    pub failures: usize,
    pub tolerance: f64,
}

impl UniquenessReport {
    pub fn pass(&self) -> bool {
        self.failures == 0
            && self.worst_beta_deviation <= self.tolerance
            && self.worst_projector_deviation <= self.tolerance
    }
}

/// Reassemble the operator from the extracted terms in a random order and
/// with a random basis inside each projector's range, re-extract, and match
/// the result against the first extraction branch by branch.
pub fn verify_uniqueness<R: Rng + ?Sized>(
    input: &ExtractionInput,
    trials: usize,
    rng: &mut R,
) -> Result<UniquenessReport> {
    let reference = extract_decomposition(input)?;
    let tol = Tolerances::DEFAULT.residual;
    let mut report = UniquenessReport {
        trials,
        worst_beta_deviation: 0.0,
        worst_projector_deviation: 0.0,
        failures: 0,
        tolerance: tol,
    };
    let space = input.op.space().clone();
    let v_space = input.v_space();
    for trial in 0..trials {
        let mut order: Vec<usize> = (0..reference.branches.len()).collect();
        let op = if trial == 0 {
            input.op.clone()
        } else {
            order.shuffle(rng);
            let mut acc = CMatrix::zeros(space.dim(), space.dim());
            for &i in &order {
                let basis = &reference.bases[i];
                let mixed = matmul(basis, &random_unitary(rng, basis.ncols()));
                let q = LinOp::new(v_space.clone(), matmul(&mixed, &mixed.adjoint()))?;
                acc += kron(&reference.branches[i].b_op, &q).into_mat();
            }
            let acc = (&acc + acc.adjoint()) * C64::new(0.5, 0.0);
            LinOp::new(space.clone(), acc)?
        };
        let again = ExtractionInput {
            op,
            ref_ket: input.ref_ket.clone(),
            expected_branch_count: input.expected_branch_count,
        };
        let Ok(out) = extract_decomposition(&again) else {
            report.failures += 1;
            continue;
        };
        // Match each re-extracted branch to the nearest reference beta.
        for br in &out.branches {
            let (j, d) = reference
                .branches
                .iter()
                .enumerate()
                .map(|(j, r)| (j, (r.beta - br.beta).abs()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .expect("non-empty");
            report.worst_beta_deviation = report.worst_beta_deviation.max(d);
            let pd = br.label.max_abs_diff(&reference.branches[j].label);
            report.worst_projector_deviation = report.worst_projector_deviation.max(pd);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ideal::{ideal_b_of_t, IdealModelSpec};
    use crate::sampling::random_branch_construction;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn input_from(c: &crate::sampling::BranchConstruction) -> ExtractionInput {
        ExtractionInput::new(c.op.clone(), c.reference.clone(), c.branches.len()).unwrap()
    }

    #[test]
    fn round_trip_recovers_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let betas = [0.7, -1.3, 2.4];
        let c = random_branch_construction(&mut rng, &betas, 3, 6);
        let out = extract_decomposition(&input_from(&c)).unwrap();
        assert_eq!(out.branches.len(), 3);
        assert!(out.residual <= 1e-10);
        let mut sorted: Vec<_> = c.branches.iter().collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (got, want) in out.branches.iter().zip(sorted) {
            assert!((got.beta - want.0).abs() < 1e-12);
            assert!(got.b_op.max_abs_diff(&want.1) < 1e-10);
            assert!(got.label.max_abs_diff(&want.2) < 1e-9);
        }
        assert!(out.eigenvectors_partitioned(1e-9));
    }

    #[test]
    fn ideal_b_of_t_splits_into_system_projectors() {
        let spec = IdealModelSpec::with_defaults(vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]).unwrap();
        let (b, _) = ideal_b_of_t(&spec).unwrap();
        let o = spec.spaces().observer;
        let ref_ket = Ket::basis(o, 0);
        let out = extract_decomposition(&ExtractionInput::new(b, ref_ket, 2).unwrap()).unwrap();
        let mut betas = spec.betas()[1..].to_vec();
        betas.sort_by(f64::total_cmp);
        for (got, want) in out.betas().iter().zip(&betas) {
            assert!((got - want).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_betas_are_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for gap in [0.0, 1e-12] {
            let c = random_branch_construction(&mut rng, &[1.0, 1.0 + gap, -2.0], 2, 5);
            let err = extract_decomposition(&input_from(&c)).unwrap_err();
            assert!(
                matches!(err, Error::BranchCountMismatch { expected: 3, found: 2 }),
                "{err}"
            );
        }
        let c = random_branch_construction(&mut rng, &[1.0, 1.0 + 1e-3], 2, 5);
        let out = extract_decomposition(&input_from(&c)).unwrap();
        assert_eq!(out.branches.len(), 2);
    }

    #[test]
    fn non_product_operator_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let c = random_branch_construction(&mut rng, &[0.0, 1.0], 2, 4);
        let noise = crate::sampling::random_hermitian(&mut rng, 8) * C64::new(1e-3, 0.0);
        let op = LinOp::new(c.op.space().clone(), c.op.mat() + noise).unwrap();
        let input = ExtractionInput::new(op, c.reference.clone(), 2).unwrap();
        match extract_decomposition(&input) {
            Err(Error::NotDecomposable(r)) => assert!(r > 1e-9),
            Err(Error::BranchCountMismatch { .. }) => {}
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn uniqueness_under_reassembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let c = random_branch_construction(&mut rng, &[0.3, -0.8, 1.9, 4.0], 4, 8);
        let report = verify_uniqueness(&input_from(&c), 20, &mut rng).unwrap();
        assert!(report.pass(), "{report:?}");
    }

    #[test]
    fn input_validation() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let c = random_branch_construction(&mut rng, &[0.0, 1.0], 2, 4);
        assert!(ExtractionInput::new(c.op.clone(), c.reference.clone(), 0).is_err());
        let other = crate::hilbert::HilbertSpace::indexed("W", "w", 2).unwrap();
        let wrong = Ket::basis(other, 0);
        assert!(matches!(
            ExtractionInput::new(c.op.clone(), wrong, 2),
            Err(Error::SpaceMismatch(_))
        ));
    }
}
