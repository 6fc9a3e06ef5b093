//! Finite-range measurement with translational degrees of freedom.
//!
//! The observer sits at lattice position `ζ` (space `Z`), the system at `ξ`
//! (space `X`). The ideal interaction only acts on position pairs within
//! distance `a`, so the observer ends in one of `M + 1` branches: branch 0
//! is "no measurement made", branches `1..M` record outcome `β_i`.
//!
//! Full-space factor order is `O ⊗ S ⊗ Z ⊗ X`.

use std::sync::Arc;

use crate::branch::{Branch, BranchDecomposition, BranchWeightReport, Provenance, WeightEntry};
use crate::error::{Error, Result};
use crate::grid::{check_compatible, Boundary, LatticePoint, SpatialGrid};
use crate::hilbert::{
    embed, expectation, heisenberg_evolve, kron, kron_all, sum_ops, CVector, HilbertSpace, Ket, LinOp, ProductSpace,
    C64,
};
use crate::ideal::{
    build_ideal_hamiltonian, observer_readout, observer_rotation, system_projector, IdealModelSpec, IdealSpaces,
};
use crate::sum::CompensatedSum;
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialModelSpec {
    ideal: IdealModelSpec,
    grid_x: SpatialGrid,
    grid_z: SpatialGrid,
    a: f64,
    boundary: Boundary,
    psi_xs: Vec<Vec<C64>>,
    psi_z: Vec<C64>,
}

impl SpatialModelSpec {
    /// `psi_xs[i][k]` is the amplitude of `|X; ξ_k⟩|S; α_{i+1}⟩`,
    /// `psi_z[k]` that of `|Z; ζ_k⟩`. Only the labels and `τ` of `ideal` are
    /// used; its amplitudes are replaced by the ideal-limit marginals.
    pub fn new(
        ideal: &IdealModelSpec,
        grid_x: SpatialGrid,
        grid_z: SpatialGrid,
        a: f64,
        psi_xs: Vec<Vec<C64>>,
        psi_z: Vec<C64>,
    ) -> Result<Self> {
        check_compatible(&grid_x, &grid_z)?;
        check_radius("a", a)?;
        check_system_amplitudes(ideal.outcomes(), &grid_x, &psi_xs)?;
        check_amplitudes("psi_z", grid_z.len(), &psi_z)?;
        check_norm("normpsiXSi", "psi_xs", psi_xs.iter().flatten())?;
        check_norm("normpsiZ", "psi_z", psi_z.iter())?;
        let marginals = psi_xs
            .iter()
            .map(|row| C64::new(row.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt(), 0.0))
            .collect();
        Ok(Self {
            ideal: ideal.with_psi(marginals),
            grid_x,
            grid_z,
            a,
            boundary: Boundary::Closed,
            psi_xs,
            psi_z,
        })
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_radius(&self, a: f64) -> Result<Self> {
        check_radius("a", a)?;
        Ok(Self { a, ..self.clone() })
    }

    /// The ideal-limit spec: same labels, amplitudes `sqrt(Σ_ξ |ψ_i(ξ)|²)`.
    pub fn ideal(&self) -> &IdealModelSpec {
        &self.ideal
    }

    pub fn grid_x(&self) -> &SpatialGrid {
        &self.grid_x
    }

    pub fn grid_z(&self) -> &SpatialGrid {
        &self.grid_z
    }

    pub fn radius(&self) -> f64 {
        self.a
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn psi_xs(&self) -> &[Vec<C64>] {
        &self.psi_xs
    }

    pub fn psi_z(&self) -> &[C64] {
        &self.psi_z
    }

    pub fn outcomes(&self) -> usize {
        self.ideal.outcomes()
    }

    pub fn range(&self) -> Range {
        Range {
            radius: self.a,
            boundary: self.boundary,
            spacing: self.grid_x.spacing(),
        }
    }

    /// Dimension of `O ⊗ S ⊗ Z ⊗ X`.
    pub fn total_dim(&self) -> usize {
        (self.outcomes() + 1) * self.outcomes() * self.grid_z.len() * self.grid_x.len()
    }

    pub fn spaces(&self) -> SpatialSpaces {
        SpatialSpaces::new(self)
    }

    /// Both wavefunctions translated by the same lattice vector. Fails if
    /// any nonzero amplitude would leave its grid.
    pub fn translated(&self, shift: &LatticePoint) -> Result<Self> {
        let psi_z = shift_amplitudes(&self.grid_z, &self.psi_z, shift, "psi_z")?;
        let psi_xs = self
            .psi_xs
            .iter()
            .map(|row| shift_amplitudes(&self.grid_x, row, shift, "psi_xs"))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            psi_xs,
            psi_z,
            ..self.clone()
        })
    }
}

pub(crate) fn check_radius(field: &'static str, a: f64) -> Result<()> {
    if !(a.is_finite() && a >= 0.0) {
        return Err(Error::InvalidParameter {
            field,
            reason: format!("interaction radius must be finite and non-negative, got {a}"),
        });
    }
    Ok(())
}

pub(crate) fn check_amplitudes(field: &'static str, expected: usize, amps: &[C64]) -> Result<()> {
    if amps.len() != expected {
        return Err(Error::InvalidParameter {
            field,
            reason: format!("expected {expected} amplitudes, found {}", amps.len()),
        });
    }
    if amps.iter().any(|a| !(a.re.is_finite() && a.im.is_finite())) {
        return Err(Error::InvalidParameter {
            field,
            reason: "amplitudes must be finite".into(),
        });
    }
    Ok(())
}

pub(crate) fn check_system_amplitudes(m: usize, grid_x: &SpatialGrid, psi_xs: &[Vec<C64>]) -> Result<()> {
    if psi_xs.len() != m {
        return Err(Error::InvalidParameter {
            field: "psi_xs",
            reason: format!("expected one row per outcome ({m}), found {}", psi_xs.len()),
        });
    }
    psi_xs
        .iter()
        .try_for_each(|row| check_amplitudes("psi_xs", grid_x.len(), row))
}

pub(crate) fn check_norm<'a, I: Iterator<Item = &'a C64>>(
    constraint: &'static str,
    field: &'static str,
    amps: I,
) -> Result<()> {
    let total: CompensatedSum = amps.map(|a| a.norm_sqr()).collect();
    let total = total.value();
    if (total - 1.0).abs() > Tolerances::DEFAULT.normalization {
        return Err(Error::Normalization {
            constraint,
            field,
            total,
        });
    }
    Ok(())
}

fn shift_amplitudes(grid: &SpatialGrid, amps: &[C64], shift: &LatticePoint, field: &str) -> Result<Vec<C64>> {
    let mut out = vec![C64::new(0.0, 0.0); amps.len()];
    for (k, amp) in amps.iter().enumerate() {
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        let target = &grid.point(k) + shift;
        let j = grid.index_of(&target).ok_or_else(|| {
            Error::ShiftMargin(format!(
                "{field} support at {} moves off the grid to {target}",
                grid.point(k)
            ))
        })?;
        out[j] = *amp;
    }
    Ok(out)
}

/// Interaction range: radius, boundary convention and lattice spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub radius: f64,
    pub boundary: Boundary,
    pub spacing: f64,
}

impl Range {
    /// `f(ζ, ξ)` for lattice points.
    pub fn contains(&self, zeta: &LatticePoint, xi: &LatticePoint) -> bool {
        self.boundary.contains((zeta - xi).length(self.spacing), self.radius)
    }

    /// `g(ξ) = f(0, ξ)`.
    pub fn contains_origin(&self, xi: &LatticePoint) -> bool {
        self.boundary.contains(xi.length(self.spacing), self.radius)
    }
}

/// `f(ζ, ξ) = θ(a − |ζ − ξ|)` on physical coordinates, closed or open at `a`.
pub fn range_indicator(zeta: &[f64], xi: &[f64], a: f64, boundary: Boundary) -> u8 {
    assert_eq!(zeta.len(), xi.len(), "coordinate dimension mismatch");
    let dist = zeta.iter().zip(xi).map(|(z, x)| (z - x) * (z - x)).sum::<f64>().sqrt();
    u8::from(boundary.contains(dist, a))
}

#[derive(Debug, Clone)]
pub struct SpatialSpaces {
    pub observer: Arc<HilbertSpace>,
    pub system: Arc<HilbertSpace>,
    pub z: Arc<HilbertSpace>,
    pub x: Arc<HilbertSpace>,
    /// `Z ⊗ X`.
    pub zx: ProductSpace,
    /// `S ⊗ Z ⊗ X`, the label space of the branch decomposition.
    pub labels: ProductSpace,
    /// `O ⊗ S ⊗ Z ⊗ X`.
    pub joint: ProductSpace,
}

impl SpatialSpaces {
    fn new(spec: &SpatialModelSpec) -> Self {
        let IdealSpaces { observer, system, .. } = spec.ideal.spaces();
        let z = spec.grid_z.space("Z");
        let x = spec.grid_x.space("X");
        let zx = ProductSpace::new(vec![z.clone(), x.clone()]).expect("distinct names");
        let labels = ProductSpace::new(vec![system.clone(), z.clone(), x.clone()]).expect("distinct names");
        let joint =
            ProductSpace::new(vec![observer.clone(), system.clone(), z.clone(), x.clone()]).expect("distinct names");
        Self {
            observer,
            system,
            z,
            x,
            zx,
            labels,
            joint,
        }
    }
}

pub(crate) fn check_dim_cap(dim: usize, tol: &Tolerances) -> Result<()> {
    if dim > tol.dim_cap {
        return Err(Error::DimCapExceeded { dim, cap: tol.dim_cap });
    }
    Ok(())
}

/// Diagonal projector on `Z ⊗ X` with entries `f(ζ, ξ)` (or `1 − f`).
fn range_projector(spec: &SpatialModelSpec, zx: &ProductSpace, inside: bool) -> LinOp {
    let range = spec.range();
    let values: Vec<f64> = spec
        .grid_z
        .points()
        .flat_map(|zeta| {
            spec.grid_x
                .points()
                .map(move |xi| if range.contains(&zeta, &xi) == inside { 1.0 } else { 0.0 })
                .collect::<Vec<_>>()
        })
        .collect();
    LinOp::diagonal(zx.clone(), &values).expect("one entry per lattice pair")
}

/// `(P_f, P_f̃)` on `Z ⊗ X`.
pub fn build_range_projectors(spec: &SpatialModelSpec) -> Result<(LinOp, LinOp)> {
    let sp = spec.spaces();
    check_dim_cap(sp.zx.dim(), &Tolerances::DEFAULT)?;
    Ok((
        range_projector(spec, &sp.zx, true),
        range_projector(spec, &sp.zx, false),
    ))
}

/// `Ĥ_F = Ĥ_I ⊗ P_f`.
pub fn build_finite_range_hamiltonian(spec: &SpatialModelSpec) -> Result<LinOp> {
    check_dim_cap(spec.total_dim(), &Tolerances::DEFAULT)?;
    let (pf, _) = build_range_projectors(spec)?;
    Ok(kron(&build_ideal_hamiltonian(&spec.ideal), &pf))
}

/// `Û_F = P_f̃ + Σ_i û_i ⊗ P_i ⊗ P_f`, from the closed-form rotations.
pub fn build_finite_range_unitary(spec: &SpatialModelSpec) -> Result<LinOp> {
    check_dim_cap(spec.total_dim(), &Tolerances::DEFAULT)?;
    let sp = spec.spaces();
    let (pf, pf_tilde) = build_range_projectors(spec)?;
    let angle = spec.ideal.kappa() * spec.ideal.tau();
    let mut terms = vec![embed(&pf_tilde, &sp.joint)?];
    for i in 1..=spec.outcomes() {
        let ui = observer_rotation(&sp.observer, i, angle);
        terms.push(kron_all(&[&ui, &system_projector(&sp.system, i), &pf]));
    }
    Ok(sum_ops(&sp.joint, &terms))
}

/// Branch labels on `S ⊗ Z ⊗ X`: index 0 is `1 ⊗ P_f̃`, index `i` is `P_i ⊗ P_f`.
pub fn spatial_labels(spec: &SpatialModelSpec) -> Result<Vec<LinOp>> {
    let sp = spec.spaces();
    check_dim_cap(sp.labels.dim(), &Tolerances::DEFAULT)?;
    let (pf, pf_tilde) = build_range_projectors(spec)?;
    let mut labels = vec![embed(&pf_tilde, &sp.labels)?];
    for i in 1..=spec.outcomes() {
        labels.push(kron(&system_projector(&sp.system, i), &pf));
    }
    Ok(labels)
}

/// `b̂(t) = Û_F† (b̂ ⊗ 1) Û_F` and its `M + 1` branch decomposition
/// `b̂_0 ⊗ P_f̃ + Σ b̂_i ⊗ P_i ⊗ P_f` with `b̂_0 = b̂`.
pub fn spatial_b_of_t(spec: &SpatialModelSpec) -> Result<(LinOp, BranchDecomposition)> {
    let sp = spec.spaces();
    let b = observer_readout(&sp.observer, spec.ideal.betas());
    let u = build_finite_range_unitary(spec)?;
    let evolved = heisenberg_evolve(&embed(&b, &sp.joint)?, &u)?;
    let angle = spec.ideal.kappa() * spec.ideal.tau();
    let branches = spatial_labels(spec)?
        .into_iter()
        .enumerate()
        .map(|(i, label)| {
            let b_op = if i == 0 {
                b.clone()
            } else {
                let ui = observer_rotation(&sp.observer, i, angle);
                &(&ui.adjoint() * &b) * &ui
            };
            Branch {
                index: i,
                beta: spec.ideal.betas()[i],
                b_op,
                label,
            }
        })
        .collect();
    Ok((evolved, BranchDecomposition { branches }))
}

/// `|ψ_1(t_in)⟩ = Σ ψ_Z(ζ) ψ_i(ξ) |β_0⟩|α_i⟩|ζ⟩|ξ⟩`.
pub fn spatial_initial_state(spec: &SpatialModelSpec) -> Result<Ket> {
    check_dim_cap(spec.total_dim(), &Tolerances::DEFAULT)?;
    let sp = spec.spaces();
    let sys = system_position_amplitudes(&spec.psi_xs, &spec.psi_z);
    let ready = Ket::basis(sp.observer.clone(), 0);
    Ok(ready.tensor(&Ket::new(sp.labels.clone(), sys)?))
}

/// `Σ ψ_Z(ζ) ψ_i(ξ) |α_i⟩|ζ⟩|ξ⟩` as amplitudes on `S ⊗ Z ⊗ X`.
pub(crate) fn system_position_amplitudes(psi_xs: &[Vec<C64>], psi_z: &[C64]) -> CVector {
    let nz = psi_z.len();
    let nx = psi_xs[0].len();
    let mut out = CVector::zeros(psi_xs.len() * nz * nx);
    for (i, row) in psi_xs.iter().enumerate() {
        for (kz, z) in psi_z.iter().enumerate() {
            for (kx, x) in row.iter().enumerate() {
                out[(i * nz + kz) * nx + kx] = z * x;
            }
        }
    }
    out
}

/// Weights as label expectations on the full space.
pub fn spatial_weights_operator(spec: &SpatialModelSpec) -> Result<BranchWeightReport> {
    let sp = spec.spaces();
    let psi = spatial_initial_state(spec)?;
    let entries = spatial_labels(spec)?
        .iter()
        .enumerate()
        .map(|(i, label)| {
            let w = expectation(&psi, &embed(label, &sp.joint)?)?;
            Ok(WeightEntry {
                index: i,
                beta: spec.ideal.betas()[i],
                weight: w.re,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BranchWeightReport::new(entries, Provenance::Operator))
}

/// Branch weights by grid sums, without building any operator:
///
/// `W_0 = Σ_i Σ_{ζ,ξ} |ψ_Z(ζ)|² f̃(ζ,ξ) |ψ_i(ξ)|²`,
/// `W_i = Σ_{ζ,ξ} |ψ_Z(ζ)|² f(ζ,ξ) |ψ_i(ξ)|²`.
///
/// Points are visited ζ-major in grid order.
pub fn spatial_weights(spec: &SpatialModelSpec) -> BranchWeightReport {
    let m = spec.outcomes();
    let range = spec.range();
    let xs: Vec<LatticePoint> = spec.grid_x.points().collect();
    let density: Vec<Vec<f64>> = spec
        .psi_xs
        .iter()
        .map(|row| row.iter().map(|a| a.norm_sqr()).collect())
        .collect();
    let mut acc = vec![CompensatedSum::new(); m + 1];
    for (kz, zeta) in spec.grid_z.points().enumerate() {
        let pz = spec.psi_z[kz].norm_sqr();
        if pz == 0.0 {
            continue;
        }
        for (kx, xi) in xs.iter().enumerate() {
            let measured = range.contains(&zeta, xi);
            for (i, row) in density.iter().enumerate() {
                let term = pz * row[kx];
                if measured {
                    acc[i + 1].add(term);
                } else {
                    acc[0].add(term);
                }
            }
        }
    }
    let entries = acc
        .iter()
        .enumerate()
        .map(|(i, s)| WeightEntry {
            index: i,
            beta: spec.ideal.betas()[i],
            weight: s.value(),
        })
        .collect();
    BranchWeightReport::new(entries, Provenance::Formula)
}

/// Largest change of any weight when both wavefunctions move by `shift`.
pub fn translated_weights_deviation(spec: &SpatialModelSpec, shift: &LatticePoint) -> Result<f64> {
    let moved = spec.translated(shift)?;
    Ok(spatial_weights(spec).max_abs_diff(&spatial_weights(&moved)))
}

/// Whether all `M + 1` weights survive a common lattice translation.
pub fn translated_weights_check(spec: &SpatialModelSpec, shift: &LatticePoint) -> Result<bool> {
    Ok(translated_weights_deviation(spec, shift)? <= Tolerances::DEFAULT.invariance)
}

/// Position operator along `axis` on a grid space: `diag(spacing * lattice[axis])`.
pub fn position_operator(grid: &SpatialGrid, space: &Arc<HilbertSpace>, axis: usize) -> LinOp {
    let values: Vec<f64> = (0..grid.len()).map(|k| grid.coords(k)[axis]).collect();
    LinOp::diagonal(space.clone(), &values).expect("one coordinate per point")
}

/// Largest change of `â` or any position coordinate under `Û_F`.
pub fn unchanged_observables_deviation(spec: &SpatialModelSpec) -> Result<f64> {
    let sp = spec.spaces();
    let u = build_finite_range_unitary(spec)?;
    let mut ops = vec![crate::ideal::system_observable(&sp.system, spec.ideal.alphas())];
    for axis in 0..spec.grid_x.dim() {
        ops.push(position_operator(&spec.grid_x, &sp.x, axis));
        ops.push(position_operator(&spec.grid_z, &sp.z, axis));
    }
    let mut worst = 0.0_f64;
    for op in &ops {
        let full = embed(op, &sp.joint)?;
        worst = worst.max(heisenberg_evolve(&full, &u)?.max_abs_diff(&full));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::unitary_exp;
    use crate::ideal::{ideal_branch_weights, system_observable};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn labels(m: usize) -> IdealModelSpec {
        IdealModelSpec::labels(crate::ideal::default_alphas(m), crate::ideal::default_betas(m), 1.0).unwrap()
    }

    /// M = 2 on grids {0, 1}, a = 0, observer pinned at ζ = 0.
    fn two_point() -> SpatialModelSpec {
        SpatialModelSpec::new(
            &labels(2),
            SpatialGrid::new(1, 2, 1.0).unwrap(),
            SpatialGrid::new(1, 2, 1.0).unwrap(),
            0.0,
            vec![
                vec![c(0.3f64.sqrt()), c(0.2f64.sqrt())],
                vec![c(0.1f64.sqrt()), c(0.4f64.sqrt())],
            ],
            vec![c(1.0), c(0.0)],
        )
        .unwrap()
    }

    #[test]
    fn range_indicator_cases() {
        assert_eq!(range_indicator(&[0.0], &[0.5], 1.0, Boundary::Closed), 1);
        assert_eq!(range_indicator(&[0.0], &[2.0], 1.0, Boundary::Closed), 0);
        assert_eq!(range_indicator(&[0.0], &[1.0], 1.0, Boundary::Closed), 1);
        assert_eq!(range_indicator(&[0.0], &[1.0], 1.0, Boundary::Open), 0);
        assert_eq!(
            range_indicator(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], 1.7, Boundary::Closed),
            0
        );
    }

    #[test]
    fn worked_two_point_weights() {
        let w = spatial_weights(&two_point());
        // Hand sum over the pairs (ζ, ξ) with ζ = 0: only ξ = 0 is in range.
        let expected = [0.6, 0.3, 0.1];
        for (got, want) in w.weights().iter().zip(expected) {
            assert!((got - want).abs() <= 1e-15, "{got} vs {want}");
        }
        assert!(w.sum_deviation() <= 1e-15);
    }

    #[test]
    fn rejects_unnormalized_amplitudes() {
        let err = SpatialModelSpec::new(
            &labels(1),
            SpatialGrid::new(1, 2, 1.0).unwrap(),
            SpatialGrid::new(1, 1, 1.0).unwrap(),
            1.0,
            vec![vec![c(0.9f64.sqrt()), c(0.0)]],
            vec![c(1.0)],
        )
        .unwrap_err();
        assert!(err.to_string().contains("normpsiXSi"), "{err}");
        let err = SpatialModelSpec::new(
            &labels(1),
            SpatialGrid::new(1, 2, 1.0).unwrap(),
            SpatialGrid::new(1, 1, 1.0).unwrap(),
            1.0,
            vec![vec![c(1.0), c(0.0)]],
            vec![c(0.5)],
        )
        .unwrap_err();
        assert!(err.to_string().contains("normpsiZ"), "{err}");
    }

    #[test]
    fn rejects_mismatched_spacing() {
        let err = SpatialModelSpec::new(
            &labels(1),
            SpatialGrid::new(1, 1, 1.0).unwrap(),
            SpatialGrid::new(1, 1, 0.5).unwrap(),
            1.0,
            vec![vec![c(1.0)]],
            vec![c(1.0)],
        );
        assert!(err.is_err());
    }

    #[test]
    fn projectors_in_the_ideal_and_empty_limits() {
        let spec = two_point().with_radius(10.0).unwrap();
        let (pf, pft) = build_range_projectors(&spec).unwrap();
        assert_eq!(pf.max_abs_diff(&LinOp::identity(pf.space().clone())), 0.0);
        assert_eq!(pft.max_abs(), 0.0);

        let far = SpatialModelSpec::new(
            &labels(1),
            SpatialGrid::new(1, 2, 1.0).unwrap(),
            SpatialGrid::with_origin(1, 2, 1.0, vec![10]).unwrap(),
            0.5,
            vec![vec![c(1.0), c(0.0)]],
            vec![c(1.0), c(0.0)],
        )
        .unwrap();
        let (pf, pft) = build_range_projectors(&far).unwrap();
        assert_eq!(pf.max_abs(), 0.0);
        assert_eq!(pft.max_abs_diff(&LinOp::identity(pft.space().clone())), 0.0);
        let u = build_finite_range_unitary(&far).unwrap();
        assert_eq!(u.max_abs_diff(&LinOp::identity(u.space().clone())), 0.0);
    }

    #[test]
    fn projector_diagonal_counts_pairs() {
        let g = SpatialGrid::new(2, 3, 0.7).unwrap();
        let spec = SpatialModelSpec::new(
            &labels(1),
            g.clone(),
            g.clone(),
            1.1,
            vec![vec![c(1.0 / 3.0); 9]],
            vec![c(1.0 / 3.0); 9],
        )
        .unwrap();
        let (pf, pft) = build_range_projectors(&spec).unwrap();
        assert!(pf.is_projector(&Tolerances::DEFAULT));
        assert!((&pf * &pft).max_abs() == 0.0);
        assert_eq!((&pf + &pft).max_abs_diff(&LinOp::identity(pf.space().clone())), 0.0);
        let mut count = 0usize;
        for (kz, z) in g.points().enumerate() {
            for (kx, x) in g.points().enumerate() {
                let f = range_indicator(&g.coords(kz), &g.coords(kx), 1.1, Boundary::Closed);
                count += f as usize;
                assert_eq!(pf.mat()[(kz * 9 + kx, kz * 9 + kx)].re, f as f64, "{z} {x}");
            }
        }
        assert!((pf.trace().re - count as f64).abs() < 1e-12);
    }

    #[test]
    fn closed_form_unitary_matches_spectral_exponential() {
        let spec = two_point().with_radius(1.0).unwrap();
        let closed = build_finite_range_unitary(&spec).unwrap();
        let spectral = unitary_exp(&build_finite_range_hamiltonian(&spec).unwrap(), spec.ideal().tau()).unwrap();
        assert!(closed.max_abs_diff(&spectral) <= 1e-10);
        assert!(closed.is_unitary(&Tolerances::DEFAULT));
    }

    #[test]
    fn ideal_limit_unitary() {
        let spec = two_point().with_radius(5.0).unwrap();
        let u = build_finite_range_unitary(&spec).unwrap();
        let sp = spec.spaces();
        let expected = kron(
            &crate::ideal::build_ideal_unitary(spec.ideal()),
            &LinOp::identity(sp.zx.clone()),
        );
        assert!(u.max_abs_diff(&expected) <= 1e-15);
        let w = spatial_weights(&spec);
        assert_eq!(w.weight(0), Some(0.0));
        let ideal = ideal_branch_weights(spec.ideal());
        for i in 1..=2 {
            assert!((w.weight(i).unwrap() - ideal.weight(i).unwrap()).abs() <= 1e-15);
        }
    }

    #[test]
    fn b_of_t_has_m_plus_one_branches() {
        let spec = two_point().with_radius(1.0).unwrap();
        let (bt, dec) = spatial_b_of_t(&spec).unwrap();
        assert_eq!(dec.len(), 3);
        let (_, pft) = build_range_projectors(&spec).unwrap();
        let sp = spec.spaces();
        assert_eq!(
            dec.branches[0].label.max_abs_diff(&embed(&pft, &sp.labels).unwrap()),
            0.0
        );
        assert!(dec.reassemble().max_abs_diff(&bt) <= 1e-10);
        assert!(dec.label_algebra_deviation() <= 1e-12);

        let wide = spec.with_radius(10.0).unwrap();
        let (_, dec) = spatial_b_of_t(&wide).unwrap();
        assert_eq!(dec.branches[0].label.max_abs(), 0.0);
    }

    #[test]
    fn formula_matches_operator_path() {
        for a in [0.0, 0.5, 1.0, 3.0] {
            let spec = two_point().with_radius(a).unwrap();
            let f = spatial_weights(&spec);
            let o = spatial_weights_operator(&spec).unwrap();
            assert!(f.max_abs_diff(&o) <= 1e-10, "a = {a}");
        }
    }

    #[test]
    fn unchanged_observables() {
        let g = SpatialGrid::with_origin(1, 3, 0.5, vec![-1]).unwrap();
        let spec = SpatialModelSpec::new(
            &labels(2),
            g.clone(),
            g.clone(),
            0.5,
            vec![vec![c(0.5), c(0.5), c(0.0)], vec![c(0.0), c(0.5), c(0.5)]],
            vec![c(0.6), c(0.0), c(0.8)],
        )
        .unwrap();
        let sp = spec.spaces();
        let u = build_finite_range_unitary(&spec).unwrap();
        let ops = [
            embed(&system_observable(&sp.system, spec.ideal().alphas()), &sp.joint).unwrap(),
            embed(&position_operator(&g, &sp.x, 0), &sp.joint).unwrap(),
            embed(&position_operator(&g, &sp.z, 0), &sp.joint).unwrap(),
        ];
        for op in &ops {
            assert!(heisenberg_evolve(op, &u).unwrap().max_abs_diff(op) <= 1e-12);
        }
    }

    #[test]
    fn dim_cap_is_enforced() {
        let g = SpatialGrid::new(1, 40, 1.0).unwrap();
        let mut row = vec![c(0.0); 40];
        row[0] = c(1.0);
        let spec =
            SpatialModelSpec::new(&labels(2), g.clone(), g, 1.0, vec![row.clone(), vec![c(0.0); 40]], row).unwrap();
        let err = spatial_b_of_t(&spec).unwrap_err();
        assert!(err.to_string().contains("operator path too large; use formula path"));
        // The formula path has no cap.
        assert!(spatial_weights(&spec).sum_deviation() <= 1e-12);
    }

    #[test]
    fn translation_check() {
        let g = SpatialGrid::new(1, 6, 1.0).unwrap();
        let spec = SpatialModelSpec::new(
            &labels(1),
            g.clone(),
            g.clone(),
            1.0,
            vec![vec![c(0.0), c(0.6), c(0.8), c(0.0), c(0.0), c(0.0)]],
            vec![c(0.0), c(0.0), c(1.0), c(0.0), c(0.0), c(0.0)],
        )
        .unwrap();
        assert!(translated_weights_check(&spec, &LatticePoint(vec![0])).unwrap());
        assert!(translated_weights_check(&spec, &LatticePoint(vec![3])).unwrap());
        let err = translated_weights_check(&spec, &LatticePoint(vec![-2])).unwrap_err();
        assert!(err.to_string().contains("shift violates support margin"));
    }
}
