//! Finite-range measurement without an observer position register.
//!
//! The interaction is `Ĥ′_F = Ĥ_I ⊗ P_g` with `g(ξ) = θ(a − |ξ|)`, and the
//! observer's position uncertainty is carried by a proper mixture over
//! members `|ψ′, ζ⟩ = |β_0⟩ Σ_i Σ_ξ ψ_i(ξ + ζ) |α_i⟩|ξ⟩` with probabilities
//! `p(ζ)`. Full-space factor order is `O ⊗ S ⊗ X`.

use std::sync::Arc;

use crate::branch::{Branch, BranchDecomposition, BranchWeightReport, Provenance, WeightEntry};
use crate::error::{Error, Result};
use crate::grid::{check_compatible, Boundary, LatticePoint, SpatialGrid};
use crate::hilbert::{
    embed, expectation, heisenberg_evolve, kron, kron_all, sum_ops, CMatrix, CVector, HilbertSpace, Ket, LinOp,
    ProductSpace, C64, ZERO,
};
use crate::ideal::{
    build_ideal_hamiltonian, observer_projector, observer_readout, observer_rotation, system_projector, IdealModelSpec,
    IdealSpaces,
};
use crate::spatial::{check_norm, check_radius, check_system_amplitudes, Range, SpatialModelSpec};
use crate::sum::CompensatedSum;
use crate::tolerance::Tolerances;

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSpec {
    ideal: IdealModelSpec,
    grid_x: SpatialGrid,
    grid_z: SpatialGrid,
    a: f64,
    boundary: Boundary,
    psi_xs: Vec<Vec<C64>>,
    p: Vec<f64>,
}

impl MixtureSpec {
    /// `p[k]` is the probability of the member indexed by `grid_z.point(k)`.
    pub fn new(
        ideal: &IdealModelSpec,
        grid_x: SpatialGrid,
        grid_z: SpatialGrid,
        a: f64,
        psi_xs: Vec<Vec<C64>>,
        p: Vec<f64>,
    ) -> Result<Self> {
        check_compatible(&grid_x, &grid_z)?;
        check_radius("a", a)?;
        check_system_amplitudes(ideal.outcomes(), &grid_x, &psi_xs)?;
        check_norm("normpsiXSi", "psi_xs", psi_xs.iter().flatten())?;
        check_probabilities(grid_z.len(), &p)?;
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
            p,
        })
    }

    /// The mixture with `p(ζ) = |ψ_Z(ζ)|²`.
    pub fn from_spatial(spec: &SpatialModelSpec) -> Result<Self> {
        let p = spec.psi_z().iter().map(|a| a.norm_sqr()).collect();
        Ok(Self::new(
            spec.ideal(),
            spec.grid_x().clone(),
            spec.grid_z().clone(),
            spec.radius(),
            spec.psi_xs().to_vec(),
            p,
        )?
        .with_boundary(spec.boundary()))
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_p(&self, p: Vec<f64>) -> Result<Self> {
        check_probabilities(self.grid_z.len(), &p)?;
        Ok(Self { p, ..self.clone() })
    }

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

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn outcomes(&self) -> usize {
        self.ideal.outcomes()
    }

    pub fn members(&self) -> usize {
        self.p.len()
    }

    pub fn range(&self) -> Range {
        Range {
            radius: self.a,
            boundary: self.boundary,
            spacing: self.grid_x.spacing(),
        }
    }

    /// Dimension of `O ⊗ S ⊗ X`.
    pub fn total_dim(&self) -> usize {
        (self.outcomes() + 1) * self.outcomes() * self.grid_x.len()
    }

    pub fn spaces(&self) -> MixtureSpaces {
        let IdealSpaces { observer, system, .. } = self.ideal.spaces();
        let x = self.grid_x.space("X");
        let labels = ProductSpace::new(vec![system.clone(), x.clone()]).expect("distinct names");
        let joint = ProductSpace::new(vec![observer.clone(), system.clone(), x.clone()]).expect("distinct names");
        MixtureSpaces {
            observer,
            system,
            x,
            labels,
            joint,
        }
    }

    /// Member wavefunction `ψ_i(ξ + ζ)` on `grid_x`, zero where `ξ + ζ`
    /// falls off the grid.
    pub fn member_amplitudes(&self, member: usize) -> Vec<Vec<C64>> {
        let zeta = self.grid_z.point(member);
        let targets: Vec<Option<usize>> = self
            .grid_x
            .points()
            .map(|xi| self.grid_x.index_of(&(&xi + &zeta)))
            .collect();
        self.psi_xs
            .iter()
            .map(|row| targets.iter().map(|t| t.map_or(ZERO, |k| row[k])).collect())
            .collect()
    }

    /// First member whose shifted wavefunction would be clipped by `grid_x`.
    pub fn check_margin(&self) -> Result<()> {
        let support: Vec<LatticePoint> = (0..self.grid_x.len())
            .filter(|&k| self.psi_xs.iter().any(|row| row[k].norm_sqr() > 0.0))
            .map(|k| self.grid_x.point(k))
            .collect();
        for (member, &p) in self.p.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let zeta = self.grid_z.point(member);
            if let Some(xi) = support.iter().find(|xi| self.grid_x.index_of(&(*xi - &zeta)).is_none()) {
                return Err(Error::ShiftMargin(format!(
                    "mixture member ζ = {zeta} needs ξ − ζ = {} on grid_x for support point ξ = {xi}",
                    xi - &zeta
                )));
            }
        }
        Ok(())
    }
}

fn check_probabilities(expected: usize, p: &[f64]) -> Result<()> {
    if p.len() != expected {
        return Err(Error::InvalidParameter {
            field: "p",
            reason: format!("expected {expected} probabilities, found {}", p.len()),
        });
    }
    if let Some(bad) = p.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(Error::InvalidParameter {
            field: "p",
            reason: format!("probabilities must be non-negative, got {bad}"),
        });
    }
    let total: CompensatedSum = p.iter().copied().collect();
    let total = total.value();
    if (total - 1.0).abs() > Tolerances::DEFAULT.normalization {
        return Err(Error::Normalization {
            constraint: "probnorm",
            field: "p",
            total,
        });
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct MixtureSpaces {
    pub observer: Arc<HilbertSpace>,
    pub system: Arc<HilbertSpace>,
    pub x: Arc<HilbertSpace>,
    /// `S ⊗ X`.
    pub labels: ProductSpace,
    /// `O ⊗ S ⊗ X`.
    pub joint: ProductSpace,
}

/// Projector onto grid points with `|ξ| ≤ a` (or `< a` for an open boundary).
pub fn build_origin_projector(grid_x: &SpatialGrid, a: f64, boundary: Boundary) -> LinOp {
    let range = Range {
        radius: a,
        boundary,
        spacing: grid_x.spacing(),
    };
    let values: Vec<f64> = grid_x
        .points()
        .map(|xi| if range.contains_origin(&xi) { 1.0 } else { 0.0 })
        .collect();
    LinOp::diagonal(grid_x.space("X"), &values).expect("one entry per point")
}

fn check_dim_cap(dim: usize) -> Result<()> {
    let cap = Tolerances::DEFAULT.dim_cap;
    if dim > cap {
        return Err(Error::DimCapExceeded { dim, cap });
    }
    Ok(())
}

fn origin_projectors(spec: &MixtureSpec) -> (LinOp, LinOp) {
    let pg = build_origin_projector(&spec.grid_x, spec.a, spec.boundary);
    let pg_tilde = &LinOp::identity(pg.space().clone()) - &pg;
    (pg, pg_tilde)
}

/// `W′_ζ`: grid sums over one member, `g` vs `g̃` split per outcome.
pub fn mixture_member_weights(spec: &MixtureSpec, member: usize) -> BranchWeightReport {
    let range = spec.range();
    let inside: Vec<bool> = spec.grid_x.points().map(|xi| range.contains_origin(&xi)).collect();
    let amps = spec.member_amplitudes(member);
    let mut acc = vec![CompensatedSum::new(); spec.outcomes() + 1];
    for (i, row) in amps.iter().enumerate() {
        for (k, a) in row.iter().enumerate() {
            let w = a.norm_sqr();
            if inside[k] {
                acc[i + 1].add(w);
            } else {
                acc[0].add(w);
            }
        }
    }
    report(spec, acc.iter().map(CompensatedSum::value), Provenance::Formula)
}

/// `W′_k = Σ_ζ p(ζ) W′_{k,ζ}`.
pub fn mixture_weights(spec: &MixtureSpec) -> BranchWeightReport {
    let mut acc = vec![CompensatedSum::new(); spec.outcomes() + 1];
    for (member, &p) in spec.p.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        for e in mixture_member_weights(spec, member).entries {
            acc[e.index].add(p * e.weight);
        }
    }
    report(spec, acc.iter().map(CompensatedSum::value), Provenance::Formula)
}

fn report(spec: &MixtureSpec, weights: impl Iterator<Item = f64>, provenance: Provenance) -> BranchWeightReport {
    let entries = weights
        .enumerate()
        .map(|(i, weight)| WeightEntry {
            index: i,
            beta: spec.ideal.betas()[i],
            weight,
        })
        .collect();
    BranchWeightReport::new(entries, provenance)
}

/// Outcome of comparing the positioned-observer weights with the mixture.
#[derive(Debug, Clone)]
pub struct MixtureEquivalence {
    pub spatial: BranchWeightReport,
    pub mixture: BranchWeightReport,
    /// `|W_k − W′_k|` for `k = 0..M`.
    pub differences: Vec<f64>,
    pub tolerance: f64,
}

impl MixtureEquivalence {
    pub fn max_difference(&self) -> f64 {
        self.differences.iter().copied().fold(0.0, f64::max)
    }

    pub fn pass(&self) -> bool {
        self.max_difference() <= self.tolerance
    }
}

/// Builds the mixture with `p = |ψ_Z|²` and compares all `M + 1` weights.
pub fn verify_mixture_equivalence(spec: &SpatialModelSpec) -> Result<MixtureEquivalence> {
    verify_mixture_equivalence_with(spec, &Tolerances::DEFAULT)
}

pub fn verify_mixture_equivalence_with(spec: &SpatialModelSpec, tol: &Tolerances) -> Result<MixtureEquivalence> {
    let mixture = MixtureSpec::from_spatial(spec)?;
    mixture.check_margin()?;
    let spatial = crate::spatial::spatial_weights(spec);
    let mixed = mixture_weights(&mixture);
    let differences = spatial
        .entries
        .iter()
        .map(|e| (e.weight - mixed.weight(e.index).unwrap_or(f64::INFINITY)).abs())
        .collect();
    Ok(MixtureEquivalence {
        spatial,
        mixture: mixed,
        differences,
        tolerance: tol.equivalence,
    })
}

/// A validated density operator.
#[derive(Debug, Clone)]
pub struct DensityOp {
    op: LinOp,
}

impl DensityOp {
    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(op: LinOp) -> Result<Self> {
        let herm = op.hermitian_deviation();
        if herm > Tolerances::DEFAULT.hermitian {
            return Err(Error::NotHermitian(herm));
        }
        let trace = op.trace().re;
        if (trace - 1.0).abs() > 1e-10 {
            return Err(Error::Normalization {
                constraint: "density_trace",
                field: "rho",
                total: trace,
            });
        }
        if let Some(&low) = op.eigenvalues().first() {
            if low < -1e-10 {
                return Err(Error::InvalidParameter {
                    field: "rho",
                    reason: format!("negative eigenvalue {low}"),
                });
            }
        }
        Ok(Self { op })
    }

    pub fn space(&self) -> &ProductSpace {
        self.op.space()
    }

    pub fn mat(&self) -> &CMatrix {
        self.op.mat()
    }

    pub fn as_op(&self) -> &LinOp {
        &self.op
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.op.eigenvalues()
    }

    /// `‖ρ² − ρ‖_max`.
    pub fn purity_deviation(&self) -> f64 {
        self.op.idempotence_deviation()
    }

    /// `tr(ρ O)`.
    pub fn expectation(&self, o: &LinOp) -> Result<C64> {
        if o.space() != self.space() {
            return Err(Error::SpaceMismatch(format!("{} vs {}", o.space(), self.space())));
        }
        Ok((self.op.mat() * o.mat()).trace())
    }
}

/// Member `ζ` as a ket on `O ⊗ S ⊗ X`.
pub fn mixture_member_state(spec: &MixtureSpec, member: usize) -> Result<Ket> {
    let sp = spec.spaces();
    Ok(Ket::basis(sp.observer.clone(), 0).tensor(&member_system_state(spec, &sp, member)?))
}

fn member_system_state(spec: &MixtureSpec, sp: &MixtureSpaces, member: usize) -> Result<Ket> {
    let amps: Vec<C64> = spec.member_amplitudes(member).into_iter().flatten().collect();
    Ket::new(sp.labels.clone(), CVector::from_vec(amps))
}

/// `ρ′ = Σ_ζ p(ζ) |ψ′, ζ⟩⟨ψ′, ζ|` on `O ⊗ S ⊗ X`.
pub fn build_initial_density(spec: &MixtureSpec) -> Result<DensityOp> {
    check_dim_cap(spec.total_dim())?;
    let sp = spec.spaces();
    let mut rho = LinOp::zero(sp.joint.clone());
    for (member, &p) in spec.p.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let psi = mixture_member_state(spec, member)?;
        rho = &rho + &LinOp::projector_onto(&psi).scale(C64::new(p, 0.0));
    }
    DensityOp::new(rho)
}

/// `ρ′_obs = |β_0⟩⟨β_0|`.
pub fn observer_density(spec: &MixtureSpec) -> LinOp {
    observer_projector(&spec.spaces().observer, 0)
}

/// `ρ′_sys = Σ_ζ p(ζ) |φ_ζ⟩⟨φ_ζ|` on `S ⊗ X`.
pub fn system_density(spec: &MixtureSpec) -> Result<LinOp> {
    check_dim_cap(spec.total_dim())?;
    let sp = spec.spaces();
    let ops = spec
        .p
        .iter()
        .enumerate()
        .filter(|(_, &p)| p != 0.0)
        .map(|(member, &p)| {
            let phi = member_system_state(spec, &sp, member)?;
            Ok(LinOp::projector_onto(&phi).scale(C64::new(p, 0.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(sum_ops(&sp.labels, &ops))
}

/// `Ĥ′_F = Ĥ_I ⊗ P_g`.
pub fn build_mixture_hamiltonian(spec: &MixtureSpec) -> Result<LinOp> {
    check_dim_cap(spec.total_dim())?;
    Ok(kron(&build_ideal_hamiltonian(&spec.ideal), &origin_projectors(spec).0))
}

/// `Û′_F = P_g̃ + Σ_i û_i ⊗ P_i ⊗ P_g`.
pub fn build_mixture_unitary(spec: &MixtureSpec) -> Result<LinOp> {
    check_dim_cap(spec.total_dim())?;
    let sp = spec.spaces();
    let (pg, pg_tilde) = origin_projectors(spec);
    let angle = spec.ideal.kappa() * spec.ideal.tau();
    let mut terms = vec![embed(&pg_tilde, &sp.joint)?];
    for i in 1..=spec.outcomes() {
        let ui = observer_rotation(&sp.observer, i, angle);
        terms.push(kron_all(&[&ui, &system_projector(&sp.system, i), &pg]));
    }
    Ok(sum_ops(&sp.joint, &terms))
}

/// Labels on `S ⊗ X`: index 0 is `1 ⊗ P_g̃`, index `i` is `P_i ⊗ P_g`.
pub fn mixture_labels(spec: &MixtureSpec) -> Result<Vec<LinOp>> {
    check_dim_cap(spec.total_dim())?;
    let sp = spec.spaces();
    let (pg, pg_tilde) = origin_projectors(spec);
    let mut labels = vec![embed(&pg_tilde, &sp.labels)?];
    for i in 1..=spec.outcomes() {
        labels.push(kron(&system_projector(&sp.system, i), &pg));
    }
    Ok(labels)
}

/// `b̂′(t)` and its `M + 1` branch decomposition.
pub fn mixture_b_of_t(spec: &MixtureSpec) -> Result<(LinOp, BranchDecomposition)> {
    let sp = spec.spaces();
    let b = observer_readout(&sp.observer, spec.ideal.betas());
    let u = build_mixture_unitary(spec)?;
    let evolved = heisenberg_evolve(&embed(&b, &sp.joint)?, &u)?;
    let angle = spec.ideal.kappa() * spec.ideal.tau();
    let branches = mixture_labels(spec)?
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

/// Member weights as label expectations on the full space.
pub fn mixture_member_weights_operator(spec: &MixtureSpec, member: usize) -> Result<BranchWeightReport> {
    let sp = spec.spaces();
    let psi = mixture_member_state(spec, member)?;
    let weights = mixture_labels(spec)?
        .iter()
        .map(|l| Ok(expectation(&psi, &embed(l, &sp.joint)?)?.re))
        .collect::<Result<Vec<_>>>()?;
    Ok(report(spec, weights.into_iter(), Provenance::Operator))
}

/// Weights as `tr(ρ′ L_k)`.
pub fn mixture_weights_density(spec: &MixtureSpec) -> Result<BranchWeightReport> {
    let sp = spec.spaces();
    let rho = build_initial_density(spec)?;
    let weights = mixture_labels(spec)?
        .iter()
        .map(|l| Ok(rho.expectation(&embed(l, &sp.joint)?)?.re))
        .collect::<Result<Vec<_>>>()?;
    Ok(report(spec, weights.into_iter(), Provenance::Operator))
}

/// Largest `‖b̂_k ρ′_obs − β_k ρ′_obs‖_max` over the branches of `b̂′(t)`.
pub fn observer_eigen_deviation(spec: &MixtureSpec) -> Result<f64> {
    let rho_obs = observer_density(spec);
    let (_, dec) = mixture_b_of_t(spec)?;
    Ok(dec
        .branches
        .iter()
        .map(|b| (&b.b_op * &rho_obs).max_abs_diff(&rho_obs.scale(C64::new(b.beta, 0.0))))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::unitary_exp;
    use crate::ideal::{default_alphas, default_betas};
    use crate::spatial::{position_operator, spatial_weights};

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn labels(m: usize) -> IdealModelSpec {
        IdealModelSpec::labels(default_alphas(m), default_betas(m), 1.0).unwrap()
    }

    /// grid_x −4..4, grid_z −1..1, support on −1..1, a = 1.
    fn equiv_spec(psi_z: [f64; 3]) -> SpatialModelSpec {
        let gx = SpatialGrid::with_origin(1, 9, 1.0, vec![-4]).unwrap();
        let gz = SpatialGrid::with_origin(1, 3, 1.0, vec![-1]).unwrap();
        let mut r1 = vec![c(0.0); 9];
        let mut r2 = vec![c(0.0); 9];
        r1[3] = c(0.3f64.sqrt());
        r1[4] = c(0.1f64.sqrt());
        r2[4] = c(0.2f64.sqrt());
        r2[5] = C64::new(0.0, 0.4f64.sqrt());
        SpatialModelSpec::new(
            &labels(2),
            gx,
            gz,
            1.0,
            vec![r1, r2],
            psi_z.iter().map(|x| c(x.sqrt())).collect(),
        )
        .unwrap()
    }

    #[test]
    fn origin_projector_limits() {
        let g = SpatialGrid::with_origin(2, 3, 1.0, vec![-1, -1]).unwrap();
        let id = build_origin_projector(&g, 2.0, Boundary::Closed);
        assert_eq!(id.max_abs_diff(&LinOp::identity(id.space().clone())), 0.0);
        let far = SpatialGrid::with_origin(1, 3, 1.0, vec![5]).unwrap();
        assert_eq!(build_origin_projector(&far, 4.5, Boundary::Closed).max_abs(), 0.0);
        let pg = build_origin_projector(&g, 1.0, Boundary::Closed);
        for k in 0..g.len() {
            let r = g.coords(k).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert_eq!(pg.mat()[(k, k)].re, if r <= 1.0 { 1.0 } else { 0.0 });
        }
        assert!(pg.is_projector(&Tolerances::DEFAULT));
    }

    #[test]
    fn rejects_bad_probabilities() {
        let s = equiv_spec([0.0, 1.0, 0.0]);
        let m = MixtureSpec::from_spatial(&s).unwrap();
        assert!(m.with_p(vec![0.5, 0.6, -0.1]).is_err());
        let err = m.with_p(vec![0.5, 0.6, 0.0]).unwrap_err();
        assert!(err.to_string().contains("probnorm"), "{err}");
        assert!(m.with_p(vec![1.0]).is_err());
    }

    #[test]
    fn member_limits() {
        let s = equiv_spec([0.0, 1.0, 0.0]).with_radius(20.0).unwrap();
        let m = MixtureSpec::from_spatial(&s).unwrap();
        let w = mixture_member_weights(&m, 1);
        assert_eq!(w.weight(0), Some(0.0));
        assert!((w.weight(1).unwrap() - 0.4).abs() < 1e-15);
        assert!((w.weight(2).unwrap() - 0.6).abs() < 1e-15);

        // ζ = 1 pushes support to ξ' ∈ {−2, −1, 0}; with a = 0 only ξ' = 0 counts.
        let s = equiv_spec([0.0, 0.0, 1.0]).with_radius(0.0).unwrap();
        let m = MixtureSpec::from_spatial(&s).unwrap();
        let w = mixture_member_weights(&m, 2);
        assert!((w.weight(0).unwrap() - 0.6).abs() < 1e-15);
        assert!((w.weight(2).unwrap() - 0.4).abs() < 1e-15);
    }

    #[test]
    fn member_shift_moves_support_in_and_out_of_range() {
        let gx = SpatialGrid::with_origin(1, 5, 1.0, vec![-2]).unwrap();
        let mut row = vec![c(0.0); 5];
        row[0] = c(1.0);
        let member = |z: i64| {
            let gz = SpatialGrid::with_origin(1, 1, 1.0, vec![z]).unwrap();
            let m = MixtureSpec::new(&labels(1), gx.clone(), gz, 0.5, vec![row.clone()], vec![1.0]).unwrap();
            mixture_member_weights(&m, 0)
        };
        // ψ(ξ' + ζ) with support at −2: ζ = −2 lands on ξ' = 0, ζ = 0 stays at ξ' = −2.
        assert_eq!(member(-2).weight(1), Some(1.0));
        assert_eq!(member(0).weight(0), Some(1.0));
    }

    #[test]
    fn member_formula_matches_operator() {
        let s = equiv_spec([0.2, 0.5, 0.3]);
        let m = MixtureSpec::from_spatial(&s).unwrap();
        for member in 0..3 {
            let f = mixture_member_weights(&m, member);
            let o = mixture_member_weights_operator(&m, member).unwrap();
            assert!(f.max_abs_diff(&o) <= 1e-12);
        }
    }

    #[test]
    fn single_member_and_uniform_mixtures() {
        let s = equiv_spec([0.0, 0.0, 1.0]);
        let m = MixtureSpec::from_spatial(&s).unwrap();
        assert_eq!(mixture_weights(&m).weights(), mixture_member_weights(&m, 2).weights());
        let m = m.with_p(vec![0.5, 0.0, 0.5]).unwrap();
        let a = mixture_member_weights(&m, 0);
        let b = mixture_member_weights(&m, 2);
        let w = mixture_weights(&m);
        for k in 0..=2 {
            let mean = 0.5 * (a.weight(k).unwrap() + b.weight(k).unwrap());
            assert!((w.weight(k).unwrap() - mean).abs() <= 1e-15);
        }
    }

    #[test]
    fn equivalence_with_positioned_observer() {
        for psi_z in [[0.0, 1.0, 0.0], [0.2, 0.5, 0.3], [0.5, 0.0, 0.5]] {
            let s = equiv_spec(psi_z);
            let eq = verify_mixture_equivalence(&s).unwrap();
            assert!(eq.pass(), "{:?}", eq.differences);
            assert_eq!(eq.differences.len(), 3);
            assert!(eq.spatial.max_abs_diff(&spatial_weights(&s)) == 0.0);
        }
    }

    #[test]
    fn margin_violation_names_member() {
        let gx = SpatialGrid::with_origin(1, 3, 1.0, vec![-1]).unwrap();
        let gz = SpatialGrid::with_origin(1, 3, 1.0, vec![-1]).unwrap();
        let row = vec![c(0.6), c(0.8), c(0.0)];
        let s = SpatialModelSpec::new(&labels(1), gx, gz, 1.0, vec![row], vec![c(0.0), c(0.0), c(1.0)]).unwrap();
        let err = verify_mixture_equivalence(&s).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("ζ = (1)"), "{msg}");
    }

    #[test]
    fn density_paths_agree() {
        let s = equiv_spec([0.2, 0.5, 0.3]);
        let m = MixtureSpec::from_spatial(&s).unwrap();
        let rho = build_initial_density(&m).unwrap();
        let factored = kron(&observer_density(&m), &system_density(&m).unwrap());
        assert!(rho.as_op().max_abs_diff(&factored) <= 1e-15);
        let traced = mixture_weights_density(&m).unwrap();
        assert!(traced.max_abs_diff(&mixture_weights(&m)) <= 1e-10);
    }

    #[test]
    fn density_rank_structure() {
        let s = equiv_spec([0.0, 1.0, 0.0]);
        let m = MixtureSpec::from_spatial(&s).unwrap();
        let rho = build_initial_density(&m).unwrap();
        assert!(rho.purity_deviation() <= 1e-12);

        let gx = SpatialGrid::with_origin(1, 5, 1.0, vec![-2]).unwrap();
        let gz = SpatialGrid::with_origin(1, 5, 1.0, vec![-2]).unwrap();
        let mut row = vec![c(0.0); 5];
        row[2] = c(1.0);
        let m = MixtureSpec::new(&labels(1), gx, gz, 1.0, vec![row], vec![0.5, 0.0, 0.0, 0.0, 0.5]).unwrap();
        let ev = build_initial_density(&m).unwrap().eigenvalues();
        let n = ev.len();
        assert!((ev[n - 1] - 0.5).abs() <= 1e-12 && (ev[n - 2] - 0.5).abs() <= 1e-12);
        assert!(ev[..n - 2].iter().all(|x| x.abs() <= 1e-12));
    }

    #[test]
    fn observer_density_is_ready_eigenstate() {
        let m = MixtureSpec::from_spatial(&equiv_spec([0.2, 0.5, 0.3])).unwrap();
        assert!(observer_eigen_deviation(&m).unwrap() <= 1e-10);
    }

    #[test]
    fn affine_in_p() {
        let m = MixtureSpec::from_spatial(&equiv_spec([0.2, 0.5, 0.3])).unwrap();
        let p1 = vec![0.1, 0.1, 0.8];
        let p2 = vec![0.6, 0.4, 0.0];
        let w1 = mixture_weights(&m.with_p(p1.clone()).unwrap());
        let w2 = mixture_weights(&m.with_p(p2.clone()).unwrap());
        for lambda in [0.0, 0.25, 0.7, 1.0] {
            let p: Vec<f64> = p1
                .iter()
                .zip(&p2)
                .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
                .collect();
            let w = mixture_weights(&m.with_p(p).unwrap());
            for k in 0..=2 {
                let want = lambda * w1.weight(k).unwrap() + (1.0 - lambda) * w2.weight(k).unwrap();
                assert!((w.weight(k).unwrap() - want).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn unitary_and_invariants() {
        let m = MixtureSpec::from_spatial(&equiv_spec([0.2, 0.5, 0.3])).unwrap();
        let u = build_mixture_unitary(&m).unwrap();
        let spectral = unitary_exp(&build_mixture_hamiltonian(&m).unwrap(), m.ideal().tau()).unwrap();
        assert!(u.max_abs_diff(&spectral) <= 1e-10);
        let sp = m.spaces();
        let x = embed(&position_operator(m.grid_x(), &sp.x, 0), &sp.joint).unwrap();
        assert!(heisenberg_evolve(&x, &u).unwrap().max_abs_diff(&x) <= 1e-12);
        let (bt, dec) = mixture_b_of_t(&m).unwrap();
        assert!(dec.reassemble().max_abs_diff(&bt) <= 1e-10);
        assert!(dec.label_algebra_deviation() <= 1e-12);
    }
}
