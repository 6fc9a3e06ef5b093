//! Two observers measure the same system, a third reads both of them.
//!
//! Observer `p` sits at `ζ + d_p` and interacts with the system when
//! `|ξ − (ζ + d_p)| ≤ a_p`. The verifier `G` then performs an ideal
//! measurement of the pair of observer readouts. Full-space factor order is
//! `G ⊗ O1 ⊗ O2 ⊗ S ⊗ Z ⊗ X`.

use std::sync::Arc;

use crate::branch::{Branch, BranchDecomposition};
use crate::error::{Error, Result};
use crate::grid::{check_compatible, Boundary, LatticePoint, SpatialGrid};
use crate::hilbert::{
    embed, expectation, heisenberg_evolve, kron, kron_all, sum_ops, HilbertSpace, Ket, LinOp, ProductSpace, C64,
};
use crate::ideal::{
    observer_generator, observer_projector, observer_readout, observer_rotation, observer_space, system_observable,
    system_projector, system_space, IdealModelSpec,
};
use crate::spatial::{
    check_amplitudes, check_dim_cap, check_radius, check_system_amplitudes, position_operator,
    system_position_amplitudes,
};
use crate::sum::CompensatedSum;
use crate::tolerance::Tolerances;

/// `I(i, j) = 1 + i (M + 1) + j`; `I = 0` is the verifier's ignorance state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GIndexMap {
    m: usize,
}

impl GIndexMap {
    pub fn new(m: usize) -> Self {
        Self { m }
    }

    pub fn outcomes(&self) -> usize {
        self.m
    }

    /// Number of verifier states, ignorance included.
    pub fn len(&self) -> usize {
        1 + (self.m + 1) * (self.m + 1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        assert!(i <= self.m && j <= self.m, "observer index out of range");
        1 + i * (self.m + 1) + j
    }

    pub fn inverse(&self, big: usize) -> Option<(usize, usize)> {
        if big == 0 || big >= self.len() {
            return None;
        }
        Some(((big - 1) / (self.m + 1), (big - 1) % (self.m + 1)))
    }

    /// All `(i, j)` pairs in index order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (1..self.len()).map(|k| self.inverse(k).expect("in range"))
    }
}

/// Where observer `p` sits relative to the platform and how far it reaches.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverRange {
    pub radius: f64,
    pub offset: LatticePoint,
    pub boundary: Boundary,
    pub spacing: f64,
}

impl ObserverRange {
    /// `f″_p(ζ, ξ)`: `|ξ − (ζ + d_p)|` against `a_p`.
    pub fn contains(&self, zeta: &LatticePoint, xi: &LatticePoint) -> bool {
        let gap = &(xi - zeta) - &self.offset;
        self.boundary.contains(gap.length(self.spacing), self.radius)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiObserverSpec {
    ideal: IdealModelSpec,
    grid_x: SpatialGrid,
    grid_z: SpatialGrid,
    radii: [f64; 2],
    offsets: [LatticePoint; 2],
    boundary: Boundary,
    psi_xs: Vec<Vec<C64>>,
    psi_z: Vec<C64>,
    taus: [f64; 3],
    gammas: Vec<f64>,
}

impl MultiObserverSpec {
    /// Offsets are lattice vectors; all durations default to `ideal.tau()`
    /// and the verifier eigenvalues to `0, 1, …, (M + 1)²`.
    pub fn new(
        ideal: &IdealModelSpec,
        grid_x: SpatialGrid,
        grid_z: SpatialGrid,
        radii: [f64; 2],
        offsets: [LatticePoint; 2],
        psi_xs: Vec<Vec<C64>>,
        psi_z: Vec<C64>,
    ) -> Result<Self> {
        check_compatible(&grid_x, &grid_z)?;
        check_radius("a1", radii[0])?;
        check_radius("a2", radii[1])?;
        for (field, d) in [("d1", &offsets[0]), ("d2", &offsets[1])] {
            if d.dim() != grid_x.dim() {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("offset has {} components, grid has dimension {}", d.dim(), grid_x.dim()),
                });
            }
        }
        check_system_amplitudes(ideal.outcomes(), &grid_x, &psi_xs)?;
        check_amplitudes("psi_z", grid_z.len(), &psi_z)?;
        let sx: CompensatedSum = psi_xs.iter().flatten().map(|a| a.norm_sqr()).collect();
        let sz: CompensatedSum = psi_z.iter().map(|a| a.norm_sqr()).collect();
        let total = sx.value() * sz.value();
        if (total - 1.0).abs() > Tolerances::DEFAULT.normalization {
            return Err(Error::Normalization {
                constraint: "normalization3",
                field: "psi_xs, psi_z",
                total,
            });
        }
        let m = ideal.outcomes();
        let marginals = psi_xs
            .iter()
            .map(|row| C64::new((row.iter().map(|a| a.norm_sqr()).sum::<f64>() * sz.value()).sqrt(), 0.0))
            .collect();
        let tau = ideal.tau();
        Ok(Self {
            ideal: ideal.with_psi(marginals),
            grid_x,
            grid_z,
            radii,
            offsets,
            boundary: Boundary::Closed,
            psi_xs,
            psi_z,
            taus: [tau; 3],
            gammas: (0..GIndexMap::new(m).len()).map(|k| k as f64).collect(),
        })
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    /// `(τ_1, τ_2, τ_G)`.
    pub fn with_taus(mut self, taus: [f64; 3]) -> Result<Self> {
        if let Some(bad) = taus.iter().find(|t| !(t.is_finite() && **t > 0.0)) {
            return Err(Error::InvalidParameter {
                field: "taus",
                reason: format!("durations must be positive, got {bad}"),
            });
        }
        self.taus = taus;
        Ok(self)
    }

    pub fn with_gammas(mut self, gammas: Vec<f64>) -> Result<Self> {
        let expected = GIndexMap::new(self.outcomes()).len();
        if gammas.len() != expected {
            return Err(Error::InvalidParameter {
                field: "gammas",
                reason: format!("expected {expected} verifier eigenvalues, found {}", gammas.len()),
            });
        }
        for (i, a) in gammas.iter().enumerate() {
            if let Some(j) = gammas[i + 1..]
                .iter()
                .position(|b| (a - b).abs() <= Tolerances::DEFAULT.degeneracy)
            {
                return Err(Error::Nondegeneracy(format!(
                    "gammas[{i}] and gammas[{}] coincide",
                    i + 1 + j
                )));
            }
        }
        self.gammas = gammas;
        Ok(self)
    }

    pub fn with_radii(&self, radii: [f64; 2]) -> Result<Self> {
        check_radius("a1", radii[0])?;
        check_radius("a2", radii[1])?;
        Ok(Self { radii, ..self.clone() })
    }

    /// Labels and marginal amplitudes; `τ` of the first observer.
    pub fn ideal(&self) -> &IdealModelSpec {
        &self.ideal
    }

    pub fn grid_x(&self) -> &SpatialGrid {
        &self.grid_x
    }

    pub fn grid_z(&self) -> &SpatialGrid {
        &self.grid_z
    }

    pub fn radii(&self) -> [f64; 2] {
        self.radii
    }

    pub fn offsets(&self) -> &[LatticePoint; 2] {
        &self.offsets
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

    pub fn taus(&self) -> [f64; 3] {
        self.taus
    }

    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    pub fn outcomes(&self) -> usize {
        self.ideal.outcomes()
    }

    pub fn index_map(&self) -> GIndexMap {
        GIndexMap::new(self.outcomes())
    }

    /// `κ_p = π / (2 τ_p)` for `p = 1, 2`, and `κ_G` for `p = 3`.
    pub fn kappa(&self, p: usize) -> f64 {
        std::f64::consts::PI / (2.0 * self.taus[p - 1])
    }

    /// Range of observer `p ∈ {1, 2}`.
    pub fn range(&self, p: usize) -> ObserverRange {
        ObserverRange {
            radius: self.radii[p - 1],
            offset: self.offsets[p - 1].clone(),
            boundary: self.boundary,
            spacing: self.grid_x.spacing(),
        }
    }

    /// `|d1 − d2|` in physical units.
    pub fn separation(&self) -> f64 {
        (&self.offsets[0] - &self.offsets[1]).length(self.grid_x.spacing())
    }

    /// Dimension of `G ⊗ O1 ⊗ O2 ⊗ S ⊗ Z ⊗ X`.
    pub fn total_dim(&self) -> usize {
        let m = self.outcomes();
        self.index_map().len() * (m + 1) * (m + 1) * m * self.grid_z.len() * self.grid_x.len()
    }

    pub fn spaces(&self) -> MultiSpaces {
        let m = self.outcomes();
        let g = HilbertSpace::indexed("G", "gamma", self.index_map().len()).expect("non-empty");
        let o1 = observer_space("O1", m);
        let o2 = observer_space("O2", m);
        let system = system_space(m);
        let z = self.grid_z.space("Z");
        let x = self.grid_x.space("X");
        let product = |fs: &[&Arc<HilbertSpace>]| {
            ProductSpace::new(fs.iter().map(|f| (*f).clone()).collect()).expect("distinct names")
        };
        MultiSpaces {
            zx: product(&[&z, &x]),
            labels: product(&[&o1, &o2, &system, &z, &x]),
            joint: product(&[&g, &o1, &o2, &system, &z, &x]),
            g,
            o1,
            o2,
            system,
            z,
            x,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MultiSpaces {
    pub g: Arc<HilbertSpace>,
    pub o1: Arc<HilbertSpace>,
    pub o2: Arc<HilbertSpace>,
    pub system: Arc<HilbertSpace>,
    pub z: Arc<HilbertSpace>,
    pub x: Arc<HilbertSpace>,
    /// `Z ⊗ X`.
    pub zx: ProductSpace,
    /// `O1 ⊗ O2 ⊗ S ⊗ Z ⊗ X`, where the verifier's labels act.
    pub labels: ProductSpace,
    /// `G ⊗ O1 ⊗ O2 ⊗ S ⊗ Z ⊗ X`.
    pub joint: ProductSpace,
}

impl MultiSpaces {
    fn observer(&self, p: usize) -> &Arc<HilbertSpace> {
        match p {
            1 => &self.o1,
            2 => &self.o2,
            _ => panic!("observer index must be 1 or 2"),
        }
    }
}

/// `f″_p(ζ, ξ)` for observer `p ∈ {1, 2}`.
pub fn offset_range_indicator(p: usize, zeta: &LatticePoint, xi: &LatticePoint, spec: &MultiObserverSpec) -> u8 {
    u8::from(spec.range(p).contains(zeta, xi))
}

/// `W″_ij` for `i, j = 0..M`; index 0 means "no measurement made".
#[derive(Debug, Clone, PartialEq)]
pub struct JointWeightMatrix {
    w: Vec<Vec<f64>>,
}

impl JointWeightMatrix {
    pub fn new(w: Vec<Vec<f64>>) -> Self {
        let n = w.len();
        assert!(w.iter().all(|row| row.len() == n), "joint weights must be square");
        Self { w }
    }

    pub fn outcomes(&self) -> usize {
        self.w.len() - 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.w[i][j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.w
    }

    /// `(i, j, W_ij)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.w
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().enumerate().map(move |(j, &w)| (i, j, w)))
    }

    pub fn sum(&self) -> f64 {
        let s: CompensatedSum = self.entries().map(|(_, _, w)| w).collect();
        s.value()
    }

    pub fn min(&self) -> f64 {
        self.entries().map(|(_, _, w)| w).fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs_diff(&self, other: &JointWeightMatrix) -> f64 {
        if self.w.len() != other.w.len() {
            return f64::INFINITY;
        }
        self.entries()
            .map(|(i, j, w)| (w - other.get(i, j)).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|W_ij|` with both observers having measured, `i, j ≥ 1`.
    pub fn both_measured_max(&self) -> f64 {
        self.entries()
            .filter(|&(i, j, _)| i > 0 && j > 0)
            .map(|(_, _, w)| w.abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|W_ij|` with `i ≠ j`, which includes every single-ignorance pair.
    pub fn disagreement_max(&self) -> f64 {
        self.entries()
            .filter(|&(i, j, _)| i != j)
            .map(|(_, _, w)| w.abs())
            .fold(0.0, f64::max)
    }

    pub fn diagonal_mass(&self) -> f64 {
        let s: CompensatedSum = (0..self.w.len()).map(|i| self.w[i][i]).collect();
        s.value()
    }
}

/// Joint weights by grid sums over `(ζ, ξ)`, ζ-major, with four cases:
/// neither observer in range, only the first, only the second, both.
pub fn joint_weights(spec: &MultiObserverSpec) -> JointWeightMatrix {
    let m = spec.outcomes();
    let (r1, r2) = (spec.range(1), spec.range(2));
    let xs: Vec<LatticePoint> = spec.grid_x.points().collect();
    let density: Vec<Vec<f64>> = spec
        .psi_xs
        .iter()
        .map(|row| row.iter().map(|a| a.norm_sqr()).collect())
        .collect();
    let mut acc = vec![vec![CompensatedSum::new(); m + 1]; m + 1];
    for (kz, zeta) in spec.grid_z.points().enumerate() {
        let pz = spec.psi_z[kz].norm_sqr();
        if pz == 0.0 {
            continue;
        }
        for (kx, xi) in xs.iter().enumerate() {
            let (f1, f2) = (r1.contains(&zeta, xi), r2.contains(&zeta, xi));
            for (k, row) in density.iter().enumerate() {
                let i = k + 1;
                let term = pz * row[kx];
                match (f1, f2) {
                    (false, false) => acc[0][0].add(term),
                    (true, false) => acc[i][0].add(term),
                    (false, true) => acc[0][i].add(term),
                    (true, true) => acc[i][i].add(term),
                }
            }
        }
    }
    JointWeightMatrix::new(
        acc.iter()
            .map(|row| row.iter().map(CompensatedSum::value).collect())
            .collect(),
    )
}

/// Outcome of the separated-observers check.
#[derive(Debug, Clone)]
pub struct Case1Report {
    pub separation: f64,
    pub reach: f64,
    /// Largest `|W_ij|` over `i, j ≥ 1`.
    pub both_measured_max: f64,
    pub tolerance: f64,
    pub weights: JointWeightMatrix,
}

impl Case1Report {
    pub fn pass(&self) -> bool {
        self.both_measured_max <= self.tolerance
    }
}

/// Requires `|d1 − d2| > a1 + a2`; equality is rejected.
pub fn check_case1(spec: &MultiObserverSpec) -> Result<Case1Report> {
    let separation = spec.separation();
    let reach = spec.radii[0] + spec.radii[1];
    let slack = 1e-12 * reach.max(1.0);
    if separation <= reach + slack {
        return Err(Error::Case1Hypothesis { separation, reach });
    }
    let weights = joint_weights(spec);
    Ok(Case1Report {
        separation,
        reach,
        both_measured_max: weights.both_measured_max(),
        tolerance: Tolerances::DEFAULT.exact_zero,
        weights,
    })
}

/// Outcome of the coincident-observers check.
#[derive(Debug, Clone)]
pub struct Case2Report {
    /// Largest `|W_ij|` over `i ≠ j`.
    pub disagreement_max: f64,
    /// `W_00 + Σ_i W_ii`.
    pub diagonal_mass: f64,
    pub tolerance: f64,
    pub weights: JointWeightMatrix,
}

impl Case2Report {
    pub fn pass(&self) -> bool {
        self.disagreement_max <= self.tolerance && (self.diagonal_mass - 1.0).abs() <= Tolerances::DEFAULT.weight_sum
    }
}

/// Requires `d1 = d2` and `a1 = a2`.
pub fn check_case2(spec: &MultiObserverSpec) -> Result<Case2Report> {
    if spec.offsets[0] != spec.offsets[1] {
        return Err(Error::Case2Hypothesis(format!(
            "offsets differ: d1 = {}, d2 = {}",
            spec.offsets[0], spec.offsets[1]
        )));
    }
    if spec.radii[0] != spec.radii[1] {
        return Err(Error::Case2Hypothesis(format!(
            "radii differ: a1 = {}, a2 = {}",
            spec.radii[0], spec.radii[1]
        )));
    }
    let weights = joint_weights(spec);
    Ok(Case2Report {
        disagreement_max: weights.disagreement_max(),
        diagonal_mass: weights.diagonal_mass(),
        tolerance: Tolerances::DEFAULT.exact_zero,
        weights,
    })
}

fn range_projector(spec: &MultiObserverSpec, zx: &ProductSpace, p: usize, inside: bool) -> LinOp {
    let range = spec.range(p);
    let xs: Vec<LatticePoint> = spec.grid_x.points().collect();
    let values: Vec<f64> = spec
        .grid_z
        .points()
        .flat_map(|zeta| {
            xs.iter()
                .map(|xi| if range.contains(&zeta, xi) == inside { 1.0 } else { 0.0 })
                .collect::<Vec<_>>()
        })
        .collect();
    LinOp::diagonal(zx.clone(), &values).expect("one entry per lattice pair")
}

/// `(P_f″p, P_f̃″p)` on `Z ⊗ X`.
pub fn build_observer_range_projectors(spec: &MultiObserverSpec, p: usize) -> Result<(LinOp, LinOp)> {
    let sp = spec.spaces();
    check_dim_cap(sp.zx.dim(), &Tolerances::DEFAULT)?;
    Ok((
        range_projector(spec, &sp.zx, p, true),
        range_projector(spec, &sp.zx, p, false),
    ))
}

fn observer_local_space(sp: &MultiSpaces, p: usize) -> ProductSpace {
    ProductSpace::new(vec![
        sp.observer(p).clone(),
        sp.system.clone(),
        sp.z.clone(),
        sp.x.clone(),
    ])
    .expect("distinct names")
}

/// `Ĥ″_p = Σ_i ĥ_i ⊗ P_i ⊗ P_f″p` on the full space.
pub fn build_observer_hamiltonian(spec: &MultiObserverSpec, p: usize) -> Result<LinOp> {
    check_dim_cap(spec.total_dim(), &Tolerances::DEFAULT)?;
    let sp = spec.spaces();
    let (pf, _) = build_observer_range_projectors(spec, p)?;
    let obs = sp.observer(p);
    let terms: Vec<LinOp> = (1..=spec.outcomes())
        .map(|i| {
            kron_all(&[
                &observer_generator(obs, i, spec.kappa(p)),
                &system_projector(&sp.system, i),
                &pf,
            ])
        })
        .collect();
    embed(&sum_ops(&observer_local_space(&sp, p), &terms), &sp.joint)
}

/// `Û″_p = P_f̃″p + Σ_i û_i ⊗ P_i ⊗ P_f″p` on the full space.
pub fn build_observer_unitary(spec: &MultiObserverSpec, p: usize) -> Result<LinOp> {
    check_dim_cap(spec.total_dim(), &Tolerances::DEFAULT)?;
    let sp = spec.spaces();
    let local = observer_local_space(&sp, p);
    let (pf, pf_tilde) = build_observer_range_projectors(spec, p)?;
    let obs = sp.observer(p);
    let angle = spec.kappa(p) * spec.taus[p - 1];
    let mut terms = vec![embed(&pf_tilde, &local)?];
    for i in 1..=spec.outcomes() {
        terms.push(kron_all(&[
            &observer_rotation(obs, i, angle),
            &system_projector(&sp.system, i),
            &pf,
        ]));
    }
    embed(&sum_ops(&local, &terms), &sp.joint)
}

/// `Ĥ_G = Σ_ij ĥ^G_ij ⊗ P_i ⊗ P_j` on the full space.
pub fn build_verifier_hamiltonian(spec: &MultiObserverSpec) -> Result<LinOp> {
    check_dim_cap(spec.total_dim(), &Tolerances::DEFAULT)?;
    let sp = spec.spaces();
    let map = spec.index_map();
    let terms: Vec<LinOp> = map
        .pairs()
        .map(|(i, j)| {
            kron_all(&[
                &observer_generator(&sp.g, map.index(i, j), spec.kappa(3)),
                &observer_projector(&sp.o1, i),
                &observer_projector(&sp.o2, j),
            ])
        })
        .collect();
    let local = ProductSpace::new(vec![sp.g.clone(), sp.o1.clone(), sp.o2.clone()]).expect("distinct names");
    embed(&sum_ops(&local, &terms), &sp.joint)
}

fn verifier_rotation(spec: &MultiObserverSpec, sp: &MultiSpaces, i: usize, j: usize) -> LinOp {
    observer_rotation(&sp.g, spec.index_map().index(i, j), spec.kappa(3) * spec.taus[2])
}

/// `Û_G = Σ_ij û^G_ij ⊗ P_i ⊗ P_j` on the full space.
pub fn build_verifier_unitary(spec: &MultiObserverSpec) -> Result<LinOp> {
    check_dim_cap(spec.total_dim(), &Tolerances::DEFAULT)?;
    let sp = spec.spaces();
    let terms: Vec<LinOp> = spec
        .index_map()
        .pairs()
        .map(|(i, j)| {
            kron_all(&[
                &verifier_rotation(spec, &sp, i, j),
                &observer_projector(&sp.o1, i),
                &observer_projector(&sp.o2, j),
            ])
        })
        .collect();
    let local = ProductSpace::new(vec![sp.g.clone(), sp.o1.clone(), sp.o2.clone()]).expect("distinct names");
    embed(&sum_ops(&local, &terms), &sp.joint)
}

/// `Û″_F2 = Û_G Û″_2 Û″_1`.
pub fn build_multi_unitary(spec: &MultiObserverSpec) -> Result<LinOp> {
    let u1 = build_observer_unitary(spec, 1)?;
    let u2 = build_observer_unitary(spec, 2)?;
    let ug = build_verifier_unitary(spec)?;
    Ok(&(&ug * &u2) * &u1)
}

/// Verifier labels `l″_ij` on `O1 ⊗ O2 ⊗ S ⊗ Z ⊗ X`, in `I(i, j)` order.
pub fn build_g_labels(spec: &MultiObserverSpec) -> Result<Vec<LinOp>> {
    check_dim_cap(spec.total_dim(), &Tolerances::DEFAULT)?;
    let sp = spec.spaces();
    let (f1, f1t) = build_observer_range_projectors(spec, 1)?;
    let (f2, f2t) = build_observer_range_projectors(spec, 2)?;
    let (ff, fft, ftf, ftft) = (&f1 * &f2, &f1 * &f2t, &f1t * &f2, &f1t * &f2t);
    let one_s = LinOp::identity(sp.system.clone());
    let angle1 = spec.kappa(1) * spec.taus[0];
    let angle2 = spec.kappa(2) * spec.taus[1];
    let conj = |u: &LinOp, p: &LinOp| &(&u.adjoint() * p) * u;
    let labels = spec
        .index_map()
        .pairs()
        .map(|(i, j)| {
            let pi = observer_projector(&sp.o1, i);
            let pj = observer_projector(&sp.o2, j);
            let mut terms = vec![kron_all(&[&pi, &pj, &one_s, &ftft])];
            for k in 1..=spec.outcomes() {
                let sk = system_projector(&sp.system, k);
                let pi_k = conj(&observer_rotation(&sp.o1, k, angle1), &pi);
                let pj_k = conj(&observer_rotation(&sp.o2, k, angle2), &pj);
                terms.push(kron_all(&[&pi, &pj_k, &sk, &ftf]));
                terms.push(kron_all(&[&pi_k, &pj, &sk, &fft]));
                terms.push(kron_all(&[&pi_k, &pj_k, &sk, &ff]));
            }
            sum_ops(&sp.labels, &terms)
        })
        .collect();
    Ok(labels)
}

/// `ĝ = Σ_I γ_I |γ_I⟩⟨γ_I|`.
pub fn verifier_readout(spec: &MultiObserverSpec) -> LinOp {
    LinOp::diagonal(spec.spaces().g, &spec.gammas).expect("one eigenvalue per verifier state")
}

/// `ĝ″(t) = Û″_F2† ĝ Û″_F2` and its decomposition `Σ ĝ_ij ⊗ l″_ij`.
pub fn g_of_t(spec: &MultiObserverSpec) -> Result<(LinOp, BranchDecomposition)> {
    let sp = spec.spaces();
    let g = verifier_readout(spec);
    let u = build_multi_unitary(spec)?;
    let evolved = heisenberg_evolve(&embed(&g, &sp.joint)?, &u)?;
    let map = spec.index_map();
    let branches = map
        .pairs()
        .zip(build_g_labels(spec)?)
        .map(|((i, j), label)| {
            let uij = verifier_rotation(spec, &sp, i, j);
            let big = map.index(i, j);
            Branch {
                index: big,
                beta: spec.gammas[big],
                b_op: &(&uij.adjoint() * &g) * &uij,
                label,
            }
        })
        .collect();
    Ok((evolved, BranchDecomposition { branches }))
}

/// `|γ_0⟩|β_0⟩|β_0⟩ ⊗ Σ ψ_Z(ζ) ψ_i(ξ) |α_i⟩|ζ⟩|ξ⟩`.
pub fn multi_initial_state(spec: &MultiObserverSpec) -> Result<Ket> {
    check_dim_cap(spec.total_dim(), &Tolerances::DEFAULT)?;
    let sp = spec.spaces();
    let ready = Ket::basis(sp.g.clone(), 0)
        .tensor(&Ket::basis(sp.o1.clone(), 0))
        .tensor(&Ket::basis(sp.o2.clone(), 0));
    let rest = ProductSpace::new(vec![sp.system.clone(), sp.z.clone(), sp.x.clone()]).expect("distinct names");
    Ok(ready.tensor(&Ket::new(rest, system_position_amplitudes(&spec.psi_xs, &spec.psi_z))?))
}

/// Joint weights as label expectations on the full space.
pub fn joint_weights_operator(spec: &MultiObserverSpec) -> Result<JointWeightMatrix> {
    let sp = spec.spaces();
    let psi = multi_initial_state(spec)?;
    let m = spec.outcomes();
    let mut w = vec![vec![0.0; m + 1]; m + 1];
    for ((i, j), label) in spec.index_map().pairs().zip(build_g_labels(spec)?) {
        w[i][j] = expectation(&psi, &embed(&label, &sp.joint)?)?.re;
    }
    Ok(JointWeightMatrix::new(w))
}

/// `‖Û″† b̂_p Û″ − (b̂_0 ⊗ P_f̃″p + Σ b̂_i ⊗ P_i ⊗ P_f″p)‖_max`.
pub fn observer_split_deviation(spec: &MultiObserverSpec, p: usize) -> Result<f64> {
    let sp = spec.spaces();
    let obs = sp.observer(p);
    let b = observer_readout(obs, spec.ideal.betas());
    let evolved = heisenberg_evolve(&embed(&b, &sp.joint)?, &build_multi_unitary(spec)?)?;
    let (pf, pf_tilde) = build_observer_range_projectors(spec, p)?;
    let local = observer_local_space(&sp, p);
    let angle = spec.kappa(p) * spec.taus[p - 1];
    let mut terms = vec![embed(&kron(&b, &pf_tilde), &local)?];
    for i in 1..=spec.outcomes() {
        let ui = observer_rotation(obs, i, angle);
        let bi = &(&ui.adjoint() * &b) * &ui;
        terms.push(kron_all(&[&bi, &system_projector(&sp.system, i), &pf]));
    }
    let expected = embed(&sum_ops(&local, &terms), &sp.joint)?;
    Ok(evolved.max_abs_diff(&expected))
}

/// Largest change of `â` or any position coordinate under `Û″_F2`.
pub fn unchanged_observables_deviation(spec: &MultiObserverSpec) -> Result<f64> {
    let sp = spec.spaces();
    let u = build_multi_unitary(spec)?;
    let mut ops = vec![system_observable(&sp.system, spec.ideal.alphas())];
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
