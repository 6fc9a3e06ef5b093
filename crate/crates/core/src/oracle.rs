//! Schrödinger-picture reference probabilities.
//!
//! Each model's Hamiltonian is assembled here entry by entry from the model
//! parameters, exponentiated numerically, and applied to the initial state
//! vector. Outcome probabilities are squared norms of the projected final
//! state. Nothing in this module calls the models' operator builders or
//! weight functions.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::grid::{Boundary, LatticePoint, SpatialGrid};
use crate::hilbert::{embed, unitary_exp, CMatrix, CVector, HilbertSpace, LinOp, ProductSpace, C64};
use crate::ideal::IdealModelSpec;
use crate::multi::{JointWeightMatrix, MultiObserverSpec};
use crate::spatial::SpatialModelSpec;
use crate::sum::stable_sum;
use crate::tolerance::Tolerances;

pub const METHOD: &str = "state-vector projection";

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Indexed by outcome `0..=M`; 0 is the ready state.
    pub probabilities: Vec<f64>,
    pub method: &'static str,
}

impl OracleResult {
    pub fn sum(&self) -> f64 {
        stable_sum(self.probabilities.iter().copied())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiOracleResult {
    /// Probability of verifier state `γ_I(i,j)`.
    pub joint: JointWeightMatrix,
    /// Probability left on the verifier's ready state `γ_0`.
    pub ready: f64,
    pub method: &'static str,
}

impl MultiOracleResult {
    pub fn sum(&self) -> f64 {
        self.joint.sum() + self.ready
    }
}

fn space(name: &str, dim: usize) -> Arc<HilbertSpace> {
    HilbertSpace::indexed(name, "k", dim).expect("non-empty")
}

fn product(factors: &[&Arc<HilbertSpace>]) -> ProductSpace {
    ProductSpace::new(factors.iter().map(|f| (*f).clone()).collect()).expect("distinct names")
}

/// Adds `coef · iκ(|k⟩⟨0| − |0⟩⟨k|)` on the observer digit of rows/cols
/// `base(o)` for `o ∈ {0, k}`.
fn add_rotation_generator(h: &mut CMatrix, kappa: f64, k: usize, at: impl Fn(usize) -> usize) {
    let (a, b) = (at(k), at(0));
    h[(a, b)] += C64::new(0.0, kappa);
    h[(b, a)] += C64::new(0.0, -kappa);
}

fn check_cap(dim: usize) -> Result<()> {
    let cap = Tolerances::DEFAULT.dim_cap;
    if dim > cap {
        return Err(Error::DimCapExceeded { dim, cap });
    }
    Ok(())
}

fn in_range(
    zeta: &LatticePoint,
    xi: &LatticePoint,
    offset: Option<&LatticePoint>,
    spacing: f64,
    a: f64,
    boundary: Boundary,
) -> bool {
    let sq: i64 = zeta
        .0
        .iter()
        .zip(&xi.0)
        .enumerate()
        .map(|(k, (z, x))| {
            let d = x - z - offset.map_or(0, |o| o.0[k]);
            d * d
        })
        .sum();
    boundary.contains((sq as f64).sqrt() * spacing, a)
}

fn lattice(grid: &SpatialGrid) -> Vec<LatticePoint> {
    (0..grid.len()).map(|k| grid.point(k)).collect()
}

/// `P(β_i) = ‖(|β_i⟩⟨β_i| ⊗ 1) Û_I |ψ⟩‖²`, `i = 0..M`.
pub fn oracle_ideal(spec: &IdealModelSpec) -> OracleResult {
    let m = spec.outcomes();
    let n = (m + 1) * m;
    let kappa = PI / (2.0 * spec.tau());
    let mut h = CMatrix::zeros(n, n);
    for s in 0..m {
        add_rotation_generator(&mut h, kappa, s + 1, |o| o * m + s);
    }
    let joint = product(&[&space("O", m + 1), &space("S", m)]);
    let u = unitary_exp(&LinOp::new(joint, h).expect("square"), spec.tau()).expect("assembled Hermitian");
    let mut psi = CVector::zeros(n);
    for (s, amp) in spec.psi().iter().enumerate() {
        psi[s] = *amp;
    }
    let out = u.mat() * psi;
    OracleResult {
        probabilities: observer_marginals(&out, m + 1, m),
        method: METHOD,
    }
}

/// Squared norm of each leading-digit block of `state`.
fn observer_marginals(state: &CVector, outer: usize, inner: usize) -> Vec<f64> {
    (0..outer)
        .map(|o| stable_sum((0..inner).map(|r| state[o * inner + r].norm_sqr())))
        .collect()
}

/// Outcome probabilities after the finite-range interaction.
pub fn oracle_spatial(spec: &SpatialModelSpec) -> Result<OracleResult> {
    let m = spec.outcomes();
    let (gx, gz) = (spec.grid_x(), spec.grid_z());
    let (nx, nz) = (gx.len(), gz.len());
    let rest = m * nz * nx;
    let n = (m + 1) * rest;
    check_cap(n)?;
    let tau = spec.ideal().tau();
    let kappa = PI / (2.0 * tau);
    let (xs, zs) = (lattice(gx), lattice(gz));
    let mut h = CMatrix::zeros(n, n);
    for s in 0..m {
        for (kz, zeta) in zs.iter().enumerate() {
            for (kx, xi) in xs.iter().enumerate() {
                if in_range(zeta, xi, None, gx.spacing(), spec.radius(), spec.boundary()) {
                    let r = (s * nz + kz) * nx + kx;
                    add_rotation_generator(&mut h, kappa, s + 1, |o| o * rest + r);
                }
            }
        }
    }
    let joint = product(&[&space("O", m + 1), &space("S", m), &space("Z", nz), &space("X", nx)]);
    let u = unitary_exp(&LinOp::new(joint, h).expect("square"), tau)?;
    let mut psi = CVector::zeros(n);
    for (s, row) in spec.psi_xs().iter().enumerate() {
        for (kz, z) in spec.psi_z().iter().enumerate() {
            for (kx, x) in row.iter().enumerate() {
                psi[(s * nz + kz) * nx + kx] = z * x;
            }
        }
    }
    let out = u.mat() * psi;
    Ok(OracleResult {
        probabilities: observer_marginals(&out, m + 1, rest),
        method: METHOD,
    })
}

/// Joint verifier probabilities after `Û_G Û″_2 Û″_1`.
pub fn oracle_multi(spec: &MultiObserverSpec) -> Result<MultiOracleResult> {
    let m = spec.outcomes();
    let (gx, gz) = (spec.grid_x(), spec.grid_z());
    let (nx, nz) = (gx.len(), gz.len());
    let ng = 1 + (m + 1) * (m + 1);
    let rest = m * nz * nx;
    let n = ng * (m + 1) * (m + 1) * rest;
    check_cap(n)?;
    let taus = spec.taus();

    let g = space("G", ng);
    let o1 = space("O1", m + 1);
    let o2 = space("O2", m + 1);
    let s_space = space("S", m);
    let z = space("Z", nz);
    let x = space("X", nx);
    let joint = product(&[&g, &o1, &o2, &s_space, &z, &x]);

    let (xs, zs) = (lattice(gx), lattice(gz));
    let observer_unitary = |p: usize, obs: &Arc<HilbertSpace>| -> Result<LinOp> {
        let kappa = PI / (2.0 * taus[p - 1]);
        let offset = &spec.offsets()[p - 1];
        let radius = spec.radii()[p - 1];
        let local_n = (m + 1) * rest;
        let mut h = CMatrix::zeros(local_n, local_n);
        for s in 0..m {
            for (kz, zeta) in zs.iter().enumerate() {
                for (kx, xi) in xs.iter().enumerate() {
                    if in_range(zeta, xi, Some(offset), gx.spacing(), radius, spec.boundary()) {
                        let r = (s * nz + kz) * nx + kx;
                        add_rotation_generator(&mut h, kappa, s + 1, |o| o * rest + r);
                    }
                }
            }
        }
        let local = product(&[obs, &s_space, &z, &x]);
        let u = unitary_exp(&LinOp::new(local, h).expect("square"), taus[p - 1])?;
        embed(&u, &joint)
    };
    let u1 = observer_unitary(1, &o1)?;
    let u2 = observer_unitary(2, &o2)?;

    let kappa_g = PI / (2.0 * taus[2]);
    let local_n = ng * (m + 1) * (m + 1);
    let mut hg = CMatrix::zeros(local_n, local_n);
    for i in 0..=m {
        for j in 0..=m {
            let big = 1 + i * (m + 1) + j;
            let r = i * (m + 1) + j;
            add_rotation_generator(&mut hg, kappa_g, big, |gi| gi * (m + 1) * (m + 1) + r);
        }
    }
    let ug = unitary_exp(&LinOp::new(product(&[&g, &o1, &o2]), hg).expect("square"), taus[2])?;
    let ug = embed(&ug, &joint)?;

    let mut psi = CVector::zeros(n);
    for (s, row) in spec.psi_xs().iter().enumerate() {
        for (kz, zamp) in spec.psi_z().iter().enumerate() {
            for (kx, xamp) in row.iter().enumerate() {
                psi[(s * nz + kz) * nx + kx] = zamp * xamp;
            }
        }
    }
    let out = ug.mat() * (u2.mat() * (u1.mat() * psi));
    let block = n / ng;
    let marg = observer_marginals(&out, ng, block);
    let w = (0..=m)
        .map(|i| (0..=m).map(|j| marg[1 + i * (m + 1) + j]).collect())
        .collect();
    Ok(MultiOracleResult {
        joint: JointWeightMatrix::new(w),
        ready: marg[0],
        method: METHOD,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ideal::ideal_branch_weights;
    use crate::multi::joint_weights;
    use crate::sampling::{random_ideal_spec, random_multi_spec, random_spatial_spec};
    use crate::spatial::spatial_weights;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn real(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    #[test]
    fn ideal_definite_state() {
        let spec = IdealModelSpec::with_defaults(real(&[1.0, 0.0])).unwrap();
        let r = oracle_ideal(&spec);
        assert!(r.probabilities[0].abs() < 1e-15);
        assert!((r.probabilities[1] - 1.0).abs() < 1e-12);
        assert!(r.probabilities[2].abs() < 1e-12);
        assert_eq!(r.method, "state-vector projection");
    }

    #[test]
    fn ideal_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for m in 1..=6 {
            let spec = random_ideal_spec(&mut rng, m);
            let oracle = oracle_ideal(&spec);
            let formula = ideal_branch_weights(&spec);
            assert!(oracle.probabilities[0] < 1e-12);
            for e in &formula.entries {
                assert!((oracle.probabilities[e.index] - e.weight).abs() <= 1e-12);
            }
            assert!((oracle.sum() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn worked_two_point_example() {
        let spec = SpatialModelSpec::new(
            &IdealModelSpec::labels(vec![1.0], vec![0.0, 1.0], 1.0).unwrap(),
            SpatialGrid::with_origin(1, 2, 1.0, vec![0]).unwrap(),
            SpatialGrid::with_origin(1, 1, 1.0, vec![0]).unwrap(),
            0.5,
            vec![real(&[0.6_f64.sqrt(), 0.4_f64.sqrt()])],
            real(&[1.0]),
        )
        .unwrap();
        let r = oracle_spatial(&spec).unwrap();
        assert!((r.probabilities[0] - 0.4).abs() < 1e-12);
        assert!((r.probabilities[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn spatial_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for (m, d, nx, nz) in [(1, 1, 4, 2), (2, 1, 3, 2), (2, 2, 2, 1), (1, 3, 2, 1)] {
            let spec = random_spatial_spec(&mut rng, m, d, nx, nz);
            let oracle = oracle_spatial(&spec).unwrap();
            let formula = spatial_weights(&spec);
            for e in &formula.entries {
                assert!((oracle.probabilities[e.index] - e.weight).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn multi_matches_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for (m, d, nx, nz) in [(1, 1, 3, 1), (1, 1, 2, 2), (2, 1, 2, 1)] {
            let spec = random_multi_spec(&mut rng, m, d, nx, nz);
            let oracle = oracle_multi(&spec).unwrap();
            let formula = joint_weights(&spec);
            assert!(oracle.joint.max_abs_diff(&formula) <= 1e-10);
            assert!(oracle.ready <= 1e-12);
            assert!((oracle.sum() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn dim_cap_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        let spec = random_spatial_spec(&mut rng, 3, 1, 30, 30);
        assert!(matches!(oracle_spatial(&spec), Err(Error::DimCapExceeded { .. })));
    }
}
