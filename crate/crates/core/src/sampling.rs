//! Random model instances for property sweeps, fixtures and benchmarks.
//!
//! Every generator takes the caller's RNG, so a seeded RNG gives a
//! reproducible instance.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::grid::{LatticePoint, SpatialGrid};
use crate::hilbert::{CMatrix, CVector, HilbertSpace, Ket, LinOp, ProductSpace, C64};
use crate::ideal::IdealModelSpec;
use crate::mixture::MixtureSpec;
use crate::multi::MultiObserverSpec;
use crate::spatial::SpatialModelSpec;

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    // Box-Muller; the open interval keeps ln away from zero.
    let u: f64 = rng.random_range(f64::EPSILON..1.0);
    let v: f64 = rng.random();
    (-2.0 * u.ln()).sqrt() * (std::f64::consts::TAU * v).cos()
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(gaussian(rng), gaussian(rng))
}

/// Haar-distributed `n × n` unitary.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let z = CMatrix::from_fn(n, n, |_, _| complex_gaussian(rng));
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for (k, mut col) in q.column_iter_mut().enumerate() {
        let d = r[(k, k)];
        if d.norm() > 0.0 {
            col *= d.conj() / d.norm();
        }
    }
    q
}

pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMatrix {
    let m = CMatrix::from_fn(n, n, |_, _| complex_gaussian(rng));
    (&m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Unit vector of `n` complex amplitudes; each entry is zeroed with
/// probability `sparsity`, keeping at least one.
pub fn random_amplitudes<R: Rng + ?Sized>(rng: &mut R, n: usize, sparsity: f64) -> Vec<C64> {
    let mut amps: Vec<C64> = (0..n)
        .map(|_| {
            if rng.random_bool(sparsity) {
                C64::new(0.0, 0.0)
            } else {
                complex_gaussian(rng)
            }
        })
        .collect();
    if amps.iter().all(|a| a.norm_sqr() == 0.0) {
        let k = rng.random_range(0..n);
        amps[k] = complex_gaussian(rng);
    }
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    amps.iter().map(|a| a / norm).collect()
}

/// `n` reals in `[lo, hi)` at least `gap` apart.
pub fn random_distinct<R: Rng + ?Sized>(rng: &mut R, n: usize, lo: f64, hi: f64, gap: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
        let mut sorted = v.clone();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).all(|w| w[1] - w[0] >= gap) {
            return v;
        }
    }
}

/// `M` outcomes with random distinct labels, random `τ` and random `ψ`.
pub fn random_ideal_spec<R: Rng + ?Sized>(rng: &mut R, m: usize) -> IdealModelSpec {
    let alphas = random_distinct(rng, m, -5.0, 5.0, 1e-3);
    let betas = random_distinct(rng, m + 1, -5.0, 5.0, 1e-3);
    let tau = rng.random_range(0.1..3.0);
    let psi = random_amplitudes(rng, m, 0.2);
    IdealModelSpec::new(alphas, betas, tau, psi).expect("sampled spec is valid")
}

fn random_labels<R: Rng + ?Sized>(rng: &mut R, m: usize) -> IdealModelSpec {
    let alphas = random_distinct(rng, m, -5.0, 5.0, 1e-3);
    let betas = random_distinct(rng, m + 1, -5.0, 5.0, 1e-3);
    IdealModelSpec::labels(alphas, betas, rng.random_range(0.1..3.0)).expect("sampled labels are valid")
}

fn random_spacing<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    *[0.25, 0.5, 1.0, 0.1, 0.3][..].choose(rng).expect("non-empty")
}

fn random_origin<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<i64> {
    (0..d).map(|_| rng.random_range(-3..=3)).collect()
}

/// `M × grid` amplitudes with unit total norm.
fn random_system_amplitudes<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    grid: &SpatialGrid,
    mask: &[bool],
) -> Vec<Vec<C64>> {
    let flat = loop {
        let raw = random_amplitudes(rng, m * grid.len(), 0.3);
        let masked: Vec<C64> = raw
            .iter()
            .enumerate()
            .map(|(k, a)| if mask[k % grid.len()] { *a } else { C64::new(0.0, 0.0) })
            .collect();
        let norm = masked.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-3 {
            break masked.iter().map(|a| a / norm).collect::<Vec<_>>();
        }
    };
    flat.chunks(grid.len()).map(<[C64]>::to_vec).collect()
}

/// Random finite-range spec on `d`-dimensional grids with `nx`, `nz`
/// points per axis. The radius ranges over `[0, 1.2 · diameter]`.
pub fn random_spatial_spec<R: Rng + ?Sized>(rng: &mut R, m: usize, d: usize, nx: usize, nz: usize) -> SpatialModelSpec {
    let spacing = random_spacing(rng);
    let grid_x = SpatialGrid::with_origin(d, nx, spacing, random_origin(rng, d)).expect("valid grid");
    let grid_z = SpatialGrid::with_origin(d, nz, spacing, random_origin(rng, d)).expect("valid grid");
    let reach = grid_x.diameter() + grid_z.diameter() + 3.0 * spacing * (d as f64).sqrt() * 2.0;
    let a = if rng.random_bool(0.2) {
        // Exactly a lattice distance, to exercise the boundary convention.
        spacing * rng.random_range(0..=nx as i64) as f64
    } else {
        rng.random_range(0.0..reach)
    };
    let psi_xs = random_system_amplitudes(rng, m, &grid_x, &vec![true; grid_x.len()]);
    let psi_z = random_amplitudes(rng, grid_z.len(), 0.3);
    SpatialModelSpec::new(&random_labels(rng, m), grid_x, grid_z, a, psi_xs, psi_z).expect("sampled spec is valid")
}

/// Random spatial spec whose system support stays within `s` lattice
/// steps of the origin and whose observer grid spans `r` steps, with
/// `grid_x` wide enough that no mixture member is clipped.
pub fn random_margin_spatial_spec<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    d: usize,
    s: usize,
    r: usize,
) -> SpatialModelSpec {
    let spacing = random_spacing(rng);
    let half = (s + r) as i64;
    let grid_x = SpatialGrid::with_origin(d, 2 * (s + r) + 1, spacing, vec![-half; d]).expect("valid grid");
    let grid_z = SpatialGrid::with_origin(d, 2 * r + 1, spacing, vec![-(r as i64); d]).expect("valid grid");
    let mask: Vec<bool> = grid_x
        .points()
        .map(|p| p.0.iter().all(|c| c.unsigned_abs() as usize <= s))
        .collect();
    let psi_xs = random_system_amplitudes(rng, m, &grid_x, &mask);
    let psi_z = random_amplitudes(rng, grid_z.len(), 0.3);
    let a = rng.random_range(0.0..(grid_x.diameter() * 0.6 + spacing));
    SpatialModelSpec::new(&random_labels(rng, m), grid_x, grid_z, a, psi_xs, psi_z).expect("sampled spec is valid")
}

/// Random margin-respecting mixture with arbitrary `p`.
pub fn random_mixture_spec<R: Rng + ?Sized>(rng: &mut R, m: usize, d: usize, s: usize, r: usize) -> MixtureSpec {
    let base = random_margin_spatial_spec(rng, m, d, s, r);
    let p = random_probabilities(rng, base.grid_z().len());
    MixtureSpec::from_spatial(&base)
        .and_then(|mix| mix.with_p(p))
        .expect("sampled spec is valid")
}

pub fn random_probabilities<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    random_amplitudes(rng, n, 0.3).iter().map(|a| a.norm_sqr()).collect()
}

fn random_offset<R: Rng + ?Sized>(rng: &mut R, d: usize, span: i64) -> LatticePoint {
    LatticePoint((0..d).map(|_| rng.random_range(-span..=span)).collect())
}

#[allow(clippy::too_many_arguments)]
fn random_multi_base<R: Rng + ?Sized>(
    rng: &mut R,
    m: usize,
    d: usize,
    nx: usize,
    nz: usize,
    radii: [f64; 2],
    offsets: [LatticePoint; 2],
    spacing: f64,
) -> MultiObserverSpec {
    let grid_x = SpatialGrid::with_origin(d, nx, spacing, random_origin(rng, d)).expect("valid grid");
    let grid_z = SpatialGrid::with_origin(d, nz, spacing, random_origin(rng, d)).expect("valid grid");
    let psi_xs = random_system_amplitudes(rng, m, &grid_x, &vec![true; grid_x.len()]);
    let psi_z = random_amplitudes(rng, grid_z.len(), 0.3);
    let labels = random_labels(rng, m);
    let tau = labels.tau();
    MultiObserverSpec::new(&labels, grid_x, grid_z, radii, offsets, psi_xs, psi_z)
        .and_then(|s| s.with_taus([tau, rng.random_range(0.1..3.0), rng.random_range(0.1..3.0)]))
        .expect("sampled spec is valid")
}

/// Two observers with arbitrary offsets and radii.
pub fn random_multi_spec<R: Rng + ?Sized>(rng: &mut R, m: usize, d: usize, nx: usize, nz: usize) -> MultiObserverSpec {
    let spacing = random_spacing(rng);
    let offsets = [random_offset(rng, d, 3), random_offset(rng, d, 3)];
    let radii = [
        rng.random_range(0.0..4.0 * spacing),
        rng.random_range(0.0..4.0 * spacing),
    ];
    random_multi_base(rng, m, d, nx, nz, radii, offsets, spacing)
}

/// Two observers farther apart than the sum of their radii.
pub fn random_case1_spec<R: Rng + ?Sized>(rng: &mut R, m: usize, d: usize, nx: usize, nz: usize) -> MultiObserverSpec {
    let spacing = random_spacing(rng);
    loop {
        let offsets = [random_offset(rng, d, 4), random_offset(rng, d, 4)];
        let separation = (&offsets[0] - &offsets[1]).length(spacing);
        if separation == 0.0 {
            continue;
        }
        let reach = separation * rng.random_range(0.0..0.999);
        let split = rng.random_range(0.0..=1.0);
        let radii = [reach * split, reach * (1.0 - split)];
        return random_multi_base(rng, m, d, nx, nz, radii, offsets, spacing);
    }
}

/// Two observers with the same offset and radius.
pub fn random_case2_spec<R: Rng + ?Sized>(rng: &mut R, m: usize, d: usize, nx: usize, nz: usize) -> MultiObserverSpec {
    let spacing = random_spacing(rng);
    let offset = random_offset(rng, d, 3);
    let a = rng.random_range(0.0..4.0 * spacing);
    random_multi_base(rng, m, d, nx, nz, [a, a], [offset.clone(), offset], spacing)
}

/// A hand-built `Σ b_i ⊗ Q_i` with known parts.
#[derive(Debug, Clone)]
pub struct BranchConstruction {
    pub op: LinOp,
    pub reference: Ket,
    /// `(β_i, b_i, Q_i)` in construction order.
    pub branches: Vec<(f64, LinOp, LinOp)>,
}

/// `branches` terms on `O ⊗ V` with `dim O = observer_dim`. Each `b_i` has
/// the reference ket as eigenvector with eigenvalue `β_i` and is otherwise a
/// random Hermitian; the `Q_i` split a random orthonormal basis of `V`
/// into non-empty groups.
pub fn random_branch_construction<R: Rng + ?Sized>(
    rng: &mut R,
    betas: &[f64],
    observer_dim: usize,
    v_dim: usize,
) -> BranchConstruction {
    let k = betas.len();
    assert!(k >= 1 && v_dim >= k, "need at least one basis vector per branch");
    let o = HilbertSpace::indexed("O", "o", observer_dim).expect("non-empty");
    let v = HilbertSpace::indexed("V", "v", v_dim).expect("non-empty");
    let r = CVector::from_vec(random_amplitudes(rng, observer_dim, 0.0));
    let reference = Ket::new(o.clone(), r.clone()).expect("matching dim");
    let pr = &r * r.adjoint();
    let comp = CMatrix::identity(observer_dim, observer_dim) - &pr;

    // Group sizes: one vector each, the rest spread at random.
    let mut sizes = vec![1usize; k];
    for _ in k..v_dim {
        sizes[rng.random_range(0..k)] += 1;
    }
    let basis = random_unitary(rng, v_dim);
    let mut start = 0;
    let mut branches = Vec::with_capacity(k);
    for (i, &beta) in betas.iter().enumerate() {
        let cols = basis.columns(start, sizes[i]);
        start += sizes[i];
        let q = LinOp::new(v.clone(), cols * cols.adjoint()).expect("square");
        let h = random_hermitian(rng, observer_dim);
        let b = &pr * C64::new(beta, 0.0) + &comp * h * &comp;
        let b = LinOp::new(o.clone(), (&b + b.adjoint()) * C64::new(0.5, 0.0)).expect("square");
        branches.push((beta, b, q));
    }
    let space = ProductSpace::new(vec![o, v]).expect("distinct names");
    let mut op = LinOp::zero(space.clone());
    for (_, b, q) in &branches {
        op = &op + &crate::hilbert::kron(b, q);
    }
    BranchConstruction {
        op,
        reference,
        branches,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerance::Tolerances;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_unitary(&mut rng, 7);
        let id = CMatrix::identity(7, 7);
        assert!(crate::hilbert::max_abs(&(u.adjoint() * &u - id)) < 1e-12);
    }

    #[test]
    fn generators_are_reproducible_and_valid() {
        let a = random_spatial_spec(&mut ChaCha8Rng::seed_from_u64(3), 2, 2, 3, 2);
        let b = random_spatial_spec(&mut ChaCha8Rng::seed_from_u64(3), 2, 2, 3, 2);
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for d in 1..=3 {
            let s = random_margin_spatial_spec(&mut rng, 2, d, 1, 1);
            let mix = MixtureSpec::from_spatial(&s).unwrap();
            mix.check_margin().unwrap();
            let c1 = random_case1_spec(&mut rng, 2, d, 2, 2);
            assert!(c1.separation() > c1.radii()[0] + c1.radii()[1]);
            let c2 = random_case2_spec(&mut rng, 2, d, 2, 2);
            assert_eq!(c2.offsets()[0], c2.offsets()[1]);
        }
    }

    #[test]
    fn construction_has_expected_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c = random_branch_construction(&mut rng, &[0.5, -1.0, 2.0], 3, 6);
        let qs: Vec<&LinOp> = c.branches.iter().map(|(_, _, q)| q).collect();
        assert!(crate::branch::projector_family_deviation(&qs) < 1e-12);
        for (beta, b, _) in &c.branches {
            let applied = b.apply(&c.reference).unwrap();
            let diff = applied.amps() - c.reference.amps() * C64::new(*beta, 0.0);
            assert!(diff.iter().all(|z| z.norm() < 1e-12));
            assert!(b.is_hermitian(&Tolerances::DEFAULT));
        }
    }
}
