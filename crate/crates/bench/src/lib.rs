//! Fixed-seed workloads for the kernel benchmarks.

use everett_core::extraction::ExtractionInput;
use everett_core::sampling::{random_branch_construction, random_distinct, random_multi_spec, random_spatial_spec};
use everett_core::{LinOp, MultiObserverSpec, SpatialModelSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(7)
}

/// Spatial model with `n` points per axis on both grids.
pub fn spatial(m: usize, d: usize, n: usize) -> SpatialModelSpec {
    random_spatial_spec(&mut rng(), m, d, n, n)
}

pub fn multi(m: usize, d: usize, n: usize) -> MultiObserverSpec {
    random_multi_spec(&mut rng(), m, d, n, n)
}

/// Hamiltonian of the finite-range model at grid size `n`.
pub fn hamiltonian(n: usize) -> LinOp {
    everett_core::spatial::build_finite_range_hamiltonian(&spatial(2, 1, n)).expect("small instance")
}

/// `m + 1` branches on `O ⊗ V`.
pub fn extraction(m: usize, v_dim: usize) -> ExtractionInput {
    let mut rng = rng();
    let betas = random_distinct(&mut rng, m + 1, -4.0, 4.0, 1e-2);
    let built = random_branch_construction(&mut rng, &betas, m + 1, v_dim);
    ExtractionInput::new(built.op, built.reference, m + 1).expect("valid construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workloads_build() {
        assert_eq!(spatial(2, 1, 4).total_dim(), 3 * 2 * 16);
        assert!(multi(1, 1, 3).total_dim() > 0);
        assert!(hamiltonian(2).hermitian_deviation() < 1e-12);
        assert_eq!(extraction(2, 6).expected_branch_count, 3);
    }
}
