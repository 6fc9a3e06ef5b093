//! Heisenberg-picture simulation of Everett measurement models.
//!
//! Observers, systems and position registers are finite-dimensional; every
//! model comes with closed-form branch weights, an operator-level branch
//! decomposition, and a Schrödinger-picture reference computation.

pub mod branch;
pub mod error;
pub mod extraction;
pub mod grid;
pub mod hilbert;
pub mod ideal;
pub mod mixture;
pub mod multi;
pub mod oracle;
pub mod sampling;
pub mod spatial;
pub mod sum;
pub mod tolerance;

pub use branch::{Branch, BranchDecomposition, BranchWeightReport, Provenance, WeightEntry};
pub use error::{Error, Result};
pub use extraction::{ExtractedDecomposition, ExtractionInput, UniquenessReport};
pub use grid::{Boundary, LatticePoint, SpatialGrid};
pub use hilbert::{HilbertSpace, Ket, LinOp, ProductSpace, C64};
pub use ideal::IdealModelSpec;
pub use mixture::{DensityOp, MixtureSpec};
pub use multi::{GIndexMap, JointWeightMatrix, MultiObserverSpec};
pub use oracle::{MultiOracleResult, OracleResult};
pub use spatial::SpatialModelSpec;
pub use tolerance::Tolerances;
