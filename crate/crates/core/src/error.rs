use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown factor `{0}`")]
    UnknownFactor(String),

    #[error("generator not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("operator not unitary (deviation {0:e})")]
    NotUnitary(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("space mismatch: {0}")]
    SpaceMismatch(String),

    #[error("nondegeneracy violated: {0}")]
    Nondegeneracy(String),

    /// A wavefunction or probability density failed its normalization
    /// constraint. `constraint` is a stable identifier callers can match on.
    #[error("normalization violated ({constraint}): {field} has total {total}, expected 1")]
    Normalization {
        constraint: &'static str,
        field: &'static str,
        total: f64,
    },

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("operator path too large; use formula path (dim {dim} > cap {cap})")]
    DimCapExceeded { dim: usize, cap: usize },

    #[error("shift violates support margin: {0}")]
    ShiftMargin(String),

    #[error("Case 1 hypothesis violated: |d1 - d2| = {separation} is not > a1 + a2 = {reach}")]
    Case1Hypothesis { separation: f64, reach: f64 },

    #[error("Case 2 hypothesis violated: {0}")]
    Case2Hypothesis(String),

    #[error("branch count mismatch: expected {expected}, found {found}")]
    BranchCountMismatch { expected: usize, found: usize },

    #[error("not of product-decomposable form (residual {0:e})")]
    NotDecomposable(f64),

    #[error("extracted decomposition invalid: {0}")]
    InvalidDecomposition(String),
}

pub type Result<T> = std::result::Result<T, Error>;
