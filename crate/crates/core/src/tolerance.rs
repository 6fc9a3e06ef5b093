//! Numerical tolerances shared by every check in the crate.

/// One record holding every threshold used for validation and verification.
///
/// All values are absolute. `DEFAULT` carries the reference thresholds;
/// `STRICT` tightens the ones that are comfortably met at desk scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max-entry deviation of `A - A†` for a Hermitian operator.
    pub hermitian: f64,
    /// Max-entry deviation of `U†U - 1`.
    pub unitary: f64,
    /// Max-entry deviation of `P² - P` for a projector.
    pub projector: f64,
    /// Deviation of a state or density norm from one.
    pub normalization: f64,
    /// Collision distance for eigenvalue labels that must be distinct.
    pub degeneracy: f64,
    /// Deviation of a weight total from one.
    pub weight_sum: f64,
    /// Slack allowed outside [0, 1] for an individual weight.
    pub weight_range: f64,
    /// Entrywise agreement of two independently built operators or weight sets.
    pub operator_match: f64,
    /// Heisenberg invariance of unchanged observables, and exact-path identities.
    pub invariance: f64,
    /// Agreement of formula-path weights reached by two algebraic routes.
    pub equivalence: f64,
    /// Entries that must vanish identically.
    pub exact_zero: f64,
    /// Absolute clustering distance for extracted branch eigenvalues.
    pub cluster: f64,
    /// Max-entry reconstruction residual of an extracted decomposition.
    pub residual: f64,
    /// Largest dimension for which full dense operators are built.
    pub dim_cap: usize,
}

impl Tolerances {
    pub const DEFAULT: Tolerances = Tolerances {
        hermitian: 1e-12,
        unitary: 1e-10,
        projector: 1e-10,
        normalization: 1e-12,
        degeneracy: 1e-12,
        weight_sum: 1e-10,
        weight_range: 1e-12,
        operator_match: 1e-10,
        invariance: 1e-12,
        equivalence: 1e-12,
        exact_zero: 1e-14,
        cluster: 1e-9,
        residual: 1e-9,
        dim_cap: 4096,
    };

    pub const STRICT: Tolerances = Tolerances {
        weight_sum: 1e-12,
        operator_match: 1e-11,
        ..Tolerances::DEFAULT
    };
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances::DEFAULT
    }
}
