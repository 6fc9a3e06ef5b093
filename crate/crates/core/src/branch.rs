//! Branch decompositions of evolved observer operators and the weights
//! attached to each branch.

use crate::hilbert::{kron, sum_ops, LinOp, ProductSpace};
use crate::sum::stable_sum;
use crate::tolerance::Tolerances;

/// One Everett branch: the observer-side operator `b_op`, the label
/// projector on the rest of the space, and the ready-state eigenvalue.
#[derive(Debug, Clone)]
pub struct Branch {
    pub index: usize,
    pub beta: f64,
    pub b_op: LinOp,
    pub label: LinOp,
}

/// `b(t) = Σ_i b_i ⊗ label_i`.
#[derive(Debug, Clone)]
pub struct BranchDecomposition {
    pub branches: Vec<Branch>,
}

impl BranchDecomposition {
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    /// Rebuild the full operator term by term.
    pub fn reassemble(&self) -> LinOp {
        let terms: Vec<LinOp> = self.branches.iter().map(|b| kron(&b.b_op, &b.label)).collect();
        let space: ProductSpace = terms[0].space().clone();
        sum_ops(&space, &terms)
    }

    /// Labels as a list, in branch order.
    pub fn labels(&self) -> Vec<&LinOp> {
        self.branches.iter().map(|b| &b.label).collect()
    }

    /// Worst deviation of the labels from a complete orthogonal family of
    /// projectors: idempotence, pairwise products, and completeness.
    pub fn label_algebra_deviation(&self) -> f64 {
        projector_family_deviation(&self.labels())
    }
}

/// Largest violation of `P_i P_j = δ_ij P_i` and `Σ P_i = 1` over a family.
pub fn projector_family_deviation(family: &[&LinOp]) -> f64 {
    let space = family[0].space().clone();
    let mut worst = 0.0_f64;
    for (i, p) in family.iter().enumerate() {
        worst = worst.max(p.projector_deviation());
        for q in &family[i + 1..] {
            worst = worst.max((*p * *q).max_abs());
        }
    }
    let total = sum_ops(&space, family.iter().copied());
    worst.max(total.max_abs_diff(&LinOp::identity(space)))
}

/// Which computation produced a set of weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    /// Closed-form grid sums over the initial amplitudes.
    Formula,
    /// Label-operator expectation values on the full space.
    Operator,
    /// Schrödinger evolution of the full state vector.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightEntry {
    pub index: usize,
    pub beta: f64,
    pub weight: f64,
}

/// Outcome-indexed weights. For finite-range models index 0 is the
/// "no measurement" branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchWeightReport {
    pub entries: Vec<WeightEntry>,
    pub sum: f64,
    pub provenance: Provenance,
}

impl BranchWeightReport {
    pub fn new(entries: Vec<WeightEntry>, provenance: Provenance) -> Self {
        let sum = stable_sum(entries.iter().map(|e| e.weight));
        Self {
            entries,
            sum,
            provenance,
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.weight).collect()
    }

    pub fn weight(&self, index: usize) -> Option<f64> {
        self.entries.iter().find(|e| e.index == index).map(|e| e.weight)
    }

    pub fn sum_deviation(&self) -> f64 {
        (self.sum - 1.0).abs()
    }

    /// Every weight in `[-slack, 1 + slack]`.
    pub fn in_range(&self, tol: &Tolerances) -> bool {
        self.entries
            .iter()
            .all(|e| e.weight >= -tol.weight_range && e.weight <= 1.0 + tol.weight_range)
    }

    /// Largest absolute entrywise difference, matching entries by index.
    pub fn max_abs_diff(&self, other: &BranchWeightReport) -> f64 {
        self.entries
            .iter()
            .map(|e| match other.weight(e.index) {
                Some(w) => (e.weight - w).abs(),
                None => f64::INFINITY,
            })
            .fold(0.0, f64::max)
    }
}
