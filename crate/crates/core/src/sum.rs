//! Compensated summation with a fixed accumulation order.

use std::ops::AddAssign;

/// Neumaier-compensated running sum.
///
/// Results depend only on the order values are added, so grid sums that
/// visit points in a fixed order are bit-reproducible.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.compensation += (self.sum - t) + value;
        } else {
            self.compensation += (value - t) + self.sum;
        }
        self.sum = t;
    }

    /// Fold another partial sum into this one.
    pub fn merge(&mut self, other: &CompensatedSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

impl AddAssign<f64> for CompensatedSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for v in iter {
            acc.add(v);
        }
        acc
    }
}

/// Compensated sum of a sequence in iteration order.
pub fn stable_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    values.into_iter().collect::<CompensatedSum>().value()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_cancelled_small_terms() {
        let naive: f64 = [1.0, 1e-16, 1e-16, -1.0].iter().sum();
        assert_eq!(naive, 0.0);
        let s = stable_sum([1.0, 1e-16, 1e-16, -1.0]);
        assert!((s - 2e-16).abs() < 1e-30);
    }

    #[test]
    fn tenths_sum_to_one() {
        let s = stable_sum(std::iter::repeat_n(0.1, 10));
        assert_eq!(s, 1.0);
    }

    #[test]
    fn merge_matches_single_pass() {
        let values: Vec<f64> = (1..=1000).map(|k| 1.0 / k as f64).collect();
        let whole = stable_sum(values.iter().copied());
        let mut left: CompensatedSum = values[..500].iter().copied().collect();
        let right: CompensatedSum = values[500..].iter().copied().collect();
        left.merge(&right);
        assert!((left.value() - whole).abs() < 1e-15);
    }
}
