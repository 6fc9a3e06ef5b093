//! `weights.csv` and `report.json`.

use std::fmt::Write as _;

use everett_core::{BranchWeightReport, JointWeightMatrix};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub tolerance: f64,
}

impl Check {
    /// Passes when `measured ≤ tolerance`.
    pub fn at_most(name: &str, measured: f64, tolerance: f64) -> Self {
        Self {
            name: name.to_string(),
            pass: measured <= tolerance,
            measured,
            tolerance,
        }
    }

    /// A yes/no condition, recorded as 0 (holds) or 1 (fails).
    pub fn holds(name: &str, ok: bool) -> Self {
        Self::at_most(name, if ok { 0.0 } else { 1.0 }, 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightRow {
    pub branch_index: usize,
    pub beta: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractedRow {
    pub branch_index: usize,
    pub beta: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Weights {
    Branches(Vec<WeightRow>),
    /// `W[i][j]`, `i, j = 0..M`.
    Joint(Vec<Vec<f64>>),
    Extracted(Vec<ExtractedRow>),
}

impl Weights {
    pub fn from_report(report: &BranchWeightReport) -> Self {
        Weights::Branches(
            report
                .entries
                .iter()
                .map(|e| WeightRow {
                    branch_index: e.index,
                    beta: e.beta,
                    weight: e.weight,
                })
                .collect(),
        )
    }

    pub fn from_joint(w: &JointWeightMatrix) -> Self {
        Weights::Joint(w.rows().to_vec())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        match self {
            Weights::Branches(rows) => {
                out.push_str("branch_index,beta,weight\n");
                for r in rows {
                    writeln!(out, "{},{},{}", r.branch_index, fmt_f64(r.beta), fmt_f64(r.weight)).unwrap();
                }
            }
            Weights::Joint(w) => {
                out.push_str("i,j,weight\n");
                for (i, row) in w.iter().enumerate() {
                    for (j, v) in row.iter().enumerate() {
                        writeln!(out, "{i},{j},{}", fmt_f64(*v)).unwrap();
                    }
                }
            }
            Weights::Extracted(rows) => {
                out.push_str("branch_index,beta,rank\n");
                for r in rows {
                    writeln!(out, "{},{},{}", r.branch_index, fmt_f64(r.beta), r.rank).unwrap();
                }
            }
        }
        out
    }
}

/// 17 significant digits; parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub total_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub tolerance_profile: String,
    pub seed: u64,
    pub weights: Weights,
    pub checks: Vec<Check>,
    pub timing: Timing,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}
