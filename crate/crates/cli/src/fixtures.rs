//! Canonical configs shipped with the tool.

use std::f64::consts::FRAC_1_SQRT_2;

use crate::config::{
    BoundaryConfig, Complex, ExtractConfig, GridConfig, IdealConfig, MultiConfig, Scenario, ScenarioKind, SpatialConfig,
};

pub const FIXTURES: [&str; 6] = [
    "ideal-sym",
    "spatial-2pt",
    "mixture-equiv",
    "case1-sep",
    "case2-coincident",
    "extract-roundtrip",
];

fn re(x: f64) -> Complex {
    [x, 0.0]
}

fn line(n: usize, origin: i64) -> GridConfig {
    GridConfig {
        d: 1,
        n,
        spacing: 1.0,
        origin: Some(vec![origin]),
    }
}

pub fn fixture(name: &str) -> Option<Scenario> {
    Some(match name {
        "ideal-sym" => Scenario::Ideal(IdealConfig {
            scenario: ScenarioKind::Ideal,
            m: Some(2),
            psi: vec![re(FRAC_1_SQRT_2), re(FRAC_1_SQRT_2)],
            ..IdealConfig::default()
        }),
        // Observer pinned at ζ = 0 with zero reach: only ξ = 0 is measured.
        "spatial-2pt" => Scenario::Spatial(SpatialConfig {
            scenario: ScenarioKind::Spatial,
            m: Some(2),
            alphas: None,
            betas: None,
            tau: None,
            grid_x: line(2, 0),
            grid_z: line(2, 0),
            a: 0.0,
            boundary: BoundaryConfig::Closed,
            psi_xs: vec![
                vec![re(0.3f64.sqrt()), re(0.2f64.sqrt())],
                vec![re(0.1f64.sqrt()), re(0.4f64.sqrt())],
            ],
            psi_z: vec![re(1.0), re(0.0)],
            tolerances: None,
        }),
        "mixture-equiv" => {
            let mut row1 = vec![re(0.0); 9];
            let mut row2 = vec![re(0.0); 9];
            row1[3..6].copy_from_slice(&[re(0.4), re(0.5), re(0.3)]);
            row2[3..6].copy_from_slice(&[re(0.3), [0.0, 0.4], re(0.5)]);
            Scenario::MixtureEquivalence(SpatialConfig {
                scenario: ScenarioKind::MixtureEquivalence,
                m: Some(2),
                alphas: None,
                betas: None,
                tau: None,
                grid_x: line(9, -4),
                grid_z: line(3, -1),
                a: 1.0,
                boundary: BoundaryConfig::Closed,
                psi_xs: vec![row1, row2],
                psi_z: vec![re(0.5), [0.5, 0.5], re(0.5)],
                tolerances: None,
            })
        }
        "case1-sep" => Scenario::Case1(MultiConfig {
            scenario: ScenarioKind::Case1,
            m: Some(2),
            alphas: None,
            betas: None,
            tau: None,
            taus: None,
            gammas: None,
            grid_x: line(4, 0),
            grid_z: line(1, 0),
            a1: 1.0,
            a2: 1.0,
            d1: vec![0],
            d2: vec![3],
            boundary: BoundaryConfig::Closed,
            psi_xs: vec![
                vec![re(0.3f64.sqrt()), re(0.0), re(0.0), re(0.2f64.sqrt())],
                vec![re(0.1f64.sqrt()), re(0.0), re(0.0), re(0.4f64.sqrt())],
            ],
            psi_z: vec![re(1.0)],
            tolerances: None,
        }),
        "case2-coincident" => Scenario::Case2(MultiConfig {
            scenario: ScenarioKind::Case2,
            m: Some(2),
            alphas: None,
            betas: None,
            tau: None,
            taus: None,
            gammas: None,
            grid_x: line(1, 0),
            grid_z: line(1, 0),
            a1: 0.5,
            a2: 0.5,
            d1: vec![0],
            d2: vec![0],
            boundary: BoundaryConfig::Closed,
            psi_xs: vec![vec![re(0.6)], vec![re(0.8)]],
            psi_z: vec![re(1.0)],
            tolerances: None,
        }),
        "extract-roundtrip" => Scenario::Extract(ExtractConfig {
            scenario: ScenarioKind::Extract,
            m: 3,
            v_dim: 8,
            observer_dim: None,
            betas: None,
            trials: 50,
            seed: Some(42),
            tolerances: None,
        }),
        _ => return None,
    })
}
