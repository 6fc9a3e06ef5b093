//! One function per scenario: build the model, compute weights, run checks.

use everett_core::branch::projector_family_deviation;
use everett_core::extraction::{extract_decomposition_with, verify_uniqueness, ExtractionInput};
use everett_core::hilbert::{embed, expectation, heisenberg_evolve};
use everett_core::ideal::{
    build_ideal_unitary, ideal_b_of_t, ideal_branch_weights, ideal_initial_state, system_observable,
};
use everett_core::mixture::{mixture_weights, mixture_weights_density, verify_mixture_equivalence_with};
use everett_core::multi::{
    build_g_labels, check_case1, check_case2, g_of_t, joint_weights, joint_weights_operator,
    unchanged_observables_deviation as multi_unchanged,
};
use everett_core::oracle::{oracle_ideal, oracle_multi, oracle_spatial};
use everett_core::sampling::{random_branch_construction, random_distinct};
use everett_core::spatial::{
    spatial_b_of_t, spatial_weights, spatial_weights_operator, unchanged_observables_deviation as spatial_unchanged,
};
use everett_core::{
    BranchWeightReport, Error, IdealModelSpec, MixtureSpec, MultiObserverSpec, SpatialModelSpec, Tolerances,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{
    boundary, complex, complex_rows, grid, label_spec, labels, lattice, ConfigError, ExtractConfig, IdealConfig,
    MixtureConfig, MultiConfig, Scenario, SpatialConfig,
};
use crate::report::{Check, ExtractedRow, Weights};

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    /// The config parsed but describes an invalid model.
    Invalid(String),
    Io(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Invalid(msg) => write!(f, "invalid model: {msg}"),
            RunError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<Error> for RunError {
    fn from(e: Error) -> Self {
        RunError::Invalid(e.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub weights: Weights,
    pub checks: Vec<Check>,
}

pub fn run_scenario(scenario: &Scenario, tol: &Tolerances, seed: u64) -> Result<Outcome, RunError> {
    match scenario {
        Scenario::Ideal(c) => ideal(c, tol),
        Scenario::Spatial(c) => spatial(c, tol),
        Scenario::Mixture(c) => mixture(c, tol),
        Scenario::MixtureEquivalence(c) => mixture_equivalence(c, tol),
        Scenario::MultiObserver(c) => multi(c, tol),
        Scenario::Case1(c) => case1(c, tol),
        Scenario::Case2(c) => case2(c, tol),
        Scenario::Extract(c) => extract(c, tol, c.seed.unwrap_or(seed)),
        Scenario::OracleCompare(_, model) => oracle_compare(model, tol),
    }
}

pub fn ideal_spec(c: &IdealConfig) -> Result<IdealModelSpec, RunError> {
    let (alphas, betas, tau) = labels(c.m, c.psi.len(), &c.alphas, &c.betas, c.tau)?;
    Ok(IdealModelSpec::new(alphas, betas, tau, complex(&c.psi))?)
}

pub fn spatial_spec(c: &SpatialConfig) -> Result<SpatialModelSpec, RunError> {
    let labels = label_spec(c.m, c.psi_xs.len(), &c.alphas, &c.betas, c.tau)?;
    let spec = SpatialModelSpec::new(
        &labels,
        grid("grid_x", &c.grid_x)?,
        grid("grid_z", &c.grid_z)?,
        c.a,
        complex_rows(&c.psi_xs),
        complex(&c.psi_z),
    )?;
    Ok(spec.with_boundary(boundary(c.boundary)))
}

pub fn mixture_spec(c: &MixtureConfig) -> Result<MixtureSpec, RunError> {
    let labels = label_spec(c.m, c.psi_xs.len(), &c.alphas, &c.betas, c.tau)?;
    let spec = MixtureSpec::new(
        &labels,
        grid("grid_x", &c.grid_x)?,
        grid("grid_z", &c.grid_z)?,
        c.a,
        complex_rows(&c.psi_xs),
        c.p.clone(),
    )?;
    Ok(spec.with_boundary(boundary(c.boundary)))
}

pub fn multi_spec(c: &MultiConfig) -> Result<MultiObserverSpec, RunError> {
    let labels = label_spec(c.m, c.psi_xs.len(), &c.alphas, &c.betas, c.tau)?;
    let mut spec = MultiObserverSpec::new(
        &labels,
        grid("grid_x", &c.grid_x)?,
        grid("grid_z", &c.grid_z)?,
        [c.a1, c.a2],
        [lattice(&c.d1), lattice(&c.d2)],
        complex_rows(&c.psi_xs),
        complex(&c.psi_z),
    )?
    .with_boundary(boundary(c.boundary));
    if let Some(taus) = c.taus {
        spec = spec.with_taus(taus)?;
    }
    if let Some(gammas) = &c.gammas {
        spec = spec.with_gammas(gammas.clone())?;
    }
    Ok(spec)
}

fn range_excess(report: &BranchWeightReport) -> f64 {
    report
        .entries
        .iter()
        .map(|e| (-e.weight).max(e.weight - 1.0).max(0.0))
        .fold(0.0, f64::max)
}

fn weight_checks(prefix: &str, report: &BranchWeightReport, tol: &Tolerances) -> Vec<Check> {
    vec![
        Check::at_most(&format!("{prefix}.weights_sum"), report.sum_deviation(), tol.weight_sum),
        Check::at_most(
            &format!("{prefix}.weights_range"),
            range_excess(report),
            tol.weight_range,
        ),
    ]
}

fn oracle_deviation(report: &BranchWeightReport, probabilities: &[f64]) -> f64 {
    report
        .entries
        .iter()
        .map(|e| (probabilities[e.index] - e.weight).abs())
        .fold(0.0, f64::max)
}

fn ideal(c: &IdealConfig, tol: &Tolerances) -> Result<Outcome, RunError> {
    let spec = ideal_spec(c)?;
    let w = ideal_branch_weights(&spec);
    let mut checks = weight_checks("ideal", &w, tol);
    let born = w
        .entries
        .iter()
        .zip(spec.psi())
        .map(|(e, a)| (e.weight - a.norm_sqr()).abs())
        .fold(0.0, f64::max);
    checks.push(Check::at_most("ideal.born_rule", born, tol.equivalence));

    let sp = spec.spaces();
    let psi = ideal_initial_state(&spec);
    let (_, dec) = ideal_b_of_t(&spec)?;
    let mut op_dev = 0.0_f64;
    for br in &dec.branches {
        let label = embed(&br.label, &sp.joint)?;
        op_dev = op_dev.max((expectation(&psi, &label)?.re - w.weight(br.index).unwrap_or(f64::NAN)).abs());
    }
    checks.push(Check::at_most("ideal.operator_path", op_dev, tol.operator_match));
    checks.push(Check::at_most(
        "ideal.label_algebra",
        dec.label_algebra_deviation(),
        tol.projector,
    ));

    let oracle = oracle_ideal(&spec);
    checks.push(Check::at_most(
        "ideal.oracle",
        oracle_deviation(&w, &oracle.probabilities),
        tol.equivalence,
    ));

    let a = embed(&system_observable(&sp.system, spec.alphas()), &sp.joint)?;
    let at = heisenberg_evolve(&a, &build_ideal_unitary(&spec))?;
    checks.push(Check::at_most(
        "ideal.unchanged_observables",
        at.max_abs_diff(&a),
        tol.invariance,
    ));
    Ok(Outcome {
        weights: Weights::from_report(&w),
        checks,
    })
}

fn spatial(c: &SpatialConfig, tol: &Tolerances) -> Result<Outcome, RunError> {
    let spec = spatial_spec(c)?;
    let w = spatial_weights(&spec);
    let mut checks = weight_checks("spatial", &w, tol);
    if spec.total_dim() <= tol.dim_cap {
        let o = spatial_weights_operator(&spec)?;
        checks.push(Check::at_most(
            "spatial.operator_path",
            w.max_abs_diff(&o),
            tol.operator_match,
        ));
        let (_, dec) = spatial_b_of_t(&spec)?;
        checks.push(Check::at_most(
            "spatial.label_algebra",
            dec.label_algebra_deviation(),
            tol.projector,
        ));
        let oracle = oracle_spatial(&spec)?;
        checks.push(Check::at_most(
            "spatial.oracle",
            oracle_deviation(&w, &oracle.probabilities),
            tol.operator_match,
        ));
        checks.push(Check::at_most(
            "spatial.unchanged_observables",
            spatial_unchanged(&spec)?,
            tol.invariance,
        ));
    }
    Ok(Outcome {
        weights: Weights::from_report(&w),
        checks,
    })
}

fn mixture(c: &MixtureConfig, tol: &Tolerances) -> Result<Outcome, RunError> {
    let spec = mixture_spec(c)?;
    let w = mixture_weights(&spec);
    let margin = spec.check_margin().is_ok();
    let mut checks = vec![Check::holds("mixture.margin", margin)];
    checks.extend(weight_checks("mixture", &w, tol));
    // Clipped members leave rho with trace below one.
    if margin && spec.total_dim() <= tol.dim_cap {
        let d = mixture_weights_density(&spec)?;
        checks.push(Check::at_most(
            "mixture.density_path",
            w.max_abs_diff(&d),
            tol.operator_match,
        ));
    }
    Ok(Outcome {
        weights: Weights::from_report(&w),
        checks,
    })
}

fn mixture_equivalence(c: &SpatialConfig, tol: &Tolerances) -> Result<Outcome, RunError> {
    let spec = spatial_spec(c)?;
    let eq = verify_mixture_equivalence_with(&spec, tol)?;
    let mix = MixtureSpec::from_spatial(&spec)?;
    let mut checks = vec![Check::holds("mixture.margin", mix.check_margin().is_ok())];
    checks.extend(weight_checks("spatial", &eq.spatial, tol));
    checks.extend(weight_checks("mixture", &eq.mixture, tol));
    checks.push(Check::at_most(
        "mixture.equivalence",
        eq.max_difference(),
        tol.equivalence,
    ));
    Ok(Outcome {
        weights: Weights::from_report(&eq.mixture),
        checks,
    })
}

fn joint_checks(
    spec: &MultiObserverSpec,
    w: &everett_core::JointWeightMatrix,
    tol: &Tolerances,
) -> Result<Vec<Check>, RunError> {
    let mut checks = vec![
        Check::at_most("multi.weights_sum", (w.sum() - 1.0).abs(), tol.weight_sum),
        Check::at_most("multi.weights_nonnegative", (-w.min()).max(0.0), tol.weight_range),
    ];
    if spec.total_dim() <= tol.dim_cap {
        let o = joint_weights_operator(spec)?;
        checks.push(Check::at_most(
            "multi.operator_path",
            w.max_abs_diff(&o),
            tol.operator_match,
        ));
        let labels = build_g_labels(spec)?;
        let refs: Vec<_> = labels.iter().collect();
        checks.push(Check::at_most(
            "multi.label_algebra",
            projector_family_deviation(&refs),
            tol.projector,
        ));
        let (evolved, dec) = g_of_t(spec)?;
        checks.push(Check::at_most(
            "multi.g_two_path",
            evolved.max_abs_diff(&dec.reassemble()),
            tol.operator_match,
        ));
        let oracle = oracle_multi(spec)?;
        checks.push(Check::at_most(
            "multi.oracle",
            w.max_abs_diff(&oracle.joint),
            tol.operator_match,
        ));
        checks.push(Check::at_most(
            "multi.unchanged_observables",
            multi_unchanged(spec)?,
            tol.invariance,
        ));
    }
    Ok(checks)
}

fn multi(c: &MultiConfig, tol: &Tolerances) -> Result<Outcome, RunError> {
    let spec = multi_spec(c)?;
    let w = joint_weights(&spec);
    let checks = joint_checks(&spec, &w, tol)?;
    Ok(Outcome {
        weights: Weights::from_joint(&w),
        checks,
    })
}

fn case1(c: &MultiConfig, tol: &Tolerances) -> Result<Outcome, RunError> {
    let spec = multi_spec(c)?;
    let report = check_case1(&spec)?;
    let mut checks = vec![Check::at_most(
        "case1.both_measured_block",
        report.both_measured_max,
        tol.exact_zero,
    )];
    checks.extend(joint_checks(&spec, &report.weights, tol)?);
    Ok(Outcome {
        weights: Weights::from_joint(&report.weights),
        checks,
    })
}

fn case2(c: &MultiConfig, tol: &Tolerances) -> Result<Outcome, RunError> {
    let spec = multi_spec(c)?;
    let report = check_case2(&spec)?;
    let mut checks = vec![
        Check::at_most("case2.disagreement", report.disagreement_max, tol.exact_zero),
        Check::at_most(
            "case2.diagonal_mass",
            (report.diagonal_mass - 1.0).abs(),
            tol.weight_sum,
        ),
    ];
    checks.extend(joint_checks(&spec, &report.weights, tol)?);
    Ok(Outcome {
        weights: Weights::from_joint(&report.weights),
        checks,
    })
}

fn extract(c: &ExtractConfig, tol: &Tolerances, seed: u64) -> Result<Outcome, RunError> {
    let branches = c.m + 1;
    if c.m == 0 {
        return Err(ConfigError::field("m", "at least one outcome is required").into());
    }
    if c.v_dim < branches {
        return Err(ConfigError::field(
            "v_dim",
            format!("needs at least {branches} dimensions for {branches} branches"),
        )
        .into());
    }
    let observer_dim = c.observer_dim.unwrap_or(branches);
    if observer_dim == 0 {
        return Err(ConfigError::field("observer_dim", "must be at least 1").into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let betas = match &c.betas {
        Some(b) if b.len() != branches => {
            return Err(ConfigError::field("betas", format!("expected {branches} entries, found {}", b.len())).into())
        }
        Some(b) => b.clone(),
        None => random_distinct(&mut rng, branches, -4.0, 4.0, 1e-2),
    };
    let built = random_branch_construction(&mut rng, &betas, observer_dim, c.v_dim);
    let input = ExtractionInput::new(built.op.clone(), built.reference.clone(), branches)?;
    let out = extract_decomposition_with(&input, tol)?;

    let mut want = built.branches.clone();
    want.sort_by(|a, b| a.0.total_cmp(&b.0));
    let recovered = out
        .branches
        .iter()
        .zip(&want)
        .map(|(got, (beta, b, q))| {
            (got.beta - beta)
                .abs()
                .max(got.label.max_abs_diff(q))
                .max(got.b_op.max_abs_diff(b))
        })
        .fold(0.0, f64::max);
    let unique = verify_uniqueness(&input, c.trials, &mut rng)?;

    // Merge the two lowest branches' eigenvalues; the tool must refuse.
    let mut degenerate = betas.clone();
    let lowest = (0..branches)
        .min_by(|&a, &b| betas[a].total_cmp(&betas[b]))
        .expect("non-empty");
    let partner = if lowest == 0 { 1 } else { 0 };
    degenerate[partner] = betas[lowest];
    let rejected = if branches >= 2 {
        let bad = random_branch_construction(&mut rng, &degenerate, observer_dim, c.v_dim);
        let bad_input = ExtractionInput::new(bad.op, bad.reference, branches)?;
        matches!(
            extract_decomposition_with(&bad_input, tol),
            Err(Error::BranchCountMismatch { .. })
        )
    } else {
        true
    };

    let checks = vec![
        Check::at_most("extract.residual", out.residual, tol.residual),
        Check::at_most("extract.projector_family", out.projector_deviation(), tol.residual),
        Check::holds(
            "extract.eigenvector_partition",
            out.eigenvectors_partitioned(tol.cluster),
        ),
        Check::at_most("extract.construction_recovered", recovered, tol.residual),
        Check::at_most(
            "extract.uniqueness",
            if unique.failures > 0 {
                f64::INFINITY
            } else {
                unique.worst_beta_deviation.max(unique.worst_projector_deviation)
            },
            unique.tolerance,
        ),
        Check::holds("extract.degenerate_rejected", rejected),
    ];
    let rows = out
        .branches
        .iter()
        .zip(&out.bases)
        .map(|(b, basis)| ExtractedRow {
            branch_index: b.index,
            beta: b.beta,
            rank: basis.ncols(),
        })
        .collect();
    Ok(Outcome {
        weights: Weights::Extracted(rows),
        checks,
    })
}

fn oracle_compare(model: &Scenario, tol: &Tolerances) -> Result<Outcome, RunError> {
    match model {
        Scenario::Ideal(c) => {
            let spec = ideal_spec(c)?;
            let w = ideal_branch_weights(&spec);
            let oracle = oracle_ideal(&spec);
            Ok(oracle_outcome(&w, &oracle.probabilities, tol.equivalence, tol))
        }
        Scenario::Spatial(c) => {
            let spec = spatial_spec(c)?;
            let w = spatial_weights(&spec);
            let oracle = oracle_spatial(&spec)?;
            Ok(oracle_outcome(&w, &oracle.probabilities, tol.operator_match, tol))
        }
        Scenario::MultiObserver(c) => {
            let spec = multi_spec(c)?;
            let w = joint_weights(&spec);
            let oracle = oracle_multi(&spec)?;
            Ok(Outcome {
                weights: Weights::from_joint(&oracle.joint),
                checks: vec![
                    Check::at_most(
                        "oracle.formula_agreement",
                        w.max_abs_diff(&oracle.joint),
                        tol.operator_match,
                    ),
                    Check::at_most("oracle.sum", (oracle.sum() - 1.0).abs(), tol.weight_sum),
                    Check::at_most("oracle.verifier_ready", oracle.ready, tol.weight_range),
                ],
            })
        }
        other => Err(RunError::Invalid(format!("no oracle for {}", other.kind().name()))),
    }
}

fn oracle_outcome(w: &BranchWeightReport, probabilities: &[f64], agreement: f64, tol: &Tolerances) -> Outcome {
    let rows = probabilities
        .iter()
        .enumerate()
        .filter_map(|(i, &p)| {
            w.entries
                .iter()
                .find(|e| e.index == i)
                .map(|e| crate::report::WeightRow {
                    branch_index: i,
                    beta: e.beta,
                    weight: p,
                })
        })
        .collect();
    let sum: f64 = probabilities.iter().sum();
    Outcome {
        weights: Weights::Branches(rows),
        checks: vec![
            Check::at_most(
                "oracle.formula_agreement",
                oracle_deviation(w, probabilities),
                agreement,
            ),
            Check::at_most("oracle.sum", (sum - 1.0).abs(), tol.weight_sum),
        ],
    }
}
