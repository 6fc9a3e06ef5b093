//! Acceptance criteria 1–10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use everett_cli::fixtures::{fixture, FIXTURES};
use everett_core::branch::projector_family_deviation;
use everett_core::extraction::{extract_decomposition, verify_uniqueness};
use everett_core::hilbert::{embed, heisenberg_evolve};
use everett_core::ideal::{build_ideal_unitary, ideal_branch_weights, system_observable};
use everett_core::mixture::{mixture_weights, verify_mixture_equivalence};
use everett_core::multi::{
    build_g_labels, check_case1, check_case2, g_of_t, joint_weights, unchanged_observables_deviation as multi_unchanged,
};
use everett_core::oracle::{oracle_ideal, oracle_spatial};
use everett_core::sampling::{
    random_branch_construction, random_case1_spec, random_case2_spec, random_distinct, random_ideal_spec,
    random_margin_spatial_spec, random_mixture_spec, random_multi_spec, random_spatial_spec,
};
use everett_core::spatial::{spatial_weights, unchanged_observables_deviation as spatial_unchanged};
use everett_core::{Error, ExtractionInput, IdealModelSpec, SpatialModelSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Criterion = (&'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rng(criterion: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0x5eed_0000 + criterion)
}

fn c1_unitarity() -> Verdict {
    let mut rng = rng(1);
    let mut worst = [0.0_f64; 4];
    for _ in 0..1000 {
        let m = rng.random_range(1..=6);
        let w = ideal_branch_weights(&random_ideal_spec(&mut rng, m));
        worst[0] = worst[0].max((w.weights().iter().sum::<f64>() - 1.0).abs());

        let m = rng.random_range(1..=4);
        let d = rng.random_range(1..=3);
        let n = if d == 1 {
            rng.random_range(1..=8)
        } else {
            rng.random_range(1..=3)
        };
        let nz = rng.random_range(1..=n);
        let w = spatial_weights(&random_spatial_spec(&mut rng, m, d, n, nz));
        worst[1] = worst[1].max((w.weights().iter().sum::<f64>() - 1.0).abs());

        let (s, r) = (rng.random_range(0..=2), rng.random_range(0..=2));
        let w = mixture_weights(&random_mixture_spec(&mut rng, m, d.min(2), s, r));
        worst[2] = worst[2].max((w.weights().iter().sum::<f64>() - 1.0).abs());

        let w = joint_weights(&random_multi_spec(&mut rng, m, d, n, nz));
        worst[3] = worst[3].max((w.sum() - 1.0).abs());
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    verdict(
        max <= 1e-10,
        format!(
            "ideal {:.1e}, spatial {:.1e}, mixture {:.1e}, multi {:.1e} (1000 specs each)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}

fn c2_born() -> Verdict {
    let mut rng = rng(2);
    let (mut born, mut oracle) = (0.0_f64, 0.0_f64);
    for k in 0..1000 {
        let spec = random_ideal_spec(&mut rng, 1 + k % 6);
        let w = ideal_branch_weights(&spec);
        let o = oracle_ideal(&spec);
        for e in &w.entries {
            born = born.max((e.weight - spec.psi()[e.index - 1].norm_sqr()).abs());
            oracle = oracle.max((e.weight - o.probabilities[e.index]).abs());
        }
    }
    verdict(
        born <= 1e-12 && oracle <= 1e-12,
        format!("|psi|^2 {born:.1e}, oracle {oracle:.1e}"),
    )
}

fn spatial_oracle_gap(spec: &SpatialModelSpec) -> f64 {
    let w = spatial_weights(spec);
    let o = oracle_spatial(spec).expect("within dim cap");
    w.entries
        .iter()
        .map(|e| (e.weight - o.probabilities[e.index]).abs())
        .chain(std::iter::once((o.sum() - 1.0).abs()))
        .fold(0.0, f64::max)
}

fn c3_spatial_oracle() -> Verdict {
    let mut rng = rng(3);
    let (mut worst, mut largest, mut d3) = (0.0_f64, 0, 0);
    for k in 0..100 {
        let spec = match k % 4 {
            0 | 1 => {
                let m = rng.random_range(1..=2);
                let nx = rng.random_range(1..=8);
                let nz = rng.random_range(1..=8);
                random_spatial_spec(&mut rng, m, 1, nx, nz)
            }
            2 => {
                let m = rng.random_range(1..=3);
                let nz = rng.random_range(1..=2);
                random_spatial_spec(&mut rng, m, 2, 2, nz)
            }
            _ => {
                d3 += 1;
                random_spatial_spec(&mut rng, 1, 3, 2, 2)
            }
        };
        assert!(spec.total_dim() <= 4096);
        largest = largest.max(spec.total_dim());
        worst = worst.max(spatial_oracle_gap(&spec));
    }
    verdict(
        worst <= 1e-10,
        format!("max deviation {worst:.1e} over 100 specs ({d3} with d=3, n=2; largest dim {largest})"),
    )
}

fn c4_mixture_equivalence() -> Verdict {
    let mut rng = rng(4);
    let mut worst = 0.0_f64;
    let mut ok = true;
    for _ in 0..100 {
        let m = rng.random_range(1..=3);
        let d = rng.random_range(1..=2);
        let (s, r) = (rng.random_range(0..=2), rng.random_range(0..=2));
        let spec = random_margin_spatial_spec(&mut rng, m, d, s, r);
        match verify_mixture_equivalence(&spec) {
            Ok(eq) => {
                worst = worst.max(eq.max_difference());
                ok &= eq.pass();
            }
            Err(_) => ok = false,
        }
    }
    verdict(
        ok && worst <= 1e-12,
        format!("max deviation {worst:.1e} over 100 specs"),
    )
}

fn c5_case1() -> Verdict {
    let mut rng = rng(5);
    let mut worst = 0.0_f64;
    let mut rejected = 0;
    for _ in 0..100 {
        let m = rng.random_range(1..=3);
        let d = rng.random_range(1..=2);
        let (nx, nz) = (rng.random_range(2..=6), rng.random_range(1..=3));
        let spec = random_case1_spec(&mut rng, m, d, nx, nz);
        match check_case1(&spec) {
            Ok(r) => worst = worst.max(r.both_measured_max),
            Err(_) => rejected += 1,
        }
    }
    verdict(
        rejected == 0 && worst <= 1e-14,
        format!("max both-measured weight {worst:.1e}, {rejected} rejected"),
    )
}

fn c6_case2() -> Verdict {
    let mut rng = rng(6);
    let (mut worst, mut mass) = (0.0_f64, 0.0_f64);
    let mut rejected = 0;
    for _ in 0..100 {
        let m = rng.random_range(1..=3);
        let d = rng.random_range(1..=2);
        let (nx, nz) = (rng.random_range(1..=6), rng.random_range(1..=3));
        let spec = random_case2_spec(&mut rng, m, d, nx, nz);
        match check_case2(&spec) {
            Ok(r) => {
                worst = worst.max(r.disagreement_max);
                mass = mass.max((r.diagonal_mass - 1.0).abs());
            }
            Err(_) => rejected += 1,
        }
    }
    verdict(
        rejected == 0 && worst <= 1e-14,
        format!("max off-diagonal weight {worst:.1e}, diagonal mass gap {mass:.1e}, {rejected} rejected"),
    )
}

fn c7_label_algebra() -> Verdict {
    let mut rng = rng(7);
    let (mut algebra, mut two_path) = (0.0_f64, 0.0_f64);
    for _ in 0..10 {
        let spec = random_multi_spec(&mut rng, 1, 1, 2, 2);
        let labels = build_g_labels(&spec).expect("small instance");
        let refs: Vec<_> = labels.iter().collect();
        algebra = algebra.max(projector_family_deviation(&refs));
        let (evolved, dec) = g_of_t(&spec).expect("small instance");
        two_path = two_path.max(evolved.max_abs_diff(&dec.reassemble()));
    }
    verdict(
        algebra <= 1e-10 && two_path <= 1e-10,
        format!("label algebra {algebra:.1e}, g(t) two-path {two_path:.1e} (M=1, 10 instances)"),
    )
}

fn c8_extraction() -> Verdict {
    let mut rng = rng(8);
    let (mut projector, mut residual, mut recovered) = (0.0_f64, 0.0_f64, 0.0_f64);
    let (mut unique_failures, mut not_rejected, mut errors) = (0, 0, 0);
    for _ in 0..200 {
        let m = rng.random_range(1..=4);
        let branches = m + 1;
        let v_dim = rng.random_range(4.max(branches)..=12);
        let betas = random_distinct(&mut rng, branches, -4.0, 4.0, 1e-2);
        let built = random_branch_construction(&mut rng, &betas, branches, v_dim);
        let input = ExtractionInput::new(built.op.clone(), built.reference.clone(), branches).expect("valid input");
        let out = match extract_decomposition(&input) {
            Ok(out) => out,
            Err(_) => {
                errors += 1;
                continue;
            }
        };
        projector = projector.max(out.projector_deviation());
        residual = residual.max(out.residual);
        let mut want = built.branches.clone();
        want.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (got, (beta, b, q)) in out.branches.iter().zip(&want) {
            recovered = recovered
                .max((got.beta - beta).abs())
                .max(got.label.max_abs_diff(q))
                .max(got.b_op.max_abs_diff(b));
        }
        match verify_uniqueness(&input, 50, &mut rng) {
            Ok(r) if r.pass() && r.trials == 50 => {}
            _ => unique_failures += 1,
        }

        let mut degenerate = betas.clone();
        degenerate[1] = degenerate[0];
        let bad = random_branch_construction(&mut rng, &degenerate, branches, v_dim);
        let bad_input = ExtractionInput::new(bad.op, bad.reference, branches).expect("valid input");
        if !matches!(
            extract_decomposition(&bad_input),
            Err(Error::BranchCountMismatch { .. })
        ) {
            not_rejected += 1;
        }
    }
    verdict(
        errors == 0
            && projector <= 1e-9
            && residual <= 1e-10
            && recovered <= 1e-9
            && unique_failures == 0
            && not_rejected == 0,
        format!(
            "projector {projector:.1e}, residual {residual:.1e}, recovery {recovered:.1e}, \
             uniqueness failures {unique_failures}, degenerate accepted {not_rejected}, errors {errors}"
        ),
    )
}

fn ideal_unchanged(spec: &IdealModelSpec) -> f64 {
    let sp = spec.spaces();
    let a = embed(&system_observable(&sp.system, spec.alphas()), &sp.joint).unwrap();
    heisenberg_evolve(&a, &build_ideal_unitary(spec))
        .unwrap()
        .max_abs_diff(&a)
}

fn c9_invariance() -> Verdict {
    let mut rng = rng(9);
    let mut worst = [0.0_f64; 3];
    for _ in 0..20 {
        let m = rng.random_range(1..=6);
        worst[0] = worst[0].max(ideal_unchanged(&random_ideal_spec(&mut rng, m)));
        let m = rng.random_range(1..=2);
        let d = rng.random_range(1..=2);
        let n = if d == 1 { rng.random_range(1..=6) } else { 2 };
        let nz = rng.random_range(1..=n);
        let spec = random_spatial_spec(&mut rng, m, d, n, nz);
        worst[1] = worst[1].max(spatial_unchanged(&spec).unwrap());
        let (nx, nz) = (rng.random_range(1..=3), rng.random_range(1..=2));
        let spec = random_multi_spec(&mut rng, 1, 1, nx, nz);
        worst[2] = worst[2].max(multi_unchanged(&spec).unwrap());
    }
    let max = worst.iter().copied().fold(0.0, f64::max);
    verdict(
        max <= 1e-12,
        format!(
            "ideal {:.1e}, spatial {:.1e}, multi {:.1e} (20 specs each)",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn run_cli(config: &Path, out: &Path) -> Option<i32> {
    Command::new(env!("CARGO_BIN_EXE_everett-hm"))
        .env_remove("EVERETT_HM_OUT")
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .ok()?
        .status
        .code()
}

fn c10_cli() -> Verdict {
    let tmp = TempDir::new().unwrap();
    let mut problems = Vec::new();
    for name in FIXTURES {
        let cfg = tmp.path().join(format!("{name}.json"));
        fs::write(&cfg, fixture(name).unwrap().to_json()).unwrap();
        let mut csvs = Vec::new();
        for run in 0..2 {
            let out = tmp.path().join(format!("{name}-{run}"));
            let code = run_cli(&cfg, &out);
            if code != Some(0) {
                problems.push(format!("{name} exit {code:?}"));
            }
            csvs.push(fs::read(out.join("weights.csv")).unwrap_or_default());
        }
        if csvs[0].is_empty() || csvs[0] != csvs[1] {
            problems.push(format!("{name} weights.csv differs"));
        }
    }
    let bad = tmp.path().join("bad.json");
    fs::write(&bad, r#"{"scenario": "ideal", "psi": [[0.9, 0.0]]}"#).unwrap();
    let code = run_cli(&bad, &tmp.path().join("bad"));
    if code != Some(2) {
        problems.push(format!("invalid config exit {code:?}"));
    }
    let failing = tmp.path().join("failing.json");
    fs::write(
        &failing,
        r#"{"scenario": "mixture", "grid_x": {"d": 1, "n": 2, "spacing": 1.0},
            "grid_z": {"d": 1, "n": 2, "spacing": 1.0}, "a": 0.5,
            "psi_xs": [[[1.0, 0.0], [0.0, 0.0]]], "p": [0.5, 0.5]}"#,
    )
    .unwrap();
    let code = run_cli(&failing, &tmp.path().join("failing"));
    if code != Some(1) {
        problems.push(format!("failing check exit {code:?}"));
    }
    verdict(
        problems.is_empty(),
        if problems.is_empty() {
            format!(
                "{} fixtures byte-identical and exit 0; invalid exits 2; failing exits 1",
                FIXTURES.len()
            )
        } else {
            problems.join("; ")
        },
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("weights sum to one", c1_unitarity),
        ("Born consistency (ideal)", c2_born),
        ("formula/oracle equivalence (spatial)", c3_spatial_oracle),
        ("mixture equivalence", c4_mixture_equivalence),
        ("separated observers", c5_case1),
        ("coincident observers", c6_case2),
        ("label algebra (M=1)", c7_label_algebra),
        ("extraction round trip", c8_extraction),
        ("Heisenberg invariance", c9_invariance),
        ("CLI determinism and exit codes", c10_cli),
    ];
    let started = Instant::now();
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let v = run();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        if !v.pass {
            failed += 1;
        }
        println!(
            "{tag} criterion {:>2}: {name}: {} [{:.2}s]",
            k + 1,
            v.detail,
            t.elapsed().as_secs_f64()
        );
    }
    println!(
        "{} of 10 criteria passed in {:.1}s",
        10 - failed,
        started.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
