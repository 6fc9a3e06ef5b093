use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use everett_core::Tolerances;

use crate::config::parse_config;
use crate::fixtures::{fixture, FIXTURES};
use crate::report::{RunReport, Timing};
use crate::scenarios::{run_scenario, RunError};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    Default,
    Strict,
}

impl Profile {
    pub fn tolerances(self) -> Tolerances {
        match self {
            Profile::Default => Tolerances::DEFAULT,
            Profile::Strict => Tolerances::STRICT,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Profile::Default => "default",
            Profile::Strict => "strict",
        }
    }
}

/// Run an Everett measurement-model scenario and write `weights.csv` and
/// `report.json`.
///
/// Exit status: 0 when every check passes, 1 when a check fails, 2 when
/// the config is unreadable or describes an invalid model.
#[derive(Debug, Parser)]
#[command(name = "everett-hm", version, subcommand_negates_reqs = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Option<Command>,

    /// Scenario config (JSON).
    #[arg(long, value_name = "PATH", required = true)]
    pub config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, value_name = "DIR", env = "EVERETT_HM_OUT", default_value = "out")]
    pub out: PathBuf,

    /// RNG seed for randomized scenarios [default: 42].
    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, value_enum, default_value_t = Profile::Default)]
    pub tolerance_profile: Profile,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a shipped fixture config as `<NAME>.json`.
    Fixture {
        /// Fixture name; omit with --list.
        name: Option<String>,
        #[arg(long)]
        list: bool,
        #[arg(long, value_name = "DIR", default_value = ".")]
        out: PathBuf,
    },
}

/// Run the config at `path` and write artifacts under `out`.
pub fn run_config(path: &Path, out: &Path, seed: u64, profile: Profile) -> Result<RunReport, RunError> {
    let started = Instant::now();
    let text = fs::read_to_string(path).map_err(|e| RunError::Io(format!("cannot read {}: {e}", path.display())))?;
    let scenario = parse_config(&text)?;
    let tol = match scenario.tolerances() {
        Some(over) => over.apply(profile.tolerances()),
        None => profile.tolerances(),
    };
    let outcome = run_scenario(&scenario, &tol, seed)?;
    let report = RunReport {
        scenario: scenario.kind().name().to_string(),
        tolerance_profile: profile.name().to_string(),
        seed,
        weights: outcome.weights,
        checks: outcome.checks,
        timing: Timing {
            total_seconds: started.elapsed().as_secs_f64(),
        },
    };
    write_artifacts(out, &report)?;
    Ok(report)
}

fn write_artifacts(out: &Path, report: &RunReport) -> Result<(), RunError> {
    let io = |e: std::io::Error| RunError::Io(format!("cannot write to {}: {e}", out.display()));
    fs::create_dir_all(out).map_err(io)?;
    fs::write(out.join("weights.csv"), report.weights.to_csv()).map_err(io)?;
    fs::write(out.join("report.json"), report.to_json()).map_err(io)?;
    Ok(())
}

pub fn write_fixture(name: &str, dir: &Path) -> Result<PathBuf, RunError> {
    let cfg = fixture(name)
        .ok_or_else(|| RunError::Invalid(format!("unknown fixture `{name}`; known: {}", FIXTURES.join(", "))))?;
    let io = |e: std::io::Error| RunError::Io(format!("cannot write to {}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let path = dir.join(format!("{name}.json"));
    fs::write(&path, cfg.to_json()).map_err(io)?;
    Ok(path)
}

/// Entry point shared by the binary and tests; returns the exit status.
pub fn main_with(cli: Cli, stdout: &mut impl Write, stderr: &mut impl Write) -> i32 {
    if let Some(Command::Fixture { name, list, out }) = cli.command {
        if list {
            for f in FIXTURES {
                let _ = writeln!(stdout, "{f}");
            }
            return EXIT_PASS;
        }
        let Some(name) = name else {
            let _ = writeln!(stderr, "error: fixture name required (or --list)");
            return EXIT_INVALID;
        };
        return match write_fixture(&name, &out) {
            Ok(path) => {
                let _ = writeln!(stdout, "{}", path.display());
                EXIT_PASS
            }
            Err(e) => {
                let _ = writeln!(stderr, "error: {e}");
                EXIT_INVALID
            }
        };
    }
    let path = cli.config.expect("clap enforces --config");
    match run_config(&path, &cli.out, cli.seed.unwrap_or(DEFAULT_SEED), cli.tolerance_profile) {
        Ok(report) => {
            for c in &report.checks {
                let tag = if c.pass { "PASS" } else { "FAIL" };
                let _ = writeln!(
                    stdout,
                    "{tag} {} measured={:e} tolerance={:e}",
                    c.name, c.measured, c.tolerance
                );
            }
            if report.all_pass() {
                EXIT_PASS
            } else {
                EXIT_CHECK_FAILED
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_INVALID
        }
    }
}
