//! Scenario configuration files.
//!
//! A config is one JSON object whose `scenario` key selects the schema for
//! the rest of the file. Unknown keys are rejected everywhere. Complex
//! amplitudes are `[re, im]` pairs.

use std::fmt;

use everett_core::ideal::{default_alphas, default_betas};
use everett_core::{Boundary, IdealModelSpec, LatticePoint, SpatialGrid, Tolerances, C64};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    #[default]
    Ideal,
    Spatial,
    Mixture,
    MixtureEquivalence,
    MultiObserver,
    Case1,
    Case2,
    Extract,
    OracleCompare,
}

impl ScenarioKind {
    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::Ideal => "ideal",
            ScenarioKind::Spatial => "spatial",
            ScenarioKind::Mixture => "mixture",
            ScenarioKind::MixtureEquivalence => "mixture-equivalence",
            ScenarioKind::MultiObserver => "multi-observer",
            ScenarioKind::Case1 => "case1",
            ScenarioKind::Case2 => "case2",
            ScenarioKind::Extract => "extract",
            ScenarioKind::OracleCompare => "oracle-compare",
        }
    }
}

pub type Complex = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub d: usize,
    pub n: usize,
    pub spacing: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<Vec<i64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryConfig {
    #[default]
    Closed,
    Open,
}

/// Per-file overrides on top of the selected tolerance profile.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_sum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_range: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator_match: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equivalence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_zero: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub projector: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim_cap: Option<usize>,
}

impl TolerancesConfig {
    pub fn apply(&self, mut tol: Tolerances) -> Tolerances {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut tol.weight_sum, self.weight_sum);
        set(&mut tol.weight_range, self.weight_range);
        set(&mut tol.operator_match, self.operator_match);
        set(&mut tol.invariance, self.invariance);
        set(&mut tol.equivalence, self.equivalence);
        set(&mut tol.exact_zero, self.exact_zero);
        set(&mut tol.projector, self.projector);
        set(&mut tol.residual, self.residual);
        if let Some(cap) = self.dim_cap {
            tol.dim_cap = cap;
        }
        tol
    }
}

/// Outcome labels shared by every model; all optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdealConfig {
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub psi: Vec<Complex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialConfig {
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub grid_x: GridConfig,
    pub grid_z: GridConfig,
    pub a: f64,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    pub psi_xs: Vec<Vec<Complex>>,
    pub psi_z: Vec<Complex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureConfig {
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    pub grid_x: GridConfig,
    pub grid_z: GridConfig,
    pub a: f64,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    pub psi_xs: Vec<Vec<Complex>>,
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiConfig {
    pub scenario: ScenarioKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// `[τ_1, τ_2, τ_G]`; each defaults to `tau`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub taus: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gammas: Option<Vec<f64>>,
    pub grid_x: GridConfig,
    pub grid_z: GridConfig,
    pub a1: f64,
    pub a2: f64,
    pub d1: Vec<i64>,
    pub d2: Vec<i64>,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    pub psi_xs: Vec<Vec<Complex>>,
    pub psi_z: Vec<Complex>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesConfig>,
}

fn default_trials() -> usize {
    50
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractConfig {
    pub scenario: ScenarioKind,
    /// The construction has `m + 1` branches.
    pub m: usize,
    pub v_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub betas: Option<Vec<f64>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleCompareConfig {
    pub scenario: ScenarioKind,
    /// A complete `ideal`, `spatial` or `multi-observer` config.
    pub model: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<TolerancesConfig>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Ideal(IdealConfig),
    Spatial(SpatialConfig),
    Mixture(MixtureConfig),
    MixtureEquivalence(SpatialConfig),
    MultiObserver(MultiConfig),
    Case1(MultiConfig),
    Case2(MultiConfig),
    Extract(ExtractConfig),
    OracleCompare(OracleCompareConfig, Box<Scenario>),
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Scenario::Ideal(_) => ScenarioKind::Ideal,
            Scenario::Spatial(_) => ScenarioKind::Spatial,
            Scenario::Mixture(_) => ScenarioKind::Mixture,
            Scenario::MixtureEquivalence(_) => ScenarioKind::MixtureEquivalence,
            Scenario::MultiObserver(_) => ScenarioKind::MultiObserver,
            Scenario::Case1(_) => ScenarioKind::Case1,
            Scenario::Case2(_) => ScenarioKind::Case2,
            Scenario::Extract(_) => ScenarioKind::Extract,
            Scenario::OracleCompare(..) => ScenarioKind::OracleCompare,
        }
    }

    pub fn tolerances(&self) -> Option<&TolerancesConfig> {
        match self {
            Scenario::Ideal(c) => c.tolerances.as_ref(),
            Scenario::Spatial(c) | Scenario::MixtureEquivalence(c) => c.tolerances.as_ref(),
            Scenario::Mixture(c) => c.tolerances.as_ref(),
            Scenario::MultiObserver(c) | Scenario::Case1(c) | Scenario::Case2(c) => c.tolerances.as_ref(),
            Scenario::Extract(c) => c.tolerances.as_ref(),
            Scenario::OracleCompare(c, _) => c.tolerances.as_ref(),
        }
    }

    pub fn to_json(&self) -> String {
        let value = match self {
            Scenario::Ideal(c) => serde_json::to_value(c),
            Scenario::Spatial(c) | Scenario::MixtureEquivalence(c) => serde_json::to_value(c),
            Scenario::Mixture(c) => serde_json::to_value(c),
            Scenario::MultiObserver(c) | Scenario::Case1(c) | Scenario::Case2(c) => serde_json::to_value(c),
            Scenario::Extract(c) => serde_json::to_value(c),
            Scenario::OracleCompare(c, _) => serde_json::to_value(c),
        }
        .expect("config types serialize");
        let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
        text.push('\n');
        text
    }
}

/// Where in the file a config problem sits.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl ConfigError {
    pub fn field(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            line: None,
            column: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at `{}`", self.path)?;
        if let (Some(line), Some(col)) = (self.line, self.column) {
            write!(f, " (line {line}, column {col})")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn typed<T: DeserializeOwned>(text: &str, prefix: &str) -> Result<T, ConfigError> {
    let located = |e: &serde_json::Error| {
        if prefix.is_empty() {
            (Some(e.line()), Some(e.column()))
        } else {
            (None, None)
        }
    };
    let de = &mut serde_json::Deserializer::from_str(text);
    let value: T = serde_path_to_error::deserialize(&mut *de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        let (line, column) = located(&inner);
        ConfigError {
            path: join(prefix, &path),
            line,
            column,
            message: strip_position(&inner.to_string()),
        }
    })?;
    de.end().map_err(|e| {
        let (line, column) = located(&e);
        ConfigError {
            path: prefix_or_root(prefix),
            line,
            column,
            message: strip_position(&e.to_string()),
        }
    })?;
    Ok(value)
}

fn join(prefix: &str, path: &str) -> String {
    match (prefix.is_empty(), path == ".") {
        (true, _) => path.to_string(),
        (false, true) => prefix.to_string(),
        (false, false) => format!("{prefix}.{path}"),
    }
}

fn prefix_or_root(prefix: &str) -> String {
    if prefix.is_empty() {
        ".".into()
    } else {
        prefix.into()
    }
}

/// serde_json appends " at line L column C"; the position is reported
/// separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(k) => msg[..k].to_string(),
        None => msg.to_string(),
    }
}

#[derive(Deserialize)]
struct Header {
    scenario: ScenarioKind,
}

/// Parse and schema-check a config file's contents.
pub fn parse_config(text: &str) -> Result<Scenario, ConfigError> {
    parse_with_prefix(text, "")
}

fn parse_with_prefix(text: &str, prefix: &str) -> Result<Scenario, ConfigError> {
    let header: Header = typed(text, prefix).map_err(|mut e| {
        if e.path == "." || e.path == prefix {
            e.path = join(prefix, "scenario");
        }
        e
    })?;
    Ok(match header.scenario {
        ScenarioKind::Ideal => Scenario::Ideal(typed(text, prefix)?),
        ScenarioKind::Spatial => Scenario::Spatial(typed(text, prefix)?),
        ScenarioKind::Mixture => Scenario::Mixture(typed(text, prefix)?),
        ScenarioKind::MixtureEquivalence => Scenario::MixtureEquivalence(typed(text, prefix)?),
        ScenarioKind::MultiObserver => Scenario::MultiObserver(typed(text, prefix)?),
        ScenarioKind::Case1 => Scenario::Case1(typed(text, prefix)?),
        ScenarioKind::Case2 => Scenario::Case2(typed(text, prefix)?),
        ScenarioKind::Extract => Scenario::Extract(typed(text, prefix)?),
        ScenarioKind::OracleCompare => {
            if !prefix.is_empty() {
                return Err(ConfigError::field(
                    join(prefix, "scenario"),
                    "oracle-compare cannot be nested",
                ));
            }
            let cfg: OracleCompareConfig = typed(text, prefix)?;
            let inner = parse_with_prefix(&cfg.model.to_string(), "model")?;
            match inner.kind() {
                ScenarioKind::Ideal | ScenarioKind::Spatial | ScenarioKind::MultiObserver => {}
                other => {
                    return Err(ConfigError::field(
                        "model.scenario",
                        format!(
                            "oracle-compare supports ideal, spatial and multi-observer models, not {}",
                            other.name()
                        ),
                    ))
                }
            }
            Scenario::OracleCompare(cfg, Box::new(inner))
        }
    })
}

pub(crate) fn complex(v: &[Complex]) -> Vec<C64> {
    v.iter().map(|[re, im]| C64::new(*re, *im)).collect()
}

pub(crate) fn complex_rows(rows: &[Vec<Complex>]) -> Vec<Vec<C64>> {
    rows.iter().map(|r| complex(r)).collect()
}

pub(crate) fn boundary(b: BoundaryConfig) -> Boundary {
    match b {
        BoundaryConfig::Closed => Boundary::Closed,
        BoundaryConfig::Open => Boundary::Open,
    }
}

pub(crate) fn lattice(v: &[i64]) -> LatticePoint {
    LatticePoint(v.to_vec())
}

pub(crate) fn grid(field: &str, g: &GridConfig) -> Result<SpatialGrid, ConfigError> {
    let origin = g.origin.clone().unwrap_or_else(|| vec![0; g.d]);
    SpatialGrid::with_origin(g.d, g.n, g.spacing, origin).map_err(|e| ConfigError::field(field, e.to_string()))
}

/// Check `m` against the amplitude count and fill in default labels.
pub(crate) fn labels(
    m_field: Option<usize>,
    m: usize,
    alphas: &Option<Vec<f64>>,
    betas: &Option<Vec<f64>>,
    tau: Option<f64>,
) -> Result<(Vec<f64>, Vec<f64>, f64), ConfigError> {
    if let Some(given) = m_field {
        if given != m {
            return Err(ConfigError::field(
                "m",
                format!("m = {given} but the amplitudes describe {m} outcomes"),
            ));
        }
    }
    if m == 0 {
        return Err(ConfigError::field("m", "at least one outcome is required"));
    }
    let alphas = alphas.clone().unwrap_or_else(|| default_alphas(m));
    let betas = betas.clone().unwrap_or_else(|| default_betas(m));
    if alphas.len() != m {
        return Err(ConfigError::field(
            "alphas",
            format!("expected {m} entries, found {}", alphas.len()),
        ));
    }
    if betas.len() != m + 1 {
        return Err(ConfigError::field(
            "betas",
            format!("expected {} entries, found {}", m + 1, betas.len()),
        ));
    }
    Ok((alphas, betas, tau.unwrap_or(1.0)))
}

pub(crate) fn label_spec(
    m_field: Option<usize>,
    m: usize,
    alphas: &Option<Vec<f64>>,
    betas: &Option<Vec<f64>>,
    tau: Option<f64>,
) -> Result<IdealModelSpec, ConfigError> {
    let (alphas, betas, tau) = labels(m_field, m, alphas, betas, tau)?;
    IdealModelSpec::labels(alphas, betas, tau).map_err(|e| ConfigError::field(".", e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected_with_position() {
        let text = "{\n  \"scenario\": \"ideal\",\n  \"psi\": [[1, 0]],\n  \"colour\": 3\n}";
        let err = parse_config(text).unwrap_err();
        assert!(err.message.contains("unknown field `colour`"), "{err}");
        assert_eq!(err.line, Some(4));
    }

    #[test]
    fn missing_scenario_is_named() {
        let err = parse_config("{\"psi\": [[1, 0]]}").unwrap_err();
        assert_eq!(err.path, "scenario");
    }

    #[test]
    fn nested_errors_carry_the_model_prefix() {
        let text = r#"{"scenario": "oracle-compare", "model": {"scenario": "ideal", "psi": [[1, "x"]]}}"#;
        let err = parse_config(text).unwrap_err();
        assert!(err.path.starts_with("model.psi"), "{err}");
    }

    #[test]
    fn round_trip_through_json() {
        let cfg = Scenario::Ideal(IdealConfig {
            scenario: ScenarioKind::Ideal,
            psi: vec![[0.6, 0.0], [0.0, 0.8]],
            ..IdealConfig::default()
        });
        assert_eq!(parse_config(&cfg.to_json()).unwrap(), cfg);
    }

    #[test]
    fn m_must_match_amplitudes() {
        let err = labels(Some(3), 2, &None, &None, None).unwrap_err();
        assert_eq!(err.path, "m");
    }
}
