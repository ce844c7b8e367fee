//! Run configuration. A TOML file may set any flag; flags given on the
//! command line win over the file, and the file wins over `EXDICE_SEED`.

use std::path::Path;

use clap::ValueEnum;
use exdice::{Budget, Dominance};
use serde::{Deserialize, Serialize};

use crate::compute::{EvalSettings, IntegratorKind};
use crate::diff::Tolerances;
use crate::problem::{table_rows, ProblemId, RowSpec};

pub const SEED_ENV: &str = "EXDICE_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorChoice {
    Deterministic,
    MonteCarlo,
}

impl From<IntegratorChoice> for IntegratorKind {
    fn from(c: IntegratorChoice) -> Self {
        match c {
            IntegratorChoice::Deterministic => IntegratorKind::Deterministic,
            IntegratorChoice::MonteCarlo => IntegratorKind::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    Fair,
    Johnson,
    Multiplicity,
    MaxentShannon,
    MaxentBurg,
    MinKl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThrowChoice {
    Old,
    New,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DominanceChoice {
    /// The parameter outgrows N.
    Param,
    /// N outgrows the parameter.
    Data,
}

impl From<DominanceChoice> for Dominance {
    fn from(d: DominanceChoice) -> Self {
        match d {
            DominanceChoice::Param => Dominance::Parameter,
            DominanceChoice::Data => Dominance::Data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalFormat {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TableFormat {
    Markdown,
    Csv,
    Json,
}

/// Everything a config file may hold: shared integration keys at the top
/// level, command flags in `[eval]` and `[reproduce]`. Keys are the long
/// flag names with dashes turned into underscores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub seed: Option<u64>,
    pub budget: Option<u64>,
    pub tolerance: Option<f64>,
    pub integrator: Option<IntegratorChoice>,
    #[serde(default)]
    pub eval: EvalSection,
    #[serde(default)]
    pub reproduce: ReproduceSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalSection {
    pub n: Option<u32>,
    pub large_n: Option<bool>,
    pub avg: Option<String>,
    pub model: Option<ModelChoice>,
    pub param: Option<String>,
    pub dominance: Option<DominanceChoice>,
    pub throw: Option<ThrowChoice>,
    pub m: Option<Vec<f64>>,
    pub format: Option<EvalFormat>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReproduceSection {
    pub only: Option<Vec<String>>,
    pub johnson: Option<Vec<f64>>,
    pub multiplicity: Option<Vec<f64>>,
    pub large_rows: Option<bool>,
    pub format: Option<TableFormat>,
    pub diff: Option<bool>,
    pub fast: Option<bool>,
    pub tolerances: Option<Tolerances>,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid config {path}: {source}")]
    Toml { path: String, source: toml::de::Error },
    #[error("invalid {SEED_ENV} value {0:?}")]
    SeedEnv(String),
    #[error("{0}")]
    Invalid(String),
}

impl ConfigFile {
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|source| ConfigError::Toml { path: path.to_string(), source })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: shown.clone(), source })?;
        Self::parse(&text, &shown)
    }
}

/// Seed from flag, then file, then the environment, then zero.
pub fn resolve_seed(flag: Option<u64>, file: Option<u64>, env: Option<&str>) -> Result<u64, ConfigError> {
    if let Some(s) = flag.or(file) {
        return Ok(s);
    }
    match env {
        Some(v) => v.trim().parse().map_err(|_| ConfigError::SeedEnv(v.to_string())),
        None => Ok(0),
    }
}

/// Integration settings shared by both commands.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CommonFlags {
    pub seed: Option<u64>,
    pub budget: Option<u64>,
    pub tolerance: Option<f64>,
    pub integrator: Option<IntegratorChoice>,
}

impl CommonFlags {
    pub fn settings(
        &self,
        file: &ConfigFile,
        env_seed: Option<&str>,
        base: Budget,
    ) -> Result<EvalSettings, ConfigError> {
        let seed = resolve_seed(self.seed, file.seed, env_seed)?;
        let budget = Budget {
            max_evaluations: self.budget.or(file.budget).unwrap_or(base.max_evaluations),
            tolerance: self.tolerance.or(file.tolerance).unwrap_or(base.tolerance),
        };
        if budget.max_evaluations == 0 {
            return Err(ConfigError::Invalid("budget must be positive".into()));
        }
        if !(budget.tolerance.is_finite() && budget.tolerance > 0.0) {
            return Err(ConfigError::Invalid(format!("tolerance {} must be positive", budget.tolerance)));
        }
        let integrator = self.integrator.or(file.integrator).unwrap_or(IntegratorChoice::Deterministic);
        Ok(EvalSettings { integrator: integrator.into(), seed, budget })
    }
}

/// A resolved `reproduce` run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problems: Vec<ProblemId>,
    pub johnson: Vec<f64>,
    pub multiplicity: Vec<f64>,
    pub large_rows: bool,
    pub settings: EvalSettings,
    pub format: TableFormat,
    pub diff: bool,
    pub tolerances: Tolerances,
}

pub const TABLE_PARAMETERS: [f64; 3] = [1.0, 5.0, 50.0];

impl Default for RunConfig {
    /// The published layout: fifteen problems, K and L in {1, 5, 50} and
    /// the large-parameter rows.
    fn default() -> Self {
        RunConfig {
            problems: ProblemId::published_set(),
            johnson: TABLE_PARAMETERS.to_vec(),
            multiplicity: TABLE_PARAMETERS.to_vec(),
            large_rows: true,
            settings: EvalSettings { integrator: IntegratorKind::Deterministic, seed: 0, budget: Budget::default() },
            format: TableFormat::Markdown,
            diff: false,
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    /// Problems with their rows, in table order.
    pub fn plan(&self) -> Vec<(ProblemId, Vec<RowSpec>)> {
        self.problems
            .iter()
            .map(|id| (*id, table_rows(id.regime, &self.johnson, &self.multiplicity, self.large_rows)))
            .collect()
    }
}

/// Looser integration target used with `--fast`.
pub fn fast_budget(b: Budget) -> Budget {
    Budget { max_evaluations: b.max_evaluations / 4, tolerance: b.tolerance.max(1e-3) }
}
