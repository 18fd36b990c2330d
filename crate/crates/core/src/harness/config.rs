//! JSON experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::TaskKind;
use crate::dgp::SuiteConfig;
use crate::dualopt::DualTrainConfig;
use crate::error::{MdcpError, Result};
use crate::models::ModelConfig;
use crate::regsets::DEFAULT_GRID_SIZE;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PValueKind {
    Deterministic,
    Randomized,
}

/// Fold fractions; the split seed is derived from each run's seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub calib: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.375,
            calib: 0.125,
            test: 0.5,
        }
    }
}

/// A simulated suite; `name` defaults to suite, task and level parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub config: SuiteConfig,
}

impl SuiteEntry {
    pub fn new(config: SuiteConfig) -> Self {
        Self { name: None, config }
    }

    pub fn display_name(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let c = &self.config;
        let task = match c.task {
            TaskKind::Classification { .. } => "classification",
            TaskKind::Regression => "regression",
        };
        let mut name = format!("{}-{task}-tau{}", c.suite.name(), c.tau);
        if c.delta_x != 0.0 {
            name.push_str(&format!("-dx{}", c.delta_x));
        }
        name
    }
}

/// A dataset loaded from CSV (see [`crate::data::read_csv`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub path: PathBuf,
    pub task: TaskKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_alpha() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub suites: Vec<SuiteEntry>,
    pub datasets: Vec<DatasetEntry>,
    /// Subset of `mdcp`, `mdcp-tuned`, `baseline-agg`, `baseline-src`
    /// (every source) and `baseline-src-<k>`.
    pub methods: Vec<String>,
    pub runs: usize,
    pub seed: u64,
    pub split: SplitFractions,
    pub model: ModelConfig,
    pub dual: DualTrainConfig,
    pub grid_size: usize,
    pub baseline_p_values: PValueKind,
    pub mdcp_p_values: PValueKind,
    /// When false, `wall_ms` is written as 0 so reports are byte-identical
    /// across repeated runs.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            suites: Vec::new(),
            datasets: Vec::new(),
            methods: vec!["mdcp".into(), "baseline-agg".into(), "baseline-src".into()],
            runs: 1,
            seed: 0,
            split: SplitFractions::default(),
            model: ModelConfig::default(),
            dual: DualTrainConfig::default(),
            grid_size: DEFAULT_GRID_SIZE,
            baseline_p_values: PValueKind::Deterministic,
            mdcp_p_values: PValueKind::Randomized,
            record_wall_time: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(MdcpError::Invalid("runs must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(MdcpError::Invalid("at least one method is required".into()));
        }
        if self.suites.is_empty() && self.datasets.is_empty() {
            return Err(MdcpError::Invalid("no suites or datasets configured".into()));
        }
        if self.grid_size < 2 {
            return Err(MdcpError::Invalid("grid_size must be at least 2".into()));
        }
        for s in &self.suites {
            s.config.validate()?;
        }
        self.model.boosting.validate()?;
        self.dual.validate()?;
        let names: Vec<String> = self
            .suites
            .iter()
            .map(SuiteEntry::display_name)
            .chain(self.datasets.iter().map(|d| d.name.clone()))
            .collect();
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(MdcpError::Invalid(format!("duplicate suite name `{n}`")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    /// Reads a config; relative dataset paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_json(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for d in &mut cfg.datasets {
            if d.path.is_relative() {
                d.path = base.join(&d.path);
            }
        }
        Ok(cfg)
    }
}
