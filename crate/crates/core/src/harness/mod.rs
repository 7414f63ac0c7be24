//! Experiment configuration, orchestration and the CLI commands.
//!
//! Every command takes an [`ExperimentConfig`] and an output directory and
//! regenerates its files deterministically from the root seed.

mod commands;
mod suite;

pub use commands::{
    cluster_sweep, cmd_cluster, cmd_demo, cmd_gen_trips, cmd_profile, cmd_sweep, cmd_train_bank, default_demo_script,
    load_scenarios, predictor_context, run_sweep, summarize, train_bank, ClusterReport, DemoReport, SummaryRow,
    SweepReport, TrainReport,
};
pub use suite::{
    generate_suite, random_script, scenario, scenario_from_trip, ManeuverDurations, ManeuverMix, Scenario, SuiteConfig,
};

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::catc::{AppTable, TcConfig};
use crate::channel::GilbertElliott;
use crate::error::{Error, Result};
use crate::forecast::PredictorConfig;
use crate::gp::FitConfig;
use crate::safety::FcwConfig;

/// Bank training and clustering settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Synthetic training trips.
    pub trips: usize,
    /// Held-out trips for persistency and extension runs.
    pub holdout_trips: usize,
    /// Window length, samples.
    pub tw: usize,
    /// Metres.
    pub pte_threshold: f64,
    /// Samples.
    pub horizon: usize,
    pub c_size: usize,
    pub c_size_grid: Vec<usize>,
    pub fit: FitConfig,
    /// Also train a position bank for the direct variant.
    pub direct: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            trips: 10,
            holdout_trips: 6,
            tw: 30,
            pte_threshold: 0.5,
            horizon: 10,
            c_size: 16,
            c_size_grid: vec![2, 4, 8, 16],
            fit: FitConfig::default(),
            direct: false,
        }
    }
}

/// Channel grid and predictors of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepGrid {
    pub predictors: Vec<String>,
    /// PER values swept at the highest rate.
    pub per_grid: Vec<f64>,
    /// Rates swept on a clean channel.
    pub rate_grid: Vec<f64>,
    pub replications: usize,
    pub latency: f64,
    pub burst: Option<GilbertElliott>,
    /// Write per-sample records and decision logs next to the tables.
    pub raw_records: bool,
}

impl Default for SweepGrid {
    fn default() -> Self {
        let mut per_grid: Vec<f64> = (0..10).map(|k| k as f64 / 10.0).collect();
        per_grid.push(0.95);
        Self {
            predictors: ["bsm", "cs", "ca", "kf", "hgp"].map(String::from).to_vec(),
            per_grid,
            rate_grid: vec![10.0, 5.0, 2.0, 1.0],
            replications: 1,
            latency: 0.0,
            burst: None,
            raw_records: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub tw_grid: Vec<usize>,
    pub reps: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self { tw_grid: vec![10, 20, 30, 40], reps: 15 }
    }
}

/// Everything an experiment needs. Loaded from TOML; every field has a
/// default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    /// Remote-vehicle trip CSVs. When empty a synthetic suite is used.
    pub trips: Vec<PathBuf>,
    pub suite: SuiteConfig,
    pub train: TrainConfig,
    pub predictor: PredictorConfig,
    pub sweep: SweepGrid,
    pub tc: TcConfig,
    pub fcw: FcwConfig,
    pub apps: AppTable,
    pub profile: ProfileConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            trips: Vec::new(),
            suite: SuiteConfig::default(),
            train: TrainConfig::default(),
            predictor: PredictorConfig::default(),
            sweep: SweepGrid::default(),
            tc: TcConfig::default(),
            fcw: FcwConfig::default(),
            apps: AppTable::default(),
            profile: ProfileConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.suite.validate()?;
        self.tc.validate()?;
        self.fcw.validate()?;
        let t = &self.train;
        if t.tw < 5 || t.horizon == 0 || !(t.pte_threshold > 0.0) || t.c_size == 0 {
            return Err(Error::Config("train needs tw >= 5, horizon > 0, pte_threshold > 0, c_size > 0".into()));
        }
        if self.sweep.replications == 0 {
            return Err(Error::Config("sweep replications must be at least 1".into()));
        }
        if self.sweep.per_grid.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config("per_grid values must be in [0, 1]".into()));
        }
        Ok(())
    }
}
