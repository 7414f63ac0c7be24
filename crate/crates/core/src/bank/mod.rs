//! Kernel banks: offline generation, clustering, forecast-time selection
//! and online extension.
//!
//! A bank pairs a speed model with a heading model per entry. In direct
//! mode the same slots carry x and y position models instead.

pub(crate) mod build;
mod cluster;
mod select;

pub use build::{build_bank, evaluate_persistency, maybe_extend_bank, BankBuilder, BuildConfig, StepEvent, StepRecord};
pub use cluster::{cluster_bank, ClusterOutcome};
pub use select::{select_model, Selection};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{GpModel, SeriesKind};

/// Where and when a model was fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub trip: String,
    pub t: f64,
}

/// Which series the two slots of every pair describe.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BankMode {
    /// Speed and heading.
    #[default]
    Indirect,
    /// East and north position.
    Direct,
}

impl BankMode {
    pub fn kinds(self) -> (SeriesKind, SeriesKind) {
        match self {
            Self::Indirect => (SeriesKind::Speed, SeriesKind::Heading),
            Self::Direct => (SeriesKind::X, SeriesKind::Y),
        }
    }
}

/// One bank entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPair {
    pub id: u64,
    /// Speed model (x model in direct mode).
    pub speed_model: GpModel,
    /// Heading model (y model in direct mode).
    pub heading_model: GpModel,
    pub created_at: Provenance,
    pub usage_count: u64,
}

impl ModelPair {
    fn slot_kinds(&self) -> (SeriesKind, SeriesKind) {
        (self.speed_model.kind, self.heading_model.kind)
    }
}

/// Ordered collection of model pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBank {
    /// Training window length, samples.
    pub tw: usize,
    /// Position tracking error threshold, metres.
    pub pte_threshold: f64,
    /// Free-form, deterministic description of how the bank was made.
    pub created: String,
    #[serde(default)]
    pub mode: BankMode,
    pub models: Vec<ModelPair>,
}

impl KernelBank {
    pub fn new(tw: usize, pte_threshold: f64, mode: BankMode) -> Result<Self> {
        let bank = Self { tw, pte_threshold, created: String::new(), mode, models: Vec::new() };
        bank.validate()?;
        Ok(bank)
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn next_id(&self) -> u64 {
        self.models.iter().map(|m| m.id + 1).max().unwrap_or(0)
    }

    pub fn get(&self, id: u64) -> Option<&ModelPair> {
        self.models.iter().find(|m| m.id == id)
    }

    /// Appends a pair, assigning it the next free id, which is returned.
    pub fn push(&mut self, mut pair: ModelPair) -> Result<u64> {
        let kinds = self.mode.kinds();
        if pair.slot_kinds() != kinds {
            return Err(Error::InvalidArgument(format!(
                "model kinds {:?} do not fit a {:?} bank",
                pair.slot_kinds(),
                self.mode
            )));
        }
        pair.id = self.next_id();
        let id = pair.id;
        self.models.push(pair);
        Ok(id)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pte_threshold > 0.0 && self.pte_threshold.is_finite()) {
            return Err(Error::Config(format!("pte_threshold must be positive, got {}", self.pte_threshold)));
        }
        if self.tw < 2 {
            return Err(Error::Config(format!("tw must be at least 2, got {}", self.tw)));
        }
        let mut ids: Vec<u64> = self.models.iter().map(|m| m.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate model ids in bank".into()));
        }
        let kinds = self.mode.kinds();
        if let Some(m) = self.models.iter().find(|m| m.slot_kinds() != kinds) {
            return Err(Error::Config(format!("model {} has kinds {:?}, expected {:?}", m.id, m.slot_kinds(), kinds)));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bank: Self = serde_json::from_str(text)?;
        bank.validate()?;
        Ok(bank)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Counters collected while building or evaluating a bank.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BankStats {
    /// Durations for which one model kept the error under threshold,
    /// seconds.
    pub model_persistency_samples: Vec<f64>,
    pub new_model_events: usize,
    pub switch_events: usize,
    pub total_steps: usize,
    pub skipped_trips: usize,
    /// One entry per evaluated step, in order.
    #[serde(skip)]
    pub timeline: Vec<StepRecord>,
}

impl BankStats {
    pub fn mean_persistency(&self) -> f64 {
        if self.model_persistency_samples.is_empty() {
            return 0.0;
        }
        self.model_persistency_samples.iter().sum::<f64>() / self.model_persistency_samples.len() as f64
    }

    pub fn new_model_rate(&self) -> f64 {
        if self.total_steps == 0 {
            0.0
        } else {
            self.new_model_events as f64 / self.total_steps as f64
        }
    }

    /// New-model rate in `bins` consecutive equal slices of the timeline.
    pub fn new_model_rate_series(&self, bins: usize) -> Vec<f64> {
        let n = self.timeline.len();
        if bins == 0 || n == 0 {
            return Vec::new();
        }
        (0..bins)
            .map(|b| {
                let (lo, hi) = (b * n / bins, (b + 1) * n / bins);
                let slice = &self.timeline[lo..hi];
                if slice.is_empty() {
                    return 0.0;
                }
                let events = slice.iter().filter(|r| r.event == StepEvent::NewModel).count();
                events as f64 / slice.len() as f64
            })
            .collect()
    }
}
