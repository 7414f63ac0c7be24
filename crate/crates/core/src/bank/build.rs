//! Bank generation by forecast-error-triggered model switching.
//!
//! At each step a model pair forecasts the next `horizon` samples from the
//! latest `tw`-sample window. While its worst error stays under the
//! threshold the pair is kept. On a breach every bank member is tried and
//! the best one taken if it meets the threshold; otherwise a new pair is
//! fitted on the window and appended.

use serde::{Deserialize, Serialize};

use super::{BankMode, BankStats, KernelBank, ModelPair, Provenance};
use crate::error::{Error, Result};
use crate::forecast::hgp::{direct_with_pair, forecast_with_pair};
use crate::forecast::{ForecastPoint, Limits};
use crate::gp::{fit, FitConfig, SeriesKind, TimeSeriesWindow};
use crate::rng::derive_seed;
use crate::trajectory::{Trip, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildConfig {
    /// Window length, samples.
    pub tw: usize,
    /// Position tracking error threshold, metres.
    pub pte_threshold: f64,
    /// Forecast horizon checked at every step, samples.
    pub horizon: usize,
    pub mode: BankMode,
    pub limits: Limits,
    pub fit: FitConfig,
    pub seed: u64,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            tw: 30,
            pte_threshold: 0.5,
            horizon: 10,
            mode: BankMode::Indirect,
            limits: Limits::default(),
            fit: FitConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepEvent {
    /// Current model kept.
    Keep,
    /// Another bank member took over.
    Switch,
    /// A new model was fitted and appended.
    NewModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub trip: usize,
    pub t: f64,
    pub event: StepEvent,
    /// Model in use after the step.
    pub model_id: Option<u64>,
    /// Worst error of the model in use before the step, metres.
    pub pte: f64,
}

/// Windows of the two series ending at sample `k` (inclusive).
pub(crate) fn windows_at(
    states: &[VehicleState],
    k: usize,
    tw: usize,
    mode: BankMode,
) -> Result<(TimeSeriesWindow, TimeSeriesWindow)> {
    let slice = &states[k + 1 - tw..=k];
    let times: Vec<f64> = slice.iter().map(|s| s.t).collect();
    let (a, b, ka, kb): (Vec<f64>, Vec<f64>, _, _) = match mode {
        BankMode::Indirect => (
            slice.iter().map(|s| s.speed).collect(),
            slice.iter().map(|s| s.heading).collect(),
            SeriesKind::Speed,
            SeriesKind::Heading,
        ),
        BankMode::Direct => {
            (slice.iter().map(|s| s.x).collect(), slice.iter().map(|s| s.y).collect(), SeriesKind::X, SeriesKind::Y)
        }
    };
    Ok((TimeSeriesWindow::new(ka, times.clone(), a)?, TimeSeriesWindow::new(kb, times, b)?))
}

pub(crate) fn forecast_pair(
    mode: BankMode,
    w: &(TimeSeriesWindow, TimeSeriesWindow),
    pair: &ModelPair,
    anchor: &VehicleState,
    horizon: usize,
    limits: &Limits,
) -> Result<Vec<ForecastPoint>> {
    match mode {
        BankMode::Indirect => forecast_with_pair(&w.0, &w.1, pair, anchor, horizon, limits),
        BankMode::Direct => direct_with_pair(&w.0, &w.1, pair, anchor, horizon, limits),
    }
}

/// Worst 2D error over the horizon against the trip's own future samples.
fn pte_of(
    mode: BankMode,
    w: &(TimeSeriesWindow, TimeSeriesWindow),
    pair: &ModelPair,
    states: &[VehicleState],
    k: usize,
    horizon: usize,
    limits: &Limits,
) -> f64 {
    match forecast_pair(mode, w, pair, &states[k], horizon, limits) {
        Ok(points) => points.iter().zip(&states[k + 1..]).map(|(p, s)| s.distance_to(p.x, p.y)).fold(0.0, f64::max),
        Err(_) => f64::INFINITY,
    }
}

/// Seed for fitting a window, derived from its centred contents so that
/// identical windows always produce identical models.
pub(crate) fn window_seed(root: u64, w: &(TimeSeriesWindow, TimeSeriesWindow)) -> u64 {
    let mut labels = Vec::with_capacity(4 * w.0.len());
    for win in [&w.0, &w.1] {
        let c = win.centered();
        labels.extend(c.t.iter().map(|v| v.to_bits()));
        labels.extend(c.y.iter().map(|v| v.to_bits()));
    }
    derive_seed(root, &labels)
}

fn same_models(a: &ModelPair, b: &ModelPair) -> bool {
    a.speed_model.hyperparams() == b.speed_model.hyperparams()
        && a.heading_model.hyperparams() == b.heading_model.hyperparams()
}

/// Fits a new pair on the two windows; the id is assigned on insertion.
pub(crate) fn fit_pair(
    w: &(TimeSeriesWindow, TimeSeriesWindow),
    cfg: &FitConfig,
    created_at: Provenance,
) -> Result<ModelPair> {
    let first = fit(&w.0, cfg)?;
    let second = fit(&w.1, &FitConfig { seed: derive_seed(cfg.seed, &[1]), ..*cfg })?;
    Ok(ModelPair { id: 0, speed_model: first.model, heading_model: second.model, created_at, usage_count: 0 })
}

/// Fits a pair on the windows and appends it. On failure the bank is left
/// unchanged and the error returned, so callers can fall back.
pub fn maybe_extend_bank(
    bank: &mut KernelBank,
    first: &TimeSeriesWindow,
    second: &TimeSeriesWindow,
    created_at: Provenance,
    cfg: &FitConfig,
) -> Result<u64> {
    let pair = fit_pair(&(first.clone(), second.clone()), cfg, created_at)?;
    bank.push(pair)
}

/// Stateful runner shared by [`build_bank`] and [`evaluate_persistency`].
/// The current model persists across trips.
pub struct BankBuilder {
    bank: KernelBank,
    cfg: BuildConfig,
    current: Option<u64>,
    run_steps: usize,
    stats: BankStats,
}

impl BankBuilder {
    pub fn new(bank: KernelBank, cfg: BuildConfig) -> Result<Self> {
        if bank.mode != cfg.mode {
            return Err(Error::Config(format!("bank mode {:?} does not match build mode {:?}", bank.mode, cfg.mode)));
        }
        if cfg.horizon == 0 || cfg.tw < crate::gp::MIN_FIT_SAMPLES {
            return Err(Error::Config(format!(
                "horizon must be positive and tw at least {}",
                crate::gp::MIN_FIT_SAMPLES
            )));
        }
        Ok(Self { bank, cfg, current: None, run_steps: 0, stats: BankStats::default() })
    }

    pub fn bank(&self) -> &KernelBank {
        &self.bank
    }

    pub fn stats(&self) -> &BankStats {
        &self.stats
    }

    fn close_run(&mut self, dt: f64) {
        if self.current.is_some() {
            self.stats.model_persistency_samples.push(self.run_steps as f64 * dt);
        }
        self.run_steps = 0;
    }

    fn index_of(&self, id: u64) -> Option<usize> {
        self.bank.models.iter().position(|m| m.id == id)
    }

    /// Runs over one trip. With `extend` false no models are fitted and the
    /// best member is taken on a breach even if it misses the threshold.
    pub fn run_trip(&mut self, trip_index: usize, trip: &Trip, extend: bool) -> Result<()> {
        let (tw, horizon) = (self.cfg.tw, self.cfg.horizon);
        let states = trip.states();
        if states.len() < tw + horizon {
            log::warn!(
                "trip {} has {} samples, fewer than tw + horizon = {}; skipped",
                trip.vehicle_id,
                states.len(),
                tw + horizon
            );
            self.stats.skipped_trips += 1;
            return Ok(());
        }
        let dt = trip.sample_period();
        let mode = self.cfg.mode;
        let th = self.bank.pte_threshold;
        let limits = self.cfg.limits;
        for k in tw - 1..states.len() - horizon {
            let w = windows_at(states, k, tw, mode)?;
            let t = states[k].t;
            let provenance = || Provenance { trip: trip.vehicle_id.clone(), t };
            let fit_cfg = FitConfig { seed: window_seed(self.cfg.seed, &w), ..self.cfg.fit };

            if self.bank.is_empty() {
                if !extend {
                    return Err(Error::EmptyBank);
                }
                match fit_pair(&w, &fit_cfg, provenance()) {
                    Ok(pair) => {
                        let id = self.bank.push(pair)?;
                        self.current = Some(id);
                        self.stats.new_model_events += 1;
                        self.record(trip_index, t, StepEvent::NewModel, f64::NAN);
                    }
                    Err(e) => {
                        log::warn!("bootstrap fit failed at t={t}: {e}");
                        self.record(trip_index, t, StepEvent::Keep, f64::NAN);
                        self.run_steps += 1;
                    }
                }
                continue;
            }

            let current_pte = self
                .current
                .and_then(|id| self.index_of(id))
                .map(|i| pte_of(mode, &w, &self.bank.models[i], states, k, horizon, &limits))
                .unwrap_or(f64::INFINITY);
            if current_pte < th {
                self.run_steps += 1;
                if let Some(i) = self.current.and_then(|id| self.index_of(id)) {
                    self.bank.models[i].usage_count += 1;
                }
                self.record(trip_index, t, StepEvent::Keep, current_pte);
                continue;
            }

            // Breach: try every member, ties to the lowest id.
            let mut best: Option<(usize, f64)> = None;
            for (i, m) in self.bank.models.iter().enumerate() {
                let p = pte_of(mode, &w, m, states, k, horizon, &limits);
                let better = match best {
                    None => p.is_finite(),
                    Some((bi, bp)) => p < bp || (p == bp && m.id < self.bank.models[bi].id),
                };
                if better {
                    best = Some((i, p));
                }
            }
            self.close_run(dt);
            match best {
                Some((i, p)) if p < th || !extend => {
                    self.current = Some(self.bank.models[i].id);
                    self.bank.models[i].usage_count += 1;
                    self.stats.switch_events += 1;
                    self.record(trip_index, t, StepEvent::Switch, current_pte);
                }
                _ => match fit_pair(&w, &fit_cfg, provenance()) {
                    Ok(pair) if self.bank.models.iter().any(|m| same_models(m, &pair)) => {
                        // Refit of a window already represented: reuse it.
                        let i = self.bank.models.iter().position(|m| same_models(m, &pair)).unwrap();
                        self.current = Some(self.bank.models[i].id);
                        self.bank.models[i].usage_count += 1;
                        self.stats.switch_events += 1;
                        self.record(trip_index, t, StepEvent::Switch, current_pte);
                    }
                    Ok(pair) => {
                        let id = self.bank.push(pair)?;
                        self.current = Some(id);
                        self.stats.new_model_events += 1;
                        self.record(trip_index, t, StepEvent::NewModel, current_pte);
                    }
                    Err(e) => {
                        log::warn!("fit failed at t={t}: {e}");
                        self.stats.switch_events += 1;
                        self.record(trip_index, t, StepEvent::Switch, current_pte);
                    }
                },
            }
        }
        self.close_run(dt);
        Ok(())
    }

    fn record(&mut self, trip: usize, t: f64, event: StepEvent, pte: f64) {
        self.stats.total_steps += 1;
        self.stats.timeline.push(StepRecord { trip, t, event, model_id: self.current, pte });
    }

    pub fn finish(self) -> (KernelBank, BankStats) {
        (self.bank, self.stats)
    }
}

/// Builds a bank from scratch over `trips`, in order.
pub fn build_bank(trips: &[Trip], cfg: &BuildConfig) -> Result<(KernelBank, BankStats)> {
    let mut bank = KernelBank::new(cfg.tw, cfg.pte_threshold, cfg.mode)?;
    bank.created =
        format!("built from {} trips, tw {}, horizon {}, seed {}", trips.len(), cfg.tw, cfg.horizon, cfg.seed);
    let mut builder = BankBuilder::new(bank, *cfg)?;
    for (i, trip) in trips.iter().enumerate() {
        builder.run_trip(i, trip, true)?;
    }
    Ok(builder.finish())
}

/// Replays the switching rule over `trips` with a fixed bank and reports
/// persistency statistics. No models are added.
pub fn evaluate_persistency(bank: &KernelBank, trips: &[Trip], cfg: &BuildConfig) -> Result<BankStats> {
    let mut builder = BankBuilder::new(bank.clone(), BuildConfig { mode: bank.mode, ..*cfg })?;
    for (i, trip) in trips.iter().enumerate() {
        builder.run_trip(i, trip, false)?;
    }
    Ok(builder.finish().1)
}
