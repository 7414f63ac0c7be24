//! Per-vehicle predictor state machines and the plugin registry.

use std::collections::{BTreeMap, VecDeque};
use std::sync::{Arc, RwLock};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::hgp::{direct_with_pair, forecast_with_pair, hgp_direct, hgp_indirect};
use super::kalman::{kalman_step, KalmanConfig, KalmanState};
use super::physics::{ca_rollout, constant_accel, constant_speed, hold_last};
use super::{ForecastPoint, ForecastSource, Limits};
use crate::bank::{maybe_extend_bank, BankMode, KernelBank, ModelPair, Provenance};
use crate::error::{Error, Result};
use crate::gp::{FitConfig, SeriesKind, TimeSeriesWindow};
use crate::trajectory::{wrap_angle, VehicleState};

/// Shared bank. Readers forecast concurrently; extension takes the write
/// lock, so one writer at a time appends.
pub type BankHandle = Arc<RwLock<KernelBank>>;

/// Built-in predictor kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PredictorKind {
    BsmDependent,
    ConstantSpeed,
    ConstantAccel,
    KalmanCA,
    HgpIndirect,
    HgpDirect,
}

impl PredictorKind {
    pub const ALL: [PredictorKind; 6] = [
        Self::BsmDependent,
        Self::ConstantSpeed,
        Self::ConstantAccel,
        Self::KalmanCA,
        Self::HgpIndirect,
        Self::HgpDirect,
    ];

    /// Registry name.
    pub fn name(self) -> &'static str {
        match self {
            Self::BsmDependent => "bsm",
            Self::ConstantSpeed => "cs",
            Self::ConstantAccel => "ca",
            Self::KalmanCA => "kf",
            Self::HgpIndirect => "hgp",
            Self::HgpDirect => "hgp-d",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

/// Settings of the HGP predictors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HgpConfig {
    /// Maximum window length, samples.
    pub tw: usize,
    /// Samples older than this relative to the latest BSM are not used,
    /// seconds.
    pub max_age: f64,
    /// Fewer usable samples than this and the forecast is constant
    /// acceleration.
    pub min_samples: usize,
    /// Fit and append a model when no bank member explains a BSM.
    pub extend: bool,
    /// Extension is only considered after gaps up to this long, seconds.
    pub extend_max_gap: f64,
    pub fit: FitConfig,
}

impl Default for HgpConfig {
    fn default() -> Self {
        Self { tw: 30, max_age: 2.0, min_samples: 2, extend: true, extend_max_gap: 1.0, fit: FitConfig::default() }
    }
}

/// Configuration handed to predictor factories.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictorConfig {
    pub limits: Limits,
    pub kalman: KalmanConfig,
    pub hgp: HgpConfig,
}

/// Receiver-side state machine for one remote vehicle.
pub trait Predictor: Send {
    fn name(&self) -> &str;

    /// Ingests an accepted BSM. BSMs arrive in time order.
    fn observe(&mut self, bsm: &VehicleState);

    /// Latest accepted BSM.
    fn last(&self) -> Option<&VehicleState>;

    /// Forecast for the `steps` 100 ms instants following the latest BSM.
    /// Empty before the first BSM.
    fn forecast(&mut self, steps: usize) -> Vec<ForecastPoint>;

    /// Models appended to the bank by this predictor.
    fn new_model_events(&self) -> usize {
        0
    }
}

/// Everything a factory may use.
#[derive(Clone, Default)]
pub struct PredictorContext {
    pub config: PredictorConfig,
    /// Speed/heading bank.
    pub bank: Option<BankHandle>,
    /// Position bank for direct forecasting.
    pub direct_bank: Option<BankHandle>,
}

pub type PredictorFactory = Arc<dyn Fn(&PredictorContext) -> Result<Box<dyn Predictor>> + Send + Sync>;

/// Name to factory map. Built-ins are registered by [`with_builtins`];
/// external predictors (for example learned baselines) register their own.
///
/// [`with_builtins`]: PredictorRegistry::with_builtins
#[derive(Clone, Default)]
pub struct PredictorRegistry {
    factories: BTreeMap<String, PredictorFactory>,
}

impl PredictorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::new();
        for kind in PredictorKind::ALL {
            r.register(kind.name(), Arc::new(move |ctx: &PredictorContext| builtin(kind, ctx)));
        }
        r
    }

    /// Adds or replaces a factory.
    pub fn register(&mut self, name: impl Into<String>, factory: PredictorFactory) {
        self.factories.insert(name.into(), factory);
    }

    pub fn names(&self) -> Vec<String> {
        self.factories.keys().cloned().collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn create(&self, name: &str, ctx: &PredictorContext) -> Result<Box<dyn Predictor>> {
        let f = self.factories.get(name).ok_or_else(|| Error::Config(format!("unknown predictor '{name}'")))?;
        f(ctx)
    }
}

fn builtin(kind: PredictorKind, ctx: &PredictorContext) -> Result<Box<dyn Predictor>> {
    let cfg = ctx.config;
    Ok(match kind {
        PredictorKind::BsmDependent | PredictorKind::ConstantSpeed | PredictorKind::ConstantAccel => {
            Box::new(Physical { kind, last: None })
        }
        PredictorKind::KalmanCA => Box::new(KalmanPredictor::new(cfg.kalman)),
        PredictorKind::HgpIndirect => {
            let bank = ctx.bank.clone().ok_or_else(|| Error::Config("hgp predictor needs a kernel bank".into()))?;
            Box::new(HgpPredictor::new(bank, cfg, BankMode::Indirect)?)
        }
        PredictorKind::HgpDirect => {
            let bank = ctx
                .direct_bank
                .clone()
                .ok_or_else(|| Error::Config("hgp-d predictor needs a direct-mode bank".into()))?;
            Box::new(HgpPredictor::new(bank, cfg, BankMode::Direct)?)
        }
    })
}

struct Physical {
    kind: PredictorKind,
    last: Option<VehicleState>,
}

impl Predictor for Physical {
    fn name(&self) -> &str {
        self.kind.name()
    }

    fn observe(&mut self, bsm: &VehicleState) {
        self.last = Some(*bsm);
    }

    fn last(&self) -> Option<&VehicleState> {
        self.last.as_ref()
    }

    fn forecast(&mut self, steps: usize) -> Vec<ForecastPoint> {
        let Some(last) = &self.last else {
            return Vec::new();
        };
        match self.kind {
            PredictorKind::ConstantSpeed => constant_speed(last, steps),
            PredictorKind::ConstantAccel => constant_accel(last, steps),
            _ => hold_last(last, steps),
        }
    }
}

/// Kalman filter on arc length; positions follow the latest BSM heading
/// from the latest BSM position.
pub struct KalmanPredictor {
    cfg: KalmanConfig,
    state: Option<KalmanState>,
    last: Option<VehicleState>,
    /// Measured arc length at the latest BSM.
    arc: f64,
    repairs: usize,
}

impl KalmanPredictor {
    pub fn new(cfg: KalmanConfig) -> Self {
        Self { cfg, state: None, last: None, arc: 0.0, repairs: 0 }
    }

    pub fn state(&self) -> Option<&KalmanState> {
        self.state.as_ref()
    }
}

impl Predictor for KalmanPredictor {
    fn name(&self) -> &str {
        "kf"
    }

    fn observe(&mut self, bsm: &VehicleState) {
        match (&self.state, &self.last) {
            (Some(st), Some(prev)) => {
                self.arc += bsm.distance_to(prev.x, prev.y);
                let steps = ((bsm.t - prev.t) / st.ts).round().max(1.0) as usize;
                let mut st = *st;
                for _ in 1..steps {
                    st = kalman_step(&st, None).0;
                }
                let (next, repaired) = kalman_step(&st, Some(Vector3::new(self.arc, bsm.speed, bsm.accel)));
                self.repairs += usize::from(repaired);
                self.state = Some(next);
            }
            _ => {
                self.arc = 0.0;
                self.state = Some(KalmanState::new(Vector3::new(0.0, bsm.speed, bsm.accel), &self.cfg));
            }
        }
        self.last = Some(*bsm);
    }

    fn last(&self) -> Option<&VehicleState> {
        self.last.as_ref()
    }

    fn forecast(&mut self, steps: usize) -> Vec<ForecastPoint> {
        let (Some(st), Some(last)) = (&self.state, &self.last) else {
            return Vec::new();
        };
        let (sin, cos) = last.heading.sin_cos();
        let s0 = st.x_hat[0];
        let mut cur = *st;
        (1..=steps)
            .map(|k| {
                cur = cur.predict();
                let d = cur.x_hat[0] - s0;
                ForecastPoint {
                    t: super::step_time(last.t, k),
                    x: last.x + d * cos,
                    y: last.y + d * sin,
                    speed_mean: cur.x_hat[1],
                    speed_var: cur.p[(1, 1)].max(0.0),
                    heading_mean: last.heading,
                    heading_var: 0.0,
                    source: ForecastSource::Kalman,
                }
            })
            .collect()
    }
}

/// Hybrid GP predictor (indirect or direct) over a shared bank.
///
/// Keeps the latest `tw` BSMs. A forecast uses those no older than
/// `max_age`, selects the most likely bank models and integrates. When a
/// BSM arriving within `extend_max_gap` of the previous one lands at least
/// the bank threshold away from the forecast, every member is backtested
/// on that gap; if none meets the threshold a model is fitted on the
/// window, appended to the bank and used for the next forecast.
pub struct HgpPredictor {
    bank: BankHandle,
    cfg: PredictorConfig,
    mode: BankMode,
    history: VecDeque<VehicleState>,
    last_forecast: Vec<ForecastPoint>,
    forced: Option<ModelPair>,
    new_models: usize,
    fallbacks: usize,
}

impl HgpPredictor {
    pub fn new(bank: BankHandle, cfg: PredictorConfig, mode: BankMode) -> Result<Self> {
        let bank_mode = bank.read().map_err(|_| Error::Config("bank lock poisoned".into()))?.mode;
        if bank_mode != mode {
            return Err(Error::Config(format!("predictor needs a {mode:?} bank, got {bank_mode:?}")));
        }
        Ok(Self {
            bank,
            cfg,
            mode,
            history: VecDeque::with_capacity(cfg.hgp.tw + 1),
            last_forecast: Vec::new(),
            forced: None,
            new_models: 0,
            fallbacks: 0,
        })
    }

    /// Forecasts that fell back to constant acceleration for the whole
    /// horizon.
    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    fn windows(&self, upto: usize) -> Option<(TimeSeriesWindow, TimeSeriesWindow)> {
        let h = &self.history;
        let last = h.get(upto)?;
        let first = (0..=upto).find(|&i| last.t - h[i].t <= self.cfg.hgp.max_age + 1e-9).unwrap_or(upto);
        let slice: Vec<&VehicleState> = h.range(first..=upto).collect();
        if slice.len() < self.cfg.hgp.min_samples.max(1) {
            return None;
        }
        let times: Vec<f64> = slice.iter().map(|s| s.t).collect();
        let (a, b, ka, kb) = match self.mode {
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
        Some((TimeSeriesWindow::new(ka, times.clone(), a).ok()?, TimeSeriesWindow::new(kb, times, b).ok()?))
    }

    fn with_pair(
        &self,
        w: &(TimeSeriesWindow, TimeSeriesWindow),
        pair: &ModelPair,
        anchor: &VehicleState,
        steps: usize,
    ) -> Result<Vec<ForecastPoint>> {
        match self.mode {
            BankMode::Indirect => forecast_with_pair(&w.0, &w.1, pair, anchor, steps, &self.cfg.limits),
            BankMode::Direct => direct_with_pair(&w.0, &w.1, pair, anchor, steps, &self.cfg.limits),
        }
    }

    fn maybe_extend(&mut self, bsm: &VehicleState) {
        let hcfg = self.cfg.hgp;
        let n = self.history.len();
        if !hcfg.extend || n < 2 {
            return;
        }
        let prev = self.history[n - 2];
        let gap = bsm.t - prev.t;
        if gap > hcfg.extend_max_gap + 1e-9 {
            return;
        }
        let steps = (gap / super::FORECAST_STEP).round() as usize;
        let Some(predicted) = self.last_forecast.get(steps.wrapping_sub(1)) else {
            return;
        };
        let threshold = match self.bank.read() {
            Ok(b) => b.pte_threshold,
            Err(_) => return,
        };
        if bsm.distance_to(predicted.x, predicted.y) < threshold {
            return;
        }
        let Some(prev_w) = self.windows(n - 2) else {
            return;
        };
        let covered = {
            let Ok(bank) = self.bank.read() else { return };
            bank.models.iter().any(|m| {
                self.with_pair(&prev_w, m, &prev, steps)
                    .ok()
                    .and_then(|p| p.last().map(|q| bsm.distance_to(q.x, q.y) < threshold))
                    .unwrap_or(false)
            })
        };
        if covered {
            return;
        }
        let Some(w) = self.windows(n - 1) else {
            return;
        };
        if w.0.len() < crate::gp::MIN_FIT_SAMPLES {
            return;
        }
        let fit_cfg = FitConfig { seed: crate::bank::build::window_seed(hcfg.fit.seed, &w), ..hcfg.fit };
        let Ok(mut bank) = self.bank.write() else { return };
        let prov = Provenance { trip: "online".into(), t: bsm.t };
        match maybe_extend_bank(&mut bank, &w.0, &w.1, prov, &fit_cfg) {
            Ok(id) => {
                self.new_models += 1;
                self.forced = bank.get(id).cloned();
            }
            Err(e) => log::debug!("online fit failed: {e}"),
        }
    }
}

impl Predictor for HgpPredictor {
    fn name(&self) -> &str {
        match self.mode {
            BankMode::Indirect => "hgp",
            BankMode::Direct => "hgp-d",
        }
    }

    fn observe(&mut self, bsm: &VehicleState) {
        let mut s = *bsm;
        if let Some(prev) = self.history.back() {
            if s.t <= prev.t {
                return;
            }
            s.heading = prev.heading + wrap_angle(s.heading - prev.heading);
        }
        self.history.push_back(s);
        while self.history.len() > self.cfg.hgp.tw.max(1) {
            self.history.pop_front();
        }
        self.forced = None;
        self.maybe_extend(&s);
    }

    fn last(&self) -> Option<&VehicleState> {
        self.history.back()
    }

    fn forecast(&mut self, steps: usize) -> Vec<ForecastPoint> {
        let Some(anchor) = self.history.back().copied() else {
            return Vec::new();
        };
        let limits = self.cfg.limits;
        let ca = |anchor: &VehicleState| {
            ca_rollout(anchor, anchor.accel.clamp(limits.a_min, limits.a_max), steps, ForecastSource::CaFallback)
        };
        let points = match self.windows(self.history.len() - 1) {
            None => {
                self.fallbacks += 1;
                ca(&anchor)
            }
            Some(w) => {
                if let Some(pair) = self.forced.clone() {
                    self.with_pair(&w, &pair, &anchor, steps).unwrap_or_else(|_| ca(&anchor))
                } else {
                    let out = match self.bank.read() {
                        Ok(bank) => match self.mode {
                            BankMode::Indirect => Some(hgp_indirect(&w.0, &w.1, &bank, &anchor, steps, &limits)),
                            BankMode::Direct => hgp_direct(&w.0, &w.1, &bank, &anchor, steps, &limits).ok(),
                        },
                        Err(_) => None,
                    };
                    match out {
                        Some(f) => {
                            self.fallbacks += usize::from(f.fallback);
                            f.points
                        }
                        None => {
                            self.fallbacks += 1;
                            ca(&anchor)
                        }
                    }
                }
            }
        };
        if points.len() >= self.last_forecast.len()
            || self.last_forecast.first().map(|p| p.t) != points.first().map(|p| p.t)
        {
            self.last_forecast = points.clone();
        }
        points
    }

    fn new_model_events(&self) -> usize {
        self.new_models
    }
}
