//! Receiver-side trajectory prediction.
//!
//! Every predictor turns the last accepted BSM (and, for the learned ones,
//! a window of earlier BSMs) into a sequence of [`ForecastPoint`]s on the
//! 100 ms grid following the BSM. Baselines: hold-last, constant speed,
//! constant acceleration and a constant-acceleration Kalman filter. The
//! hybrid GP forecaster integrates per-step speed and heading marginals into
//! positions and falls back to the physical models when its predictions
//! leave plausible bounds.

pub(crate) mod hgp;
mod kalman;
mod physics;
mod predictor;

pub use hgp::{
    expected_cos, expected_sin, forecast_with_pair, hgp_direct, hgp_indirect, hybrid_guard, integrate_indirect,
    HgpForecast,
};
pub use kalman::{kalman_step, KalmanConfig, KalmanState};
pub use physics::{ca_rollout, constant_accel, constant_speed, hold_last, CA_SPEED_CLAMP};
pub use predictor::{
    BankHandle, HgpConfig, HgpPredictor, KalmanPredictor, Predictor, PredictorConfig, PredictorContext,
    PredictorFactory, PredictorKind, PredictorRegistry,
};

use serde::{Deserialize, Serialize};

/// Forecast step, seconds.
pub const FORECAST_STEP: f64 = 0.1;

/// What produced a forecast point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ForecastSource {
    /// Hybrid GP prediction.
    Gp,
    /// Constant-acceleration continuation after a guard breach.
    CaFallback,
    /// Constant-speed continuation after a guard breach with a stale
    /// acceleration estimate.
    CsFallback,
    /// Last received position held.
    Hold,
    /// Constant-speed baseline.
    Cs,
    /// Constant-acceleration baseline.
    Ca,
    /// Kalman-filter baseline.
    Kalman,
    /// A received BSM rather than a forecast.
    Bsm,
    /// Produced by an externally registered predictor.
    Plugin,
}

impl ForecastSource {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gp => "gp",
            Self::CaFallback => "ca-fallback",
            Self::CsFallback => "cs-fallback",
            Self::Hold => "hold",
            Self::Cs => "cs",
            Self::Ca => "ca",
            Self::Kalman => "kalman",
            Self::Bsm => "bsm",
            Self::Plugin => "plugin",
        }
    }
}

/// One forecast step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForecastPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub speed_mean: f64,
    pub speed_var: f64,
    pub heading_mean: f64,
    pub heading_var: f64,
    pub source: ForecastSource,
}

/// Physical plausibility limits applied by the hybrid guard.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Limits {
    pub v_max: f64,
    pub a_min: f64,
    pub a_max: f64,
    /// Age beyond which the last received acceleration is not trusted and
    /// the fallback uses constant speed, seconds.
    pub accel_max_age: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Self { v_max: 60.0, a_min: -9.0, a_max: 6.0, accel_max_age: 2.0 }
    }
}

/// Time of forecast step `k` (1-based) after `t0`, computed without
/// accumulating rounding error.
#[inline]
pub(crate) fn step_time(t0: f64, k: usize) -> f64 {
    t0 + k as f64 * FORECAST_STEP
}
