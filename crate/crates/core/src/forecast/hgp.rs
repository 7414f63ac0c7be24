//! Hybrid GP forecasting.

use super::physics::ca_rollout;
use super::{step_time, ForecastPoint, ForecastSource, Limits, FORECAST_STEP};
use crate::bank::{select_model, KernelBank, ModelPair, Selection};
use crate::error::{Error, Result};
use crate::gp::{predict, PredictiveSeries, TimeSeriesWindow};
use crate::trajectory::VehicleState;

/// `E[cos h]` for `h ~ N(mu, var)`.
pub fn expected_cos(mu: f64, var: f64) -> f64 {
    (-0.5 * var.max(0.0)).exp() * mu.cos()
}

/// `E[sin h]` for `h ~ N(mu, var)`.
pub fn expected_sin(mu: f64, var: f64) -> f64 {
    (-0.5 * var.max(0.0)).exp() * mu.sin()
}

/// Result of an HGP forecast.
#[derive(Debug, Clone)]
pub struct HgpForecast {
    pub points: Vec<ForecastPoint>,
    /// Models used, when selection succeeded.
    pub selection: Option<Selection>,
    /// Set when selection or prediction failed and the whole horizon is a
    /// constant-acceleration rollout.
    pub fallback: bool,
}

/// Integrates speed and heading marginals into positions.
///
/// `speed` and `heading` hold marginals at `t0, t0 + dt, ..., t0 + H dt`
/// (length `H + 1`); the result has `H` points. Each step advances by
/// `dt * mu_s * E[cos h]`, `dt * mu_s * E[sin h]` evaluated at the start of
/// the step.
pub fn integrate_indirect(
    anchor: &VehicleState,
    speed: &PredictiveSeries,
    heading: &PredictiveSeries,
) -> Vec<ForecastPoint> {
    let n = speed.len().min(heading.len());
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    let (mut x, mut y) = (anchor.x, anchor.y);
    for j in 1..n {
        let (ms, mh, vh) = (speed.means[j - 1], heading.means[j - 1], heading.variances[j - 1]);
        x += FORECAST_STEP * ms * expected_cos(mh, vh);
        y += FORECAST_STEP * ms * expected_sin(mh, vh);
        out.push(ForecastPoint {
            t: step_time(anchor.t, j),
            x,
            y,
            speed_mean: speed.means[j],
            speed_var: speed.variances[j],
            heading_mean: heading.means[j],
            heading_var: heading.variances[j],
            source: ForecastSource::Gp,
        });
    }
    out
}

fn fallback_from(anchor: &VehicleState, from: VehicleState, remaining: usize, limits: &Limits) -> Vec<ForecastPoint> {
    let fresh = from.t - anchor.t <= limits.accel_max_age + 1e-9;
    let (accel, source) = if fresh {
        (anchor.accel.clamp(limits.a_min, limits.a_max), ForecastSource::CaFallback)
    } else {
        (0.0, ForecastSource::CsFallback)
    };
    let start = VehicleState { speed: from.speed.clamp(0.0, limits.v_max), ..from };
    ca_rollout(&start, accel, remaining, source)
}

/// Checks each predicted step against the limits. At the first step whose
/// speed leaves `[0, v_max]` or whose implied acceleration leaves
/// `[a_min, a_max]`, the rest of the horizon is replaced by a
/// constant-acceleration rollout from the previous step (constant speed
/// once the received acceleration is older than `accel_max_age`).
pub fn hybrid_guard(points: Vec<ForecastPoint>, anchor: &VehicleState, limits: &Limits) -> Vec<ForecastPoint> {
    let mut prev_speed = anchor.speed;
    let mut prev = VehicleState { ..*anchor };
    for (j, p) in points.iter().enumerate() {
        let accel = (p.speed_mean - prev_speed) / FORECAST_STEP;
        let bad_speed = !(p.speed_mean >= 0.0 && p.speed_mean <= limits.v_max);
        let bad_accel = !(accel >= limits.a_min && accel <= limits.a_max);
        if bad_speed || bad_accel || !p.x.is_finite() || !p.y.is_finite() {
            let mut out = points[..j].to_vec();
            out.extend(fallback_from(anchor, prev, points.len() - j, limits));
            return out;
        }
        prev_speed = p.speed_mean;
        prev =
            VehicleState { t: p.t, x: p.x, y: p.y, speed: p.speed_mean, heading: p.heading_mean, accel: anchor.accel };
    }
    points
}

fn horizon_times(t0: f64, horizon: usize, include_t0: bool) -> Vec<f64> {
    let first = if include_t0 { 0 } else { 1 };
    (first..=horizon).map(|k| step_time(t0, k)).collect()
}

/// Indirect forecast with a given model pair, guard applied.
pub fn forecast_with_pair(
    speed: &TimeSeriesWindow,
    heading: &TimeSeriesWindow,
    pair: &ModelPair,
    anchor: &VehicleState,
    horizon: usize,
    limits: &Limits,
) -> Result<Vec<ForecastPoint>> {
    if horizon == 0 {
        return Ok(Vec::new());
    }
    let times = horizon_times(anchor.t, horizon, true);
    let ps = predict(speed, &pair.speed_model, &times)?;
    let ph = predict(heading, &pair.heading_model, &times)?;
    Ok(hybrid_guard(integrate_indirect(anchor, &ps, &ph), anchor, limits))
}

fn ca_only(anchor: &VehicleState, horizon: usize, limits: &Limits) -> Vec<ForecastPoint> {
    ca_rollout(anchor, anchor.accel.clamp(limits.a_min, limits.a_max), horizon, ForecastSource::CaFallback)
}

/// Selects the most likely models for the windows and forecasts with them.
/// Failures degrade to a full-horizon constant-acceleration rollout.
pub fn hgp_indirect(
    speed: &TimeSeriesWindow,
    heading: &TimeSeriesWindow,
    bank: &KernelBank,
    anchor: &VehicleState,
    horizon: usize,
    limits: &Limits,
) -> HgpForecast {
    let attempt = select_model(bank, speed, heading)
        .and_then(|sel| forecast_with_pair(speed, heading, &sel.pair, anchor, horizon, limits).map(|p| (p, sel)));
    match attempt {
        Ok((points, sel)) => HgpForecast { points, selection: Some(sel), fallback: false },
        Err(e) => {
            log::debug!("hgp fallback: {e}");
            HgpForecast { points: ca_only(anchor, horizon, limits), selection: None, fallback: true }
        }
    }
}

/// Direct forecast with a given pair whose slots hold x and y models.
pub(crate) fn direct_with_pair(
    xw: &TimeSeriesWindow,
    yw: &TimeSeriesWindow,
    pair: &ModelPair,
    anchor: &VehicleState,
    horizon: usize,
    limits: &Limits,
) -> Result<Vec<ForecastPoint>> {
    if horizon == 0 {
        return Ok(Vec::new());
    }
    let times = horizon_times(anchor.t, horizon, false);
    let px = predict(xw, &pair.speed_model, &times)?;
    let py = predict(yw, &pair.heading_model, &times)?;
    let mut out = Vec::with_capacity(horizon);
    let mut prev = *anchor;
    for j in 0..horizon {
        let (x, y) = (px.means[j], py.means[j]);
        let (dx, dy) = (x - prev.x, y - prev.y);
        let speed = dx.hypot(dy) / FORECAST_STEP;
        let accel = (speed - prev.speed) / FORECAST_STEP;
        let heading = if speed > 0.1 {
            let raw = dy.atan2(dx);
            prev.heading + crate::trajectory::wrap_angle(raw - prev.heading)
        } else {
            prev.heading
        };
        let bad = !(speed <= limits.v_max) || !(accel >= limits.a_min && accel <= limits.a_max);
        if bad {
            out.extend(fallback_from(anchor, prev, horizon - j, limits));
            return Ok(out);
        }
        out.push(ForecastPoint {
            t: times[j],
            x,
            y,
            speed_mean: speed,
            speed_var: 0.0,
            heading_mean: heading,
            heading_var: 0.0,
            source: ForecastSource::Gp,
        });
        prev = VehicleState { t: times[j], x, y, speed, heading, accel: anchor.accel };
    }
    Ok(out)
}

/// Direct-mode forecast: x and y are forecast as independent series with a
/// bank whose pairs hold (x, y) models.
pub fn hgp_direct(
    xw: &TimeSeriesWindow,
    yw: &TimeSeriesWindow,
    bank: &KernelBank,
    anchor: &VehicleState,
    horizon: usize,
    limits: &Limits,
) -> Result<HgpForecast> {
    if xw.len() < 2 || yw.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: xw.len().min(yw.len()) });
    }
    let attempt = select_model(bank, xw, yw)
        .and_then(|sel| direct_with_pair(xw, yw, &sel.pair, anchor, horizon, limits).map(|p| (p, sel)));
    Ok(match attempt {
        Ok((points, sel)) => HgpForecast { points, selection: Some(sel), fallback: false },
        Err(e) => {
            log::debug!("hgp-d fallback: {e}");
            HgpForecast { points: ca_only(anchor, horizon, limits), selection: None, fallback: true }
        }
    })
}
