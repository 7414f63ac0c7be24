//! Hold-last, constant-speed and constant-acceleration rollouts.

use super::{step_time, ForecastPoint, ForecastSource, FORECAST_STEP};
use crate::trajectory::VehicleState;

/// Speeds are never extrapolated below this value.
pub const CA_SPEED_CLAMP: f64 = 0.0;

/// Keeps the last received position for every step.
pub fn hold_last(last: &VehicleState, horizon: usize) -> Vec<ForecastPoint> {
    (1..=horizon)
        .map(|k| ForecastPoint {
            t: step_time(last.t, k),
            x: last.x,
            y: last.y,
            speed_mean: last.speed,
            speed_var: 0.0,
            heading_mean: last.heading,
            heading_var: 0.0,
            source: ForecastSource::Hold,
        })
        .collect()
}

/// Constant-speed rollout along the last heading.
pub fn constant_speed(last: &VehicleState, horizon: usize) -> Vec<ForecastPoint> {
    ca_rollout(last, 0.0, horizon, ForecastSource::Cs)
}

/// Constant-acceleration rollout along the last heading.
pub fn constant_accel(last: &VehicleState, horizon: usize) -> Vec<ForecastPoint> {
    ca_rollout(last, last.accel, horizon, ForecastSource::Ca)
}

/// Applies the transition `[1 T T²/2; 0 1 T; 0 0 1]` to (arc, speed, accel)
/// for `horizon` steps starting from `from`, moving along `from.heading`.
/// A speed that would turn negative stops at zero within the step.
pub fn ca_rollout(from: &VehicleState, accel: f64, horizon: usize, source: ForecastSource) -> Vec<ForecastPoint> {
    let dt = FORECAST_STEP;
    let (sin, cos) = from.heading.sin_cos();
    let mut arc = 0.0;
    let mut v = from.speed.max(CA_SPEED_CLAMP);
    let mut out = Vec::with_capacity(horizon);
    for k in 1..=horizon {
        let v1 = v + accel * dt;
        if v1 >= CA_SPEED_CLAMP {
            arc += v * dt + 0.5 * accel * dt * dt;
            v = v1;
        } else {
            if accel < 0.0 {
                arc += v * v / (-2.0 * accel);
            }
            v = CA_SPEED_CLAMP;
        }
        out.push(ForecastPoint {
            t: step_time(from.t, k),
            x: from.x + arc * cos,
            y: from.y + arc * sin,
            speed_mean: v,
            speed_var: 0.0,
            heading_mean: from.heading,
            heading_var: 0.0,
            source,
        });
    }
    out
}
