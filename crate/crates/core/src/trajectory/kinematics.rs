use std::f64::consts::{PI, TAU};

use super::{TimedPoint, Trip, VehicleState, GRID_TOLERANCE, SAMPLE_PERIOD};
use crate::error::{Error, Result};

/// Below this speed the displacement direction is treated as undefined and
/// the previous heading is held.
const HEADING_HOLD_SPEED: f64 = 0.1;

/// Removes 2*pi jumps so consecutive angles differ by less than pi.
pub fn unwrap_angles(angles: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(angles.len());
    let mut offset = 0.0;
    for (i, &a) in angles.iter().enumerate() {
        if i > 0 {
            let prev_raw = angles[i - 1];
            let d = a - prev_raw;
            if d > PI {
                offset -= TAU * ((d + PI) / TAU).floor();
            } else if d < -PI {
                offset += TAU * ((-d + PI) / TAU).floor();
            }
        }
        out.push(a + offset);
    }
    out
}

pub(crate) fn is_uniform(times: &[f64], period: f64) -> bool {
    times.windows(2).all(|w| ((w[1] - w[0]) - period).abs() <= GRID_TOLERANCE.max(1e-9 * w[1].abs()))
}

/// Linearly interpolates `columns` (each aligned with `times`) onto the grid
/// `times[0] + k * period`.
pub(crate) fn resample_columns(times: &[f64], columns: &[Vec<f64>], period: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let t0 = times[0];
    let t_end = *times.last().unwrap();
    let n = ((t_end - t0) / period + 1e-9).floor() as usize + 1;
    let mut grid = Vec::with_capacity(n);
    let mut out: Vec<Vec<f64>> = columns.iter().map(|_| Vec::with_capacity(n)).collect();
    let mut j = 0;
    for k in 0..n {
        let t = t0 + k as f64 * period;
        while j + 2 < times.len() && times[j + 1] < t {
            j += 1;
        }
        let (ta, tb) = (times[j], times[(j + 1).min(times.len() - 1)]);
        let w = if tb > ta { ((t - ta) / (tb - ta)).clamp(0.0, 1.0) } else { 0.0 };
        for (c, col) in columns.iter().enumerate() {
            let (a, b) = (col[j], col[(j + 1).min(col.len() - 1)]);
            out[c].push(a + w * (b - a));
        }
        grid.push(t);
    }
    (grid, out)
}

/// Resamples positions onto a uniform grid by linear interpolation.
pub fn resample_uniform(points: &[TimedPoint], period: f64) -> Result<Vec<TimedPoint>> {
    if points.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    for (i, w) in points.windows(2).enumerate() {
        if w[1].t <= w[0].t {
            return Err(Error::NonMonotoneTime { index: i + 1 });
        }
    }
    let times: Vec<f64> = points.iter().map(|p| p.t).collect();
    let cols = vec![points.iter().map(|p| p.x).collect(), points.iter().map(|p| p.y).collect()];
    let (grid, cols) = resample_columns(&times, &cols, period);
    Ok(grid.into_iter().enumerate().map(|(k, t)| TimedPoint { t, x: cols[0][k], y: cols[1][k] }).collect())
}

/// Builds a trip from positions alone.
///
/// Positions off the 100 ms grid are resampled first. Speed is the
/// central-difference displacement rate, heading the direction of the same
/// displacement (held while the vehicle is stationary, then unwrapped), and
/// acceleration the central difference of speed. Endpoints use one-sided
/// differences.
pub fn derive_kinematics(vehicle_id: &str, positions: &[TimedPoint]) -> Result<Trip> {
    if positions.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: positions.len() });
    }
    let times: Vec<f64> = positions.iter().map(|p| p.t).collect();
    let pts = if is_uniform(&times, SAMPLE_PERIOD) {
        for (i, w) in positions.windows(2).enumerate() {
            if w[1].t <= w[0].t {
                return Err(Error::NonMonotoneTime { index: i + 1 });
            }
        }
        positions.to_vec()
    } else {
        resample_uniform(positions, SAMPLE_PERIOD)?
    };
    if pts.len() < 3 {
        return Err(Error::TooFewSamples { needed: 3, got: pts.len() });
    }

    let n = pts.len();
    let diff = |i: usize| {
        let (a, b) = match i {
            0 => (0, 1),
            i if i == n - 1 => (n - 2, n - 1),
            i => (i - 1, i + 1),
        };
        let dt = pts[b].t - pts[a].t;
        ((pts[b].x - pts[a].x) / dt, (pts[b].y - pts[a].y) / dt)
    };

    let mut speed = Vec::with_capacity(n);
    let mut raw_heading: Vec<Option<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let (vx, vy) = diff(i);
        let s = vx.hypot(vy);
        speed.push(s);
        raw_heading.push((s > HEADING_HOLD_SPEED).then(|| vy.atan2(vx)));
    }

    // Hold the last moving heading; samples before the first motion borrow
    // the first moving heading, and a never-moving trip faces east.
    let first_moving = raw_heading.iter().flatten().next().copied().unwrap_or(0.0);
    let mut held = first_moving;
    let filled: Vec<f64> = raw_heading
        .iter()
        .map(|h| {
            if let Some(h) = h {
                held = *h;
            }
            held
        })
        .collect();
    let heading = unwrap_angles(&filled);

    let accel: Vec<f64> = (0..n)
        .map(|i| {
            let (a, b) = match i {
                0 => (0, 1),
                i if i == n - 1 => (n - 2, n - 1),
                i => (i - 1, i + 1),
            };
            (speed[b] - speed[a]) / (pts[b].t - pts[a].t)
        })
        .collect();

    let states = (0..n)
        .map(|i| VehicleState {
            t: pts[i].t,
            x: pts[i].x,
            y: pts[i].y,
            speed: speed[i],
            heading: heading[i],
            accel: accel[i],
        })
        .collect();
    let period = pts[1].t - pts[0].t;
    Trip::new(vehicle_id, states, period)
}
