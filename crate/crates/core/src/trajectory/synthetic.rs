//! Scripted synthetic trips.
//!
//! A [`ManeuverScript`] is an ordered list of segments integrated at the
//! sample period. Positions advance with the trapezoidal rule on
//! `speed * (cos heading, sin heading)`, so the recorded speed and heading
//! reproduce the recorded positions step by step.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Trip, VehicleState, SAMPLE_PERIOD};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default)]
    pub x: f64,
    #[serde(default)]
    pub y: f64,
    #[serde(default)]
    pub speed: f64,
    #[serde(default)]
    pub heading: f64,
}

/// One maneuver. Durations are seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Segment {
    /// Hold speed and heading.
    Cruise { duration: f64 },
    /// Constant longitudinal acceleration (m/s², positive).
    Accelerate { duration: f64, accel: f64 },
    /// Constant longitudinal deceleration (`accel` negative, m/s²).
    Brake { duration: f64, accel: f64 },
    /// Smooth lateral shift of `offset` metres, left positive.
    LaneChange { duration: f64, offset: f64 },
    /// Constant yaw rate (rad/s, counter-clockwise positive).
    Turn { duration: f64, yaw_rate: f64 },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Cruise { duration }
            | Segment::Accelerate { duration, .. }
            | Segment::Brake { duration, .. }
            | Segment::LaneChange { duration, .. }
            | Segment::Turn { duration, .. } => duration,
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let bad = |m: &str| Error::Config(format!("segment {index}: {m}"));
        let d = self.duration();
        if !(d > 0.0 && d.is_finite()) {
            return Err(bad("duration must be positive"));
        }
        match *self {
            Segment::Accelerate { accel, .. } if !(accel >= 0.0 && accel.is_finite()) => {
                Err(bad("accelerate needs accel >= 0"))
            }
            Segment::Brake { accel, .. } if !(accel <= 0.0 && accel.is_finite()) => Err(bad("brake needs accel <= 0")),
            Segment::LaneChange { offset, .. } if !offset.is_finite() => Err(bad("lane-change offset must be finite")),
            Segment::Turn { yaw_rate, .. } if !yaw_rate.is_finite() => Err(bad("turn yaw_rate must be finite")),
            _ => Ok(()),
        }
    }
}

/// Ordered maneuver list plus initial conditions.
///
/// `ramp` (seconds) blends acceleration and yaw rate linearly from the
/// previous segment's value at each boundary; zero means step changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManeuverScript {
    #[serde(default = "default_vehicle_id")]
    pub vehicle_id: String,
    #[serde(default = "default_period")]
    pub sample_period: f64,
    #[serde(default)]
    pub ramp: f64,
    pub initial: InitialState,
    #[serde(rename = "segment")]
    pub segments: Vec<Segment>,
}

fn default_vehicle_id() -> String {
    "rv".to_owned()
}

fn default_period() -> f64 {
    SAMPLE_PERIOD
}

impl ManeuverScript {
    pub fn new(initial: InitialState, segments: Vec<Segment>) -> Self {
        Self { vehicle_id: default_vehicle_id(), sample_period: SAMPLE_PERIOD, ramp: 0.0, initial, segments }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }
}

/// Generated trip plus generator diagnostics.
#[derive(Debug, Clone)]
pub struct SyntheticTrip {
    pub trip: Trip,
    /// Set when a segment would have driven the speed negative.
    pub speed_clamped: bool,
}

struct Profile<'a> {
    script: &'a ManeuverScript,
    /// Start time of each segment.
    starts: Vec<f64>,
}

impl Profile<'_> {
    fn segment_at(&self, t: f64) -> usize {
        match self.starts.iter().rposition(|&s| s <= t) {
            Some(i) => i.min(self.script.segments.len() - 1),
            None => 0,
        }
    }

    /// Target (accel, yaw rate) of segment `i` at local time `tau`.
    fn target(&self, i: usize, tau: f64, v_start: f64) -> (f64, f64) {
        match self.script.segments[i] {
            Segment::Cruise { .. } => (0.0, 0.0),
            Segment::Accelerate { accel, .. } | Segment::Brake { accel, .. } => (accel, 0.0),
            Segment::Turn { yaw_rate, .. } => (0.0, yaw_rate),
            Segment::LaneChange { duration, offset } => {
                if v_start <= 0.0 {
                    return (0.0, 0.0);
                }
                // Heading deviation A(1 - cos(2 pi tau / T)) / 2 shifts the
                // vehicle laterally by v A T / 2.
                let amp = 2.0 * offset / (v_start * duration);
                (0.0, amp * PI / duration * (2.0 * PI * tau / duration).sin())
            }
        }
    }
}

/// Integrates `script` into a trip. Deterministic; `seed` is accepted for
/// interface symmetry with noisy generators and does not affect the clean
/// trajectory.
pub fn generate_synthetic_trip(script: &ManeuverScript, _seed: u64) -> Result<SyntheticTrip> {
    if script.segments.is_empty() {
        return Err(Error::Config("maneuver script has no segments".into()));
    }
    for (i, s) in script.segments.iter().enumerate() {
        s.validate(i)?;
    }
    let dt = script.sample_period;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config("sample_period must be positive".into()));
    }
    if script.initial.speed < 0.0 {
        return Err(Error::Config("initial speed must be >= 0".into()));
    }

    let mut starts = Vec::with_capacity(script.segments.len());
    let mut acc = 0.0;
    for s in &script.segments {
        starts.push(acc);
        acc += s.duration();
    }
    let profile = Profile { script, starts };
    let steps = (acc / dt).round() as usize;

    let mut seg_start_speed = vec![f64::NAN; script.segments.len()];
    let mut x = script.initial.x;
    let mut y = script.initial.y;
    let mut v = script.initial.speed;
    let mut h = script.initial.heading;
    let mut clamped = false;

    // Command in effect at the previous step and at the current segment's
    // start, for ramping across boundaries.
    let mut last_cmd = (0.0, 0.0);
    let mut blend_from = (0.0, 0.0);
    let mut current_seg = usize::MAX;

    let mut states = Vec::with_capacity(steps);
    for k in 0..steps {
        let t_mid = (k as f64 + 0.5) * dt;
        let i = profile.segment_at(t_mid);
        if i != current_seg {
            seg_start_speed[i] = v;
            blend_from = last_cmd;
            current_seg = i;
        }
        let tau = t_mid - profile.starts[i];
        let target = profile.target(i, tau, seg_start_speed[i]);
        let w = if script.ramp > 0.0 { (tau / script.ramp).clamp(0.0, 1.0) } else { 1.0 };
        let (a, yaw) = (blend_from.0 + w * (target.0 - blend_from.0), blend_from.1 + w * (target.1 - blend_from.1));
        last_cmd = (a, yaw);

        let mut v1 = v + a * dt;
        if v1 < 0.0 {
            v1 = 0.0;
            clamped = true;
        }
        let h1 = h + yaw * dt;
        x += 0.5 * dt * (v * h.cos() + v1 * h1.cos());
        y += 0.5 * dt * (v * h.sin() + v1 * h1.sin());
        v = v1;
        h = h1;
        states.push(VehicleState {
            t: (k + 1) as f64 * dt,
            x,
            y,
            speed: v,
            heading: h,
            accel: if v <= 0.0 && a < 0.0 { 0.0 } else { a },
        });
    }

    Ok(SyntheticTrip { trip: Trip::new(script.vehicle_id.clone(), states, dt)?, speed_clamped: clamped })
}

/// Independent zero-mean Gaussian noise added to a transmitted copy of a
/// trip. Sigmas are per channel; zero disables a channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementNoise {
    #[serde(default = "default_position_sigma")]
    pub position: f64,
    #[serde(default)]
    pub speed: f64,
    #[serde(default)]
    pub heading: f64,
    #[serde(default)]
    pub accel: f64,
}

fn default_position_sigma() -> f64 {
    0.5
}

impl Default for MeasurementNoise {
    fn default() -> Self {
        Self { position: default_position_sigma(), speed: 0.0, heading: 0.0, accel: 0.0 }
    }
}

impl MeasurementNoise {
    pub fn none() -> Self {
        Self { position: 0.0, speed: 0.0, heading: 0.0, accel: 0.0 }
    }

    pub fn is_none(&self) -> bool {
        self.position == 0.0 && self.speed == 0.0 && self.heading == 0.0 && self.accel == 0.0
    }
}

/// Returns a noisy copy of `trip`; the input (ground truth) is untouched.
/// Speeds stay non-negative.
pub fn apply_measurement_noise(trip: &Trip, noise: &MeasurementNoise, seed: u64) -> Result<Trip> {
    if noise.is_none() {
        return Ok(trip.clone());
    }
    for (name, s) in
        [("position", noise.position), ("speed", noise.speed), ("heading", noise.heading), ("accel", noise.accel)]
    {
        if !(s >= 0.0 && s.is_finite()) {
            return Err(Error::Config(format!("{name} noise sigma must be >= 0")));
        }
    }
    let mut r = rng::stream(seed, &[rng::label("measurement-noise")]);
    let draw = |sigma: f64, r: &mut rand_chacha::ChaCha8Rng| {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).unwrap().sample(r)
        } else {
            // Keep the stream aligned across configurations.
            let _: f64 = r.gen();
            0.0
        }
    };
    let states = trip
        .states()
        .iter()
        .map(|s| VehicleState {
            t: s.t,
            x: s.x + draw(noise.position, &mut r),
            y: s.y + draw(noise.position, &mut r),
            speed: (s.speed + draw(noise.speed, &mut r)).max(0.0),
            heading: s.heading + draw(noise.heading, &mut r),
            accel: s.accel + draw(noise.accel, &mut r),
        })
        .collect();
    Trip::new(trip.vehicle_id.clone(), states, trip.sample_period())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn script(speed: f64, segments: Vec<Segment>) -> ManeuverScript {
        ManeuverScript::new(InitialState { x: 0.0, y: 0.0, speed, heading: 0.0 }, segments)
    }

    #[test]
    fn single_cruise() {
        let s = script(15.0, vec![Segment::Cruise { duration: 10.0 }]);
        let out = generate_synthetic_trip(&s, 7).unwrap();
        assert_eq!(out.trip.len(), 100);
        assert!(out.trip.states().iter().all(|st| st.speed == 15.0));
        assert!(!out.speed_clamped);
    }

    #[test]
    fn brake_to_stop() {
        let s = script(15.0, vec![Segment::Brake { duration: 5.0, accel: -3.0 }]);
        let out = generate_synthetic_trip(&s, 7).unwrap();
        let last = out.trip.states().last().unwrap();
        assert!((last.t - 5.0).abs() < 1e-9);
        assert!(last.speed.abs() < 1e-9);
        assert!(out.trip.states().iter().all(|st| st.speed >= 0.0));
    }

    #[test]
    fn overlong_brake_clamps() {
        let s = script(5.0, vec![Segment::Brake { duration: 5.0, accel: -3.0 }]);
        let out = generate_synthetic_trip(&s, 7).unwrap();
        assert!(out.speed_clamped);
        let last = out.trip.states().last().unwrap();
        assert_eq!(last.speed, 0.0);
        assert_eq!(last.accel, 0.0);
    }

    #[test]
    fn turn_heading_change() {
        let s = script(10.0, vec![Segment::Turn { duration: 10.0, yaw_rate: 0.1 }]);
        let out = generate_synthetic_trip(&s, 7).unwrap();
        let last = out.trip.states().last().unwrap();
        assert!((last.heading - 1.0).abs() < 1e-6);
    }

    #[test]
    fn lane_change_shifts_laterally() {
        let s = script(20.0, vec![Segment::LaneChange { duration: 4.0, offset: 3.5 }]);
        let out = generate_synthetic_trip(&s, 0).unwrap();
        let last = out.trip.states().last().unwrap();
        assert!(last.heading.abs() < 1e-9);
        // Small-angle shift; sin(psi) < psi shaves a little off.
        assert!((last.y - 3.5).abs() < 0.05, "y = {}", last.y);
    }

    #[test]
    fn positions_follow_speed_and_heading() {
        let mut s = script(
            12.0,
            vec![
                Segment::Accelerate { duration: 2.0, accel: 1.5 },
                Segment::Turn { duration: 3.0, yaw_rate: -0.2 },
                Segment::Brake { duration: 2.0, accel: -4.0 },
            ],
        );
        s.ramp = 0.5;
        let out = generate_synthetic_trip(&s, 1).unwrap();
        let st = out.trip.states();
        for w in st.windows(2) {
            let dx = 0.05 * (w[0].speed * w[0].heading.cos() + w[1].speed * w[1].heading.cos());
            let dy = 0.05 * (w[0].speed * w[0].heading.sin() + w[1].speed * w[1].heading.sin());
            assert!((w[0].x + dx - w[1].x).abs() < 1e-6);
            assert!((w[0].y + dy - w[1].y).abs() < 1e-6);
        }
    }

    #[test]
    fn script_toml_round_trip() {
        let text = r#"
            vehicle_id = "lead"
            ramp = 0.5
            [initial]
            speed = 15.0
            [[segment]]
            kind = "cruise"
            duration = 2.0
            [[segment]]
            kind = "turn"
            duration = 3.0
            yaw_rate = 0.1
        "#;
        let s = ManeuverScript::from_toml(text).unwrap();
        assert_eq!(s.segments.len(), 2);
        assert_eq!(s.vehicle_id, "lead");
        let again = ManeuverScript::from_toml(&s.to_toml().unwrap()).unwrap();
        assert_eq!(s, again);
    }

    #[test]
    fn bad_segments_rejected() {
        let s = script(10.0, vec![Segment::Brake { duration: 1.0, accel: 2.0 }]);
        assert!(generate_synthetic_trip(&s, 0).is_err());
        let s = script(10.0, vec![Segment::Cruise { duration: 0.0 }]);
        assert!(generate_synthetic_trip(&s, 0).is_err());
    }

    #[test]
    fn noise_leaves_truth_clean() {
        let s = script(10.0, vec![Segment::Cruise { duration: 5.0 }]);
        let truth = generate_synthetic_trip(&s, 0).unwrap().trip;
        let noisy = apply_measurement_noise(&truth, &MeasurementNoise::default(), 3).unwrap();
        assert_ne!(truth, noisy);
        let again = apply_measurement_noise(&truth, &MeasurementNoise::default(), 3).unwrap();
        assert_eq!(noisy, again);
        assert!(truth.states().iter().all(|s| s.y == 0.0));
    }
}
