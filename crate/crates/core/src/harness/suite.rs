//! Randomized synthetic scenarios: a remote vehicle driving a scripted
//! mix of maneuvers, a host following it, and the noisy copy the remote
//! vehicle broadcasts.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::SweepTrip;
use crate::error::{Error, Result};
use crate::rng;
use crate::trajectory::{
    apply_measurement_noise, follow_lead, generate_synthetic_trip, FollowerConfig, InitialState, ManeuverScript,
    MeasurementNoise, Segment, Trip, SAMPLE_PERIOD,
};

/// Relative frequency of each maneuver kind.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManeuverMix {
    pub cruise: f64,
    pub accelerate: f64,
    pub brake: f64,
    pub turn: f64,
    pub lane_change: f64,
}

impl Default for ManeuverMix {
    fn default() -> Self {
        Self { cruise: 0.1, accelerate: 0.15, brake: 0.2, turn: 0.45, lane_change: 0.1 }
    }
}

/// Duration ranges of each maneuver kind, seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ManeuverDurations {
    pub cruise: [f64; 2],
    pub accelerate: [f64; 2],
    pub brake: [f64; 2],
    pub turn: [f64; 2],
    pub lane_change: [f64; 2],
}

impl Default for ManeuverDurations {
    fn default() -> Self {
        Self {
            cruise: [2.0, 5.0],
            accelerate: [2.0, 5.0],
            brake: [1.5, 4.0],
            turn: [8.0, 20.0],
            lane_change: [3.0, 5.0],
        }
    }
}

impl ManeuverDurations {
    fn all(&self) -> [[f64; 2]; 5] {
        [self.cruise, self.accelerate, self.brake, self.turn, self.lane_change]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub trips: usize,
    /// Seconds per trip.
    pub duration: f64,
    pub mix: ManeuverMix,
    pub durations: ManeuverDurations,
    /// Blend time between maneuvers, seconds.
    pub ramp: f64,
    pub min_speed: f64,
    pub max_speed: f64,
    /// Lateral acceleration bound used to cap yaw rates, m/s².
    pub max_lateral_accel: f64,
    /// Noise on the broadcast copy. Position noise defaults to zero so that
    /// a clean channel tracks with zero error.
    pub noise: MeasurementNoise,
    pub follower: FollowerConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            trips: 20,
            duration: 60.0,
            mix: ManeuverMix::default(),
            durations: ManeuverDurations::default(),
            ramp: 1.0,
            min_speed: 4.0,
            max_speed: 25.0,
            max_lateral_accel: 3.0,
            noise: MeasurementNoise { position: 0.0, speed: 0.05, heading: 0.005, accel: 0.7 },
            follower: FollowerConfig::default(),
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        let m = &self.mix;
        let w = [m.cruise, m.accelerate, m.brake, m.turn, m.lane_change];
        if w.iter().any(|x| !(*x >= 0.0 && x.is_finite())) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::Config("maneuver mix needs non-negative weights with a positive sum".into()));
        }
        if self.durations.all().iter().any(|[lo, hi]| !(*lo > 0.0 && lo <= hi && hi.is_finite())) {
            return Err(Error::Config("maneuver durations need 0 < lo <= hi".into()));
        }
        if !(self.duration >= 5.0 && self.duration.is_finite()) {
            return Err(Error::Config(format!("suite duration must be at least 5 s, got {}", self.duration)));
        }
        if !(self.min_speed > 0.0 && self.min_speed < self.max_speed) {
            return Err(Error::Config("suite speeds need 0 < min_speed < max_speed".into()));
        }
        if !(self.max_lateral_accel > 0.0) {
            return Err(Error::Config("max_lateral_accel must be positive".into()));
        }
        Ok(())
    }
}

/// One generated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    /// Absent for scenarios built from recorded trips.
    pub script: Option<ManeuverScript>,
    pub trip: SweepTrip,
}

/// Draws a maneuver script. Speed is tracked while drawing so that
/// braking and acceleration stay within the configured band.
pub fn random_script(cfg: &SuiteConfig, id: &str, seed: u64) -> ManeuverScript {
    let mut r = rng::stream(seed, &[rng::label("script")]);
    let m = &cfg.mix;
    let weights = [m.cruise, m.accelerate, m.brake, m.turn, m.lane_change];
    let total: f64 = weights.iter().sum();
    let mut v = r.gen_range(cfg.min_speed + 4.0..cfg.max_speed - 3.0).clamp(cfg.min_speed, cfg.max_speed);
    let initial =
        InitialState { x: 0.0, y: 0.0, speed: v, heading: r.gen_range(-std::f64::consts::PI..std::f64::consts::PI) };
    let mut segments = Vec::new();
    let mut t = 0.0;
    // A short cruise so every trip starts with a full window.
    segments.push(Segment::Cruise { duration: 3.0 });
    t += 3.0;
    while t < cfg.duration {
        let mut u = r.gen::<f64>() * total;
        let mut kind = 0;
        while kind < 4 && u >= weights[kind] {
            u -= weights[kind];
            kind += 1;
        }
        let [lo, hi] = cfg.durations.all()[kind];
        let d = if hi > lo { r.gen_range(lo..hi) } else { lo };
        let seg = match kind {
            0 => Segment::Cruise { duration: d },
            1 => {
                let a = r.gen_range(0.5..2.5_f64).min((cfg.max_speed - v) / d).max(0.0);
                v += a * d;
                Segment::Accelerate { duration: d, accel: a }
            }
            2 => {
                let a = r.gen_range(-5.0..-1.0_f64).max(-(v - cfg.min_speed) / d).min(0.0);
                v += a * d;
                Segment::Brake { duration: d, accel: a }
            }
            3 => {
                let max_rate = (cfg.max_lateral_accel / v.max(1.0)).min(0.4);
                let rate = r.gen_range(0.3..1.0) * max_rate * if r.gen::<bool>() { 1.0 } else { -1.0 };
                Segment::Turn { duration: d, yaw_rate: rate }
            }
            _ => Segment::LaneChange { duration: d, offset: if r.gen::<bool>() { 3.5 } else { -3.5 } },
        };
        t += seg.duration();
        segments.push(seg);
    }
    let mut script = ManeuverScript::new(initial, segments);
    script.vehicle_id = id.to_owned();
    script.sample_period = SAMPLE_PERIOD;
    script.ramp = cfg.ramp;
    script
}

/// Builds the scenario for a script.
pub fn scenario(script: ManeuverScript, cfg: &SuiteConfig, seed: u64) -> Result<Scenario> {
    let rv = generate_synthetic_trip(&script, seed)?.trip;
    let mut s = scenario_from_trip(rv, cfg, seed)?;
    s.script = Some(script);
    Ok(s)
}

/// Builds a scenario around a recorded remote-vehicle trip.
pub fn scenario_from_trip(rv: Trip, cfg: &SuiteConfig, seed: u64) -> Result<Scenario> {
    let tx = apply_measurement_noise(&rv, &cfg.noise, rng::derive_seed(seed, &[rng::label("noise")]))?;
    let hv = follow_lead(&rv, &cfg.follower)?.with_id(format!("{}-host", rv.vehicle_id));
    Ok(Scenario { script: None, trip: SweepTrip::new(rv, tx, hv)? })
}

/// `cfg.trips` scenarios; `purpose` separates training from evaluation
/// draws under one root seed.
pub fn generate_suite(cfg: &SuiteConfig, seed: u64, purpose: &str) -> Result<Vec<Scenario>> {
    cfg.validate()?;
    (0..cfg.trips)
        .map(|i| {
            let s = rng::derive_seed(seed, &[rng::label(purpose), i as u64]);
            let script = random_script(cfg, &format!("{purpose}-{i:03}"), s);
            scenario(script, cfg, s)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_is_deterministic_and_bounded() {
        let cfg = SuiteConfig { trips: 3, duration: 30.0, ..Default::default() };
        let a = generate_suite(&cfg, 5, "eval").unwrap();
        let b = generate_suite(&cfg, 5, "eval").unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.trip, y.trip);
            let truth = x.trip.rv_truth.states();
            assert!(truth.iter().all(|s| s.speed <= cfg.max_speed + 1e-6 && s.speed >= 0.0));
            assert!(truth.last().unwrap().t >= 30.0 - 1e-9);
        }
        let c = generate_suite(&cfg, 5, "train").unwrap();
        assert_ne!(a[0].trip.rv_truth, c[0].trip.rv_truth);
    }
}
