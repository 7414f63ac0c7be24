//! Trip data model and ingestion.
//!
//! A [`Trip`] is a uniformly sampled sequence of [`VehicleState`]s in a local
//! East-North-Up frame. Headings are stored unwrapped so that consecutive
//! samples never jump by more than pi; wrapping happens only at
//! classification time.

mod csv_io;
mod follower;
mod geo;
mod kinematics;
mod synthetic;

pub use csv_io::{load_geo_csv, load_trip_csv, save_trip_csv};
pub use follower::{follow_lead, FollowerConfig};
pub use geo::{geo_to_enu, GeoSample, WGS84_A, WGS84_F};
pub use kinematics::{derive_kinematics, resample_uniform, unwrap_angles};
pub use synthetic::{
    apply_measurement_noise, generate_synthetic_trip, InitialState, ManeuverScript, MeasurementNoise, Segment,
    SyntheticTrip,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Nominal broadcast / GPS sample period.
pub const SAMPLE_PERIOD: f64 = 0.1;

/// Grid tolerance used when checking uniform sampling.
pub const GRID_TOLERANCE: f64 = 1e-9;

/// Timestamped kinematic sample of one vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    /// Seconds since trip start.
    pub t: f64,
    /// East, metres.
    pub x: f64,
    /// North, metres.
    pub y: f64,
    /// Longitudinal speed, m/s.
    pub speed: f64,
    /// Unwrapped heading, radians, measured counter-clockwise from East.
    pub heading: f64,
    /// Longitudinal acceleration, m/s².
    pub accel: f64,
}

impl VehicleState {
    pub fn position(&self) -> (f64, f64) {
        (self.x, self.y)
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }

    /// True when every field is finite.
    pub fn is_finite(&self) -> bool {
        [self.t, self.x, self.y, self.speed, self.heading, self.accel].iter().all(|v| v.is_finite())
    }
}

/// A point in the local frame with its timestamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimedPoint {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Immutable, uniformly sampled trip of one vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trip {
    pub vehicle_id: String,
    states: Vec<VehicleState>,
    sample_period: f64,
}

impl Trip {
    /// Validates and wraps `states`.
    ///
    /// States must be non-empty, finite, have non-negative speed, strictly
    /// increasing time on a uniform `sample_period` grid and no heading jump
    /// of pi or more.
    pub fn new(vehicle_id: impl Into<String>, states: Vec<VehicleState>, sample_period: f64) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if !(sample_period > 0.0 && sample_period.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample period must be positive, got {sample_period}")));
        }
        for (i, s) in states.iter().enumerate() {
            if !s.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite state at index {i}")));
            }
            if s.speed < 0.0 {
                return Err(Error::InvalidArgument(format!("negative speed {} at index {i}", s.speed)));
            }
        }
        for (i, w) in states.windows(2).enumerate() {
            let dt = w[1].t - w[0].t;
            if dt <= 0.0 {
                return Err(Error::NonMonotoneTime { index: i + 1 });
            }
            if (dt - sample_period).abs() > GRID_TOLERANCE.max(1e-9 * w[1].t.abs()) {
                return Err(Error::InvalidArgument(format!(
                    "gap {dt} at index {} is off the {sample_period} s grid",
                    i + 1
                )));
            }
            if (w[1].heading - w[0].heading).abs() >= std::f64::consts::PI {
                return Err(Error::InvalidArgument(format!("heading is not unwrapped at index {}", i + 1)));
            }
        }
        Ok(Self { vehicle_id: vehicle_id.into(), states, sample_period })
    }

    pub fn states(&self) -> &[VehicleState] {
        &self.states
    }

    pub fn sample_period(&self) -> f64 {
        self.sample_period
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.states.last().map_or(0.0, |l| l.t) - self.states[0].t
    }

    /// Index of the sample nearest to `t`, if `t` lies on the trip's span.
    pub fn index_at(&self, t: f64) -> Option<usize> {
        let t0 = self.states[0].t;
        let k = ((t - t0) / self.sample_period).round();
        if k < 0.0 {
            return None;
        }
        let k = k as usize;
        (k < self.states.len()).then_some(k)
    }

    /// Replaces the vehicle id, keeping the states.
    pub fn with_id(mut self, vehicle_id: impl Into<String>) -> Self {
        self.vehicle_id = vehicle_id.into();
        self
    }
}

/// Wraps an angle to `[-pi, pi)`.
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let w = (a + PI).rem_euclid(TAU) - PI;
    if w >= PI {
        w - TAU
    } else {
        w
    }
}
