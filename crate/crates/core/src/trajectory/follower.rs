//! Host-vehicle trips that follow a lead vehicle along its own path.

use serde::{Deserialize, Serialize};

use super::{Trip, VehicleState};
use crate::error::Result;

/// Delayed-reaction car-following parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FollowerConfig {
    /// Along-path gap at the first sample, metres (bumper to bumper plus
    /// vehicle length is not modelled; vehicles are points).
    pub initial_gap: f64,
    /// Standstill gap, metres.
    pub standstill_gap: f64,
    /// Desired time headway, seconds.
    pub time_headway: f64,
    /// Driver reaction delay applied to the lead's speed, seconds.
    pub reaction_delay: f64,
    /// Gain on the speed difference, 1/s.
    pub speed_gain: f64,
    /// Gain on the gap error, 1/s².
    pub gap_gain: f64,
    pub max_accel: f64,
    pub max_decel: f64,
}

impl Default for FollowerConfig {
    fn default() -> Self {
        Self {
            initial_gap: 20.0,
            standstill_gap: 4.0,
            time_headway: 1.0,
            reaction_delay: 1.2,
            speed_gain: 0.8,
            gap_gain: 0.08,
            max_accel: 2.5,
            max_decel: 7.0,
        }
    }
}

struct Path {
    arc: Vec<f64>,
    states: Vec<VehicleState>,
}

impl Path {
    fn new(lead: &Trip) -> Self {
        let states = lead.states().to_vec();
        let mut arc = Vec::with_capacity(states.len());
        let mut s = 0.0;
        for (i, st) in states.iter().enumerate() {
            if i > 0 {
                let p = &states[i - 1];
                s += (st.x - p.x).hypot(st.y - p.y);
            }
            arc.push(s);
        }
        Self { arc, states }
    }

    /// Pose (x, y, heading) at arc length `s`; before the start the path is
    /// extended backwards along the initial heading, after the end forwards.
    fn pose(&self, s: f64) -> (f64, f64, f64) {
        let first = &self.states[0];
        if s <= 0.0 {
            let (sin, cos) = first.heading.sin_cos();
            return (first.x + s * cos, first.y + s * sin, first.heading);
        }
        let last_arc = *self.arc.last().unwrap();
        if s >= last_arc {
            let last = self.states.last().unwrap();
            let (sin, cos) = last.heading.sin_cos();
            let d = s - last_arc;
            return (last.x + d * cos, last.y + d * sin, last.heading);
        }
        let j = self.arc.partition_point(|&a| a <= s).max(1);
        let (a0, a1) = (self.arc[j - 1], self.arc[j]);
        let w = if a1 > a0 { (s - a0) / (a1 - a0) } else { 0.0 };
        let (p, q) = (&self.states[j - 1], &self.states[j]);
        (p.x + w * (q.x - p.x), p.y + w * (q.y - p.y), p.heading + w * (q.heading - p.heading))
    }
}

/// Generates a host trip driving behind `lead` on the same path.
///
/// The follower's acceleration reacts to the lead speed observed
/// `reaction_delay` seconds ago and to the gap error against
/// `standstill_gap + time_headway * v`.
pub fn follow_lead(lead: &Trip, cfg: &FollowerConfig) -> Result<Trip> {
    let path = Path::new(lead);
    let dt = lead.sample_period();
    let lead_states = lead.states();
    let delay_steps = (cfg.reaction_delay / dt).round() as usize;

    let mut s = -cfg.initial_gap;
    let mut v = lead_states[0].speed;
    let mut states = Vec::with_capacity(lead_states.len());
    for (k, lead_now) in lead_states.iter().enumerate() {
        let seen = &lead_states[k.saturating_sub(delay_steps)];
        let gap = path.arc[k] - s;
        let desired = cfg.standstill_gap + cfg.time_headway * v;
        let mut a = cfg.speed_gain * (seen.speed - v) + cfg.gap_gain * (gap - desired);
        // Safe-speed bound: after one step the follower can still stop
        // behind the lead braking at the same rate.
        let b = cfg.max_decel;
        let room = (gap - cfg.standstill_gap).max(0.0);
        let v_safe = -b * dt + ((b * dt).powi(2) + 2.0 * b * room + lead_now.speed.powi(2)).sqrt();
        a = a.min((v_safe - v) / dt).clamp(-cfg.max_decel, cfg.max_accel);
        let (x, y, heading) = path.pose(s);
        let a_rec = if v <= 0.0 && a < 0.0 { 0.0 } else { a };
        states.push(VehicleState { t: lead_now.t, x, y, speed: v, heading, accel: a_rec });
        let v1 = (v + a * dt).max(0.0);
        s += 0.5 * (v + v1) * dt;
        v = v1;
    }
    Trip::new(format!("{}-follower", lead.vehicle_id), states, dt)
}
