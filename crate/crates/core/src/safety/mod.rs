//! CAMP Linear forward collision warning.
//!
//! The warning range is the brake onset range plus the distance the gap
//! closes during the driver and brake delay. A warning is raised when the
//! current gap is inside it.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::catc::{App, AppTable, CamEntry};
use crate::error::{Error, Result};
use crate::forecast::ForecastSource;
use crate::trajectory::VehicleState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FcwConfig {
    /// Driver plus brake delay, seconds.
    pub t_d: f64,
    /// Assumed host deceleration once braking, m/s² (negative).
    pub a_req: f64,
    /// Evaluation period, seconds.
    pub eval_period: f64,
    /// Below this speed a remote vehicle counts as stationary, m/s.
    pub stationary_speed: f64,
}

impl Default for FcwConfig {
    fn default() -> Self {
        Self { t_d: 1.5, a_req: -5.0, eval_period: 0.1, stationary_speed: 0.5 }
    }
}

impl FcwConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_d > 0.0 && self.t_d.is_finite()) {
            return Err(Error::Config(format!("fcw t_d must be positive, got {}", self.t_d)));
        }
        if !(self.a_req < 0.0 && self.a_req.is_finite()) {
            return Err(Error::Config(format!("fcw a_req must be negative, got {}", self.a_req)));
        }
        if !(self.eval_period > 0.0 && self.eval_period.is_finite()) {
            return Err(Error::Config(format!("fcw eval_period must be positive, got {}", self.eval_period)));
        }
        if !(self.stationary_speed >= 0.0) {
            return Err(Error::Config("fcw stationary_speed must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BorCase {
    /// Remote vehicle standing still.
    Stationary,
    /// Remote vehicle still moving when the gap stops closing.
    MovingMoving,
    /// Remote vehicle comes to rest first.
    MovingStopping,
}

impl BorCase {
    pub fn as_str(self) -> &'static str {
        match self {
            BorCase::Stationary => "stationary",
            BorCase::MovingMoving => "moving-moving",
            BorCase::MovingStopping => "moving-stopping",
        }
    }
}

/// Brake onset range for a given case. `v_hvp`, `v_rvp` are speeds after
/// the delay, `a_rv` the remote deceleration, `a_req` the host's.
/// Negative values clamp to 0; a Case 2 with no deceleration margin
/// returns infinity when closing.
pub fn bor_for_case(case: BorCase, v_hvp: f64, v_rvp: f64, a_rv: f64, a_req: f64) -> f64 {
    let host_stop = v_hvp * v_hvp / (-2.0 * a_req);
    let raw = match case {
        BorCase::Stationary => host_stop,
        BorCase::MovingMoving => {
            let closing = v_hvp - v_rvp;
            let margin = a_req - a_rv;
            if margin == 0.0 {
                if closing > 0.0 {
                    f64::INFINITY
                } else {
                    0.0
                }
            } else {
                closing * closing / (-2.0 * margin)
            }
        }
        BorCase::MovingStopping => {
            if a_rv < 0.0 {
                host_stop - v_rvp * v_rvp / (-2.0 * a_rv)
            } else {
                host_stop
            }
        }
    };
    raw.max(0.0)
}

/// Picks the case: stationary below `stationary_speed`; stopping when the
/// remote vehicle decelerates and halts within `time_to_range`; moving
/// otherwise. A remote vehicle braking harder than `a_req` always stops
/// first and is treated as stopping.
pub fn bor_case(v_rv: f64, v_rvp: f64, a_rv: f64, a_req: f64, time_to_range: f64, stationary_speed: f64) -> BorCase {
    if v_rv < stationary_speed {
        return BorCase::Stationary;
    }
    if a_rv < 0.0 {
        let t_stop = v_rvp / -a_rv;
        if t_stop <= time_to_range || a_rv < a_req {
            return BorCase::MovingStopping;
        }
    }
    BorCase::MovingMoving
}

/// Brake onset range with automatic case selection.
pub fn bor(
    v_hvp: f64,
    v_rvp: f64,
    a_rv: f64,
    a_req: f64,
    time_to_range: f64,
    stationary_speed: f64,
) -> Result<(f64, BorCase)> {
    if !(a_req < 0.0) {
        return Err(Error::InvalidArgument(format!("a_req must be negative, got {a_req}")));
    }
    let v_rv = v_rvp;
    let case = bor_case(v_rv, v_rvp, a_rv, a_req, time_to_range, stationary_speed);
    Ok((bor_for_case(case, v_hvp, v_rvp, a_rv, a_req), case))
}

/// Kinematics needed by the warning range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kinematics {
    pub speed: f64,
    pub accel: f64,
}

impl From<&VehicleState> for Kinematics {
    fn from(s: &VehicleState) -> Self {
        Self { speed: s.speed, accel: s.accel }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FcwDecision {
    pub t: f64,
    pub rv_id: String,
    pub range: f64,
    pub r_w: f64,
    pub warn: bool,
    pub case: BorCase,
    pub source: ForecastSource,
}

/// Warning range for one pair at gap `range`. The result is never below
/// the brake onset range.
pub fn warning_range(hv: Kinematics, rv: Kinematics, range: f64, cfg: &FcwConfig) -> (f64, BorCase) {
    let td = cfg.t_d;
    let v_hvp = (hv.speed + hv.accel * td).max(0.0);
    let v_rvp = (rv.speed + rv.accel * td).max(0.0);
    let time_to_range = if v_hvp > 0.0 { range.max(0.0) / v_hvp } else { f64::INFINITY };
    let case = bor_case(rv.speed, v_rvp, rv.accel, cfg.a_req, time_to_range, cfg.stationary_speed);
    let b = bor_for_case(case, v_hvp, v_rvp, rv.accel, cfg.a_req);
    let r_w = b + (hv.speed - rv.speed) * td + 0.5 * (hv.accel - rv.accel) * td * td;
    (r_w.max(b), case)
}

/// Evaluates one pair and packages the decision.
pub fn evaluate(
    t: f64,
    rv_id: &str,
    hv: Kinematics,
    rv: Kinematics,
    range: f64,
    source: ForecastSource,
    cfg: &FcwConfig,
) -> FcwDecision {
    let (r_w, case) = warning_range(hv, rv, range, cfg);
    FcwDecision { t, rv_id: rv_id.to_owned(), range, r_w, warn: range < r_w, case, source }
}

/// Host state and CAM snapshot at one evaluation instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FcwFrame {
    pub t: f64,
    pub host: VehicleState,
    pub cam: Vec<CamEntry>,
}

/// Runs the warning over a sequence of frames, for every remote vehicle
/// the table routes to FCW. Range is the longitudinal offset in the host
/// frame.
pub fn fcw_stream<'a, I>(frames: I, table: &AppTable, cfg: &FcwConfig) -> Vec<FcwDecision>
where
    I: IntoIterator<Item = &'a FcwFrame>,
{
    let mut out = Vec::new();
    for frame in frames {
        let hv = Kinematics::from(&frame.host);
        for e in &frame.cam {
            let (Some(zone), Some(range)) = (e.zone, e.x_rel) else { continue };
            if !table.apps(zone, e.direction).contains(&App::Fcw) {
                continue;
            }
            let rv = Kinematics { speed: e.speed, accel: e.accel };
            out.push(evaluate(frame.t, &e.id, hv, rv, range, e.source, cfg));
        }
    }
    out
}

/// Writes decisions as CSV `t,rv_id,range,r_w,warn,case,source`.
pub fn write_decision_log<W: Write>(decisions: &[FcwDecision], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::InvalidArgument(format!("decision log: {e}"));
    w.write_record(["t", "rv_id", "range", "r_w", "warn", "case", "source"]).map_err(csv_err)?;
    for d in decisions {
        w.write_record([
            format!("{:.1}", d.t),
            d.rv_id.clone(),
            format!("{:.4}", d.range),
            format!("{:.4}", d.r_w),
            (d.warn as u8).to_string(),
            d.case.as_str().to_owned(),
            d.source.as_str().to_owned(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<decision log>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        assert_eq!(bor_for_case(BorCase::Stationary, 20.0, 0.0, 0.0, -5.0), 40.0);
        assert_eq!(bor_for_case(BorCase::MovingMoving, 15.0, 15.0, 0.0, -5.0), 0.0);
        assert_eq!(bor_for_case(BorCase::MovingStopping, 20.0, 10.0, -2.0, -5.0), 15.0);
        // Case selection for the stopping example: the RV halts after 5 s,
        // before the HV covers a 120 m gap at 20 m/s.
        assert_eq!(bor(20.0, 10.0, -2.0, -5.0, 6.0, 0.5).unwrap(), (15.0, BorCase::MovingStopping));
        assert_eq!(bor(20.0, 0.0, 0.0, -5.0, 5.0, 0.5).unwrap(), (40.0, BorCase::Stationary));
        assert!(bor(20.0, 0.0, 0.0, 1.0, 5.0, 0.5).is_err());
    }

    #[test]
    fn degenerate_margin() {
        assert_eq!(bor_for_case(BorCase::MovingMoving, 20.0, 10.0, -5.0, -5.0), f64::INFINITY);
        assert_eq!(bor_for_case(BorCase::MovingMoving, 10.0, 20.0, -5.0, -5.0), 0.0);
    }

    #[test]
    fn warning_range_examples() {
        let cfg = FcwConfig::default();
        let hv = Kinematics { speed: 20.0, accel: 0.0 };
        let rv = Kinematics { speed: 0.0, accel: 0.0 };
        let (r_w, case) = warning_range(hv, rv, 100.0, &cfg);
        assert_eq!((r_w, case), (70.0, BorCase::Stationary));
        assert!(!evaluate(0.0, "rv", hv, rv, 100.0, ForecastSource::Bsm, &cfg).warn);
        assert!(evaluate(0.0, "rv", hv, rv, 65.0, ForecastSource::Bsm, &cfg).warn);
        let same = Kinematics { speed: 15.0, accel: 0.3 };
        assert_eq!(warning_range(same, same, 30.0, &cfg).0, 0.0);
    }

    #[test]
    fn empty_stream_and_log() {
        assert!(fcw_stream(&[], &AppTable::default(), &FcwConfig::default()).is_empty());
        let d = evaluate(
            1.0,
            "rv",
            Kinematics { speed: 20.0, accel: 0.0 },
            Kinematics { speed: 0.0, accel: 0.0 },
            65.0,
            ForecastSource::Gp,
            &FcwConfig::default(),
        );
        let mut buf = Vec::new();
        write_decision_log(&[d], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "t,rv_id,range,r_w,warn,case,source\n1.0,rv,65.0000,70.0000,1,stationary,gp\n"
        );
    }
}
