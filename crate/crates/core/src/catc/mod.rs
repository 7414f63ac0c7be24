//! Context-aware target classification.
//!
//! Remote vehicles are placed in a longitudinal/lateral zone of the host's
//! heading-aligned frame and given a travel direction relative to the lane
//! heading (approximated by the host heading). A configurable table maps
//! zones to the safety applications that must evaluate the vehicle.

mod local_map;

pub use local_map::{outlier_gate, write_cam_ndjson, CamEntry, GateDecision, LocalMap, LocalMapRecord};

use std::collections::BTreeSet;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{wrap_angle, VehicleState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Longitudinal {
    Ahead,
    Behind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Lateral {
    FarLeft,
    Left,
    OnCentre,
    Right,
    FarRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ClassificationZone {
    pub longitudinal: Longitudinal,
    pub lateral: Lateral,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Ongoing,
    Oncoming,
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TcConfig {
    /// Lane width, metres.
    pub w_lane: f64,
    /// Heading difference up to which a vehicle is ongoing, radians.
    pub dphi_ongoing: f64,
    /// Heading difference from which a vehicle is oncoming, radians.
    pub dphi_oncoming: f64,
    /// A record with no BSM for longer than this is stale, seconds.
    pub staleness_limit: f64,
    /// Outlier gate radius at zero elapsed time, metres.
    pub gate_base: f64,
    /// Speed bound used to grow the gate with elapsed time, m/s.
    pub gate_speed: f64,
    /// Path history capacity, samples.
    pub history_capacity: usize,
    /// Steps forecast on every accepted BSM; longer horizons are computed
    /// on demand.
    pub forecast_steps: usize,
    /// Longest horizon ever forecast, steps; beyond it the last point is
    /// held and the record reported stale.
    pub max_forecast_steps: usize,
}

impl Default for TcConfig {
    fn default() -> Self {
        Self {
            w_lane: 3.5,
            dphi_ongoing: PI / 4.0,
            dphi_oncoming: 3.0 * PI / 4.0,
            staleness_limit: 3.0,
            gate_base: 5.0,
            gate_speed: 60.0,
            history_capacity: 30,
            forecast_steps: 10,
            max_forecast_steps: 600,
        }
    }
}

impl TcConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.w_lane > 0.0
            && self.dphi_ongoing > 0.0
            && self.dphi_oncoming > self.dphi_ongoing
            && self.dphi_oncoming <= PI
            && self.staleness_limit > 0.0
            && self.gate_base >= 0.0
            && self.gate_speed >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid classification config {self:?}")))
        }
    }
}

/// Zone, direction and the relative coordinates they came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub zone: ClassificationZone,
    pub direction: Direction,
    /// Longitudinal offset in the host frame, metres, ahead positive.
    pub x_rel: f64,
    /// Lateral offset in the host frame, metres, left positive.
    pub ld: f64,
    /// Absolute wrapped heading difference to the lane, radians in [0, pi].
    pub dphi: f64,
}

/// Relative position of `rv` in the frame of `hv` (x along the host
/// heading, y to its left).
pub fn relative_position(hv: &VehicleState, rv_x: f64, rv_y: f64) -> (f64, f64) {
    let (dx, dy) = (rv_x - hv.x, rv_y - hv.y);
    let (s, c) = hv.heading.sin_cos();
    (c * dx + s * dy, -s * dx + c * dy)
}

pub fn longitudinal_zone(x_rel: f64) -> Longitudinal {
    if x_rel >= 0.0 {
        Longitudinal::Ahead
    } else {
        Longitudinal::Behind
    }
}

/// Lateral bin; `|ld| <= w/2` is on centre, the outer bins start beyond
/// `1.5 w`.
pub fn lateral_zone(ld: f64, w_lane: f64) -> Lateral {
    let half = 0.5 * w_lane;
    let outer = 1.5 * w_lane;
    if ld.abs() <= half {
        Lateral::OnCentre
    } else if ld > half && ld <= outer {
        Lateral::Left
    } else if ld > outer {
        Lateral::FarLeft
    } else if ld >= -outer {
        Lateral::Right
    } else {
        Lateral::FarRight
    }
}

pub fn direction_of(dphi: f64, cfg: &TcConfig) -> Direction {
    if dphi <= cfg.dphi_ongoing {
        Direction::Ongoing
    } else if dphi >= cfg.dphi_oncoming {
        Direction::Oncoming
    } else {
        Direction::Unclassified
    }
}

/// Absolute heading difference wrapped into `[0, pi]`.
pub fn heading_difference(a: f64, b: f64) -> f64 {
    wrap_angle(a - b).abs()
}

/// Classifies `rv` relative to `hv`. The lane heading is the host heading.
pub fn classify(hv: &VehicleState, rv: &VehicleState, cfg: &TcConfig) -> Classification {
    classify_at(hv, rv.x, rv.y, rv.heading, cfg)
}

pub fn classify_at(hv: &VehicleState, rv_x: f64, rv_y: f64, rv_heading: f64, cfg: &TcConfig) -> Classification {
    let (x_rel, ld) = relative_position(hv, rv_x, rv_y);
    let dphi = heading_difference(rv_heading, hv.heading);
    Classification {
        zone: ClassificationZone { longitudinal: longitudinal_zone(x_rel), lateral: lateral_zone(ld, cfg.w_lane) },
        direction: direction_of(dphi, cfg),
        x_rel,
        ld,
        dphi,
    }
}

/// Safety applications a vehicle can be routed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum App {
    Fcw,
    Eebl,
    Lcw,
    Bsw,
    Ima,
    Dnpw,
    Clw,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppRule {
    pub longitudinal: Longitudinal,
    pub lateral: Vec<Lateral>,
    pub direction: Direction,
    pub apps: Vec<App>,
}

/// Zone-to-application table. Loaded from configuration; the default is
/// below.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppTable {
    #[serde(rename = "rule")]
    pub rules: Vec<AppRule>,
}

const DEFAULT_APP_TABLE: &str = r#"
[[rule]]
longitudinal = "ahead"
lateral = ["on-centre"]
direction = "ongoing"
apps = ["FCW", "EEBL"]

[[rule]]
longitudinal = "ahead"
lateral = ["left", "right"]
direction = "ongoing"
apps = ["LCW"]

[[rule]]
longitudinal = "behind"
lateral = ["left", "right"]
direction = "ongoing"
apps = ["BSW", "LCW"]
"#;

impl Default for AppTable {
    fn default() -> Self {
        Self::from_toml(DEFAULT_APP_TABLE).expect("built-in app table parses")
    }
}

impl AppTable {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("app table: {e}")))
    }

    pub fn apps(&self, zone: ClassificationZone, direction: Direction) -> BTreeSet<App> {
        self.rules
            .iter()
            .filter(|r| {
                r.longitudinal == zone.longitudinal && r.direction == direction && r.lateral.contains(&zone.lateral)
            })
            .flat_map(|r| r.apps.iter().copied())
            .collect()
    }
}

/// Applications for a zone under the default table.
pub fn zones_to_apps(zone: ClassificationZone, direction: Direction) -> BTreeSet<App> {
    AppTable::default().apps(zone, direction)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn st(x: f64, y: f64, heading: f64) -> VehicleState {
        VehicleState { t: 0.0, x, y, speed: 10.0, heading, accel: 0.0 }
    }

    #[test]
    fn documented_cases() {
        let cfg = TcConfig::default();
        let c = classify(&st(0.0, 0.0, 0.0), &st(10.0, 0.0, 0.0), &cfg);
        assert_eq!(c.zone.longitudinal, Longitudinal::Ahead);
        assert_eq!(c.zone.lateral, Lateral::OnCentre);
        assert_eq!(c.direction, Direction::Ongoing);
        assert_eq!(lateral_zone(2.0, 3.5), Lateral::Left);
        assert_eq!(lateral_zone(1.75, 3.5), Lateral::OnCentre);
        assert_eq!(lateral_zone(-1.75, 3.5), Lateral::OnCentre);
        assert_eq!(lateral_zone(5.25, 3.5), Lateral::Left);
        assert_eq!(lateral_zone(-5.25, 3.5), Lateral::Right);
        assert_eq!(lateral_zone(5.26, 3.5), Lateral::FarLeft);
        let cfg2 = TcConfig { dphi_oncoming: 2.8, ..cfg };
        assert_eq!(direction_of(PI, &cfg2), Direction::Oncoming);
        assert!(zones_to_apps(c.zone, c.direction).contains(&App::Fcw));
        let far = ClassificationZone { longitudinal: Longitudinal::Behind, lateral: Lateral::FarLeft };
        assert!(zones_to_apps(far, Direction::Ongoing).is_empty());
        let centre = ClassificationZone { longitudinal: Longitudinal::Ahead, lateral: Lateral::OnCentre };
        assert!(zones_to_apps(centre, Direction::Oncoming).is_empty());
    }

    #[test]
    fn rotated_frame() {
        let cfg = TcConfig::default();
        // Host heading north; a vehicle to the west is on its left.
        let c = classify(&st(0.0, 0.0, PI / 2.0), &st(-3.0, 1.0, PI / 2.0), &cfg);
        assert!((c.x_rel - 1.0).abs() < 1e-12 && (c.ld - 3.0).abs() < 1e-12);
        assert_eq!(c.zone.lateral, Lateral::Left);
    }
}
