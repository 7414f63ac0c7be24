//! Local map of remote vehicles.

use std::collections::{BTreeMap, VecDeque};
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{classify_at, AppTable, ClassificationZone, Direction, TcConfig};
use crate::error::{Error, Result};
use crate::forecast::{ForecastPoint, ForecastSource, Predictor, PredictorContext, PredictorRegistry, FORECAST_STEP};
use crate::trajectory::VehicleState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GateDecision {
    Accept,
    Reject,
}

/// Latest knowledge about one remote vehicle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMapRecord {
    pub vehicle_id: String,
    pub last_bsm: VehicleState,
    pub last_rx_time: f64,
    pub path_history: VecDeque<VehicleState>,
    /// Forecast on the 100 ms grid after `last_bsm`.
    pub forecast: Vec<ForecastPoint>,
    /// Zone at the last classification; `None` until the host is known.
    pub zone: Option<ClassificationZone>,
    pub direction: Direction,
    pub stale: bool,
    /// BSMs rejected by the outlier gate.
    pub rejected: usize,
}

/// State of a record at some instant.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Estimate {
    x: f64,
    y: f64,
    speed: f64,
    heading: f64,
    source: ForecastSource,
    beyond: bool,
}

impl LocalMapRecord {
    /// Position and motion at `t`, from the last BSM at its own timestamp
    /// and from the forecast (linearly interpolated) afterwards. Past the
    /// forecast the last point is held and `beyond` is set.
    fn estimate(&self, t: f64) -> Estimate {
        let b = &self.last_bsm;
        let from_bsm =
            Estimate { x: b.x, y: b.y, speed: b.speed, heading: b.heading, source: ForecastSource::Bsm, beyond: false };
        let u = (t - b.t) / FORECAST_STEP;
        if u <= 1e-9 {
            return from_bsm;
        }
        if self.forecast.is_empty() {
            return Estimate { beyond: true, ..from_bsm };
        }
        let n = self.forecast.len();
        if u > n as f64 + 1e-9 {
            let p = &self.forecast[n - 1];
            return Estimate {
                x: p.x,
                y: p.y,
                speed: p.speed_mean,
                heading: p.heading_mean,
                source: p.source,
                beyond: true,
            };
        }
        let k = u.floor();
        let w = u - k;
        let k = k as usize;
        let (x0, y0, s0, h0) = if k == 0 {
            (b.x, b.y, b.speed, b.heading)
        } else {
            let p = &self.forecast[k - 1];
            (p.x, p.y, p.speed_mean, p.heading_mean)
        };
        if w < 1e-9 || k >= n {
            let src = if k == 0 { ForecastSource::Bsm } else { self.forecast[k - 1].source };
            return Estimate { x: x0, y: y0, speed: s0, heading: h0, source: src, beyond: false };
        }
        let p = &self.forecast[k];
        Estimate {
            x: x0 + w * (p.x - x0),
            y: y0 + w * (p.y - y0),
            speed: s0 + w * (p.speed_mean - s0),
            heading: h0 + w * (p.heading_mean - h0),
            source: p.source,
            beyond: false,
        }
    }
}

/// Decides whether a BSM is plausible given the record's forecast.
/// Stale records accept anything.
pub fn outlier_gate(record: &LocalMapRecord, bsm: &VehicleState, rx_time: f64, cfg: &TcConfig) -> GateDecision {
    let elapsed = rx_time - record.last_rx_time;
    if record.stale || elapsed > cfg.staleness_limit {
        return GateDecision::Accept;
    }
    let e = record.estimate(bsm.t);
    let radius = cfg.gate_base + cfg.gate_speed * (bsm.t - record.last_bsm.t).max(0.0);
    if bsm.distance_to(e.x, e.y) <= radius {
        GateDecision::Accept
    } else {
        GateDecision::Reject
    }
}

struct Entry {
    record: LocalMapRecord,
    predictor: Box<dyn Predictor>,
}

/// One row of a context-aware map snapshot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CamEntry {
    pub id: String,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub heading: f64,
    /// Acceleration from the latest BSM.
    pub accel: f64,
    pub zone: Option<ClassificationZone>,
    pub direction: Direction,
    pub stale: bool,
    pub source: ForecastSource,
    /// Longitudinal offset in the host frame, when the host is known.
    pub x_rel: Option<f64>,
}

/// Single-writer map of remote vehicles, each with its own predictor.
pub struct LocalMap {
    cfg: TcConfig,
    table: AppTable,
    registry: PredictorRegistry,
    predictor: String,
    ctx: PredictorContext,
    host: Option<VehicleState>,
    entries: BTreeMap<String, Entry>,
}

impl LocalMap {
    pub fn new(cfg: TcConfig, registry: PredictorRegistry, predictor: &str, ctx: PredictorContext) -> Result<Self> {
        cfg.validate()?;
        if !registry.contains(predictor) {
            return Err(Error::Config(format!("unknown predictor '{predictor}'")));
        }
        Ok(Self {
            cfg,
            table: AppTable::default(),
            registry,
            predictor: predictor.to_owned(),
            ctx,
            host: None,
            entries: BTreeMap::new(),
        })
    }

    pub fn with_app_table(mut self, table: AppTable) -> Self {
        self.table = table;
        self
    }

    pub fn config(&self) -> &TcConfig {
        &self.cfg
    }

    pub fn app_table(&self) -> &AppTable {
        &self.table
    }

    /// Host state from its own sensors.
    pub fn set_host(&mut self, hv: VehicleState) {
        self.host = Some(hv);
    }

    pub fn host(&self) -> Option<&VehicleState> {
        self.host.as_ref()
    }

    pub fn record(&self, id: &str) -> Option<&LocalMapRecord> {
        self.entries.get(id).map(|e| &e.record)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Predictor of one vehicle, for inspection.
    pub fn predictor(&self, id: &str) -> Option<&dyn Predictor> {
        self.entries.get(id).map(|e| e.predictor.as_ref())
    }

    fn classify_entry(
        host: Option<&VehicleState>,
        cfg: &TcConfig,
        record: &mut LocalMapRecord,
        x: f64,
        y: f64,
        heading: f64,
    ) {
        if let Some(hv) = host {
            let c = classify_at(hv, x, y, heading, cfg);
            record.zone = Some(c.zone);
            record.direction = c.direction;
        }
    }

    fn extend_forecast(entry: &mut Entry, cfg: &TcConfig, t: f64) {
        let need = ((t - entry.record.last_bsm.t) / FORECAST_STEP - 1e-9).ceil();
        if need <= entry.record.forecast.len() as f64 {
            return;
        }
        let have = entry.record.forecast.len();
        if have >= cfg.max_forecast_steps {
            return;
        }
        let steps = (need as usize).max(2 * have).min(cfg.max_forecast_steps);
        entry.record.forecast = entry.predictor.forecast(steps);
    }

    /// Applies a received BSM. Unknown vehicles get a new record.
    pub fn update_record(&mut self, vehicle_id: &str, bsm: &VehicleState, rx_time: f64) -> Result<GateDecision> {
        if rx_time < bsm.t {
            return Err(Error::InvalidArgument(format!("BSM received at {rx_time} before it was sent at {}", bsm.t)));
        }
        let cfg = self.cfg;
        let host = self.host;
        if let Some(entry) = self.entries.get_mut(vehicle_id) {
            if bsm.t <= entry.record.last_bsm.t {
                entry.record.rejected += 1;
                return Ok(GateDecision::Reject);
            }
            Self::extend_forecast(entry, &cfg, bsm.t);
            entry.record.stale = rx_time - entry.record.last_rx_time > cfg.staleness_limit;
            if outlier_gate(&entry.record, bsm, rx_time, &cfg) == GateDecision::Reject {
                entry.record.rejected += 1;
                return Ok(GateDecision::Reject);
            }
            entry.predictor.observe(bsm);
            let r = &mut entry.record;
            r.last_bsm = *bsm;
            r.last_rx_time = rx_time;
            r.stale = false;
            r.path_history.push_back(*bsm);
            while r.path_history.len() > cfg.history_capacity.max(1) {
                r.path_history.pop_front();
            }
            r.forecast = entry.predictor.forecast(cfg.forecast_steps);
            Self::classify_entry(host.as_ref(), &cfg, r, bsm.x, bsm.y, bsm.heading);
            return Ok(GateDecision::Accept);
        }
        let mut predictor = self.registry.create(&self.predictor, &self.ctx)?;
        predictor.observe(bsm);
        let forecast = predictor.forecast(cfg.forecast_steps);
        let mut record = LocalMapRecord {
            vehicle_id: vehicle_id.to_owned(),
            last_bsm: *bsm,
            last_rx_time: rx_time,
            path_history: VecDeque::from([*bsm]),
            forecast,
            zone: None,
            direction: Direction::Unclassified,
            stale: false,
            rejected: 0,
        };
        Self::classify_entry(host.as_ref(), &cfg, &mut record, bsm.x, bsm.y, bsm.heading);
        self.entries.insert(vehicle_id.to_owned(), Entry { record, predictor });
        Ok(GateDecision::Accept)
    }

    /// Extends forecasts so they cover `now` and refreshes staleness and
    /// zones. Call before [`snapshot`](Self::snapshot).
    pub fn advance(&mut self, now: f64) {
        let cfg = self.cfg;
        let host = self.host;
        for entry in self.entries.values_mut() {
            Self::extend_forecast(entry, &cfg, now);
            let e = entry.record.estimate(now);
            entry.record.stale = now - entry.record.last_rx_time > cfg.staleness_limit || e.beyond;
            Self::classify_entry(host.as_ref(), &cfg, &mut entry.record, e.x, e.y, e.heading);
        }
    }

    /// Every record extrapolated to `now`. Pure read.
    pub fn snapshot(&self, now: f64) -> Vec<CamEntry> {
        self.entries
            .values()
            .map(|entry| {
                let r = &entry.record;
                let e = r.estimate(now);
                let c = self.host.as_ref().map(|hv| classify_at(hv, e.x, e.y, e.heading, &self.cfg));
                CamEntry {
                    id: r.vehicle_id.clone(),
                    t: now,
                    x: e.x,
                    y: e.y,
                    speed: e.speed,
                    heading: e.heading,
                    accel: r.last_bsm.accel,
                    zone: c.map(|c| c.zone),
                    direction: c.map_or(Direction::Unclassified, |c| c.direction),
                    stale: now - r.last_rx_time > self.cfg.staleness_limit || e.beyond,
                    source: e.source,
                    x_rel: c.map(|c| c.x_rel),
                }
            })
            .collect()
    }
}

/// Writes snapshot rows as newline-delimited JSON.
pub fn write_cam_ndjson<W: Write>(rows: &[CamEntry], mut out: W) -> Result<()> {
    for row in rows {
        serde_json::to_writer(&mut out, row)?;
        out.write_all(b"\n").map_err(|e| Error::io("<cam output>", e))?;
    }
    Ok(())
}
