//! Lossy broadcast emulation and experiment sweeps.
//!
//! Every source sample gets one uniform draw from a stream that depends
//! only on the seed, the replication and the trip. A packet is dropped when
//! its draw falls below the loss probability, so the drop set at a lower
//! PER is a subset of the drop set at a higher one, and every predictor
//! and rate sees the same pattern.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catc::{AppTable, LocalMap, TcConfig};
use crate::error::{Error, Result};
use crate::forecast::{PredictorContext, PredictorRegistry};
use crate::rng;
use crate::safety::{fcw_stream, FcwConfig, FcwDecision, FcwFrame};
use crate::trajectory::{Trip, VehicleState};

/// Two-state bursty loss. Each packet first moves the chain, then is lost
/// with the loss probability of the new state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GilbertElliott {
    pub p_good_to_bad: f64,
    pub p_bad_to_good: f64,
    pub loss_good: f64,
    pub loss_bad: f64,
}

impl GilbertElliott {
    fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_good_to_bad", self.p_good_to_bad),
            ("p_bad_to_good", self.p_bad_to_good),
            ("loss_good", self.loss_good),
            ("loss_bad", self.loss_bad),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Config(format!("gilbert-elliott {name} must be in [0, 1], got {p}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    /// Packet error rate.
    pub per: f64,
    /// Transmission rate, Hz. Must divide the source sample rate.
    pub rate_hz: f64,
    /// Delivery delay, seconds.
    pub latency: f64,
    pub seed: u64,
    /// Bursty loss; replaces `per` when set.
    pub burst: Option<GilbertElliott>,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self { per: 0.0, rate_hz: 10.0, latency: 0.0, seed: 0, burst: None }
    }
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.per) {
            return Err(Error::Config(format!("per must be in [0, 1], got {}", self.per)));
        }
        if !(self.latency >= 0.0 && self.latency.is_finite()) {
            return Err(Error::Config(format!("latency must be non-negative, got {}", self.latency)));
        }
        if let Some(b) = &self.burst {
            b.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BsmPacket {
    pub vehicle_id: String,
    pub state: VehicleState,
    pub tx_time: f64,
    pub rx_time: f64,
    pub dropped: bool,
}

/// Source samples between transmissions.
pub fn decimation_stride(rate_hz: f64, sample_period: f64) -> Result<usize> {
    let source_hz = 1.0 / sample_period;
    let invalid = || Error::InvalidRate { rate_hz, source_hz };
    if !(rate_hz > 0.0 && rate_hz <= source_hz + 1e-9) {
        return Err(invalid());
    }
    let ratio = source_hz / rate_hz;
    let stride = ratio.round();
    if (ratio - stride).abs() > 1e-9 || stride < 1.0 {
        return Err(invalid());
    }
    Ok(stride as usize)
}

/// One uniform per source sample, independent of the sample contents.
pub fn drop_draws(seed: u64, n: usize) -> Vec<(f64, f64)> {
    let mut r = rng::stream(seed, &[rng::label("channel")]);
    (0..n).map(|_| (r.gen::<f64>(), r.gen::<f64>())).collect()
}

/// Transmits `trip` through the channel. Dropped packets are kept in the
/// output with `dropped` set.
pub fn emit(trip: &Trip, cfg: &ChannelConfig) -> Result<Vec<BsmPacket>> {
    cfg.validate()?;
    let stride = decimation_stride(cfg.rate_hz, trip.sample_period())?;
    let draws = drop_draws(cfg.seed, trip.len());
    let mut bad = false;
    let mut out = Vec::with_capacity(trip.len() / stride + 1);
    for (j, s) in trip.states().iter().enumerate().step_by(stride) {
        let (u_loss, u_state) = draws[j];
        let p = match &cfg.burst {
            None => cfg.per,
            Some(ge) => {
                bad = if bad { u_state >= ge.p_bad_to_good } else { u_state < ge.p_good_to_bad };
                if bad {
                    ge.loss_bad
                } else {
                    ge.loss_good
                }
            }
        };
        out.push(BsmPacket {
            vehicle_id: trip.vehicle_id.clone(),
            state: *s,
            tx_time: s.t,
            rx_time: s.t + cfg.latency,
            dropped: u_loss < p,
        });
    }
    Ok(out)
}

/// Writes the drop pattern as CSV `vehicle_id,tx_time,dropped`.
pub fn write_drop_mask<W: Write>(packets: &[BsmPacket], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::InvalidArgument(format!("drop mask: {e}"));
    w.write_record(["vehicle_id", "tx_time", "dropped"]).map_err(err)?;
    for p in packets {
        w.write_record([p.vehicle_id.clone(), format!("{:.1}", p.tx_time), (p.dropped as u8).to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("<drop mask>", e))?;
    Ok(())
}

/// One scenario of a sweep: the remote vehicle's true path, the copy it
/// transmits (possibly with sensor noise) and the host's path on the same
/// time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTrip {
    pub rv_truth: Trip,
    pub rv_tx: Trip,
    pub hv: Trip,
}

impl SweepTrip {
    pub fn new(rv_truth: Trip, rv_tx: Trip, hv: Trip) -> Result<Self> {
        let same_grid = |a: &Trip, b: &Trip| {
            a.len() == b.len()
                && (a.sample_period() - b.sample_period()).abs() < 1e-12
                && a.states().iter().zip(b.states()).all(|(p, q)| (p.t - q.t).abs() < 1e-9)
        };
        if !same_grid(&rv_truth, &rv_tx) || !same_grid(&rv_truth, &hv) {
            return Err(Error::InvalidArgument(format!(
                "sweep trip '{}': truth, transmitted copy and host must share a time grid",
                rv_truth.vehicle_id
            )));
        }
        Ok(Self { rv_truth, rv_tx, hv })
    }

    pub fn id(&self) -> &str {
        &self.rv_truth.vehicle_id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub predictors: Vec<String>,
    pub per_grid: Vec<f64>,
    pub rate_grid: Vec<f64>,
    pub replications: usize,
    pub seed: u64,
    pub latency: f64,
    pub burst: Option<GilbertElliott>,
    pub tc: TcConfig,
    pub fcw: FcwConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            predictors: ["bsm", "cs", "ca", "kf", "hgp"].map(String::from).to_vec(),
            per_grid: vec![0.0],
            rate_grid: vec![10.0],
            replications: 1,
            seed: 0,
            latency: 0.0,
            burst: None,
            tc: TcConfig::default(),
            fcw: FcwConfig::default(),
        }
    }
}

/// Identifies one job group of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub per: f64,
    pub rate: f64,
    pub predictor: String,
    pub replication: usize,
}

/// Tracking error of one remote vehicle at one 10 Hz instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PteSample {
    pub trip: usize,
    pub t: f64,
    pub pte: f64,
    /// A BSM was received at this instant.
    pub fresh: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub key: CellKey,
    pub pte: Vec<PteSample>,
    /// FCW decisions tagged with the trip index.
    pub decisions: Vec<(usize, FcwDecision)>,
    pub delivered: usize,
    pub transmitted: usize,
    pub new_models: usize,
}

/// Seed of the drop pattern for a trip and replication.
pub fn drop_seed(root: u64, replication: usize, trip: usize) -> u64 {
    rng::derive_seed(root, &[rng::label("drops"), replication as u64, trip as u64])
}

/// Outcome of one receiver run.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverRun {
    pub pte: Vec<PteSample>,
    pub decisions: Vec<FcwDecision>,
    pub delivered: usize,
    pub transmitted: usize,
    pub new_models: usize,
}

/// Settings shared by every receiver run of a sweep.
#[derive(Clone, Copy)]
pub struct ReceiverSetup<'a> {
    pub registry: &'a PredictorRegistry,
    pub ctx: &'a PredictorContext,
    pub table: &'a AppTable,
    pub tc: &'a TcConfig,
    pub fcw: &'a FcwConfig,
}

/// Sends one scenario through the channel into a local map running
/// `predictor`, measuring tracking error at every truth instant and
/// evaluating FCW every `fcw.eval_period`. `observe` sees every snapshot.
pub fn run_receiver(
    trip: &SweepTrip,
    trip_index: usize,
    predictor: &str,
    ch: &ChannelConfig,
    setup: ReceiverSetup<'_>,
    mut observe: impl FnMut(f64, &[crate::catc::CamEntry]),
) -> Result<ReceiverRun> {
    let ReceiverSetup { registry, ctx, table, tc, fcw } = setup;
    let packets = emit(&trip.rv_tx, ch)?;
    let mut map = LocalMap::new(*tc, registry.clone(), predictor, ctx.clone())?.with_app_table(table.clone());
    let id = trip.id().to_owned();
    let eval_stride = ((fcw.eval_period / trip.rv_truth.sample_period()).round() as usize).max(1);
    let mut pte = Vec::with_capacity(trip.rv_truth.len());
    let mut frames = Vec::new();
    let mut next = 0;
    let mut delivered = 0;
    for (j, (truth, host)) in trip.rv_truth.states().iter().zip(trip.hv.states()).enumerate() {
        let t = truth.t;
        let mut fresh = false;
        while next < packets.len() && packets[next].rx_time <= t + 1e-9 {
            let p = &packets[next];
            if !p.dropped {
                map.update_record(&id, &p.state, p.rx_time)?;
                delivered += 1;
                fresh |= (p.tx_time - t).abs() < 1e-9;
            }
            next += 1;
        }
        map.set_host(*host);
        if map.is_empty() {
            continue;
        }
        map.advance(t);
        let cam = map.snapshot(t);
        observe(t, &cam);
        if let Some(e) = cam.iter().find(|e| e.id == id) {
            pte.push(PteSample { trip: trip_index, t, pte: truth.distance_to(e.x, e.y), fresh });
        }
        if j % eval_stride == 0 {
            frames.push(FcwFrame { t, host: *host, cam });
        }
    }
    let new_models = map.predictor(&id).map_or(0, |p| p.new_model_events());
    let decisions = fcw_stream(&frames, table, fcw);
    Ok(ReceiverRun { pte, decisions, delivered, transmitted: packets.len(), new_models })
}

/// Gives every job its own copy of the banks so that jobs that extend a
/// bank cannot influence each other.
fn isolated_context(ctx: &PredictorContext) -> PredictorContext {
    let copy = |b: &Option<crate::forecast::BankHandle>| {
        b.as_ref().map(|h| {
            let bank = h.read().expect("bank lock poisoned").clone();
            std::sync::Arc::new(std::sync::RwLock::new(bank))
        })
    };
    PredictorContext { config: ctx.config, bank: copy(&ctx.bank), direct_bank: copy(&ctx.direct_bank) }
}

/// Full factorial sweep over `per_grid × rate_grid × predictors ×
/// replications`. Cells come back in grid order; jobs run in parallel.
pub fn sweep(
    trips: &[SweepTrip],
    registry: &PredictorRegistry,
    ctx: &PredictorContext,
    table: &AppTable,
    cfg: &SweepConfig,
) -> Result<Vec<CellResult>> {
    if cfg.replications == 0 {
        return Err(Error::Config("replications must be at least 1".into()));
    }
    for p in &cfg.predictors {
        if !registry.contains(p) {
            return Err(Error::Config(format!("unknown predictor '{p}'")));
        }
    }
    cfg.tc.validate()?;
    cfg.fcw.validate()?;
    let mut keys = Vec::new();
    for &per in &cfg.per_grid {
        for &rate in &cfg.rate_grid {
            for predictor in &cfg.predictors {
                for replication in 0..cfg.replications {
                    keys.push(CellKey { per, rate, predictor: predictor.clone(), replication });
                }
            }
        }
    }
    let jobs: Vec<(usize, usize)> = (0..keys.len()).flat_map(|c| (0..trips.len()).map(move |t| (c, t))).collect();
    let outputs: Vec<Result<ReceiverRun>> = jobs
        .par_iter()
        .map(|&(c, ti)| {
            let key = &keys[c];
            let ch = ChannelConfig {
                per: key.per,
                rate_hz: key.rate,
                latency: cfg.latency,
                seed: drop_seed(cfg.seed, key.replication, ti),
                burst: cfg.burst,
            };
            let ctx = isolated_context(ctx);
            let setup = ReceiverSetup { registry, ctx: &ctx, table, tc: &cfg.tc, fcw: &cfg.fcw };
            run_receiver(&trips[ti], ti, &key.predictor, &ch, setup, |_, _| {})
        })
        .collect();
    let mut cells: Vec<CellResult> = keys
        .into_iter()
        .map(|key| CellResult {
            key,
            pte: Vec::new(),
            decisions: Vec::new(),
            delivered: 0,
            transmitted: 0,
            new_models: 0,
        })
        .collect();
    for (&(c, ti), out) in jobs.iter().zip(outputs) {
        let out = out?;
        let cell = &mut cells[c];
        cell.pte.extend(out.pte);
        cell.decisions.extend(out.decisions.into_iter().map(|d| (ti, d)));
        cell.delivered += out.delivered;
        cell.transmitted += out.transmitted;
        cell.new_models += out.new_models;
    }
    Ok(cells)
}

/// Raw records as CSV `per,rate,predictor,replication,t,pte,trip`.
pub fn write_raw_records<W: Write>(cells: &[CellResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::InvalidArgument(format!("raw records: {e}"));
    w.write_record(["per", "rate", "predictor", "replication", "t", "pte", "trip"]).map_err(err)?;
    for c in cells {
        for s in &c.pte {
            w.write_record([
                format!("{}", c.key.per),
                format!("{}", c.key.rate),
                c.key.predictor.clone(),
                c.key.replication.to_string(),
                format!("{:.1}", s.t),
                format!("{:.6}", s.pte),
                s.trip.to_string(),
            ])
            .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<raw records>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Trip {
        let states = (0..n)
            .map(|k| VehicleState { t: k as f64 * 0.1, x: k as f64, y: 0.0, speed: 10.0, heading: 0.0, accel: 0.0 })
            .collect();
        Trip::new("rv", states, 0.1).unwrap()
    }

    #[test]
    fn clean_and_total_loss() {
        let trip = line(50);
        let clean = emit(&trip, &ChannelConfig::default()).unwrap();
        assert_eq!(clean.len(), 50);
        assert!(clean.iter().all(|p| !p.dropped && p.rx_time == p.tx_time));
        let lost = emit(&trip, &ChannelConfig { per: 1.0, ..Default::default() }).unwrap();
        assert!(lost.iter().all(|p| p.dropped));
    }

    #[test]
    fn decimation() {
        let trip = line(50);
        let p = emit(&trip, &ChannelConfig { rate_hz: 2.0, ..Default::default() }).unwrap();
        assert_eq!(p.iter().map(|p| p.tx_time).collect::<Vec<_>>()[..3], [0.0, 0.5, 1.0]);
        assert!(matches!(
            emit(&trip, &ChannelConfig { rate_hz: 3.0, ..Default::default() }),
            Err(Error::InvalidRate { .. })
        ));
        assert!(emit(&trip, &ChannelConfig { rate_hz: 20.0, ..Default::default() }).is_err());
    }

    #[test]
    fn masks_nest_across_per() {
        let trip = line(500);
        let mask = |per| emit(&trip, &ChannelConfig { per, seed: 3, ..Default::default() }).unwrap();
        let lo = mask(0.3);
        let hi = mask(0.6);
        assert!(lo.iter().zip(&hi).all(|(a, b)| !a.dropped || b.dropped));
    }

    #[test]
    fn bursty_loss_clusters() {
        let trip = line(5000);
        let ge = GilbertElliott { p_good_to_bad: 0.05, p_bad_to_good: 0.2, loss_good: 0.0, loss_bad: 1.0 };
        let p = emit(&trip, &ChannelConfig { burst: Some(ge), seed: 1, ..Default::default() }).unwrap();
        let drops = p.iter().filter(|p| p.dropped).count() as f64 / p.len() as f64;
        assert!((drops - 0.2).abs() < 0.05, "stationary loss 0.2, got {drops}");
        let runs = p.windows(2).filter(|w| w[0].dropped && !w[1].dropped).count();
        assert!((runs as f64) < drops * p.len() as f64 / 3.0, "losses come in bursts");
    }
}
