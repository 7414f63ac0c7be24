//! The experiment commands behind the CLI.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::suite::{generate_suite, scenario, scenario_from_trip, Scenario};
use super::ExperimentConfig;
use crate::bank::{
    build_bank, cluster_bank, evaluate_persistency, BankBuilder, BankMode, BankStats, BuildConfig, KernelBank,
};
use crate::catc::{write_cam_ndjson, CamEntry};
use crate::channel::{
    drop_seed, emit, run_receiver, sweep, write_drop_mask, write_raw_records, CellResult, ChannelConfig, ReceiverSetup,
    SweepConfig,
};
use crate::error::{Error, Result};
use crate::forecast::{ForecastSource, PredictorContext, PredictorKind, PredictorRegistry};
use crate::metrics::{
    fcw_confusion, profile_fit_time, write_table, ConfusionCounts, FitProfile, PteSummary, DEFAULT_THRESHOLDS,
};
use crate::rng::{derive_seed, label};
use crate::safety::{write_decision_log, FcwDecision};
use crate::trajectory::{load_trip_csv, save_trip_csv, InitialState, ManeuverScript, Segment, Trip};

fn create_dir(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

/// Scenarios for one purpose (`train`, `holdout` or `eval`). Recorded trips
/// are split in order: training first, then held-out, the rest for
/// evaluation (all of them when nothing is left).
pub fn load_scenarios(cfg: &ExperimentConfig, purpose: &str, count: usize) -> Result<Vec<Scenario>> {
    if cfg.trips.is_empty() {
        let suite = super::SuiteConfig { trips: count, ..cfg.suite };
        return generate_suite(&suite, cfg.seed, purpose);
    }
    let n = cfg.trips.len();
    let (train, hold) = (cfg.train.trips.min(n), cfg.train.holdout_trips);
    let range = match purpose {
        "train" => 0..train,
        "holdout" => train..(train + hold).min(n),
        _ if train + hold < n => (train + hold)..n,
        _ => 0..n,
    };
    cfg.trips[range]
        .iter()
        .enumerate()
        .map(|(i, path)| {
            let trip = load_trip_csv(path)?;
            scenario_from_trip(trip, &cfg.suite, derive_seed(cfg.seed, &[label(purpose), i as u64]))
        })
        .collect()
}

fn build_config(cfg: &ExperimentConfig, mode: BankMode) -> BuildConfig {
    BuildConfig {
        tw: cfg.train.tw,
        pte_threshold: cfg.train.pte_threshold,
        horizon: cfg.train.horizon,
        mode,
        limits: cfg.predictor.limits,
        fit: cfg.train.fit,
        seed: derive_seed(cfg.seed, &[label("bank")]),
    }
}

fn cluster_seed(cfg: &ExperimentConfig) -> u64 {
    derive_seed(cfg.seed, &[label("cluster")])
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Bank before clustering.
    pub full: KernelBank,
    /// Clustered bank used for forecasting.
    pub bank: KernelBank,
    pub direct: Option<KernelBank>,
    pub stats: BankStats,
    /// Online extension of the clustered bank over held-out trips.
    pub holdout: BankStats,
}

/// Builds, clusters and then extends the bank over held-out trips.
pub fn train_bank(cfg: &ExperimentConfig) -> Result<TrainReport> {
    let train = load_scenarios(cfg, "train", cfg.train.trips)?;
    let trips: Vec<Trip> = train.iter().map(|s| s.trip.rv_tx.clone()).collect();
    let bcfg = build_config(cfg, BankMode::Indirect);
    let (full, stats) = build_bank(&trips, &bcfg)?;
    let bank = cluster_bank(&full, cfg.train.c_size, cluster_seed(cfg)).bank;
    let holdout_trips = load_scenarios(cfg, "holdout", cfg.train.holdout_trips)?;
    let mut builder = BankBuilder::new(bank.clone(), bcfg)?;
    for (i, s) in holdout_trips.iter().enumerate() {
        builder.run_trip(i, &s.trip.rv_tx, true)?;
    }
    let (_, holdout) = builder.finish();
    let direct = if cfg.train.direct {
        let (d, _) = build_bank(&trips, &build_config(cfg, BankMode::Direct))?;
        Some(cluster_bank(&d, cfg.train.c_size, cluster_seed(cfg)).bank)
    } else {
        None
    };
    Ok(TrainReport { full, bank, direct, stats, holdout })
}

#[derive(Serialize)]
struct StatsFile<'a> {
    models_full: usize,
    models_clustered: usize,
    training: StatsSummary<'a>,
    holdout: StatsSummary<'a>,
}

#[derive(Serialize)]
struct StatsSummary<'a> {
    mean_persistency_s: f64,
    new_model_rate: f64,
    stats: &'a BankStats,
}

impl<'a> StatsSummary<'a> {
    fn new(stats: &'a BankStats) -> Self {
        Self { mean_persistency_s: stats.mean_persistency(), new_model_rate: stats.new_model_rate(), stats }
    }
}

/// Bins of the persistency histogram, seconds.
const MP_BIN: f64 = 0.5;

/// `train-bank`: writes `kernel.bank.json` (clustered),
/// `kernel-full.bank.json`, `bank_stats.json`, `mp_histogram.csv` and
/// `new_model_rate.csv`.
pub fn cmd_train_bank(cfg: &ExperimentConfig, out: &Path) -> Result<TrainReport> {
    create_dir(out)?;
    let report = train_bank(cfg)?;
    report.bank.save(out.join("kernel.bank.json"))?;
    report.full.save(out.join("kernel-full.bank.json"))?;
    if let Some(d) = &report.direct {
        d.save(out.join("kernel-direct.bank.json"))?;
    }
    write_json(
        &out.join("bank_stats.json"),
        &StatsFile {
            models_full: report.full.len(),
            models_clustered: report.bank.len(),
            training: StatsSummary::new(&report.stats),
            holdout: StatsSummary::new(&report.holdout),
        },
    )?;
    let mut hist = String::from("mp_s,count\n");
    let samples = &report.stats.model_persistency_samples;
    let max_bin = samples.iter().map(|s| (s / MP_BIN).floor() as usize).max().unwrap_or(0);
    for b in 0..=max_bin {
        let n = samples.iter().filter(|s| (*s / MP_BIN).floor() as usize == b).count();
        hist.push_str(&format!("{:.1},{n}\n", b as f64 * MP_BIN));
    }
    write_text(&out.join("mp_histogram.csv"), &hist)?;
    let mut rate = String::from("bin,new_model_rate\n");
    for (i, r) in report.holdout.new_model_rate_series(20).iter().enumerate() {
        rate.push_str(&format!("{i},{r:.6}\n"));
    }
    write_text(&out.join("new_model_rate.csv"), &rate)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRow {
    pub c_size: usize,
    pub models: usize,
    pub mean_persistency_s: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub rows: Vec<ClusterRow>,
}

/// Mean persistency on held-out trips for each reduced bank size.
pub fn cluster_sweep(cfg: &ExperimentConfig, full: &KernelBank) -> Result<ClusterReport> {
    let holdout = load_scenarios(cfg, "holdout", cfg.train.holdout_trips)?;
    let trips: Vec<Trip> = holdout.iter().map(|s| s.trip.rv_tx.clone()).collect();
    let bcfg = build_config(cfg, full.mode);
    let mut rows = Vec::new();
    for &c in &cfg.train.c_size_grid {
        let bank = cluster_bank(full, c, cluster_seed(cfg)).bank;
        let stats = evaluate_persistency(&bank, &trips, &bcfg)?;
        rows.push(ClusterRow {
            c_size: c,
            models: bank.len(),
            mean_persistency_s: stats.mean_persistency(),
            samples: stats.model_persistency_samples.len(),
        });
    }
    Ok(ClusterReport { rows })
}

/// `cluster`: writes `mp_vs_csize.csv` and the bank reduced to
/// `train.c_size` as `kernel.bank.json`.
pub fn cmd_cluster(cfg: &ExperimentConfig, full: &KernelBank, out: &Path) -> Result<ClusterReport> {
    create_dir(out)?;
    let report = cluster_sweep(cfg, full)?;
    let mut text = String::from("c_size,models,mean_mp_s,samples\n");
    for r in &report.rows {
        text.push_str(&format!("{},{},{:.4},{}\n", r.c_size, r.models, r.mean_persistency_s, r.samples));
    }
    write_text(&out.join("mp_vs_csize.csv"), &text)?;
    cluster_bank(full, cfg.train.c_size, cluster_seed(cfg)).bank.save(out.join("kernel.bank.json"))?;
    Ok(report)
}

fn needs_bank(name: &str) -> Option<BankMode> {
    match PredictorKind::from_name(name) {
        Some(PredictorKind::HgpIndirect) => Some(BankMode::Indirect),
        Some(PredictorKind::HgpDirect) => Some(BankMode::Direct),
        _ => None,
    }
}

/// Predictor context holding the given banks.
pub fn predictor_context(
    cfg: &ExperimentConfig,
    bank: Option<KernelBank>,
    direct: Option<KernelBank>,
) -> PredictorContext {
    let wrap = |b: Option<KernelBank>| b.map(|b| Arc::new(RwLock::new(b)));
    PredictorContext { config: cfg.predictor, bank: wrap(bank), direct_bank: wrap(direct) }
}

fn check_banks(predictors: &[String], ctx: &PredictorContext) -> Result<()> {
    for p in predictors {
        match needs_bank(p) {
            Some(BankMode::Indirect) if ctx.bank.is_none() => {
                return Err(Error::Config(format!(
                    "predictor '{p}' needs a kernel bank: pass --bank <file> (create one with `hgp train-bank`)"
                )))
            }
            Some(BankMode::Direct) if ctx.direct_bank.is_none() => {
                return Err(Error::Config(format!(
                    "predictor '{p}' needs a position bank: pass --direct-bank <file> (train with train.direct = true)"
                )))
            }
            _ => {}
        }
    }
    Ok(())
}

/// Aggregate of one (PER, rate, predictor) cell over replications.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub per: f64,
    pub rate: f64,
    pub predictor: String,
    pub pte: PteSummary,
    pub fcw: ConfusionCounts,
    pub fcw_accuracy: f64,
    pub delivered: usize,
    pub transmitted: usize,
    pub new_models: usize,
}

/// Pools replications and scores FCW against `ground_truth`. Rows follow
/// the first appearance of each cell.
pub fn summarize(cells: &[CellResult], ground_truth: &[(usize, FcwDecision)]) -> Vec<SummaryRow> {
    let mut rows: Vec<(SummaryRow, Vec<f64>)> = Vec::new();
    for c in cells {
        let k = &c.key;
        let idx = rows.iter().position(|(r, _)| r.per == k.per && r.rate == k.rate && r.predictor == k.predictor);
        let idx = idx.unwrap_or_else(|| {
            rows.push((
                SummaryRow {
                    per: k.per,
                    rate: k.rate,
                    predictor: k.predictor.clone(),
                    pte: PteSummary::from_errors(&[], &DEFAULT_THRESHOLDS),
                    fcw: ConfusionCounts::default(),
                    fcw_accuracy: 0.0,
                    delivered: 0,
                    transmitted: 0,
                    new_models: 0,
                },
                Vec::new(),
            ));
            rows.len() - 1
        });
        let (row, errors) = &mut rows[idx];
        errors.extend(c.pte.iter().map(|s| s.pte));
        let cc = fcw_confusion(ground_truth, &c.decisions);
        row.fcw.tp += cc.tp;
        row.fcw.tn += cc.tn;
        row.fcw.fp += cc.fp;
        row.fcw.fn_ += cc.fn_;
        row.delivered += c.delivered;
        row.transmitted += c.transmitted;
        row.new_models += c.new_models;
    }
    rows.into_iter()
        .map(|(mut row, errors)| {
            row.pte = PteSummary::from_errors(&errors, &DEFAULT_THRESHOLDS);
            row.fcw_accuracy = row.fcw.accuracy().unwrap_or(1.0);
            row
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub per_cells: Vec<CellResult>,
    pub rate_cells: Vec<CellResult>,
    pub ground_truth: Vec<(usize, FcwDecision)>,
    pub per_rows: Vec<SummaryRow>,
    pub rate_rows: Vec<SummaryRow>,
}

impl SweepReport {
    /// Pooled row of the PER sweep.
    pub fn per_row(&self, predictor: &str, per: f64) -> Option<&SummaryRow> {
        self.per_rows.iter().find(|r| r.predictor == predictor && (r.per - per).abs() < 1e-12)
    }

    pub fn rate_row(&self, predictor: &str, rate: f64) -> Option<&SummaryRow> {
        self.rate_rows.iter().find(|r| r.predictor == predictor && (r.rate - rate).abs() < 1e-12)
    }
}

fn sweep_config(
    cfg: &ExperimentConfig,
    per_grid: Vec<f64>,
    rate_grid: Vec<f64>,
    predictors: Vec<String>,
) -> SweepConfig {
    SweepConfig {
        predictors,
        per_grid,
        rate_grid,
        replications: cfg.sweep.replications,
        seed: derive_seed(cfg.seed, &[label("sweep")]),
        latency: cfg.sweep.latency,
        burst: cfg.sweep.burst,
        tc: cfg.tc,
        fcw: cfg.fcw,
    }
}

/// PER sweep at the highest rate, rate sweep on a clean channel, and the
/// clean-channel ground truth for FCW.
pub fn run_sweep(cfg: &ExperimentConfig, scenarios: &[Scenario], ctx: &PredictorContext) -> Result<SweepReport> {
    check_banks(&cfg.sweep.predictors, ctx)?;
    let registry = PredictorRegistry::with_builtins();
    let trips: Vec<_> = scenarios.iter().map(|s| s.trip.clone()).collect();
    let top_rate = cfg.sweep.rate_grid.iter().copied().fold(10.0_f64, f64::max).min(10.0);
    let preds = cfg.sweep.predictors.clone();
    let gt_cfg = SweepConfig { replications: 1, ..sweep_config(cfg, vec![0.0], vec![10.0], vec!["bsm".into()]) };
    let gt = sweep(&trips, &registry, ctx, &cfg.apps, &gt_cfg)?;
    let ground_truth = gt.into_iter().next().map(|c| c.decisions).unwrap_or_default();
    let per_cells = if cfg.sweep.per_grid.is_empty() {
        Vec::new()
    } else {
        sweep(
            &trips,
            &registry,
            ctx,
            &cfg.apps,
            &sweep_config(cfg, cfg.sweep.per_grid.clone(), vec![top_rate], preds.clone()),
        )?
    };
    let rate_cells = if cfg.sweep.rate_grid.is_empty() {
        Vec::new()
    } else {
        sweep(&trips, &registry, ctx, &cfg.apps, &sweep_config(cfg, vec![0.0], cfg.sweep.rate_grid.clone(), preds))?
    };
    let per_rows = summarize(&per_cells, &ground_truth);
    let rate_rows = summarize(&rate_cells, &ground_truth);
    Ok(SweepReport { per_cells, rate_cells, ground_truth, per_rows, rate_rows })
}

fn table<F: Fn(&SummaryRow) -> f64>(
    rows: &[SummaryRow],
    predictors: &[String],
    columns: &[f64],
    column_of: impl Fn(&SummaryRow) -> f64,
    value: F,
) -> Vec<(String, Vec<f64>)> {
    predictors
        .iter()
        .map(|p| {
            let cells = columns
                .iter()
                .map(|&c| {
                    rows.iter().find(|r| &r.predictor == p && (column_of(r) - c).abs() < 1e-12).map_or(f64::NAN, &value)
                })
                .collect();
            (p.clone(), cells)
        })
        .collect()
}

fn write_decisions_csv(path: &Path, sections: &[(&str, &[CellResult])]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_file(path)?);
    let err = |e: csv::Error| Error::InvalidArgument(format!("{}: {e}", path.display()));
    w.write_record([
        "sweep",
        "per",
        "rate",
        "predictor",
        "replication",
        "trip",
        "t",
        "rv_id",
        "range",
        "r_w",
        "warn",
        "case",
        "source",
    ])
    .map_err(err)?;
    for (name, cells) in sections {
        for c in cells.iter() {
            for (trip, d) in &c.decisions {
                w.write_record([
                    name.to_string(),
                    c.key.per.to_string(),
                    c.key.rate.to_string(),
                    c.key.predictor.clone(),
                    c.key.replication.to_string(),
                    trip.to_string(),
                    format!("{:.1}", d.t),
                    d.rv_id.clone(),
                    format!("{:.4}", d.range),
                    format!("{:.4}", d.r_w),
                    (d.warn as u8).to_string(),
                    d.case.as_str().to_owned(),
                    d.source.as_str().to_owned(),
                ])
                .map_err(err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// `sweep`: writes `pte_vs_per.csv`, `pte_vs_rate.csv`, `fcw_vs_per.csv`,
/// `fcw_vs_rate.csv`, `exceed_counts.csv` and `summary.json`, plus raw
/// records, decision logs and drop masks when enabled.
pub fn cmd_sweep(cfg: &ExperimentConfig, ctx: &PredictorContext, out: &Path) -> Result<SweepReport> {
    create_dir(out)?;
    let scenarios = load_scenarios(cfg, "eval", cfg.suite.trips)?;
    let report = run_sweep(cfg, &scenarios, ctx)?;
    let preds = &cfg.sweep.predictors;
    let pers = &cfg.sweep.per_grid;
    let rates = &cfg.sweep.rate_grid;
    let per_head: Vec<String> = pers.iter().map(|p| format!("{}", (p * 100.0).round())).collect();
    let rate_head: Vec<String> = rates.iter().map(|r| format!("{r}")).collect();
    let by_per = |r: &SummaryRow| r.per;
    let by_rate = |r: &SummaryRow| r.rate;
    write_table(
        &per_head,
        &table(&report.per_rows, preds, pers, by_per, |r| r.pte.p95),
        3,
        create_file(&out.join("pte_vs_per.csv"))?,
    )?;
    write_table(
        &rate_head,
        &table(&report.rate_rows, preds, rates, by_rate, |r| r.pte.p95),
        3,
        create_file(&out.join("pte_vs_rate.csv"))?,
    )?;
    write_table(
        &per_head,
        &table(&report.per_rows, preds, pers, by_per, |r| r.fcw_accuracy),
        4,
        create_file(&out.join("fcw_vs_per.csv"))?,
    )?;
    write_table(
        &rate_head,
        &table(&report.rate_rows, preds, rates, by_rate, |r| r.fcw_accuracy),
        4,
        create_file(&out.join("fcw_vs_rate.csv"))?,
    )?;
    let mut ex = String::from("predictor,per,threshold,count\n");
    for r in &report.per_rows {
        for (th, n) in &r.pte.exceed_counts {
            ex.push_str(&format!("{},{},{th:.1},{n}\n", r.predictor, r.per));
        }
    }
    write_text(&out.join("exceed_counts.csv"), &ex)?;
    write_json(&out.join("summary.json"), &(&report.per_rows, &report.rate_rows))?;
    if cfg.sweep.raw_records {
        write_raw_records(&report.per_cells, create_file(&out.join("raw_records_per.csv"))?)?;
        write_raw_records(&report.rate_cells, create_file(&out.join("raw_records_rate.csv"))?)?;
        write_decisions_csv(
            &out.join("fcw_decisions.csv"),
            &[("per", &report.per_cells), ("rate", &report.rate_cells)],
        )?;
        let mut gt = Vec::new();
        let gt_only: Vec<FcwDecision> = report.ground_truth.iter().map(|(_, d)| d.clone()).collect();
        write_decision_log(&gt_only, &mut gt)?;
        fs::write(out.join("fcw_ground_truth.csv"), gt).map_err(|e| Error::io(out.join("fcw_ground_truth.csv"), e))?;
        write_drop_masks(cfg, &scenarios, &out.join("drop_masks.csv"))?;
    }
    Ok(report)
}

fn write_drop_masks(cfg: &ExperimentConfig, scenarios: &[Scenario], path: &Path) -> Result<()> {
    let seed = derive_seed(cfg.seed, &[label("sweep")]);
    let mut text = String::from("per,replication,trip,vehicle_id,tx_time,dropped\n");
    for &per in &cfg.sweep.per_grid {
        for rep in 0..cfg.sweep.replications {
            for (ti, s) in scenarios.iter().enumerate() {
                let ch = ChannelConfig {
                    per,
                    rate_hz: 10.0,
                    latency: cfg.sweep.latency,
                    seed: drop_seed(seed, rep, ti),
                    burst: cfg.sweep.burst,
                };
                let mut buf = Vec::new();
                write_drop_mask(&emit(&s.trip.rv_tx, &ch)?, &mut buf)?;
                let body = String::from_utf8(buf).expect("csv output is utf-8");
                for line in body.lines().skip(1) {
                    text.push_str(&format!("{per},{rep},{ti},{line}\n"));
                }
            }
        }
    }
    write_text(path, &text)
}

/// Remote vehicle cruising and then braking hard in front of the host.
pub fn default_demo_script() -> ManeuverScript {
    let mut s = ManeuverScript::new(
        InitialState { x: 0.0, y: 0.0, speed: 20.0, heading: 0.0 },
        vec![
            Segment::Cruise { duration: 8.0 },
            Segment::Brake { duration: 3.0, accel: -6.0 },
            Segment::Cruise { duration: 6.0 },
        ],
    );
    s.vehicle_id = "lead".into();
    s.ramp = 0.3;
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoReport {
    pub decisions: usize,
    pub warnings: usize,
    /// Warnings evaluated on forecast (not freshly received) state.
    pub forecast_warnings: usize,
    pub cam_rows: usize,
}

/// `demo`: runs one scenario and writes `cam.ndjson` and `fcw_log.csv`.
pub fn cmd_demo(
    cfg: &ExperimentConfig,
    script: &ManeuverScript,
    per: f64,
    predictor: &str,
    ctx: &PredictorContext,
    out: &Path,
) -> Result<DemoReport> {
    check_banks(&[predictor.to_owned()], ctx)?;
    create_dir(out)?;
    let seed = derive_seed(cfg.seed, &[label("demo")]);
    let sc = scenario(script.clone(), &cfg.suite, seed)?;
    let ch = ChannelConfig {
        per,
        rate_hz: 10.0,
        latency: cfg.sweep.latency,
        seed: drop_seed(seed, 0, 0),
        burst: cfg.sweep.burst,
    };
    let registry = PredictorRegistry::with_builtins();
    let setup = ReceiverSetup { registry: &registry, ctx, table: &cfg.apps, tc: &cfg.tc, fcw: &cfg.fcw };
    let mut cam: Vec<CamEntry> = Vec::new();
    let run = run_receiver(&sc.trip, 0, predictor, &ch, setup, |_, rows| cam.extend_from_slice(rows))?;
    write_cam_ndjson(&cam, create_file(&out.join("cam.ndjson"))?)?;
    write_decision_log(&run.decisions, create_file(&out.join("fcw_log.csv"))?)?;
    let warnings = run.decisions.iter().filter(|d| d.warn).count();
    let forecast_warnings = run.decisions.iter().filter(|d| d.warn && d.source != ForecastSource::Bsm).count();
    Ok(DemoReport { decisions: run.decisions.len(), warnings, forecast_warnings, cam_rows: cam.len() })
}

/// `profile`: writes `fit_profile.csv` and `fit_profile.json`.
pub fn cmd_profile(cfg: &ExperimentConfig, out: &Path) -> Result<FitProfile> {
    create_dir(out)?;
    let need = cfg.profile.tw_grid.iter().copied().max().unwrap_or(0) as f64 * 0.1 + 10.0;
    let suite = super::SuiteConfig { trips: 1, duration: cfg.suite.duration.max(need), ..cfg.suite };
    let sc = generate_suite(&suite, cfg.seed, "profile")?;
    let profile = profile_fit_time(&sc[0].trip.rv_tx, &cfg.profile.tw_grid, cfg.profile.reps, &cfg.train.fit)?;
    let mut text = String::from("tw,median_ms,n\n");
    for p in &profile.points {
        text.push_str(&format!("{},{:.4},{}\n", p.tw, p.median_ms, p.samples_ms.len()));
    }
    write_text(&out.join("fit_profile.csv"), &text)?;
    write_json(&out.join("fit_profile.json"), &profile)?;
    Ok(profile)
}

/// `gen-trips`: writes truth, broadcast and host CSVs plus the maneuver
/// script of every scenario. Returns the written paths.
pub fn cmd_gen_trips(cfg: &ExperimentConfig, purpose: &str, count: usize, out: &Path) -> Result<Vec<PathBuf>> {
    create_dir(out)?;
    let mut written = Vec::new();
    for s in load_scenarios(cfg, purpose, count)? {
        let id = s.trip.id().to_owned();
        for (suffix, trip) in [("truth", &s.trip.rv_truth), ("tx", &s.trip.rv_tx), ("host", &s.trip.hv)] {
            let p = out.join(format!("{id}.{suffix}.csv"));
            save_trip_csv(trip, &p)?;
            written.push(p);
        }
        if let Some(script) = &s.script {
            let p = out.join(format!("{id}.script.toml"));
            write_text(&p, &script.to_toml()?)?;
            written.push(p);
        }
    }
    Ok(written)
}
