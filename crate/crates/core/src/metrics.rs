//! Tracking error, warning accuracy and fit-time profiling.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{fit, FitConfig, SeriesKind, TimeSeriesWindow};
use crate::safety::FcwDecision;
use crate::trajectory::Trip;

/// Thresholds of the exceedance counts, metres.
pub const DEFAULT_THRESHOLDS: [f64; 8] = [0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4, 1.6];

/// Per-sample 2D error between a trip and position estimates on its grid.
pub fn pte_series(truth: &Trip, estimates: &[(f64, f64)]) -> Result<Vec<f64>> {
    if truth.len() != estimates.len() {
        return Err(Error::InvalidArgument(format!("{} estimates for {} truth samples", estimates.len(), truth.len())));
    }
    Ok(truth.states().iter().zip(estimates).map(|(s, &(x, y))| s.distance_to(x, y)).collect())
}

/// Nearest-rank percentile: the `ceil(q n)`-th smallest value. `None` for
/// an empty sample or `q` outside (0, 1].
pub fn percentile_nearest_rank(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(q > 0.0 && q <= 1.0) {
        return None;
    }
    let mut v = values.to_vec();
    let rank = ((q * v.len() as f64).ceil() as usize).clamp(1, v.len());
    let (_, x, _) = v.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Some(*x)
}

/// Number of errors strictly above each threshold.
pub fn exceed_counts(errors: &[f64], thresholds: &[f64]) -> Vec<(f64, usize)> {
    thresholds.iter().map(|&th| (th, errors.iter().filter(|&&e| e > th).count())).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PteSummary {
    pub p95: f64,
    pub mean: f64,
    pub exceed_counts: Vec<(f64, usize)>,
    pub n_samples: usize,
}

impl PteSummary {
    pub fn from_errors(errors: &[f64], thresholds: &[f64]) -> Self {
        let n = errors.len();
        Self {
            p95: percentile_nearest_rank(errors, 0.95).unwrap_or(0.0),
            mean: if n == 0 { 0.0 } else { errors.iter().sum::<f64>() / n as f64 },
            exceed_counts: exceed_counts(errors, thresholds),
            n_samples: n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Fraction of agreeing instants; `None` when nothing was compared.
    pub fn accuracy(&self) -> Option<f64> {
        let n = self.total();
        (n > 0).then(|| (self.tp + self.tn) as f64 / n as f64)
    }

    pub fn add(&mut self, truth: bool, test: bool) {
        match (truth, test) {
            (true, true) => self.tp += 1,
            (false, false) => self.tn += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
        }
    }
}

/// Compares two aligned warn-flag sequences.
pub fn fcw_accuracy(ground_truth: &[bool], test: &[bool]) -> Result<ConfusionCounts> {
    if ground_truth.len() != test.len() {
        return Err(Error::InvalidArgument(format!(
            "streams differ in length: {} vs {}",
            ground_truth.len(),
            test.len()
        )));
    }
    let mut c = ConfusionCounts::default();
    for (&g, &t) in ground_truth.iter().zip(test) {
        c.add(g, t);
    }
    Ok(c)
}

fn decision_key(trip: usize, d: &FcwDecision) -> (usize, i64, String) {
    (trip, (d.t * 10.0).round() as i64, d.rv_id.clone())
}

/// Compares two decision streams instant by instant on the 0.1 s grid.
/// An instant present in only one stream counts as "no warning" in the
/// other (the vehicle was not routed to FCW there).
pub fn fcw_confusion(ground_truth: &[(usize, FcwDecision)], test: &[(usize, FcwDecision)]) -> ConfusionCounts {
    let index = |s: &[(usize, FcwDecision)]| -> BTreeMap<_, bool> {
        s.iter().map(|(trip, d)| (decision_key(*trip, d), d.warn)).collect()
    };
    let g = index(ground_truth);
    let t = index(test);
    let keys: BTreeSet<_> = g.keys().chain(t.keys()).cloned().collect();
    let mut c = ConfusionCounts::default();
    for k in keys {
        c.add(g.get(&k).copied().unwrap_or(false), t.get(&k).copied().unwrap_or(false));
    }
    c
}

/// Wall-clock statistics of fits at one window size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTiming {
    pub tw: usize,
    pub median_ms: f64,
    pub samples_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitProfile {
    pub points: Vec<FitTiming>,
    /// `c0 + c1 tw + c2 tw²` fitted to the medians by least squares.
    pub quadratic: [f64; 3],
    pub rmse_ms: f64,
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Least-squares quadratic through `(x, y)` and its RMSE.
pub fn quadratic_fit(x: &[f64], y: &[f64]) -> Result<([f64; 3], f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::InvalidArgument("quadratic fit needs at least 3 points".into()));
    }
    let a = DMatrix::from_fn(x.len(), 3, |i, j| x[i].powi(j as i32));
    let b = DVector::from_column_slice(y);
    let sol = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-12)
        .map_err(|e| Error::InvalidArgument(format!("quadratic fit: {e}")))?;
    let resid = &a * &sol - b;
    let rmse = (resid.norm_squared() / x.len() as f64).sqrt();
    Ok(([sol[0], sol[1], sol[2]], rmse))
}

/// Times speed-series fits of `tw` samples taken from `trip` at `reps`
/// evenly spaced positions, for each window size.
pub fn profile_fit_time(trip: &Trip, tw_grid: &[usize], reps: usize, cfg: &FitConfig) -> Result<FitProfile> {
    if reps == 0 {
        return Err(Error::InvalidArgument("reps must be positive".into()));
    }
    let states = trip.states();
    let mut points = Vec::with_capacity(tw_grid.len());
    for &tw in tw_grid {
        if tw > states.len() {
            return Err(Error::TooFewSamples { needed: tw, got: states.len() });
        }
        let room = states.len() - tw;
        let mut samples = Vec::with_capacity(reps);
        for r in 0..reps {
            let start = if reps == 1 { 0 } else { room * r / (reps - 1) };
            let w = &states[start..start + tw];
            let window = TimeSeriesWindow::new(
                SeriesKind::Speed,
                w.iter().map(|s| s.t).collect(),
                w.iter().map(|s| s.speed).collect(),
            )?;
            let t0 = Instant::now();
            fit(&window, cfg)?;
            samples.push(t0.elapsed().as_secs_f64() * 1e3);
        }
        points.push(FitTiming { tw, median_ms: median(&samples), samples_ms: samples });
    }
    let x: Vec<f64> = points.iter().map(|p| p.tw as f64).collect();
    let y: Vec<f64> = points.iter().map(|p| p.median_ms).collect();
    let (quadratic, rmse_ms) = if x.len() >= 3 { quadratic_fit(&x, &y)? } else { ([0.0; 3], f64::NAN) };
    Ok(FitProfile { points, quadratic, rmse_ms })
}

/// Writes a method-by-column table: first column `method`, then one column
/// per header, cells formatted with `digits` decimals.
pub fn write_table<W: Write>(headers: &[String], rows: &[(String, Vec<f64>)], digits: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::InvalidArgument(format!("table: {e}"));
    let mut head = vec!["method".to_owned()];
    head.extend(headers.iter().cloned());
    w.write_record(&head).map_err(err)?;
    for (name, cells) in rows {
        if cells.len() != headers.len() {
            return Err(Error::InvalidArgument(format!("row '{name}' has {} cells", cells.len())));
        }
        let mut rec = vec![name.clone()];
        rec.extend(cells.iter().map(|c| format!("{c:.digits$}")));
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("<table>", e))?;
    Ok(())
}
