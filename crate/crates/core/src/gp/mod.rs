//! Gaussian process regression on one scalar time series.
//!
//! The covariance is the compound kernel
//! `alpha1² exp(-(t - t')² / (2 gamma²)) + alpha2² t t'`
//! with a zero mean. Windows are centred before any computation: times are
//! shifted to the window midpoint and values have their mean removed, which
//! is added back to predictions. The linear term therefore acts as a trend
//! through the window centre.

mod fit;
mod loo;
mod predict;

pub use fit::{fit, initial_guess, FitConfig, FitOutcome, MIN_FIT_SAMPLES};
pub use loo::{loo_gradient, loo_log_probability, loo_objective, loo_terms, loo_terms_raw, LooTerms};
pub use predict::{log_marginal_likelihood, predict, predict_with, PredictiveSeries};

use nalgebra::{Cholesky, DMatrix, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative jitter added to every Gram diagonal.
pub const JITTER_REL: f64 = 1e-8;
/// Largest relative jitter tried before giving up.
pub const JITTER_REL_MAX: f64 = 1e-4;

/// Which quantity a series (and a model fitted to it) describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesKind {
    Speed,
    Heading,
    /// East position, for direct forecasting.
    X,
    /// North position, for direct forecasting.
    Y,
}

/// Kernel hyperparameters `{gamma, alpha1, alpha2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyperparams {
    /// RBF length-scale, seconds.
    pub gamma: f64,
    /// RBF amplitude, series units.
    pub alpha1: f64,
    /// Linear-kernel amplitude, series units per second.
    pub alpha2: f64,
}

impl GpHyperparams {
    pub fn new(gamma: f64, alpha1: f64, alpha2: f64) -> Result<Self> {
        let p = Self { gamma, alpha1, alpha2 };
        if p.is_valid() {
            Ok(p)
        } else {
            Err(Error::InvalidArgument(format!("hyperparameters must be positive and finite: {p:?}")))
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.gamma, self.alpha1, self.alpha2].iter().all(|v| *v > 0.0 && v.is_finite())
    }

    pub fn to_log(self) -> [f64; 3] {
        [self.gamma.ln(), self.alpha1.ln(), self.alpha2.ln()]
    }

    pub fn from_log(u: [f64; 3]) -> Self {
        Self { gamma: u[0].exp(), alpha1: u[1].exp(), alpha2: u[2].exp() }
    }
}

/// Compound RBF + linear covariance between two instants.
#[inline]
pub fn kernel(t: f64, t_prime: f64, theta: &GpHyperparams) -> f64 {
    // Fixed argument order keeps the result bit-symmetric.
    let (t, t_prime) = if t <= t_prime { (t, t_prime) } else { (t_prime, t) };
    let d = t_prime - t;
    theta.alpha1 * theta.alpha1 * (-d * d / (2.0 * theta.gamma * theta.gamma)).exp()
        + theta.alpha2 * theta.alpha2 * t * t_prime
}

fn check_increasing(times: &[f64]) -> Result<()> {
    for (i, w) in times.windows(2).enumerate() {
        if !(w[1] > w[0]) {
            return Err(Error::NonMonotoneTime { index: i + 1 });
        }
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("non-finite timestamp".into()));
    }
    Ok(())
}

/// `K + jitter I` for strictly increasing `times`.
pub fn gram_matrix(times: &[f64], theta: &GpHyperparams, jitter: f64) -> Result<DMatrix<f64>> {
    check_increasing(times)?;
    Ok(gram_unchecked(times, theta, jitter))
}

pub(crate) fn gram_unchecked(times: &[f64], theta: &GpHyperparams, jitter: f64) -> DMatrix<f64> {
    let m = times.len();
    let mut k = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = kernel(times[i], times[j], theta);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] += jitter;
    }
    k
}

/// Cholesky factor of `K + jitter I`, escalating the jitter tenfold until
/// the factorization succeeds or the cap is exceeded.
pub(crate) struct Factor {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

pub(crate) fn factorize(times: &[f64], theta: &GpHyperparams, base_jitter: f64) -> Result<Factor> {
    let base = gram_unchecked(times, theta, 0.0);
    let diag_mean = base.diagonal().mean().max(0.0);
    let cap = JITTER_REL_MAX * (base_jitter / JITTER_REL).max(diag_mean);
    let mut jitter = base_jitter;
    loop {
        let mut k = base.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(k) {
            return Ok(Factor { chol, jitter });
        }
        jitter *= 10.0;
        if jitter > cap * (1.0 + 1e-12) {
            return Err(Error::IllConditionedKernel { jitter: jitter / 10.0 });
        }
    }
}

/// Training or observation window of one series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesWindow {
    pub kind: SeriesKind,
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TimeSeriesWindow {
    pub fn new(kind: SeriesKind, times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::InvalidArgument(format!("{} timestamps but {} values", times.len(), values.len())));
        }
        if times.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        check_increasing(&times)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite window value".into()));
        }
        Ok(Self { kind, times, values })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn span(&self) -> f64 {
        self.times[self.times.len() - 1] - self.times[0]
    }

    /// Zero-mean, mid-time-origin copy of the window.
    pub fn centered(&self) -> Centered {
        let t_ref = 0.5 * (self.times[0] + self.times[self.times.len() - 1]);
        let offset = self.values.iter().sum::<f64>() / self.values.len() as f64;
        Centered {
            t: self.times.iter().map(|t| t - t_ref).collect(),
            y: self.values.iter().map(|v| v - offset).collect(),
            t_ref,
            offset,
        }
    }

    /// Sample variance of the values (zero for a single sample).
    pub fn variance(&self) -> f64 {
        let n = self.values.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.values.iter().sum::<f64>() / n as f64;
        self.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    }

    /// Base diagonal jitter: `JITTER_REL` times the value scale squared.
    pub fn base_jitter(&self) -> f64 {
        JITTER_REL * value_scale2(self.variance())
    }
}

/// Variance floor used for jitter scaling so constant series still get a
/// positive diagonal.
pub(crate) fn value_scale2(variance: f64) -> f64 {
    variance.max(1e-6)
}

/// Window after centring; see [`TimeSeriesWindow::centered`].
#[derive(Debug, Clone, PartialEq)]
pub struct Centered {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    pub t_ref: f64,
    pub offset: f64,
}

/// Fitted hyperparameters for one series kind. Field names are the JSON
/// schema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpModel {
    pub kind: SeriesKind,
    pub gamma: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    /// Leave-one-out objective reached on the training window; NaN (JSON
    /// `null`) when the model was not fitted.
    #[serde(deserialize_with = "nan_if_null")]
    pub loo_objective: f64,
    /// Time span of the training window, seconds.
    pub trained_window_span: f64,
}

fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

impl GpModel {
    pub fn hyperparams(&self) -> GpHyperparams {
        GpHyperparams { gamma: self.gamma, alpha1: self.alpha1, alpha2: self.alpha2 }
    }

    pub fn with_hyperparams(kind: SeriesKind, theta: GpHyperparams) -> Self {
        Self {
            kind,
            gamma: theta.gamma,
            alpha1: theta.alpha1,
            alpha2: theta.alpha2,
            loo_objective: f64::NAN,
            trained_window_span: 0.0,
        }
    }
}
