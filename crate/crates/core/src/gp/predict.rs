//! Predictive distributions and the marginal likelihood.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{factorize, kernel, GpHyperparams, GpModel, TimeSeriesWindow};
use crate::error::{Error, Result};

/// Per-step Gaussian marginals over a forecast horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictiveSeries {
    pub times: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

impl PredictiveSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Posterior mean and marginal variance at `horizon_times` given the
/// window, under the model's hyperparameters.
pub fn predict(window: &TimeSeriesWindow, model: &GpModel, horizon_times: &[f64]) -> Result<PredictiveSeries> {
    predict_with(window, &model.hyperparams(), horizon_times)
}

pub fn predict_with(
    window: &TimeSeriesWindow,
    theta: &GpHyperparams,
    horizon_times: &[f64],
) -> Result<PredictiveSeries> {
    if horizon_times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument("non-finite horizon time".into()));
    }
    let c = window.centered();
    let f = factorize(&c.t, theta, window.base_jitter())?;
    let alpha = f.chol.solve(&DVector::from_column_slice(&c.y));
    let m = c.t.len();
    let n = horizon_times.len();
    let ts: Vec<f64> = horizon_times.iter().map(|t| t - c.t_ref).collect();
    // K1 is n×m; solve for K2⁻¹K1ᵀ in one go.
    let k1t = DMatrix::from_fn(m, n, |i, j| kernel(c.t[i], ts[j], theta));
    let v = f.chol.solve(&k1t);
    let mut means = Vec::with_capacity(n);
    let mut variances = Vec::with_capacity(n);
    for j in 0..n {
        let col = k1t.column(j);
        means.push(col.dot(&alpha) + c.offset);
        let explained = col.dot(&v.column(j));
        variances.push((kernel(ts[j], ts[j], theta) - explained).max(0.0));
    }
    Ok(PredictiveSeries { times: horizon_times.to_vec(), means, variances })
}

/// `-(n/2) ln 2π - ½ yᵀK⁻¹y - ½ ln det K` on the centred window.
pub fn log_marginal_likelihood(window: &TimeSeriesWindow, theta: &GpHyperparams) -> Result<f64> {
    let c = window.centered();
    let f = factorize(&c.t, theta, window.base_jitter())?;
    let y = DVector::from_column_slice(&c.y);
    let alpha = f.chol.solve(&y);
    let l = f.chol.l_dirty();
    let log_det: f64 = (0..c.t.len()).map(|i| 2.0 * l[(i, i)].ln()).sum();
    let n = c.t.len() as f64;
    Ok(-0.5 * n * (2.0 * std::f64::consts::PI).ln() - 0.5 * y.dot(&alpha) - 0.5 * log_det)
}
