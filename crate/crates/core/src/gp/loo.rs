//! Leave-one-out cross-validation objective.
//!
//! For every element `i` the conditional Gaussian of `x_i` given the rest
//! has mean `mu_i = y_i - [K⁻¹y]_i / [K⁻¹]_ii` and variance
//! `sigma_i² = 1 / [K⁻¹]_ii`, so all `m` terms come from one inverse.

use nalgebra::{DMatrix, DVector};

use super::{factorize, GpHyperparams, TimeSeriesWindow};
use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

/// Per-element leave-one-out log-probabilities.
#[derive(Debug, Clone)]
pub struct LooTerms {
    pub terms: Vec<f64>,
    /// Conditional variances, after flooring at the jitter.
    pub variances: Vec<f64>,
    /// Conditional means (centred units).
    pub means: Vec<f64>,
    /// True where a variance fell below the jitter floor and was clamped.
    pub clamped: Vec<bool>,
    /// Diagonal jitter actually used.
    pub jitter: f64,
}

impl LooTerms {
    pub fn objective(&self) -> f64 {
        self.terms.iter().sum()
    }

    pub fn any_clamped(&self) -> bool {
        self.clamped.iter().any(|&c| c)
    }
}

struct Inverse {
    k_inv: DMatrix<f64>,
    alpha: DVector<f64>,
    jitter: f64,
}

fn inverse(t: &[f64], y: &[f64], theta: &GpHyperparams, jitter: f64) -> Result<Inverse> {
    let f = factorize(t, theta, jitter)?;
    let k_inv = f.chol.inverse();
    let alpha = &k_inv * DVector::from_column_slice(y);
    Ok(Inverse { k_inv, alpha, jitter: f.jitter })
}

/// Leave-one-out terms on already-centred data. Times need not be sorted
/// but must be distinct.
pub fn loo_terms_raw(t: &[f64], y: &[f64], theta: &GpHyperparams, jitter: f64) -> Result<LooTerms> {
    if t.len() != y.len() || t.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: t.len().min(y.len()) });
    }
    let inv = inverse(t, y, theta, jitter)?;
    let m = t.len();
    let mut out = LooTerms {
        terms: Vec::with_capacity(m),
        variances: Vec::with_capacity(m),
        means: Vec::with_capacity(m),
        clamped: Vec::with_capacity(m),
        jitter: inv.jitter,
    };
    for i in 0..m {
        let d = inv.k_inv[(i, i)];
        let resid = inv.alpha[i] / d;
        let mut var = 1.0 / d;
        let clamped = !(var >= inv.jitter);
        if clamped {
            var = inv.jitter;
        }
        out.terms.push(-0.5 * var.ln() - resid * resid / (2.0 * var) - HALF_LN_2PI);
        out.variances.push(var);
        out.means.push(y[i] - resid);
        out.clamped.push(clamped);
    }
    Ok(out)
}

/// All leave-one-out terms of a window (centred internally).
pub fn loo_terms(window: &TimeSeriesWindow, theta: &GpHyperparams) -> Result<LooTerms> {
    let c = window.centered();
    loo_terms_raw(&c.t, &c.y, theta, window.base_jitter())
}

/// Log-probability of element `i` given the rest of the window.
pub fn loo_log_probability(window: &TimeSeriesWindow, i: usize, theta: &GpHyperparams) -> Result<f64> {
    if i >= window.len() {
        return Err(Error::InvalidArgument(format!("index {i} outside window of {}", window.len())));
    }
    Ok(loo_terms(window, theta)?.terms[i])
}

/// Sum of the leave-one-out log-probabilities.
pub fn loo_objective(window: &TimeSeriesWindow, theta: &GpHyperparams) -> Result<f64> {
    Ok(loo_terms(window, theta)?.objective())
}

/// Objective and its gradient with respect to `(ln gamma, ln alpha1,
/// ln alpha2)` on centred data, at a fixed jitter.
pub(crate) fn objective_and_gradient(
    t: &[f64],
    y: &[f64],
    theta: &GpHyperparams,
    jitter: f64,
) -> Result<(f64, [f64; 3], f64)> {
    let inv = inverse(t, y, theta, jitter)?;
    let m = t.len();
    let k_inv = &inv.k_inv;
    let alpha = &inv.alpha;

    let mut value = 0.0;
    for i in 0..m {
        let d = k_inv[(i, i)];
        let var = (1.0 / d).max(inv.jitter);
        let resid = alpha[i] / d;
        value += -0.5 * var.ln() - resid * resid / (2.0 * var) - HALF_LN_2PI;
    }

    // dK/d ln(theta_j) for the three hyperparameters.
    let g2 = theta.gamma * theta.gamma;
    let a1 = theta.alpha1 * theta.alpha1;
    let a2 = theta.alpha2 * theta.alpha2;
    let mut dk = [DMatrix::zeros(m, m), DMatrix::zeros(m, m), DMatrix::zeros(m, m)];
    for i in 0..m {
        for j in 0..=i {
            let r2 = (t[i] - t[j]).powi(2);
            let rbf = a1 * (-r2 / (2.0 * g2)).exp();
            let vals = [rbf * r2 / g2, 2.0 * rbf, 2.0 * a2 * t[i] * t[j]];
            for (mat, v) in dk.iter_mut().zip(vals) {
                mat[(i, j)] = v;
                mat[(j, i)] = v;
            }
        }
    }

    let mut grad = [0.0; 3];
    for (g, dkj) in grad.iter_mut().zip(&dk) {
        let z = k_inv * dkj; // Z_j = K⁻¹ dK_j
        let z_alpha = &z * alpha;
        let mut acc = 0.0;
        for i in 0..m {
            let d = k_inv[(i, i)];
            // [Z_j K⁻¹]_ii
            let zk_ii = z.row(i).dot(&k_inv.column(i).transpose());
            acc += (alpha[i] * z_alpha[i] - 0.5 * (1.0 + alpha[i] * alpha[i] / d) * zk_ii) / d;
        }
        *g = acc;
    }
    Ok((value, grad, inv.jitter))
}

/// Gradient of [`loo_objective`] with respect to log-hyperparameters.
pub fn loo_gradient(window: &TimeSeriesWindow, theta: &GpHyperparams) -> Result<[f64; 3]> {
    let c = window.centered();
    if c.t.len() < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: c.t.len() });
    }
    objective_and_gradient(&c.t, &c.y, theta, window.base_jitter()).map(|(_, g, _)| g)
}
