//! Brute-force reference implementations shared by the integration and
//! acceptance tests. Everything here is deliberately naive: dense LU solves
//! per element instead of one factorization.

#![allow(dead_code)]

use hgp_core::gp::{GpHyperparams, SeriesKind, TimeSeriesWindow};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Kernel written out from its definition, without symmetrisation tricks.
pub fn k(t: f64, s: f64, th: &GpHyperparams) -> f64 {
    th.alpha1.powi(2) * (-(t - s).powi(2) / (2.0 * th.gamma.powi(2))).exp() + th.alpha2.powi(2) * t * s
}

/// Mean-removed values and mid-span time origin.
pub fn centre(t: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>, f64, f64) {
    let t_ref = 0.5 * (t[0] + t[t.len() - 1]);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    (t.iter().map(|v| v - t_ref).collect(), y.iter().map(|v| v - mean).collect(), t_ref, mean)
}

fn cov(a: &[f64], b: &[f64], th: &GpHyperparams) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| k(a[i], b[j], th))
}

fn lu_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    a.clone().lu().solve(b).expect("singular oracle system")
}

/// Conditional Gaussian of the latent values at `ts` given the window.
pub fn dense_predict(t: &[f64], y: &[f64], th: &GpHyperparams, jitter: f64, ts: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (tc, yc, t_ref, mean) = centre(t, y);
    let sc: Vec<f64> = ts.iter().map(|v| v - t_ref).collect();
    let k11 = cov(&tc, &tc, th) + DMatrix::identity(tc.len(), tc.len()) * jitter;
    let k12 = cov(&tc, &sc, th);
    let k22 = cov(&sc, &sc, th);
    let w = lu_solve(&k11, &k12);
    let ycol = DMatrix::from_column_slice(yc.len(), 1, &yc);
    let mu = w.transpose() * ycol;
    let sigma = k22 - k12.transpose() * w;
    ((0..ts.len()).map(|j| mu[(j, 0)] + mean).collect(), (0..ts.len()).map(|j| sigma[(j, j)].max(0.0)).collect())
}

/// Sum over elements of `ln N(y_i; mu_{-i}, var_{-i})`, each conditional
/// obtained by deleting row and column `i` and solving the rest.
pub fn dense_loo(t: &[f64], y: &[f64], th: &GpHyperparams, jitter: f64) -> f64 {
    let (tc, yc, _, _) = centre(t, y);
    let m = tc.len();
    let mut total = 0.0;
    for i in 0..m {
        let rest: Vec<usize> = (0..m).filter(|&j| j != i).collect();
        let tr: Vec<f64> = rest.iter().map(|&j| tc[j]).collect();
        let yr = DMatrix::from_iterator(rest.len(), 1, rest.iter().map(|&j| yc[j]));
        let kr = cov(&tr, &tr, th) + DMatrix::identity(tr.len(), tr.len()) * jitter;
        let ki = cov(&tr, &[tc[i]], th);
        let w = lu_solve(&kr, &ki);
        let mu = (w.transpose() * &yr)[(0, 0)];
        let var = k(tc[i], tc[i], th) + jitter - (ki.transpose() * &w)[(0, 0)];
        total += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - (yc[i] - mu).powi(2) / (2.0 * var);
    }
    total
}

/// Monte-Carlo mean and standard error of `cos h`, `h ~ N(mu, var)`.
pub fn mc_cos(rng: &mut impl Rng, mu: f64, var: f64, n: usize) -> (f64, f64) {
    let sd = var.sqrt();
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let z: f64 = StandardNormal.sample(rng);
        let c = (mu + sd * z).cos();
        s += c;
        s2 += c * c;
    }
    let mean = s / n as f64;
    let var_c = (s2 / n as f64 - mean * mean).max(0.0);
    (mean, (var_c / n as f64).sqrt())
}

/// Largest Gram condition number accepted by [`random_case`]. Any two
/// backward-stable solvers can only agree to about `cond * eps`, so a 1e-8
/// comparison is meaningful only below roughly 1e7.
pub const MAX_COND: f64 = 1e7;

/// Condition number of the centred, jittered Gram matrix.
pub fn gram_cond(w: &TimeSeriesWindow, th: &GpHyperparams) -> f64 {
    let c = w.centered();
    let g = hgp_core::gp::gram_matrix(&c.t, th, w.base_jitter()).unwrap();
    let e = g.symmetric_eigen().eigenvalues;
    e.max() / e.min()
}

/// Random window and hyperparameters: irregular 0.1..0.5 s sampling,
/// length-scales 0.1..1 s, rejection-sampled to `cond <= MAX_COND`.
pub fn random_case(rng: &mut impl Rng, max_len: usize) -> (TimeSeriesWindow, GpHyperparams) {
    loop {
        let (w, th) = raw_case(rng, max_len);
        let cond = gram_cond(&w, &th);
        if cond.is_finite() && cond > 0.0 && cond <= MAX_COND {
            return (w, th);
        }
    }
}

fn raw_case(rng: &mut impl Rng, max_len: usize) -> (TimeSeriesWindow, GpHyperparams) {
    let m = rng.gen_range(2..=max_len);
    let mut t = vec![rng.gen_range(0.0..100.0)];
    for _ in 1..m {
        let last = t[t.len() - 1];
        t.push(last + rng.gen_range(0.1..0.5));
    }
    let scale = 10f64.powf(rng.gen_range(-1.0..1.3));
    let slope = rng.gen_range(-1.0..1.0);
    let mut y = Vec::with_capacity(m);
    let mut walk = rng.gen_range(-5.0..5.0);
    for &ti in &t {
        walk += scale * rng.gen_range(-0.3..0.3);
        y.push(walk + slope * scale * (ti - t[0]));
    }
    let log_u = |rng: &mut _, lo: f64, hi: f64| 10f64.powf(Rng::gen_range(rng, lo..hi));
    let theta =
        GpHyperparams { gamma: log_u(rng, -1.0, 0.0), alpha1: log_u(rng, -1.0, 1.0), alpha2: log_u(rng, -2.0, 0.0) };
    (TimeSeriesWindow::new(SeriesKind::Speed, t, y).unwrap(), theta)
}

/// `|a - b| <= tol * (|b| + scale)`.
pub fn close(a: f64, b: f64, scale: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (b.abs() + scale)
}

/// Column vector helper.
pub fn col(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
