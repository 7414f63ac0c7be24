mod common;

use common::{close, dense_loo, dense_predict, random_case};
use hgp_core::gp::{
    fit, gram_matrix, kernel, log_marginal_likelihood, loo_gradient, loo_objective, loo_terms, predict_with, FitConfig,
    GpHyperparams, SeriesKind, TimeSeriesWindow,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn horizon(w: &TimeSeriesWindow) -> Vec<f64> {
    let last = w.times()[w.len() - 1];
    (0..=10).map(|k| last + 0.1 * k as f64).collect()
}

#[test]
fn predict_matches_dense_conditional() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..200 {
        let (w, th) = random_case(&mut rng, 10);
        let jitter = loo_terms(&w, &th).unwrap().jitter;
        let ts = horizon(&w);
        let got = predict_with(&w, &th, &ts).unwrap();
        let (mu, var) = dense_predict(w.times(), w.values(), &th, jitter, &ts);
        let scale = w.variance().sqrt().max(1e-6);
        for j in 0..ts.len() {
            let prior = common::k(0.0, 0.0, &th);
            assert!(close(got.means[j], mu[j], scale, 1e-8), "case {case} mean {j}: {} vs {}", got.means[j], mu[j]);
            assert!(
                close(got.variances[j], var[j], prior, 1e-8),
                "case {case} var {j}: {} vs {}",
                got.variances[j],
                var[j]
            );
        }
    }
}

#[test]
fn loo_matches_per_element_deletion() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut checked = 0;
    while checked < 200 {
        let (w, th) = random_case(&mut rng, 10);
        let terms = loo_terms(&w, &th).unwrap();
        if terms.any_clamped() {
            continue;
        }
        let oracle = dense_loo(w.times(), w.values(), &th, terms.jitter);
        let got = loo_objective(&w, &th).unwrap();
        assert!(close(got, oracle, 1.0, 1e-8), "{got} vs {oracle}");
        checked += 1;
    }
}

#[test]
fn loo_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut checked = 0;
    while checked < 100 {
        let (w, th) = random_case(&mut rng, 10);
        if w.len() < 3 || loo_terms(&w, &th).unwrap().any_clamped() {
            continue;
        }
        let g = loo_gradient(&w, &th).unwrap();
        let u = th.to_log();
        // Five-point stencil: truncation O(h^4) at a step large enough to
        // keep roundoff in the sharply peaked terms negligible.
        let h = 1e-3;
        for d in 0..3 {
            let f = |s: f64| {
                let mut v = u;
                v[d] += s * h;
                loo_objective(&w, &GpHyperparams::from_log(v)).unwrap()
            };
            let fd = (-f(2.0) + 8.0 * f(1.0) - 8.0 * f(-1.0) + f(-2.0)) / (12.0 * h);
            let rel = (g[d] - fd).abs() / g[d].abs().max(fd.abs()).max(1.0);
            assert!(rel < 1e-4, "component {d}: analytic {} fd {fd}", g[d]);
        }
        checked += 1;
    }
}

#[test]
fn fit_reaches_at_least_the_initial_objective() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let (w, _) = random_case(&mut rng, 10);
        if w.len() < 5 {
            continue;
        }
        let out = fit(&w, &FitConfig::default()).unwrap();
        let th = out.model.hyperparams();
        assert!(th.is_valid());
        let start = out.initial_objective;
        assert!(out.model.loo_objective >= start - 1e-9);
    }
}

#[test]
fn lml_of_two_points_by_hand() {
    let th = GpHyperparams::new(1.0, 1.0, 0.5).unwrap();
    let w = TimeSeriesWindow::new(SeriesKind::Heading, vec![0.0, 1.0], vec![1.0, 3.0]).unwrap();
    // Centred: t = -0.5, 0.5; y = -1, 1.
    let jitter = w.base_jitter();
    let a = common::k(-0.5, -0.5, &th) + jitter;
    let b = common::k(-0.5, 0.5, &th);
    let det = a * a - b * b;
    let quad = (a + a + 2.0 * b) / det;
    let expect = -(2.0 * std::f64::consts::PI).ln() - 0.5 * quad - 0.5 * det.ln();
    assert!((log_marginal_likelihood(&w, &th).unwrap() - expect).abs() < 1e-12);
}

fn theta() -> impl Strategy<Value = GpHyperparams> {
    (0.05f64..5.0, 0.01f64..10.0, 0.001f64..2.0).prop_map(|(g, a1, a2)| GpHyperparams::new(g, a1, a2).unwrap())
}

proptest! {
    #[test]
    fn kernel_is_symmetric(t in -50.0f64..50.0, s in -50.0f64..50.0, th in theta()) {
        prop_assert_eq!(kernel(t, s, &th), kernel(s, t, &th));
    }

    #[test]
    fn gram_is_positive_semidefinite(gaps in prop::collection::vec(0.05f64..1.0, 1..12), th in theta()) {
        let mut t = vec![0.0];
        for g in gaps {
            let last = t[t.len() - 1];
            t.push(last + g);
        }
        let c = 0.5 * (t[0] + t[t.len() - 1]);
        let tc: Vec<f64> = t.iter().map(|v| v - c).collect();
        let g = gram_matrix(&tc, &th, 0.0).unwrap();
        let eig = g.symmetric_eigen();
        let top = eig.eigenvalues.max().max(1e-300);
        prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-10 * top));
    }

    #[test]
    fn predictive_variance_within_prior(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, th) = random_case(&mut rng, 10);
        let ts = horizon(&w);
        let p = predict_with(&w, &th, &ts).unwrap();
        let c = w.centered();
        for (j, t) in ts.iter().enumerate() {
            let prior = kernel(t - c.t_ref, t - c.t_ref, &th);
            prop_assert!(p.variances[j] >= 0.0);
            prop_assert!(p.variances[j] <= prior * (1.0 + 1e-9) + 1e-12);
        }
    }

    #[test]
    fn shifting_values_shifts_the_mean(seed in any::<u64>(), shift in -100.0f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (w, th) = random_case(&mut rng, 10);
        let moved = TimeSeriesWindow::new(
            SeriesKind::Speed,
            w.times().to_vec(),
            w.values().iter().map(|v| v + shift).collect(),
        ).unwrap();
        let ts = horizon(&w);
        let a = predict_with(&w, &th, &ts).unwrap();
        let b = predict_with(&moved, &th, &ts).unwrap();
        for j in 0..ts.len() {
            prop_assert!((b.means[j] - a.means[j] - shift).abs() < 1e-6 * (1.0 + shift.abs() + a.means[j].abs()));
        }
    }
}
