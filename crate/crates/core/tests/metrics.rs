use hgp_core::forecast::ForecastSource;
use hgp_core::metrics::{
    exceed_counts, fcw_accuracy, fcw_confusion, percentile_nearest_rank, quadratic_fit, PteSummary, DEFAULT_THRESHOLDS,
};
use hgp_core::safety::{BorCase, FcwDecision};
use proptest::prelude::*;

#[test]
fn nearest_rank_examples() {
    let v: Vec<f64> = (1..=20).map(f64::from).collect();
    assert_eq!(percentile_nearest_rank(&v, 0.95), Some(19.0));
    assert_eq!(percentile_nearest_rank(&[3.0], 0.95), Some(3.0));
    assert_eq!(percentile_nearest_rank(&[], 0.95), None);
    assert_eq!(PteSummary::from_errors(&[0.0; 10], &DEFAULT_THRESHOLDS).p95, 0.0);
}

#[test]
fn exceed_counts_are_strict() {
    let c = exceed_counts(&[0.2, 0.3, 1.6, 2.0], &[0.2, 1.6]);
    assert_eq!(c, vec![(0.2, 3), (1.6, 1)]);
}

fn dec(t: f64, warn: bool) -> FcwDecision {
    FcwDecision {
        t,
        rv_id: "rv".into(),
        range: 10.0,
        r_w: 5.0,
        warn,
        case: BorCase::MovingMoving,
        source: ForecastSource::Bsm,
    }
}

#[test]
fn confusion_treats_missing_instants_as_silent() {
    let gt = vec![(0, dec(0.0, true)), (0, dec(0.1, false)), (0, dec(0.2, true))];
    let test = vec![(0, dec(0.0, true)), (0, dec(0.1, true)), (0, dec(0.3, false))];
    let c = fcw_confusion(&gt, &test);
    assert_eq!((c.tp, c.fp, c.fn_, c.tn), (1, 1, 1, 1));
    assert_eq!(c.accuracy(), Some(0.5));
    assert!(fcw_accuracy(&[true], &[]).is_err());
    let json = serde_json::to_string(&c).unwrap();
    assert!(json.contains("\"fn\":1"));
}

#[test]
fn quadratic_fit_recovers_exact_quadratic() {
    let x = [10.0, 20.0, 30.0, 40.0];
    let y: Vec<f64> = x.iter().map(|v| 0.5 + 0.1 * v + 0.02 * v * v).collect();
    let (c, rmse) = quadratic_fit(&x, &y).unwrap();
    assert!((c[0] - 0.5).abs() < 1e-8 && (c[1] - 0.1).abs() < 1e-9 && (c[2] - 0.02).abs() < 1e-11);
    assert!(rmse < 1e-9);
}

proptest! {
    #[test]
    fn percentile_is_a_sample_with_enough_mass_below(v in prop::collection::vec(0.0f64..100.0, 1..200), q in 0.01f64..1.0) {
        let p = percentile_nearest_rank(&v, q).unwrap();
        prop_assert!(v.contains(&p));
        let below = v.iter().filter(|&&x| x <= p).count();
        prop_assert!(below as f64 >= (q * v.len() as f64).ceil());
        let strictly = v.iter().filter(|&&x| x < p).count();
        prop_assert!((strictly as f64) < (q * v.len() as f64).ceil());
    }

    #[test]
    fn exceed_counts_non_increasing(v in prop::collection::vec(0.0f64..3.0, 0..100)) {
        let c = exceed_counts(&v, &DEFAULT_THRESHOLDS);
        prop_assert!(c.windows(2).all(|w| w[0].1 >= w[1].1));
    }

    #[test]
    fn accuracy_of_identical_streams_is_one(v in prop::collection::vec(any::<bool>(), 1..100)) {
        prop_assert_eq!(fcw_accuracy(&v, &v).unwrap().accuracy(), Some(1.0));
    }
}
