use hgp_core::catc::{AppTable, TcConfig};
use hgp_core::channel::{emit, run_receiver, sweep, ChannelConfig, GilbertElliott, ReceiverSetup, SweepConfig};
use hgp_core::forecast::{PredictorContext, PredictorRegistry};
use hgp_core::harness::{generate_suite, SuiteConfig};
use hgp_core::safety::FcwConfig;
use hgp_core::trajectory::{Trip, VehicleState};
use proptest::prelude::*;

fn long_trip(n: usize) -> Trip {
    let states = (0..n)
        .map(|k| {
            let t = 0.1 * k as f64;
            VehicleState { t, x: 10.0 * t, y: 0.0, speed: 10.0, heading: 0.0, accel: 0.0 }
        })
        .collect();
    Trip::new("rv", states, 0.1).unwrap()
}

#[test]
fn delivered_fraction_within_binomial_interval() {
    let trip = long_trip(10_000);
    for (i, per) in [0.1, 0.5, 0.9].into_iter().enumerate() {
        let packets = emit(&trip, &ChannelConfig { per, seed: 100 + i as u64, ..Default::default() }).unwrap();
        let n = packets.len() as f64;
        let delivered = packets.iter().filter(|p| !p.dropped).count() as f64;
        let p = 1.0 - per;
        let half = 2.5758 * (p * (1.0 - p) / n).sqrt();
        assert!((delivered / n - p).abs() <= half, "per {per}: {}", delivered / n);
    }
}

#[test]
fn bursty_loss_matches_stationary_rate() {
    let ge = GilbertElliott { p_good_to_bad: 0.05, p_bad_to_good: 0.2, loss_good: 0.0, loss_bad: 1.0 };
    let packets = emit(&long_trip(100_000), &ChannelConfig { burst: Some(ge), seed: 3, ..Default::default() }).unwrap();
    let lost = packets.iter().filter(|p| p.dropped).count() as f64 / packets.len() as f64;
    assert!((lost - 0.2).abs() < 0.02, "{lost}");
}

#[test]
fn rejects_rates_that_do_not_divide() {
    let trip = long_trip(20);
    assert!(emit(&trip, &ChannelConfig { rate_hz: 3.0, ..Default::default() }).is_err());
    assert!(emit(&trip, &ChannelConfig { rate_hz: 20.0, ..Default::default() }).is_err());
    assert!(emit(&trip, &ChannelConfig { per: 1.5, ..Default::default() }).is_err());
    assert_eq!(emit(&trip, &ChannelConfig { rate_hz: 2.0, ..Default::default() }).unwrap().len(), 4);
}

fn scenarios(n: usize) -> Vec<hgp_core::channel::SweepTrip> {
    let cfg = SuiteConfig { trips: n, duration: 20.0, ..Default::default() };
    generate_suite(&cfg, 9, "test").unwrap().into_iter().map(|s| s.trip).collect()
}

#[test]
fn ground_truth_stream_is_bit_exact_across_runs() {
    let trips = scenarios(3);
    let reg = PredictorRegistry::with_builtins();
    let ctx = PredictorContext::default();
    let table = AppTable::default();
    let (tc, fcw) = (TcConfig::default(), FcwConfig::default());
    let setup = ReceiverSetup { registry: &reg, ctx: &ctx, table: &table, tc: &tc, fcw: &fcw };
    for (i, t) in trips.iter().enumerate() {
        let a = run_receiver(t, i, "bsm", &ChannelConfig::default(), setup, |_, _| {}).unwrap();
        let b = run_receiver(t, i, "bsm", &ChannelConfig::default(), setup, |_, _| {}).unwrap();
        assert_eq!(a, b);
        assert!(a.pte.iter().all(|s| s.pte == 0.0));
    }
}

#[test]
fn sweep_cells_share_drop_patterns() {
    let trips = scenarios(2);
    let cfg = SweepConfig {
        predictors: vec!["bsm".into(), "ca".into()],
        per_grid: vec![0.0, 0.5, 0.9],
        ..Default::default()
    };
    let cells =
        sweep(&trips, &PredictorRegistry::with_builtins(), &PredictorContext::default(), &AppTable::default(), &cfg)
            .unwrap();
    assert_eq!(cells.len(), 6);
    for per in [0.0, 0.5, 0.9] {
        let pair: Vec<_> = cells.iter().filter(|c| c.key.per == per).collect();
        assert_eq!(pair[0].delivered, pair[1].delivered);
        let fresh = |c: &hgp_core::channel::CellResult| c.pte.iter().map(|s| s.fresh).collect::<Vec<_>>();
        assert_eq!(fresh(pair[0]), fresh(pair[1]));
    }
    let delivered: Vec<usize> =
        [0.0, 0.5, 0.9].iter().map(|&p| cells.iter().find(|c| c.key.per == p).unwrap().delivered).collect();
    assert!(delivered[0] >= delivered[1] && delivered[1] >= delivered[2]);
}

proptest! {
    #[test]
    fn masks_nest_across_per(seed in any::<u64>(), p1 in 0.0f64..1.0, p2 in 0.0f64..1.0) {
        let trip = long_trip(300);
        let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
        let a = emit(&trip, &ChannelConfig { per: lo, seed, ..Default::default() }).unwrap();
        let b = emit(&trip, &ChannelConfig { per: hi, seed, ..Default::default() }).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(!x.dropped || y.dropped);
        }
    }

    #[test]
    fn latency_shifts_receive_times(lat in 0.0f64..2.0) {
        let trip = long_trip(50);
        let packets = emit(&trip, &ChannelConfig { latency: lat, ..Default::default() }).unwrap();
        for p in &packets {
            prop_assert!((p.rx_time - p.tx_time - lat).abs() < 1e-12);
        }
    }
}
