use fogsim::model::{Cloudlet, Point};
use fogsim::ScenarioConfig;
use fogsim::radio::{coverage_set, interference_at, uplink_rate, PathLossModel, RateEstimate, Transmitter};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const PL: PathLossModel = PathLossModel { ref_db: 38.5, exponent: 3.5 };
const NOISE_MW: f64 = 1e-11;
const BW: f64 = 1e6;

proptest! {
    #[test]
    fn rate_increases_with_gain_and_falls_with_interference(
        pl in 60.0..120.0f64,
        g in 0.01..10.0f64,
        dg in 0.01..5.0f64,
        i in 0.0..1e-9f64,
        di in 1e-13..1e-9f64,
    ) {
        let base = uplink_rate(20.0, pl, g, i, NOISE_MW, BW);
        prop_assert!(base > 0.0);
        prop_assert!(uplink_rate(20.0, pl, g + dg, i, NOISE_MW, BW) > base);
        prop_assert!(uplink_rate(20.0, pl, g, i + di, NOISE_MW, BW) < base);
        prop_assert!(uplink_rate(20.0, pl + 1.0, g, i, NOISE_MW, BW) < base);
    }

    #[test]
    fn path_loss_monotone(d in 1.0..1000.0f64, dd in 0.001..100.0f64) {
        prop_assert!(PL.loss_db(d + dd) > PL.loss_db(d));
    }

    #[test]
    fn estimator_stays_in_observed_range(obs in prop::collection::vec(1.0..1e6f64, 1..200), a in 0.1..=1.0f64) {
        let lo = obs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = obs.iter().cloned().fold(0.0, f64::max);
        let mut e = RateEstimate::default();
        for &o in &obs {
            e = e.update(o, a);
        }
        prop_assert!(e.value_bps >= lo * (1.0 - 1e-12) && e.value_bps <= hi * (1.0 + 1e-12));
        prop_assert_eq!(e.update_count, obs.len() as u64);
    }
}

#[test]
fn first_update_replaces_prior() {
    let e = RateEstimate { value_bps: 123.0, update_count: 0 }.update(7.0, 0.55);
    assert_eq!(e.value_bps, 7.0);
}

#[test]
fn estimator_converges_on_iid_input() {
    let mu = 3.7e6;
    for trial in 0..100 {
        let mut rng = ChaCha8Rng::seed_from_u64(trial);
        let mut e = RateEstimate::default();
        for _ in 0..10_000 {
            e = e.update(mu * rng.random_range(0.95..1.05), 0.55);
        }
        assert!((e.value_bps / mu - 1.0).abs() < 0.01, "trial {trial}: {}", e.value_bps);
    }
}

#[test]
fn coverage_depends_on_path_loss_only() {
    let cfg = ScenarioConfig::default();
    let cloudlets: Vec<Cloudlet> = [50.0, 100.0, 110.0, 111.0, 300.0]
        .iter()
        .enumerate()
        .map(|(id, &x)| Cloudlet::new(id, Point::new(x, 0.0), &cfg, &[]))
        .collect();
    let origin = Point::new(0.0, 0.0);
    assert_eq!(coverage_set(&origin, &cloudlets, &PL, 110.0), vec![0, 1, 2]);
    let r = PL.coverage_radius_m(110.0);
    assert!((r - 110.37).abs() < 0.01);
    for c in &cloudlets {
        let inside = PL.loss_db(origin.dist(&c.position)) <= 110.0;
        assert_eq!(coverage_set(&origin, &cloudlets, &PL, 110.0).contains(&c.id), inside);
    }
}

#[test]
fn interference_excludes_same_target() {
    let tx = [
        Transmitter { un: 0, target: 1 },
        Transmitter { un: 1, target: 2 },
        Transmitter { un: 2, target: 1 },
    ];
    let recv = |u: usize| [1.0, 10.0, 100.0][u];
    assert_eq!(interference_at(1, &tx, recv), 10.0);
    assert_eq!(interference_at(2, &tx, recv), 101.0);
    assert_eq!(interference_at(9, &tx, recv), 111.0);
}
