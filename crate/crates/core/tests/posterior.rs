mod common;

use common::DensePosterior;
use nbs_core::bac::channel_params;
use nbs_core::rng::stream;
use nbs_core::Posterior;
use proptest::prelude::*;
use rand::Rng;

fn factors(tau: f64, eps: f64) -> (nbs_core::ChannelParams, [f64; 4]) {
    let p = channel_params::<f64>(tau, eps).unwrap();
    (p, [p.d00, p.d01, p.d10, p.d11])
}

/// Runs `steps` random operations on both structures, checking agreement
/// after each one.
fn compare(n_intervals: u64, steps: usize, seed: u64) {
    let mut rng = stream(seed, 0);
    let (params, d) = factors([0.5, 0.3, 0.75][rng.random_range(0..3)], 0.1);
    let mut tree = Posterior::new_uniform(n_intervals).unwrap();
    let mut dense = DensePosterior::uniform(n_intervals as usize);
    for _ in 0..steps {
        let q: f64 = rng.random_range(0.001..0.999);
        let j = tree.interval_at_quantile(q);
        assert_eq!(j as usize, dense.quantile(q), "quantile {q} at n={n_intervals}");
        let fraction = (q - dense.prefix(j as usize - 1)) / dense.w[j as usize - 1];
        if (fraction - q).abs() > 1e-12 {
            assert_eq!(tree.round_to_coin(j, q).unwrap(), dense.coin(j as usize, q));
        }
        let i = rng.random_range(0..=n_intervals);
        assert!((tree.prefix_weight(i).unwrap() - dense.prefix(i as usize)).abs() < 1e-9);
        let y = rng.random_bool(0.5);
        tree.apply_update(j, y, &params, q).unwrap();
        dense.update(j as usize, y, d, q);
        for k in 1..=n_intervals {
            assert!((tree.weight(k).unwrap() - dense.w[k as usize - 1]).abs() < 1e-9);
        }
    }
}

#[test]
fn tree_matches_dense_reference() {
    for seed in 0..400 {
        compare(1 + seed % 64, 40, seed);
    }
}

#[test]
fn worked_update() {
    let (params, _) = factors(0.5, 0.1);
    let mut w = Posterior::new_uniform(2).unwrap();
    w.apply_update(1, true, &params, 0.5).unwrap();
    assert!((w.weight(1).unwrap() - 0.6).abs() < 1e-12);
    assert!((w.weight(2).unwrap() - 0.4).abs() < 1e-12);
    assert!((w.prefix_weight(1).unwrap() - 0.6).abs() < 1e-12);
    let mut w = Posterior::new_uniform(2).unwrap();
    w.apply_update(1, false, &params, 0.5).unwrap();
    assert!((w.weight(1).unwrap() - 0.4).abs() < 1e-12);
}

#[test]
fn huge_index_space_stays_small() {
    let (params, _) = factors(0.5, 0.1);
    let mut w = Posterior::new_uniform(1_000_000_000).unwrap();
    assert!((w.prefix_weight(500_000_000).unwrap() - 0.5).abs() < 1e-12);
    assert_eq!(w.materialized_nodes(), 1);
    let mut rng = stream(3, 0);
    for _ in 0..1000 {
        let j = w.interval_at_quantile(0.5);
        w.apply_update(j, rng.random_bool(0.5), &params, 0.5).unwrap();
    }
    assert!(w.materialized_nodes() < 1000 * 2 * 31 + 1);
    assert!((w.total() - 1.0).abs() < 1e-6);
}

#[test]
fn rounding_rule_examples() {
    let w = Posterior::new_uniform(2).unwrap();
    assert_eq!(w.round_to_coin(1, 0.5).unwrap(), 2);
    assert_eq!(w.round_to_coin(2, 0.9).unwrap(), 2);
    let mut skew = Posterior::new_uniform(2).unwrap();
    skew.rescale(1, 1.0, 0.2, 0.9);
    assert!((skew.weight(2).unwrap() - 0.1).abs() < 1e-12);
    assert_eq!(skew.round_to_coin(1, 0.5).unwrap(), 2);
}

#[test]
fn long_runs_do_not_drift() {
    let (params, _) = factors(0.3, 0.1);
    for n_intervals in [2u64, 10, 1_000_000] {
        let mut rng = stream(n_intervals, 1);
        let mut w = Posterior::new_uniform(n_intervals).unwrap();
        let crossing = n_intervals / 3 + 1;
        for _ in 0..100_000 {
            let at = w.locate(params.q);
            let coin = at.coin(params.q);
            let p = if coin > crossing { 0.4 } else { 0.2 };
            w.apply_update(at.interval, rng.random_bool(p), &params, params.q)
                .unwrap();
            assert!((w.total() - 1.0).abs() <= 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quantile_is_monotone(n in 1u64..200, seed in 0u64..1000, a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (params, _) = factors(0.5, 0.1);
        let mut rng = stream(seed, 2);
        let mut w = Posterior::new_uniform(n).unwrap();
        for _ in 0..30 {
            let j = w.interval_at_quantile(0.5);
            w.apply_update(j, rng.random_bool(0.5), &params, 0.5).unwrap();
        }
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(w.interval_at_quantile(lo) <= w.interval_at_quantile(hi));
    }

    #[test]
    fn updates_keep_weights_positive(n in 1u64..100, seed in 0u64..1000) {
        let (params, _) = factors(0.75, 0.1);
        let mut rng = stream(seed, 3);
        let mut w = Posterior::new_uniform(n).unwrap();
        for _ in 0..200 {
            let q: f64 = rng.random_range(0.01..0.99);
            let j = w.interval_at_quantile(q);
            w.apply_update(j, rng.random_bool(0.5), &params, q).unwrap();
        }
        let mut last = 0.0;
        for i in 1..=n {
            prop_assert!(w.weight(i).unwrap() > 0.0);
            let p = w.prefix_weight(i).unwrap();
            prop_assert!(p >= last);
            last = p;
        }
        prop_assert!((last - w.total()).abs() < 1e-9);
    }
}
