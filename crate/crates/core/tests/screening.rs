mod common;

use common::{noiseless, standard, step};
use nbs_core::bac::channel_params;
use nbs_core::harness::{make_instance, DistributionKind, DistributionSpec};
use nbs_core::oracle::SimulatedOracle;
use nbs_core::rng::stream;
use nbs_core::screening::{
    bayesian_screening_search, bayesian_screening_search_traced, estimate_bias, experiment_variant_search,
    reduction_to_gamma, shortcut_probability, silly_bayesian_screening_search, subsample, ScreeningConfig, SCAN_LIMIT,
};
use nbs_core::{Oracle, ProblemInstance};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn subsample_index_arithmetic() {
    let l: Vec<u64> = (11..=20).collect();
    assert_eq!(subsample(&l, 0.5), vec![15, 20]);
    assert_eq!(subsample(&[3, 3, 3, 5, 5, 5, 5, 5, 5, 5], 0.3), vec![3, 5]);
}

#[test]
fn hoeffding_guarantee_holds_empirically() {
    let inst = ProblemInstance::new(vec![0.5, 0.5], 0.5, 0.1).unwrap();
    let mut o = SimulatedOracle::simulated(inst, stream(5, 0));
    let within = (0..1000)
        .filter(|_| (estimate_bias(&mut o, 1, 0.05, 0.05).unwrap() - 0.5).abs() <= 0.05)
        .count();
    assert!(within >= 950, "{within}/1000 within accuracy");
    assert_eq!(o.flips_used(), 1000 * 738);
}

#[test]
fn certain_coin_estimates_one() {
    let mut o = SimulatedOracle::simulated(noiseless(4, 2), stream(0, 0));
    assert_eq!(estimate_bias(&mut o, 4, 0.01, 0.01).unwrap(), 1.0);
}

#[test]
fn reduction_respects_size_bound() {
    let cfg = ScreeningConfig::default();
    for seed in 0..20 {
        let mut o = SimulatedOracle::simulated(standard(5000, 100 + 200 * seed as usize), stream(seed, 0));
        let r = reduction_to_gamma(&mut o, 0.5, 0.1, 0.1, 1.0 / 7.0, &cfg).unwrap();
        assert!(!r.is_empty() && r.len() <= 7);
        let mut sorted = r.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), r.len());
    }
}

#[test]
fn screening_is_correct_on_noiseless_coins() {
    let cfg = ScreeningConfig::default();
    for n in [3usize, 4, 9, 100, 4097] {
        for crossing in [1, n / 2, n - 1] {
            let mut o = SimulatedOracle::simulated(noiseless(n, crossing), stream(n as u64, crossing as u64));
            let r = bayesian_screening_search(&mut o, 0.5, 0.1, &cfg).unwrap();
            assert_eq!(r.answer, Some(crossing as u64), "n={n}");
        }
    }
}

/// When the recursive call brackets a good interval and the final estimate
/// is within its accuracy, the answer must be good.
#[test]
fn correct_whenever_every_stage_succeeds() {
    let cfg = ScreeningConfig::with_delta(0.1);
    let mut checked = 0;
    for seed in 0..150u64 {
        let spec = DistributionSpec::new(DistributionKind::ALL[seed as usize % 4], 3000);
        let inst = make_instance(&spec, &mut stream(seed, 0)).unwrap();
        let mut o = SimulatedOracle::simulated(inst.clone(), stream(seed, 1));
        let (report, trace) = bayesian_screening_search_traced(&mut o, spec.tau(), spec.eps(), &cfg).unwrap();
        let answer = report.answer.unwrap();
        let estimates_ok = trace
            .estimates
            .iter()
            .all(|e| (e.estimate - inst.p(e.coin).unwrap()).abs() <= e.accuracy);
        if !estimates_ok {
            continue;
        }
        if let Some(i) = trace.recursion_answer {
            let (left, right) = (trace.padded[i as usize - 1], trace.padded[i as usize]);
            let bracketed = inst.is_good(left, trace.eps_prime).unwrap()
                || (right > 1 && inst.is_good(right - 1, trace.eps_prime).unwrap());
            if !bracketed {
                continue;
            }
        } else if !trace
            .candidates
            .iter()
            .any(|&x| inst.is_good(x, trace.eps_prime).unwrap())
        {
            continue;
        }
        checked += 1;
        assert!(
            inst.is_good(answer, spec.eps()).unwrap(),
            "seed {seed}: {answer} not good"
        );
    }
    assert!(checked >= 100, "only {checked} runs had every stage succeed");
}

#[test]
fn screening_succeeds_on_every_family() {
    let cfg = ScreeningConfig::with_delta(0.1);
    for kind in [
        DistributionKind::Standard,
        DistributionKind::Biased,
        DistributionKind::Lopsided,
        DistributionKind::Wide,
    ] {
        let spec = DistributionSpec::new(kind, 2000);
        let mut wins = 0;
        for seed in 0..60 {
            let inst = make_instance(&spec, &mut stream(seed, 0)).unwrap();
            let mut o = SimulatedOracle::simulated(inst.clone(), stream(seed, 1));
            let a = bayesian_screening_search(&mut o, spec.tau(), spec.eps(), &cfg)
                .unwrap()
                .answer
                .unwrap();
            wins += inst.is_good(a, spec.eps()).unwrap() as u32;
        }
        assert!(wins >= 54, "{kind}: {wins}/60");
    }
}

#[test]
fn shortcut_arithmetic() {
    assert_eq!(shortcut_probability(2, 0.3), 0.0);
    assert!((shortcut_probability(1 << 16, 0.3) - 0.28125).abs() < 1e-15);
}

#[test]
fn two_coins_never_shortcut() {
    let inst = standard(2, 1);
    for seed in 0..50 {
        let mut o = SimulatedOracle::simulated(inst.clone(), stream(seed, 0));
        let run = silly_bayesian_screening_search(
            &mut o,
            0.5,
            0.1,
            &ScreeningConfig::with_delta(0.3),
            &mut stream(seed, 1),
        )
        .unwrap();
        assert!(!run.shortcut);
        assert_eq!(run.report.answer, Some(1));
    }
}

#[test]
fn silly_mean_matches_expectation() {
    let n = 1 << 12;
    let delta = 0.3;
    let full_cfg = ScreeningConfig::with_delta(delta / (n as f64).log2());
    let (mut silly, mut full) = (0u64, 0u64);
    let trials = 2000;
    for seed in 0..trials {
        let crossing = stream(seed, 9).random_range(1..n) as usize;
        let mut o = SimulatedOracle::simulated(standard(n as usize, crossing), stream(seed, 0));
        silly_bayesian_screening_search(
            &mut o,
            0.5,
            0.1,
            &ScreeningConfig::with_delta(delta),
            &mut stream(seed, 1),
        )
        .unwrap();
        silly += o.flips_used();
        let mut o = SimulatedOracle::simulated(standard(n as usize, crossing), stream(seed, 2));
        bayesian_screening_search(&mut o, 0.5, 0.1, &full_cfg).unwrap();
        full += o.flips_used();
    }
    let expected = (1.0 - shortcut_probability(n, delta)) * full as f64;
    let ratio = silly as f64 / expected;
    assert!((ratio - 1.0).abs() < 0.05, "silly/expected = {ratio}");
}

#[test]
fn variant_answers_noiseless_coins() {
    for n in [3usize, 50, 1000, 100_000] {
        let mut o = SimulatedOracle::simulated(noiseless(n, n / 3 + 1), stream(n as u64, 0));
        let r = experiment_variant_search(&mut o, 0.5, 0.1, 3000).unwrap();
        assert_eq!(r.answer, Some(n as u64 / 3 + 1), "n={n}");
    }
}

#[test]
fn variant_beats_its_learner_core_requirement() {
    let c = channel_params::<f64>(0.5, 0.1).unwrap().capacity;
    let core = (1000f64.log2() / c).ceil() as u64;
    let mut o = SimulatedOracle::simulated(standard(1000, 500), stream(0, 0));
    assert!(experiment_variant_search(&mut o, 0.5, 0.1, core - 1).unwrap().exhausted);
    let mut o = SimulatedOracle::simulated(standard(1000, 500), stream(0, 0));
    assert!(!experiment_variant_search(&mut o, 0.5, 0.1, core).unwrap().exhausted);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn variant_accounting(n in 3usize..5000, budget in 1u64..4000, seed in 0u64..1_000_000, lo in 0.0f64..0.45) {
        let crossing = 1 + (seed as usize % (n - 1));
        let inst = step(n, crossing, lo, 1.0 - lo, 0.5, 0.05);
        let mut o = SimulatedOracle::simulated(inst, stream(seed, 0));
        let r = experiment_variant_search(&mut o, 0.5, 0.05, budget).unwrap();
        prop_assert!(r.stage_total() <= budget);
        prop_assert_eq!(r.stage_total(), r.flips_used);
        prop_assert_eq!(r.flips_used, o.flips_used());
        prop_assert!(r.answer.is_some_and(|a| a >= 1 && a < n as u64));
    }

    #[test]
    fn screening_accounting(n in 2usize..3000, seed in 0u64..1_000_000, delta in 0.05f64..0.45) {
        let crossing = 1 + (seed as usize % (n - 1));
        let mut o = SimulatedOracle::simulated(standard(n, crossing), stream(seed, 0));
        let (r, trace) = bayesian_screening_search_traced(&mut o, 0.5, 0.1, &ScreeningConfig::with_delta(delta)).unwrap();
        prop_assert_eq!(r.flips_used, o.flips_used());
        prop_assert_eq!(r.stage_total(), r.flips_used);
        prop_assert!(trace.depth() <= 2);
        if let Some(inner) = &trace.recursion {
            prop_assert!(inner.candidates.len() <= SCAN_LIMIT);
            prop_assert!(inner.recursion.is_none());
        }
    }

    #[test]
    fn capped_screening_never_overspends(cap in 1u64..20_000, seed in 0u64..1000) {
        let mut o = SimulatedOracle::simulated(standard(1000, 400), stream(seed, 0));
        let cfg = ScreeningConfig { budget_cap: Some(cap), ..ScreeningConfig::default() };
        let _ = bayesian_screening_search(&mut o, 0.5, 0.1, &cfg);
        prop_assert!(o.flips_used() <= cap);
    }
}
