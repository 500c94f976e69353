//! Bayesian screening search: run the learner at a slightly smaller gap,
//! keep an evenly spaced sample of the intervals it queried, then verify the
//! few survivors with bias estimates (recursing once when too many survive).

use rand::Rng;

use crate::bac::{channel_params, ChannelParams};
use crate::baselines::{levels, naive_nbs};
use crate::error::{Error, Result};
use crate::learner::{bayes_learn_iterations, bayes_learn_with};
use crate::oracle::{CappedOracle, Oracle, RunReport, SubsetOracle};

pub const STAGE_REDUCTION: &str = "reduction";
pub const STAGE_RECURSION: &str = "recursion";
pub const STAGE_NARROWING: &str = "narrowing";
pub const STAGE_ESTIMATION: &str = "estimation";

/// Largest candidate list verified directly instead of by recursion.
pub const SCAN_LIMIT: usize = 7;

#[derive(Clone, Debug)]
pub struct ScreeningConfig {
    pub delta: f64,
    /// Subsampling rate of the top-level reduction; `1 / (3 lg n)` when unset.
    pub gamma_reduction: Option<f64>,
    /// Subsampling rate inside the recursive call.
    pub gamma_recursive: f64,
    pub c1: f64,
    pub c2: f64,
    /// Multiplier on the Hoeffding flip count of every bias estimate.
    pub estimator_constant: f64,
    /// Hard cap on flips for one search.
    pub budget_cap: Option<u64>,
}

impl Default for ScreeningConfig {
    fn default() -> Self {
        Self {
            delta: 0.1,
            gamma_reduction: None,
            gamma_recursive: 1.0 / 7.0,
            c1: 2.0,
            c2: 2.0,
            estimator_constant: 1.0,
            budget_cap: None,
        }
    }
}

impl ScreeningConfig {
    pub fn with_delta(delta: f64) -> Self {
        Self {
            delta,
            ..Self::default()
        }
    }

    pub fn gamma_reduction_for(&self, n: u64) -> f64 {
        self.gamma_reduction.unwrap_or_else(|| 1.0 / (3.0 * (n as f64).log2()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::param(format!("delta must lie in (0, 1/2), got {}", self.delta)));
        }
        let gamma_ok = |g: f64| g > 0.0 && g <= 1.0 / 3.0 + 1e-12;
        if !self.gamma_reduction.is_none_or(gamma_ok) || !gamma_ok(self.gamma_recursive) {
            return Err(Error::param("gamma values must lie in (0, 1/3]"));
        }
        if self.c1 < 0.0 || self.c2 < 0.0 || !(self.estimator_constant > 0.0) {
            return Err(Error::param(
                "learner constants must be nonnegative and the estimator constant positive",
            ));
        }
        Ok(())
    }
}

/// The gap the learner runs at: `eps * max(1 - cbrt(log_n(1/delta)), 2/3)`.
pub fn shrunken_eps(n: u64, eps: f64, delta: f64) -> f64 {
    let log_n = (1.0 / delta).ln() / (n as f64).ln();
    eps * (1.0 - log_n.cbrt()).max(2.0 / 3.0)
}

/// Every `ceil(gamma |L|)`-th entry of `intervals`, duplicates removed with
/// first occurrences kept in order.
pub fn subsample(intervals: &[u64], gamma: f64) -> Vec<u64> {
    if intervals.is_empty() {
        return Vec::new();
    }
    let stride = ((gamma * intervals.len() as f64).ceil() as usize).max(1);
    let mut out: Vec<u64> = Vec::new();
    for i in 1..=intervals.len() / stride {
        let x = intervals[stride * i - 1];
        if !out.contains(&x) {
            out.push(x);
        }
    }
    out
}

/// Runs the learner for the round count of [`bayes_learn_iterations`] and
/// returns [`subsample`] of the intervals it chose.
pub fn reduction_to_gamma<O: Oracle + ?Sized>(
    oracle: &mut O,
    tau: f64,
    eps: f64,
    delta: f64,
    gamma: f64,
    cfg: &ScreeningConfig,
) -> Result<Vec<u64>> {
    let params = channel_params(tau, eps)?;
    reduce(oracle, &params, delta, gamma, cfg)
}

fn reduce<O: Oracle + ?Sized>(
    oracle: &mut O,
    params: &ChannelParams<f64>,
    delta: f64,
    gamma: f64,
    cfg: &ScreeningConfig,
) -> Result<Vec<u64>> {
    let n = oracle.coins();
    let rounds = bayes_learn_iterations(n, delta, gamma.min(1.0 / 7.0), params.capacity, cfg.c1, cfg.c2)?;
    let transcript = bayes_learn_with(oracle, params, rounds)?;
    Ok(subsample(&transcript.intervals, gamma))
}

/// Flips needed for a Hoeffding estimate within `accuracy` with failure
/// probability `delta`: `ceil(ln(2/delta) / (2 accuracy^2))`.
pub fn hoeffding_flips(accuracy: f64, delta: f64) -> u64 {
    ((2.0 / delta).ln() / (2.0 * accuracy * accuracy)).ceil() as u64
}

/// Empirical heads rate of `coin` over [`hoeffding_flips`] flips.
pub fn estimate_bias<O: Oracle + ?Sized>(oracle: &mut O, coin: u64, accuracy: f64, delta: f64) -> Result<f64> {
    if !(accuracy > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(Error::param("accuracy must be positive and delta in (0, 1)"));
    }
    sample_mean(oracle, coin, hoeffding_flips(accuracy, delta))
}

fn sample_mean<O: Oracle + ?Sized>(oracle: &mut O, coin: u64, flips: u64) -> Result<f64> {
    let heads = oracle.flip_many(coin, flips)?;
    Ok(if flips == 0 { 0.0 } else { heads as f64 / flips as f64 })
}

/// One bias estimate made during a search, in the coordinates of the oracle
/// it was made on.
#[derive(Clone, Debug, PartialEq)]
pub struct BiasEstimate {
    pub coin: u64,
    pub estimate: f64,
    pub accuracy: f64,
}

/// What a screening search did at one level.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScreeningTrace {
    pub eps_prime: f64,
    /// Sorted candidate intervals after the reduction.
    pub candidates: Vec<u64>,
    /// Coins of the recursive call (the padded candidate list), if any.
    pub padded: Vec<u64>,
    pub recursion: Option<Box<ScreeningTrace>>,
    /// Interval returned by the recursive call, in its own coordinates.
    pub recursion_answer: Option<u64>,
    pub estimates: Vec<BiasEstimate>,
}

impl ScreeningTrace {
    /// Levels of search, counting this one.
    pub fn depth(&self) -> usize {
        1 + self.recursion.as_ref().map_or(0, |r| r.depth())
    }
}

/// Screening search with the failure probability and constants of `cfg`.
pub fn bayesian_screening_search<O: Oracle + ?Sized>(
    oracle: &mut O,
    tau: f64,
    eps: f64,
    cfg: &ScreeningConfig,
) -> Result<RunReport> {
    bayesian_screening_search_traced(oracle, tau, eps, cfg).map(|(report, _)| report)
}

/// [`bayesian_screening_search`] returning also the candidate lists and
/// estimates it used.
pub fn bayesian_screening_search_traced<O: Oracle + ?Sized>(
    oracle: &mut O,
    tau: f64,
    eps: f64,
    cfg: &ScreeningConfig,
) -> Result<(RunReport, ScreeningTrace)> {
    cfg.validate()?;
    channel_params(tau, eps)?;
    let n = oracle.coins();
    if n < 2 {
        return Err(Error::param(format!("search needs at least two coins, got {n}")));
    }
    let mut report = RunReport::default();
    let mut trace = ScreeningTrace::default();
    let gamma = cfg.gamma_reduction_for(n);
    let answer = match cfg.budget_cap {
        Some(cap) => {
            let mut capped = CappedOracle::new(oracle, cap);
            screen(&mut capped, tau, eps, cfg.delta, gamma, cfg, &mut report, &mut trace)?
        }
        None => screen(oracle, tau, eps, cfg.delta, gamma, cfg, &mut report, &mut trace)?,
    };
    report.answer = Some(answer);
    Ok((report, trace))
}

#[allow(clippy::too_many_arguments)]
fn screen<O: Oracle + ?Sized>(
    oracle: &mut O,
    tau: f64,
    eps: f64,
    delta: f64,
    gamma: f64,
    cfg: &ScreeningConfig,
    report: &mut RunReport,
    trace: &mut ScreeningTrace,
) -> Result<u64> {
    let n = oracle.coins();
    if n == 2 {
        return Ok(1);
    }
    let eps_prime = shrunken_eps(n, eps, delta);
    trace.eps_prime = eps_prime;
    let params = channel_params(tau, eps_prime)?;
    let accuracy = (eps - eps_prime) / 2.0;
    let threshold = tau - eps + accuracy;

    let start = oracle.flips_used();
    let mut candidates = reduce(oracle, &params, delta / 3.0, gamma, cfg)?;
    candidates.sort_unstable();
    trace.candidates = candidates.clone();
    report.add_stage(STAGE_REDUCTION, oracle.flips_used() - start);

    let estimate = |oracle: &mut O, coin: u64, delta: f64, report: &mut RunReport, trace: &mut ScreeningTrace| {
        let start = oracle.flips_used();
        let flips = (cfg.estimator_constant * hoeffding_flips(accuracy, delta) as f64).ceil() as u64;
        let p = sample_mean(oracle, coin, flips);
        report.add_stage(STAGE_ESTIMATION, oracle.flips_used() - start);
        let p = p?;
        trace.estimates.push(BiasEstimate {
            coin,
            estimate: p,
            accuracy,
        });
        Ok::<f64, Error>(p)
    };

    if candidates.len() > SCAN_LIMIT {
        let mut padded = Vec::with_capacity(candidates.len() + 2);
        padded.push(1);
        padded.extend(candidates.iter().copied());
        padded.push(n);
        padded.dedup();
        trace.padded = padded.clone();

        let start = oracle.flips_used();
        let mut inner_report = RunReport::default();
        let mut inner_trace = ScreeningTrace::default();
        let inner = {
            let mut parent: &mut O = &mut *oracle;
            let mut sub = SubsetOracle::new(&mut parent as &mut dyn Oracle, padded.clone());
            screen(
                &mut sub,
                tau,
                eps_prime,
                delta / 3.0,
                cfg.gamma_recursive,
                cfg,
                &mut inner_report,
                &mut inner_trace,
            )
        };
        report.add_stage(STAGE_RECURSION, oracle.flips_used() - start);
        trace.recursion = Some(Box::new(inner_trace));
        let i = inner? as usize;
        trace.recursion_answer = Some(i as u64);
        let (left, right) = (padded[i - 1], padded[i]);
        let p = estimate(oracle, left + 1, delta / 3.0, report, trace)?;
        return Ok(if p > threshold { left } else { right - 1 });
    }

    for &x in &candidates {
        if estimate(oracle, x + 1, delta / 18.0, report, trace)? > threshold {
            return Ok(x);
        }
    }
    report.flagged = true;
    candidates
        .last()
        .copied()
        .ok_or_else(|| Error::Numeric("reduction produced no candidates".into()))
}

/// Result of [`silly_bayesian_screening_search`].
#[derive(Clone, Debug)]
pub struct SillyRun {
    pub report: RunReport,
    /// The zero-flip branch was taken.
    pub shortcut: bool,
}

/// Probability of the zero-flip branch: `delta - delta / lg n`.
pub fn shortcut_probability(n: u64, delta: f64) -> f64 {
    (delta - delta / (n as f64).log2()).max(0.0)
}

/// With probability `delta - delta / lg n` answers a uniformly random
/// interval without flipping; otherwise runs the full search at failure
/// probability `delta / lg n`.
pub fn silly_bayesian_screening_search<O: Oracle + ?Sized, R: Rng + ?Sized>(
    oracle: &mut O,
    tau: f64,
    eps: f64,
    cfg: &ScreeningConfig,
    rng: &mut R,
) -> Result<SillyRun> {
    let n = oracle.coins();
    if n < 2 {
        return Err(Error::param(format!("search needs at least two coins, got {n}")));
    }
    let delta = cfg.delta;
    if rng.random::<f64>() < shortcut_probability(n, delta) {
        let report = RunReport {
            answer: Some(rng.random_range(1..n)),
            ..RunReport::default()
        };
        return Ok(SillyRun { report, shortcut: true });
    }
    let inner = ScreeningConfig {
        delta: delta / (n as f64).log2(),
        ..cfg.clone()
    };
    let report = bayesian_screening_search(oracle, tau, eps, &inner)?;
    Ok(SillyRun {
        report,
        shortcut: false,
    })
}

/// Stage constants of [`experiment_variant_search`].
#[derive(Clone, Debug, PartialEq)]
pub struct VariantConfig {
    /// Narrowing core, in units of `lg lg n / C`.
    pub narrowing_core: f64,
    /// Estimation core, in units of `1 / C`.
    pub estimation_core: f64,
    /// Share of the narrowing allowance given to the second learner pass.
    pub inner_fraction: f64,
}

impl Default for VariantConfig {
    fn default() -> Self {
        Self {
            narrowing_core: 4.0,
            estimation_core: 0.5,
            inner_fraction: 0.5,
        }
    }
}

/// Per-stage flip allowances of [`experiment_variant_search`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct VariantBudget {
    pub reduction: u64,
    pub narrowing: u64,
    pub estimation: u64,
}

impl VariantBudget {
    /// Cores `lg n / C`, `lg lg n / C` and `1 / C` (scaled by the config),
    /// plus an even split of whatever is left. When the budget cannot cover
    /// all three cores the reduction core is served first and the rest is
    /// shared in proportion.
    pub fn split(n: u64, capacity: f64, budget: u64, cfg: &VariantConfig) -> Self {
        let lg = (n as f64).log2();
        let core1 = (lg / capacity).ceil() as u64;
        let core2 = (cfg.narrowing_core * lg.log2().max(0.0) / capacity).ceil() as u64;
        let core3 = (cfg.estimation_core / capacity).ceil() as u64;
        if budget <= core1 {
            return Self {
                reduction: budget,
                narrowing: 0,
                estimation: 0,
            };
        }
        let cores = core1 + core2 + core3;
        if budget < cores {
            let rest = budget - core1;
            let narrowing = rest * core2 / (core2 + core3).max(1);
            return Self {
                reduction: core1,
                narrowing,
                estimation: rest - narrowing,
            };
        }
        let extra = budget - cores;
        Self {
            reduction: core1 + extra / 3,
            narrowing: core2 + extra / 3,
            estimation: core3 + extra - 2 * (extra / 3),
        }
    }

    pub fn total(&self) -> u64 {
        self.reduction + self.narrowing + self.estimation
    }
}

/// The budgeted screening variant used for benchmarking. The learner
/// updates with `eps` itself and subsamples at `gamma = 1 / ln^2 n`; a
/// second learner pass over the survivors and a repetition binary search
/// pick two finalists; one bias estimate decides between them. Never uses
/// more than `budget` flips.
pub fn experiment_variant_search<O: Oracle + ?Sized>(
    oracle: &mut O,
    tau: f64,
    eps: f64,
    budget: u64,
) -> Result<RunReport> {
    experiment_variant_search_with(oracle, tau, eps, budget, &VariantConfig::default())
}

/// [`experiment_variant_search`] with explicit stage constants.
pub fn experiment_variant_search_with<O: Oracle + ?Sized>(
    oracle: &mut O,
    tau: f64,
    eps: f64,
    budget: u64,
    cfg: &VariantConfig,
) -> Result<RunReport> {
    let n = oracle.coins();
    if n < 2 {
        return Err(Error::param(format!("search needs at least two coins, got {n}")));
    }
    if budget == 0 {
        return Err(Error::param("budget must be at least one flip"));
    }
    let params = channel_params(tau, eps)?;
    let mut report = RunReport::default();
    if n == 2 {
        report.answer = Some(1);
        return Ok(report);
    }
    let plan = VariantBudget::split(n, params.capacity, budget, cfg);
    let lg = (n as f64).log2();
    let core1 = (lg / params.capacity).ceil() as u64;
    let gamma = (1.0 / (n as f64).ln().powi(2)).min(1.0);

    let start = oracle.flips_used();
    let transcript = bayes_learn_with(
        &mut CappedOracle::new(&mut *oracle, plan.reduction),
        &params,
        plan.reduction,
    )?;
    report.add_stage(STAGE_REDUCTION, oracle.flips_used() - start);
    if plan.reduction < core1 {
        report.exhausted = true;
        report.answer = Some(transcript.final_posterior.interval_at_quantile(params.q));
        return Ok(report);
    }
    let mut candidates = subsample(&transcript.intervals, gamma);
    candidates.sort_unstable();

    // Narrow the survivors down to a bracketing pair of coins.
    let start = oracle.flips_used();
    let (a, b) = {
        let mut stage = CappedOracle::new(&mut *oracle, plan.narrowing);
        let mut ends = vec![1, n];
        if candidates.len() > SCAN_LIMIT {
            let mut padded = vec![1];
            padded.extend(candidates.iter().copied());
            padded.push(n);
            padded.dedup();
            let rounds = (plan.narrowing as f64 * cfg.inner_fraction) as u64;
            let mut sub = SubsetOracle::new(&mut stage, padded.clone());
            let inner = bayes_learn_with(&mut sub, &params, rounds)?;
            for r in subsample(&inner.intervals, 1.0 / 7.0) {
                let r = r as usize;
                ends.extend([padded[r - 1], padded[r]]);
            }
        } else {
            for &r in &candidates {
                ends.extend([r, r + 1]);
            }
        }
        ends.sort_unstable();
        ends.dedup();
        let left = stage.remaining().unwrap_or(0);
        let depth = levels(ends.len() as u64);
        let i = if ends.len() == 2 {
            1
        } else if left >= depth {
            let mut sub = SubsetOracle::new(&mut stage, ends.clone());
            naive_nbs(&mut sub, tau, eps, left)?.answer.unwrap_or(1)
        } else {
            report.flagged = true;
            1
        } as usize;
        (ends[i - 1], ends[i])
    };
    report.add_stage(STAGE_NARROWING, oracle.flips_used() - start);

    if b == a + 1 {
        report.answer = Some(a);
        return Ok(report);
    }
    let spent = report.stage_total();
    let left = budget - spent;
    if left == 0 {
        report.flagged = true;
        report.answer = Some(a);
        return Ok(report);
    }
    let start = oracle.flips_used();
    let p = sample_mean(oracle, a + 1, left)?;
    report.add_stage(STAGE_ESTIMATION, oracle.flips_used() - start);
    report.answer = Some(if p >= tau { a } else { b - 1 });
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{ProblemInstance, SimulatedOracle};
    use crate::rng::stream;

    fn standard(n: usize, crossing: usize) -> ProblemInstance {
        let p = (1..=n).map(|i| if i <= crossing { 0.4 } else { 0.6 }).collect();
        ProblemInstance::new(p, 0.5, 0.1).unwrap()
    }

    #[test]
    fn subsample_examples() {
        let l: Vec<u64> = (1..=10).collect();
        assert_eq!(subsample(&l, 0.5), vec![5, 10]);
        assert_eq!(subsample(&[3, 3, 3, 5, 5, 5, 5, 5, 5, 5], 0.3), vec![3, 5]);
        assert!(subsample(&[], 0.3).is_empty());
        let long: Vec<u64> = (1..=1000).collect();
        assert!(subsample(&long, 1.0 / 7.0).len() <= 7);
    }

    #[test]
    fn hoeffding_count() {
        assert_eq!(hoeffding_flips(0.05, 0.05), 738);
        let mut o = SimulatedOracle::simulated(ProblemInstance::new(vec![0.0, 1.0], 0.5, 0.1).unwrap(), stream(0, 0));
        assert_eq!(estimate_bias(&mut o, 2, 0.05, 0.05).unwrap(), 1.0);
        assert_eq!(o.flips_used(), 738);
        assert!(estimate_bias(&mut o, 2, 0.0, 0.05).is_err());
    }

    #[test]
    fn shrunken_gap() {
        // log_n(1/delta) large: the floor 2/3 applies.
        assert!((shrunken_eps(16, 0.1, 0.1) - 0.1 * 2.0 / 3.0).abs() < 1e-15);
        assert!((shrunken_eps(1 << 40, 0.1, 0.1) - 0.1 * 2.0 / 3.0).abs() < 1e-15);
        let expected = 0.1 * (1.0 - (1.0f64 / 62.0).cbrt());
        assert!((shrunken_eps(1 << 62, 0.1, 0.5) - expected).abs() < 1e-12);
        assert!(expected > 0.1 * 2.0 / 3.0);
    }

    #[test]
    fn two_coins_need_no_flips() {
        let mut o = SimulatedOracle::simulated(standard(2, 1), stream(0, 0));
        let r = bayesian_screening_search(&mut o, 0.5, 0.1, &ScreeningConfig::default()).unwrap();
        assert_eq!(r.answer, Some(1));
        assert_eq!(o.flips_used(), 0);
    }

    #[test]
    fn search_accounts_every_flip() {
        let mut o = SimulatedOracle::simulated(standard(300, 77), stream(1, 0));
        let (r, trace) = bayesian_screening_search_traced(&mut o, 0.5, 0.1, &ScreeningConfig::default()).unwrap();
        assert_eq!(r.flips_used, o.flips_used());
        assert_eq!(r.stage_total(), r.flips_used);
        assert!(trace.depth() <= 2);
        if let Some(inner) = &trace.recursion {
            assert!(inner.candidates.len() <= SCAN_LIMIT);
            assert!(inner.recursion.is_none());
        }
    }

    #[test]
    fn search_respects_cap() {
        let mut o = SimulatedOracle::simulated(standard(300, 77), stream(1, 0));
        let cfg = ScreeningConfig {
            budget_cap: Some(100),
            ..ScreeningConfig::default()
        };
        let err = bayesian_screening_search(&mut o, 0.5, 0.1, &cfg).unwrap_err();
        assert!(err.is_budget_exhausted());
        assert_eq!(o.flips_used(), 100);
    }

    #[test]
    fn shortcut_rates() {
        assert_eq!(shortcut_probability(2, 0.3), 0.0);
        assert!((shortcut_probability(1 << 16, 0.3) - 0.28125).abs() < 1e-15);
    }

    #[test]
    fn variant_budget_split() {
        let c: f64 = channel_params(0.5, 0.1).unwrap().capacity;
        let n = 1u64 << 16;
        let core1 = (16.0 / c).ceil() as u64;
        let core2 = (4.0 * 4.0 / c).ceil() as u64;
        let core3 = (0.5 / c).ceil() as u64;
        let plan = VariantBudget::split(n, c, core1 + core2 + core3 + 30, &VariantConfig::default());
        assert_eq!(plan.reduction, core1 + 10);
        assert_eq!(plan.narrowing, core2 + 10);
        assert_eq!(plan.estimation, core3 + 10);
        let tight = VariantBudget::split(n, c, core1 + 5, &VariantConfig::default());
        assert_eq!(tight.reduction, core1);
        assert_eq!(tight.total(), core1 + 5);
        assert_eq!(VariantBudget::split(n, c, 10, &VariantConfig::default()).reduction, 10);
    }

    #[test]
    fn variant_stays_within_budget() {
        let core1 = (1000f64.log2() / channel_params(0.5, 0.1).unwrap().capacity).ceil() as u64;
        for (k, budget) in [50u64, core1 - 1, core1, 700, 1500, 4000].into_iter().enumerate() {
            let mut o = SimulatedOracle::simulated(standard(1000, 400), stream(2, k as u64));
            let r = experiment_variant_search(&mut o, 0.5, 0.1, budget).unwrap();
            assert!(r.flips_used <= budget);
            assert_eq!(r.flips_used, o.flips_used());
            assert_eq!(r.exhausted, budget < core1);
            assert!(r.answer.is_some());
        }
    }
}
