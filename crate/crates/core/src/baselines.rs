//! Comparison algorithms run under a fixed flip budget: binary search with
//! repetition, a multiplicative-weights search and a backtracking random walk.
//!
//! The last two are built for a threshold of one half. For other thresholds
//! each flip is passed through a random mask that maps `tau` to one half
//! (see [`HalfMask`]).

use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::oracle::{Oracle, RunReport};
use crate::posterior::PosteriorWeights;

pub const STAGE_SEARCH: &str = "search";
pub const STAGE_VERIFY: &str = "verify";

/// Thins heads (or tails) so a coin of bias `tau` looks like a fair one.
/// A coin of bias `p` then has bias `p / (2 tau)` when `tau > 1/2` and
/// `1 - (1 - p) / (2 (1 - tau))` when `tau < 1/2`.
#[derive(Clone, Copy, Debug)]
pub struct HalfMask {
    tau: f64,
}

impl HalfMask {
    pub fn new(tau: f64) -> Self {
        Self { tau }
    }

    /// Gap around one half after masking a `tau +- eps` pair.
    pub fn eps(&self, eps: f64) -> f64 {
        eps / (2.0 * self.tau.max(1.0 - self.tau))
    }

    /// Masks `heads` successes out of `times` flips.
    pub fn apply<R: Rng + ?Sized>(&self, heads: u64, times: u64, rng: &mut R) -> u64 {
        if self.tau > 0.5 {
            thin(heads, 1.0 / (2.0 * self.tau), rng)
        } else if self.tau < 0.5 {
            times - thin(times - heads, 1.0 / (2.0 * (1.0 - self.tau)), rng)
        } else {
            heads
        }
    }
}

fn thin<R: Rng + ?Sized>(count: u64, keep: f64, rng: &mut R) -> u64 {
    if count == 0 {
        return 0;
    }
    Binomial::new(count, keep.clamp(0.0, 1.0))
        .map(|b| b.sample(rng))
        .unwrap_or(count)
}

/// Probes a binary search over `n` coins makes: `ceil(lg(n - 1))`.
pub(crate) fn levels(n: u64) -> u64 {
    (64 - (n - 1).saturating_sub(1).leading_zeros() as u64).max(1)
}

/// Binary search over coins, flipping each probe `budget / ceil(lg(n - 1))`
/// times and going left when the empirical mean is at least `tau`.
pub fn naive_nbs<O: Oracle + ?Sized>(oracle: &mut O, tau: f64, _eps: f64, budget: u64) -> Result<RunReport> {
    let n = oracle.coins();
    if n < 2 {
        return Err(Error::param(format!("search needs at least two coins, got {n}")));
    }
    let mut report = RunReport::default();
    if n == 2 {
        report.answer = Some(1);
        return Ok(report);
    }
    let depth = levels(n);
    if budget < depth {
        return Err(Error::param(format!(
            "budget {budget} is below one flip for each of {depth} levels"
        )));
    }
    let per_level = budget / depth;
    let start = oracle.flips_used();
    let (mut lo, mut hi) = (1u64, n);
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        let heads = oracle.flip_many(mid, per_level)?;
        if heads as f64 >= tau * per_level as f64 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    report.add_stage(STAGE_SEARCH, oracle.flips_used() - start);
    report.answer = Some(lo);
    Ok(report)
}

/// Settings for [`kk_multiplicative_weights`].
#[derive(Clone, Debug)]
pub struct MultiplicativeWeightsConfig {
    /// Update factors are `1 +- step * eps`.
    pub step: f64,
    /// Share of the budget kept back to test the two candidates.
    pub verify_fraction: f64,
}

impl Default for MultiplicativeWeightsConfig {
    fn default() -> Self {
        Self {
            step: 0.6,
            verify_fraction: 0.2,
        }
    }
}

/// Update factors `(1 + beta, 1 - beta)` used for gap `eps`.
pub fn kk_factors(eps: f64, cfg: &MultiplicativeWeightsConfig) -> (f64, f64) {
    (1.0 + cfg.step * eps, 1.0 - cfg.step * eps)
}

/// Multiplicative-weights search. Every round queries the coin nearest the
/// weighted median and moves weight by `1 +- 3 eps / 5` toward the side the
/// flip points to. The interval queried at the halfway round and the last
/// interval queried are then tested, and whichever passes is returned.
pub fn kk_multiplicative_weights<O: Oracle + ?Sized, R: Rng + ?Sized>(
    oracle: &mut O,
    tau: f64,
    eps: f64,
    budget: u64,
    cfg: &MultiplicativeWeightsConfig,
    rng: &mut R,
) -> Result<RunReport> {
    let n = oracle.coins();
    if n < 2 {
        return Err(Error::param(format!("search needs at least two coins, got {n}")));
    }
    if !(0.0..1.0).contains(&cfg.verify_fraction) || cfg.step <= 0.0 {
        return Err(Error::param(
            "verify fraction must lie in [0, 1) and step must be positive",
        ));
    }
    let mut report = RunReport::default();
    if n == 2 {
        report.answer = Some(1);
        return Ok(report);
    }
    let mask = HalfMask::new(tau);
    let (up, down) = kk_factors(mask.eps(eps), cfg);
    let reserve = (budget as f64 * cfg.verify_fraction).round() as u64;
    let rounds = budget - reserve;
    let start = oracle.flips_used();

    let mut w = PosteriorWeights::<f64>::new_uniform(n - 1)?;
    let mut halfway = None;
    let mut last = None;
    for t in 0..rounds {
        let at = w.locate(0.5);
        let coin = at.coin(0.5);
        let heads = mask.apply(oracle.flip(coin)? as u64, 1, rng) == 1;
        if t == rounds / 2 {
            halfway = Some(at.interval);
        }
        last = Some(at.interval);
        // Heads says the crossing is left of `coin`.
        let (left, right) = if heads { (up, down) } else { (down, up) };
        if coin >= 2 {
            let j = coin - 1;
            let c = w.weight(j)? * left;
            w.rescale(j, left, right, c);
        } else {
            let c = w.weight(1)? * right;
            w.rescale(1, left, right, c);
        }
    }
    report.add_stage(STAGE_SEARCH, oracle.flips_used() - start);

    let fallback = w.interval_at_quantile(0.5);
    let mut candidates = vec![halfway.unwrap_or(fallback)];
    if let Some(l) = last {
        if l != candidates[0] {
            candidates.push(l);
        }
    }
    let verify_start = oracle.flips_used();
    // Two estimates per candidate.
    let per_estimate = reserve / (2 * candidates.len() as u64);
    let mut best = (f64::NEG_INFINITY, candidates[0]);
    let mut answer = None;
    if per_estimate > 0 {
        for &j in &candidates {
            let lo = oracle.flip_many(j, per_estimate)? as f64 / per_estimate as f64;
            let hi = oracle.flip_many(j + 1, per_estimate)? as f64 / per_estimate as f64;
            if lo <= tau && tau <= hi {
                answer = Some(j);
                break;
            }
            let score = (tau - lo).min(hi - tau);
            if score > best.0 {
                best = (score, j);
            }
        }
    }
    report.add_stage(STAGE_VERIFY, oracle.flips_used() - verify_start);
    report.flagged = answer.is_none();
    report.answer = Some(answer.unwrap_or(best.1));
    Ok(report)
}

/// Settings for [`kk_backtracking`].
#[derive(Clone, Debug)]
pub struct BacktrackingConfig {
    /// Flips per test are `votes * ln(1 / delta) / eps^2`.
    pub votes: f64,
    /// Walk length is `steps * lg n`.
    pub steps: f64,
    pub delta: f64,
}

impl Default for BacktrackingConfig {
    fn default() -> Self {
        Self {
            votes: 8.0,
            steps: 29.0,
            delta: 0.15,
        }
    }
}

impl BacktrackingConfig {
    /// Flips per test and number of walk steps for `n` coins and gap `eps`
    /// around one half.
    pub fn schedule(&self, n: u64, eps: f64) -> (u64, u64) {
        let per_test = (self.votes * (1.0 / self.delta).ln() / (eps * eps)).ceil() as u64;
        let steps = (self.steps * (n as f64).log2()).ceil() as u64;
        (per_test.max(1), steps.max(1))
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    lo: u64,
    hi: u64,
}

/// Backtracking random walk over the tree of coin ranges. At each node the
/// end coins are tested; if they contradict the node (left end above one
/// half or right end below it) the walk moves to the parent, otherwise it
/// descends toward the middle coin's verdict, or counts a visit at a leaf.
/// The most visited leaf is returned. A run that would go over `budget`
/// stops there and reports no answer.
pub fn kk_backtracking<O: Oracle + ?Sized, R: Rng + ?Sized>(
    oracle: &mut O,
    tau: f64,
    eps: f64,
    budget: u64,
    cfg: &BacktrackingConfig,
    rng: &mut R,
) -> Result<RunReport> {
    let n = oracle.coins();
    if n < 2 {
        return Err(Error::param(format!("search needs at least two coins, got {n}")));
    }
    if !(cfg.delta > 0.0 && cfg.delta < 1.0) || cfg.votes <= 0.0 || cfg.steps <= 0.0 {
        return Err(Error::param(
            "backtracking needs delta in (0, 1) and positive vote and step constants",
        ));
    }
    let mut report = RunReport::default();
    if n == 2 {
        report.answer = Some(1);
        return Ok(report);
    }
    let mask = HalfMask::new(tau);
    let (per_test, steps) = cfg.schedule(n, mask.eps(eps));
    let start = oracle.flips_used();
    let mut spent = 0u64;
    let mut test = |oracle: &mut O, coin: u64, rng: &mut R| -> Result<Option<bool>> {
        if spent + per_test > budget {
            // The overrunning test is cut off at the budget.
            oracle.flip_many(coin, budget - spent)?;
            spent = budget;
            return Ok(None);
        }
        spent += per_test;
        let heads = mask.apply(oracle.flip_many(coin, per_test)?, per_test, rng);
        Ok(Some(2 * heads >= per_test))
    };

    let mut stack = vec![Node { lo: 1, hi: n }];
    let mut visits = std::collections::HashMap::<u64, u64>::new();
    let mut failed = false;
    'walk: for _ in 0..steps {
        let node = *stack.last().expect("root stays on the stack");
        if stack.len() > 1 {
            let Some(left_high) = test(oracle, node.lo, rng)? else {
                failed = true;
                break 'walk;
            };
            let Some(right_high) = test(oracle, node.hi, rng)? else {
                failed = true;
                break 'walk;
            };
            if left_high || !right_high {
                stack.pop();
                continue;
            }
        }
        if node.hi - node.lo == 1 {
            *visits.entry(node.lo).or_insert(0) += 1;
            continue;
        }
        let mid = node.lo + (node.hi - node.lo) / 2;
        let Some(mid_high) = test(oracle, mid, rng)? else {
            failed = true;
            break 'walk;
        };
        stack.push(if mid_high {
            Node { lo: node.lo, hi: mid }
        } else {
            Node { lo: mid, hi: node.hi }
        });
    }

    let used = oracle.flips_used() - start;
    report.add_stage(STAGE_SEARCH, used);
    if failed {
        report.exhausted = true;
        return Ok(report);
    }
    let best = visits
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&leaf, _)| leaf);
    match best {
        Some(leaf) => report.answer = Some(leaf),
        None => {
            let node = *stack.last().expect("root stays on the stack");
            report.answer = Some(node.lo);
            report.flagged = true;
        }
    }
    Ok(report)
}
