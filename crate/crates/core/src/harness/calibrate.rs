//! Budget calibration posed as noisy binary search: each budget on a
//! geometric grid is a coin whose flip runs one fresh trial at that budget,
//! and a screening search looks for where the success rate crosses 0.8 and
//! 0.9.

use super::campaign::{run_trial, Algorithm, AlgorithmSettings};
use super::instances::DistributionSpec;
use crate::error::{Error, Result};
use crate::oracle::{CoinOracle, FnCoins, Oracle};
use crate::screening::{bayesian_screening_search, experiment_variant_search, ScreeningConfig};

/// Which search runs over the grid coins.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetaSearch {
    /// The budgeted variant with [`CalibrationConfig::meta_budget`] trials.
    Variant,
    /// The full screening search at [`CalibrationConfig::meta_delta`].
    /// Far more trials, since its bias estimates must resolve `eps / 6`.
    Screening,
}

#[derive(Clone, Debug)]
pub struct CalibrationConfig {
    pub grid_ratio: f64,
    /// Trials per budget in the doubling pre-scan.
    pub pilot_trials: u64,
    pub start_budget: u64,
    pub max_budget: u64,
    pub meta: MetaSearch,
    /// Trials per meta-search in [`MetaSearch::Variant`] mode.
    pub meta_budget: u64,
    pub meta_delta: f64,
    pub meta_eps: f64,
    /// Success rates the two meta-searches look for.
    pub targets: (f64, f64),
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            grid_ratio: 1.05,
            pilot_trials: 64,
            start_budget: 16,
            max_budget: 1 << 36,
            meta: MetaSearch::Variant,
            meta_budget: 6000,
            meta_delta: 0.15,
            meta_eps: 0.05,
            targets: (0.8, 0.9),
        }
    }
}

/// A pair of grid budgets whose measured success rates are out of order by
/// more than three standard errors.
#[derive(Clone, Debug, PartialEq)]
pub struct NonMonotone {
    pub lower_budget: u64,
    pub lower_rate: f64,
    pub higher_budget: u64,
    pub higher_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calibration {
    /// Budget found for the lower target rate.
    pub lower: u64,
    /// Budget found for the upper target rate.
    pub upper: u64,
    pub grid: Vec<u64>,
    /// Trials and successes observed on each grid budget.
    pub grid_stats: Vec<(u64, u64)>,
    /// Trials run in total, pre-scan included.
    pub trials: u64,
    pub non_monotone: Vec<NonMonotone>,
}

impl Calibration {
    /// Single summary budget: the geometric mean of the two answers.
    pub fn point(&self) -> f64 {
        ((self.lower as f64) * (self.upper as f64)).sqrt()
    }

    /// The lower answer does not exceed the upper one by more than a grid step.
    pub fn is_consistent(&self) -> bool {
        let step = |b: u64| self.grid.iter().position(|&g| g == b).unwrap_or(0);
        step(self.lower) <= step(self.upper) + 1
    }
}

/// `lo, ceil(lo r), ...` up to the first budget at or above `hi`; strictly
/// increasing.
pub fn geometric_grid(lo: u64, hi: u64, ratio: f64) -> Result<Vec<u64>> {
    if lo == 0 || hi < lo || !(ratio > 1.0) {
        return Err(Error::param("grid needs 0 < lo <= hi and ratio > 1"));
    }
    let mut grid = vec![lo];
    let mut b = lo;
    while b < hi {
        b = ((b as f64 * ratio).ceil() as u64).max(b + 1);
        grid.push(b);
    }
    Ok(grid)
}

/// Calibrates `algorithm` on `spec`. Without an explicit grid, a doubling
/// pre-scan brackets the interesting range first.
pub fn calibrate_budget(
    algorithm: Algorithm,
    settings: &AlgorithmSettings,
    spec: &DistributionSpec,
    grid: Option<&[u64]>,
    seed: u64,
    cfg: &CalibrationConfig,
) -> Result<Calibration> {
    let trial = |budget: u64, index: u64| -> Result<bool> {
        Ok(run_trial(algorithm, settings, spec, Some(budget), seed, index)?.success)
    };
    calibrate_with(trial, grid, cfg)
}

/// [`calibrate_budget`] over an arbitrary trial function
/// `(budget, trial index) -> success`.
pub fn calibrate_with<F>(mut trial: F, grid: Option<&[u64]>, cfg: &CalibrationConfig) -> Result<Calibration>
where
    F: FnMut(u64, u64) -> Result<bool>,
{
    let mut next_index = 0u64;
    let grid = match grid {
        Some(g) => {
            if g.is_empty() || g.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::param("budget grid must be nonempty and strictly increasing"));
            }
            g.to_vec()
        }
        None => {
            let (lo, hi) = prescan(&mut trial, &mut next_index, cfg)?;
            geometric_grid(lo, hi, cfg.grid_ratio)?
        }
    };

    let g = grid.len();
    let mut stats = vec![(0u64, 0u64); g];
    let mut answers = [0u64; 2];
    for (slot, target) in [cfg.targets.0, cfg.targets.1].into_iter().enumerate() {
        let interval = {
            let coins = FnCoins::new(g as u64 + 2, |coin| {
                if coin == 1 {
                    return Ok(false);
                }
                if coin == g as u64 + 2 {
                    return Ok(true);
                }
                let k = coin as usize - 2;
                let success = trial(grid[k], next_index)?;
                next_index += 1;
                stats[k].0 += 1;
                stats[k].1 += success as u64;
                Ok(success)
            });
            let mut meta = CoinOracle::new(coins);
            meta_search(&mut meta, target, cfg)?
        };
        if interval as usize > g {
            return Err(Error::Calibration(format!(
                "success rate at the largest budget {} stays below {target}; extend the grid",
                grid[g - 1]
            )));
        }
        answers[slot] = grid[interval as usize - 1];
    }

    let non_monotone = monotonicity_violations(&grid, &stats);
    Ok(Calibration {
        lower: answers[0],
        upper: answers[1],
        grid,
        grid_stats: stats,
        trials: next_index,
        non_monotone,
    })
}

fn meta_search<O: Oracle>(meta: &mut O, target: f64, cfg: &CalibrationConfig) -> Result<u64> {
    let report = match cfg.meta {
        MetaSearch::Variant => experiment_variant_search(meta, target, cfg.meta_eps, cfg.meta_budget)?,
        MetaSearch::Screening => {
            bayesian_screening_search(meta, target, cfg.meta_eps, &ScreeningConfig::with_delta(cfg.meta_delta))?
        }
    };
    report
        .answer
        .ok_or_else(|| Error::Calibration("meta-search returned no interval".into()))
}

/// Doubles the budget until the pilot success rate reaches 0.9. Returns the
/// last budget below rate 0.5 and twice the first budget reaching 0.9.
fn prescan<F>(trial: &mut F, next_index: &mut u64, cfg: &CalibrationConfig) -> Result<(u64, u64)>
where
    F: FnMut(u64, u64) -> Result<bool>,
{
    let mut budget = cfg.start_budget.max(1);
    let mut lo = budget;
    loop {
        let mut wins = 0;
        for _ in 0..cfg.pilot_trials {
            wins += trial(budget, *next_index)? as u64;
            *next_index += 1;
        }
        let rate = wins as f64 / cfg.pilot_trials.max(1) as f64;
        if rate < 0.5 {
            lo = budget;
        }
        if rate >= 0.9 {
            return Ok((lo, budget.saturating_mul(2).max(lo + 1)));
        }
        if budget >= cfg.max_budget {
            return Err(Error::Calibration(format!(
                "success rate still {rate:.3} at budget {budget}; raise the maximum budget"
            )));
        }
        budget = budget.saturating_mul(2).min(cfg.max_budget);
    }
}

fn monotonicity_violations(grid: &[u64], stats: &[(u64, u64)]) -> Vec<NonMonotone> {
    let rate = |(t, s): (u64, u64)| s as f64 / t as f64;
    let var = |(t, s): (u64, u64)| {
        let p = rate((t, s));
        p * (1.0 - p) / t as f64
    };
    let mut out = Vec::new();
    for i in 0..grid.len() {
        for k in i + 1..grid.len() {
            let (a, b) = (stats[i], stats[k]);
            if a.0 < 20 || b.0 < 20 {
                continue;
            }
            let gap = rate(a) - rate(b);
            let noise = 3.0 * (var(a) + var(b)).sqrt().max(1.0 / (a.0.min(b.0) as f64));
            if gap > noise {
                out.push(NonMonotone {
                    lower_budget: grid[i],
                    lower_rate: rate(a),
                    higher_budget: grid[k],
                    higher_rate: rate(b),
                });
            }
        }
    }
    out
}
