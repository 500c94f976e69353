//! Coin queries and flip accounting.
//!
//! Algorithms talk to an [`Oracle`]. [`CoinOracle`] wraps a [`CoinBackend`]
//! (a simulated instance, an external command, or an arbitrary closure such
//! as a full algorithm trial) and counts every flip against an optional cap.
//! [`SubsetOracle`] re-indexes a parent oracle so a search can recurse on a
//! subsequence of coins while all flips stay on the parent's counter, and
//! [`CappedOracle`] gives a stage its own flip allowance.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::Serialize;

use crate::error::{Error, Result};

/// A MonotonicNBS input: nondecreasing coin probabilities plus `(tau, eps)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProblemInstance {
    pub tau: f64,
    pub eps: f64,
    p: Vec<f64>,
}

impl ProblemInstance {
    pub fn new(p: Vec<f64>, tau: f64, eps: f64) -> Result<Self> {
        if p.len() < 2 {
            return Err(Error::param("an instance needs at least two coins"));
        }
        if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
            return Err(Error::param("coin probabilities must lie in [0, 1]"));
        }
        if p.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::param("coin probabilities must be nondecreasing"));
        }
        Ok(Self { tau, eps, p })
    }

    pub fn n(&self) -> u64 {
        self.p.len() as u64
    }

    /// `p_i` for coin `1..=n`.
    pub fn p(&self, coin: u64) -> Result<f64> {
        if coin == 0 || coin > self.n() {
            return Err(Error::Index {
                index: coin,
                max: self.n(),
            });
        }
        Ok(self.p[coin as usize - 1])
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    /// Whether `[p_i, p_{i+1}]` meets `(tau - eps_check, tau + eps_check)`.
    pub fn is_good(&self, interval: u64, eps_check: f64) -> Result<bool> {
        if interval == 0 || interval >= self.n() {
            return Err(Error::Index {
                index: interval,
                max: self.n() - 1,
            });
        }
        let lo = self.p[interval as usize - 1];
        let hi = self.p[interval as usize];
        Ok(lo < self.tau + eps_check && hi > self.tau - eps_check)
    }

    pub fn good_intervals(&self, eps_check: f64) -> Vec<u64> {
        (1..self.n())
            .filter(|&i| self.is_good(i, eps_check).unwrap_or(false))
            .collect()
    }
}

/// Query interface every search runs against. Coins are indexed `1..=coins()`.
pub trait Oracle {
    fn coins(&self) -> u64;

    fn flip(&mut self, coin: u64) -> Result<bool>;

    /// Flips `coin` `times` times and returns the number of heads.
    fn flip_many(&mut self, coin: u64, times: u64) -> Result<u64> {
        let mut heads = 0;
        for _ in 0..times {
            heads += self.flip(coin)? as u64;
        }
        Ok(heads)
    }

    fn flips_used(&self) -> u64;

    /// Flips still allowed, if the oracle is capped.
    fn remaining(&self) -> Option<u64> {
        None
    }
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn coins(&self) -> u64 {
        (**self).coins()
    }
    fn flip(&mut self, coin: u64) -> Result<bool> {
        (**self).flip(coin)
    }
    fn flip_many(&mut self, coin: u64, times: u64) -> Result<u64> {
        (**self).flip_many(coin, times)
    }
    fn flips_used(&self) -> u64 {
        (**self).flips_used()
    }
    fn remaining(&self) -> Option<u64> {
        (**self).remaining()
    }
}

/// Raw source of coin flips, without accounting.
pub trait CoinBackend {
    fn coins(&self) -> u64;

    fn draw(&mut self, coin: u64) -> Result<bool>;

    fn draw_many(&mut self, coin: u64, times: u64) -> Result<u64> {
        let mut heads = 0;
        for _ in 0..times {
            heads += self.draw(coin)? as u64;
        }
        Ok(heads)
    }
}

/// Accounting wrapper: counts flips and enforces an optional cap.
#[derive(Debug)]
pub struct CoinOracle<B> {
    backend: B,
    flips_used: u64,
    budget_cap: Option<u64>,
}

impl<B: CoinBackend> CoinOracle<B> {
    pub fn new(backend: B) -> Self {
        Self {
            backend,
            flips_used: 0,
            budget_cap: None,
        }
    }

    pub fn with_cap(backend: B, cap: u64) -> Self {
        Self {
            backend,
            flips_used: 0,
            budget_cap: Some(cap),
        }
    }

    pub fn budget_cap(&self) -> Option<u64> {
        self.budget_cap
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn into_backend(self) -> B {
        self.backend
    }

    fn check_coin(&self, coin: u64) -> Result<()> {
        let n = self.backend.coins();
        if coin == 0 || coin > n {
            return Err(Error::Index { index: coin, max: n });
        }
        Ok(())
    }
}

impl<B: CoinBackend> Oracle for CoinOracle<B> {
    fn coins(&self) -> u64 {
        self.backend.coins()
    }

    fn flip(&mut self, coin: u64) -> Result<bool> {
        self.check_coin(coin)?;
        if let Some(cap) = self.budget_cap {
            if self.flips_used >= cap {
                return Err(Error::BudgetExhausted { cap });
            }
        }
        let y = self.backend.draw(coin)?;
        self.flips_used += 1;
        Ok(y)
    }

    /// Flips that fit under the cap are performed and counted even when the
    /// request as a whole exceeds it.
    fn flip_many(&mut self, coin: u64, times: u64) -> Result<u64> {
        self.check_coin(coin)?;
        let allowed = match self.budget_cap {
            Some(cap) => times.min(cap.saturating_sub(self.flips_used)),
            None => times,
        };
        let heads = self.backend.draw_many(coin, allowed)?;
        self.flips_used += allowed;
        match self.budget_cap {
            Some(cap) if allowed < times => Err(Error::BudgetExhausted { cap }),
            _ => Ok(heads),
        }
    }

    fn flips_used(&self) -> u64 {
        self.flips_used
    }

    fn remaining(&self) -> Option<u64> {
        self.budget_cap.map(|cap| cap.saturating_sub(self.flips_used))
    }
}

/// Coins of a [`ProblemInstance`] driven by a seeded ChaCha stream.
#[derive(Clone, Debug)]
pub struct SimulatedCoins {
    instance: ProblemInstance,
    rng: ChaCha8Rng,
}

impl SimulatedCoins {
    pub fn new(instance: ProblemInstance, rng: ChaCha8Rng) -> Self {
        Self { instance, rng }
    }

    pub fn seeded(instance: ProblemInstance, seed: u64) -> Self {
        Self::new(instance, crate::rng::stream(seed, 0))
    }

    pub fn instance(&self) -> &ProblemInstance {
        &self.instance
    }

    pub fn into_instance(self) -> ProblemInstance {
        self.instance
    }
}

impl CoinBackend for SimulatedCoins {
    fn coins(&self) -> u64 {
        self.instance.n()
    }

    fn draw(&mut self, coin: u64) -> Result<bool> {
        let p = self.instance.p(coin)?;
        Ok(self.rng.random::<f64>() < p)
    }

    /// One binomial draw stands in for `times` independent flips.
    fn draw_many(&mut self, coin: u64, times: u64) -> Result<u64> {
        let p = self.instance.p(coin)?;
        if times == 0 {
            return Ok(0);
        }
        let binomial = Binomial::new(times, p).map_err(|e| Error::Numeric(e.to_string()))?;
        Ok(binomial.sample(&mut self.rng))
    }
}

pub type SimulatedOracle = CoinOracle<SimulatedCoins>;

impl SimulatedOracle {
    pub fn simulated(instance: ProblemInstance, rng: ChaCha8Rng) -> Self {
        CoinOracle::new(SimulatedCoins::new(instance, rng))
    }
}

/// Coins answered by an arbitrary closure, e.g. one full algorithm trial per flip.
pub struct FnCoins<F> {
    coins: u64,
    f: F,
}

impl<F: FnMut(u64) -> Result<bool>> FnCoins<F> {
    pub fn new(coins: u64, f: F) -> Self {
        Self { coins, f }
    }
}

impl<F: FnMut(u64) -> Result<bool>> CoinBackend for FnCoins<F> {
    fn coins(&self) -> u64 {
        self.coins
    }

    fn draw(&mut self, coin: u64) -> Result<bool> {
        (self.f)(coin)
    }
}

/// Placeholder replaced by the coin index in a command template.
pub const COIN_PLACEHOLDER: &str = "{}";

/// Coins answered by running an external command.
///
/// Exit status 0 reads as heads, any other exit code as tails. Failing to
/// launch, being killed by a signal, or running past the timeout are
/// infrastructure errors, never outcomes.
#[derive(Clone, Debug)]
pub struct CommandCoins {
    coins: u64,
    template: Vec<String>,
    workdir: Option<PathBuf>,
    timeout: Option<Duration>,
}

impl CommandCoins {
    pub fn new(coins: u64, template: Vec<String>) -> Result<Self> {
        if template.is_empty() {
            return Err(Error::param("command template is empty"));
        }
        Ok(Self {
            coins,
            template,
            workdir: None,
            timeout: None,
        })
    }

    pub fn workdir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.workdir = Some(dir.into());
        self
    }

    pub fn timeout(mut self, timeout: Duration) -> Self {
        self.timeout = Some(timeout);
        self
    }

    /// Argument vector for `coin`. Without a placeholder the index is appended.
    pub fn argv(&self, coin: u64) -> Vec<String> {
        let index = coin.to_string();
        let mut argv: Vec<String> = self
            .template
            .iter()
            .map(|a| a.replace(COIN_PLACEHOLDER, &index))
            .collect();
        if !self.template.iter().any(|a| a.contains(COIN_PLACEHOLDER)) {
            argv.push(index);
        }
        argv
    }
}

impl CoinBackend for CommandCoins {
    fn coins(&self) -> u64 {
        self.coins
    }

    fn draw(&mut self, coin: u64) -> Result<bool> {
        let argv = self.argv(coin);
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..])
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null());
        if let Some(dir) = &self.workdir {
            cmd.current_dir(dir);
        }
        let mut child = cmd
            .spawn()
            .map_err(|e| Error::Command(format!("failed to launch {:?}: {e}", argv[0])))?;
        let start = Instant::now();
        let status = loop {
            match child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) => {
                    if let Some(limit) = self.timeout {
                        if start.elapsed() > limit {
                            let _ = child.kill();
                            let _ = child.wait();
                            return Err(Error::Command(format!("{:?} timed out after {limit:?}", argv)));
                        }
                    }
                    std::thread::sleep(Duration::from_millis(2));
                }
                Err(e) => return Err(Error::Command(format!("waiting on {:?}: {e}", argv[0]))),
            }
        };
        match status.code() {
            Some(0) => Ok(true),
            Some(_) => Ok(false),
            None => Err(Error::Command(format!("{:?} terminated by signal", argv))),
        }
    }
}

/// A parent oracle seen through a list of its coins: coin `k` here is coin
/// `coins[k - 1]` of the parent.
pub struct SubsetOracle<'a, O: ?Sized> {
    parent: &'a mut O,
    coins: Vec<u64>,
}

impl<'a, O: Oracle + ?Sized> SubsetOracle<'a, O> {
    pub fn new(parent: &'a mut O, coins: Vec<u64>) -> Self {
        Self { parent, coins }
    }

    pub fn parent_coin(&self, coin: u64) -> Result<u64> {
        if coin == 0 || coin > self.coins.len() as u64 {
            return Err(Error::Index {
                index: coin,
                max: self.coins.len() as u64,
            });
        }
        Ok(self.coins[coin as usize - 1])
    }
}

impl<O: Oracle + ?Sized> Oracle for SubsetOracle<'_, O> {
    fn coins(&self) -> u64 {
        self.coins.len() as u64
    }

    fn flip(&mut self, coin: u64) -> Result<bool> {
        let c = self.parent_coin(coin)?;
        self.parent.flip(c)
    }

    fn flip_many(&mut self, coin: u64, times: u64) -> Result<u64> {
        let c = self.parent_coin(coin)?;
        self.parent.flip_many(c, times)
    }

    fn flips_used(&self) -> u64 {
        self.parent.flips_used()
    }

    fn remaining(&self) -> Option<u64> {
        self.parent.remaining()
    }
}

/// A parent oracle limited to `cap` further flips.
pub struct CappedOracle<'a, O: ?Sized> {
    parent: &'a mut O,
    start: u64,
    cap: u64,
}

impl<'a, O: Oracle + ?Sized> CappedOracle<'a, O> {
    pub fn new(parent: &'a mut O, cap: u64) -> Self {
        let start = parent.flips_used();
        Self { parent, start, cap }
    }

    /// Flips made through this view so far.
    pub fn spent(&self) -> u64 {
        self.parent.flips_used() - self.start
    }

    fn left(&self) -> u64 {
        self.cap.saturating_sub(self.spent())
    }
}

impl<O: Oracle + ?Sized> Oracle for CappedOracle<'_, O> {
    fn coins(&self) -> u64 {
        self.parent.coins()
    }

    fn flip(&mut self, coin: u64) -> Result<bool> {
        if self.left() == 0 {
            return Err(Error::BudgetExhausted { cap: self.cap });
        }
        self.parent.flip(coin)
    }

    fn flip_many(&mut self, coin: u64, times: u64) -> Result<u64> {
        let allowed = times.min(self.left());
        let heads = self.parent.flip_many(coin, allowed)?;
        if allowed < times {
            return Err(Error::BudgetExhausted { cap: self.cap });
        }
        Ok(heads)
    }

    fn flips_used(&self) -> u64 {
        self.parent.flips_used()
    }

    fn remaining(&self) -> Option<u64> {
        let left = self.left();
        Some(self.parent.remaining().map_or(left, |r| r.min(left)))
    }
}

/// Outcome of one search run.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunReport {
    /// Returned interval, or `None` for an explicit failure.
    pub answer: Option<u64>,
    pub flips_used: u64,
    pub stage_flips: BTreeMap<String, u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub transcript: Option<Vec<u64>>,
    /// The flip budget ran out before the algorithm finished.
    pub exhausted: bool,
    /// The answer is a fallback the algorithm could not confirm.
    pub flagged: bool,
}

impl RunReport {
    pub fn add_stage(&mut self, stage: &str, flips: u64) {
        *self.stage_flips.entry(stage.to_string()).or_insert(0) += flips;
        self.flips_used += flips;
    }

    pub fn stage(&self, stage: &str) -> u64 {
        self.stage_flips.get(stage).copied().unwrap_or(0)
    }

    pub fn stage_total(&self) -> u64 {
        self.stage_flips.values().sum()
    }
}
