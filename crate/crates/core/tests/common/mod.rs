#![allow(dead_code)]

use nbs_core::{Error, Oracle, Result};

/// Plain-vector posterior with the same update rule as the tree.
#[derive(Clone, Debug)]
pub struct DensePosterior {
    pub w: Vec<f64>,
}

impl DensePosterior {
    pub fn uniform(n_intervals: usize) -> Self {
        Self {
            w: vec![1.0 / n_intervals as f64; n_intervals],
        }
    }

    pub fn total(&self) -> f64 {
        self.w.iter().sum()
    }

    pub fn prefix(&self, i: usize) -> f64 {
        self.w[..i].iter().sum()
    }

    /// Smallest `i` with `W(i) >= q`.
    pub fn quantile(&self, q: f64) -> usize {
        let mut acc = 0.0;
        for (k, &x) in self.w.iter().enumerate() {
            acc += x;
            if acc >= q {
                return k + 1;
            }
        }
        self.w.len()
    }

    pub fn coin(&self, j: usize, q: f64) -> u64 {
        let mass = self.w[j - 1];
        if mass <= 0.0 {
            return j as u64;
        }
        if (q - self.prefix(j - 1)) / mass <= q {
            j as u64
        } else {
            j as u64 + 1
        }
    }

    pub fn update(&mut self, j: usize, outcome: bool, d: [f64; 4], q: f64) {
        let (left, right) = if outcome { (d[2], d[3]) } else { (d[0], d[1]) };
        let before = self.prefix(j - 1);
        let mass = self.w[j - 1];
        let center = left * (q - before).max(0.0) + right * (before + mass - q).max(0.0);
        for (k, x) in self.w.iter_mut().enumerate() {
            if k + 1 < j {
                *x *= left;
            } else if k + 1 > j {
                *x *= right;
            }
        }
        self.w[j - 1] = center;
        let total = self.total();
        if (total - 1.0).abs() > 1e-9 {
            for x in &mut self.w {
                *x /= total;
            }
        }
    }
}

/// Posterior of the crossing computed directly from likelihoods: a query at
/// fraction `f` through interval `j` reads `tau + eps` for intervals left of
/// it, `tau - eps` right of it, and the `f`-mixture on `j` itself.
#[derive(Clone, Debug)]
pub struct ExactBayes {
    pub tau: f64,
    pub eps: f64,
    pub q: f64,
    pub post: Vec<f64>,
}

impl ExactBayes {
    pub fn new(n_intervals: usize, tau: f64, eps: f64, q: f64) -> Self {
        Self {
            tau,
            eps,
            q,
            post: vec![1.0 / n_intervals as f64; n_intervals],
        }
    }

    fn lik(p: f64, y: bool) -> f64 {
        if y {
            p
        } else {
            1.0 - p
        }
    }

    /// Query interval and split fraction for the next round.
    pub fn query(&self) -> (usize, f64) {
        let mut acc = 0.0;
        for (k, &x) in self.post.iter().enumerate() {
            if acc + x >= self.q {
                return (k + 1, (self.q - acc) / x);
            }
            acc += x;
        }
        (self.post.len(), 1.0)
    }

    pub fn observe(&mut self, y: bool) {
        let (j, f) = self.query();
        let hi = Self::lik(self.tau + self.eps, y);
        let lo = Self::lik(self.tau - self.eps, y);
        for (k, x) in self.post.iter_mut().enumerate() {
            let l = match (k + 1).cmp(&j) {
                std::cmp::Ordering::Less => hi,
                std::cmp::Ordering::Greater => lo,
                std::cmp::Ordering::Equal => f * hi + (1.0 - f) * lo,
            };
            *x *= l;
        }
        let total: f64 = self.post.iter().sum();
        for x in &mut self.post {
            *x /= total;
        }
    }
}

/// Replays a fixed outcome sequence, whatever coin is asked for.
pub struct Scripted {
    pub n: u64,
    pub outcomes: Vec<bool>,
    pub asked: Vec<u64>,
}

impl Scripted {
    pub fn new(n: u64, outcomes: Vec<bool>) -> Self {
        Self {
            n,
            outcomes,
            asked: Vec::new(),
        }
    }
}

impl Oracle for Scripted {
    fn coins(&self) -> u64 {
        self.n
    }

    fn flip(&mut self, coin: u64) -> Result<bool> {
        let k = self.asked.len();
        self.asked.push(coin);
        self.outcomes.get(k).copied().ok_or(Error::BudgetExhausted {
            cap: self.outcomes.len() as u64,
        })
    }

    fn flips_used(&self) -> u64 {
        self.asked.len() as u64
    }
}

/// Step instance with `p = lo` up to coin `crossing` and `hi` after it.
pub fn step(n: usize, crossing: usize, lo: f64, hi: f64, tau: f64, eps: f64) -> nbs_core::ProblemInstance {
    let p = (1..=n).map(|i| if i <= crossing { lo } else { hi }).collect();
    nbs_core::ProblemInstance::new(p, tau, eps).unwrap()
}

pub fn standard(n: usize, crossing: usize) -> nbs_core::ProblemInstance {
    step(n, crossing, 0.4, 0.6, 0.5, 0.1)
}

pub fn noiseless(n: usize, crossing: usize) -> nbs_core::ProblemInstance {
    step(n, crossing, 0.0, 1.0, 0.5, 0.1)
}
