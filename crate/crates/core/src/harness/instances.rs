use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::oracle::ProblemInstance;

/// Instance families used in the benchmarks. All but `Biased` sit at
/// `tau = 0.5`; every family uses `eps = 0.1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DistributionKind {
    /// Coins are 0.4 up to a uniform crossing and 0.6 after it.
    Standard,
    /// 0.65 / 0.85 around `tau = 0.75`.
    Biased,
    /// 0.44 / 0.6: the low side lies inside `(tau - eps, tau + eps)`.
    Lopsided,
    /// A ramp from 0.4 to 0.6 over `ceil(10 ln n)` coins.
    Wide,
    /// 0 / 1 coins, for debugging.
    Noiseless,
}

impl DistributionKind {
    pub const ALL: [DistributionKind; 5] = [
        DistributionKind::Standard,
        DistributionKind::Biased,
        DistributionKind::Lopsided,
        DistributionKind::Wide,
        DistributionKind::Noiseless,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DistributionKind::Standard => "standard",
            DistributionKind::Biased => "biased",
            DistributionKind::Lopsided => "lopsided",
            DistributionKind::Wide => "wide",
            DistributionKind::Noiseless => "noiseless",
        }
    }

    pub fn tau(self) -> f64 {
        match self {
            DistributionKind::Biased => 0.75,
            _ => 0.5,
        }
    }

    pub fn eps(self) -> f64 {
        0.1
    }

    /// Coin values below and above the crossing.
    fn levels(self) -> (f64, f64) {
        let (tau, eps) = (self.tau(), self.eps());
        match self {
            DistributionKind::Standard | DistributionKind::Biased | DistributionKind::Wide => (tau - eps, tau + eps),
            DistributionKind::Lopsided => (tau - 0.6 * eps, tau + eps),
            DistributionKind::Noiseless => (0.0, 1.0),
        }
    }
}

impl fmt::Display for DistributionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DistributionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param(format!("unknown distribution {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    pub n: u64,
}

impl DistributionSpec {
    pub fn new(kind: DistributionKind, n: u64) -> Self {
        Self { kind, n }
    }

    pub fn tau(&self) -> f64 {
        self.kind.tau()
    }

    pub fn eps(&self) -> f64 {
        self.kind.eps()
    }

    /// Ramp length of the `Wide` family.
    pub fn window(&self) -> u64 {
        (10.0 * (self.n as f64).ln()).ceil() as u64
    }

    /// Number of placements: crossings `1..n` for step families, ramp
    /// starts `1..=n - window + 1` for `Wide`.
    pub fn placements(&self) -> Result<u64> {
        if self.n < 2 {
            return Err(Error::param(format!(
                "instances need at least two coins, got {}",
                self.n
            )));
        }
        match self.kind {
            DistributionKind::Wide => {
                let w = self.window();
                if w > self.n {
                    return Err(Error::param(format!(
                        "ramp of {w} coins does not fit in n = {}",
                        self.n
                    )));
                }
                Ok(self.n - w + 1)
            }
            _ => Ok(self.n - 1),
        }
    }

    /// The instance with the given placement: coins `1..=at` low for step
    /// families, or the ramp starting at coin `at` for `Wide`.
    pub fn instance_at(&self, at: u64) -> Result<ProblemInstance> {
        let count = self.placements()?;
        if at == 0 || at > count {
            return Err(Error::Index { index: at, max: count });
        }
        let (low, high) = self.kind.levels();
        let p = match self.kind {
            DistributionKind::Wide => {
                let w = self.window();
                let span = (w - 1).max(1) as f64;
                (1..=self.n)
                    .map(|i| {
                        if i < at {
                            low
                        } else if i >= at + w {
                            high
                        } else {
                            low + (high - low) * (i - at) as f64 / span
                        }
                    })
                    .collect()
            }
            _ => (1..=self.n).map(|i| if i <= at { low } else { high }).collect(),
        };
        ProblemInstance::new(p, self.tau(), self.eps())
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} n={}", self.kind, self.n)
    }
}

/// Draws an instance with a uniformly placed crossing (or ramp).
pub fn make_instance<R: Rng + ?Sized>(spec: &DistributionSpec, rng: &mut R) -> Result<ProblemInstance> {
    let count = spec.placements()?;
    spec.instance_at(rng.random_range(1..=count))
}
