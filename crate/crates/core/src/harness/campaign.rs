use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::instances::{make_instance, DistributionSpec};
use crate::baselines::{
    kk_backtracking, kk_multiplicative_weights, naive_nbs, BacktrackingConfig, MultiplicativeWeightsConfig,
};
use crate::error::{Error, Result};
use crate::oracle::{Oracle, ProblemInstance, RunReport, SimulatedOracle};
use crate::rng::{derive_seed, stream};
use crate::screening::{
    bayesian_screening_search, experiment_variant_search, silly_bayesian_screening_search, ScreeningConfig,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Full screening search; a budget, if given, is a hard cap.
    Screening,
    /// Screening search behind the zero-flip shortcut.
    Silly,
    /// Budgeted screening variant.
    Variant,
    Naive,
    MultiplicativeWeights,
    Backtracking,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Screening,
        Algorithm::Silly,
        Algorithm::Variant,
        Algorithm::Naive,
        Algorithm::MultiplicativeWeights,
        Algorithm::Backtracking,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Screening => "screening",
            Algorithm::Silly => "silly",
            Algorithm::Variant => "variant",
            Algorithm::Naive => "naive",
            Algorithm::MultiplicativeWeights => "kk-mw",
            Algorithm::Backtracking => "kk-backtracking",
        }
    }

    /// Whether the algorithm takes its flip budget as an input.
    pub fn is_budgeted(self) -> bool {
        !matches!(self, Algorithm::Screening | Algorithm::Silly)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::param(format!("unknown algorithm {s:?}")))
    }
}

/// Tunables shared by all algorithms in a campaign.
#[derive(Clone, Debug, Default)]
pub struct AlgorithmSettings {
    pub screening: ScreeningConfig,
    pub multiplicative_weights: MultiplicativeWeightsConfig,
    pub backtracking: BacktrackingConfig,
}

impl AlgorithmSettings {
    pub fn with_delta(delta: f64) -> Self {
        Self {
            screening: ScreeningConfig::with_delta(delta),
            ..Self::default()
        }
    }
}

/// Runs `algorithm` once against `oracle`. Budgeted algorithms need `budget`.
pub fn run_algorithm<O: Oracle + ?Sized>(
    algorithm: Algorithm,
    settings: &AlgorithmSettings,
    oracle: &mut O,
    tau: f64,
    eps: f64,
    budget: Option<u64>,
    seed: u64,
) -> Result<RunReport> {
    let mut rng = stream(seed, 0);
    let need = || budget.ok_or_else(|| Error::param(format!("{algorithm} needs a flip budget")));
    match algorithm {
        Algorithm::Screening => {
            let cfg = ScreeningConfig {
                budget_cap: budget.or(settings.screening.budget_cap),
                ..settings.screening.clone()
            };
            bayesian_screening_search(oracle, tau, eps, &cfg)
        }
        Algorithm::Silly => {
            let cfg = ScreeningConfig {
                budget_cap: budget.or(settings.screening.budget_cap),
                ..settings.screening.clone()
            };
            silly_bayesian_screening_search(oracle, tau, eps, &cfg, &mut rng).map(|run| run.report)
        }
        Algorithm::Variant => experiment_variant_search(oracle, tau, eps, need()?),
        Algorithm::Naive => naive_nbs(oracle, tau, eps, need()?),
        Algorithm::MultiplicativeWeights => {
            kk_multiplicative_weights(oracle, tau, eps, need()?, &settings.multiplicative_weights, &mut rng)
        }
        Algorithm::Backtracking => kk_backtracking(oracle, tau, eps, need()?, &settings.backtracking, &mut rng),
    }
}

/// One simulated run and how it went.
#[derive(Clone, Debug)]
pub struct Trial {
    pub instance: ProblemInstance,
    /// `None` when the run ended in an error.
    pub report: Option<RunReport>,
    pub flips: u64,
    pub success: bool,
}

/// Trial `index` of a campaign: a fresh instance and oracle, both derived
/// from `(seed, index)`.
pub fn run_trial(
    algorithm: Algorithm,
    settings: &AlgorithmSettings,
    spec: &DistributionSpec,
    budget: Option<u64>,
    seed: u64,
    index: u64,
) -> Result<Trial> {
    let trial_seed = derive_seed(seed, index);
    let instance = make_instance(spec, &mut stream(trial_seed, 0))?;
    let mut oracle = SimulatedOracle::simulated(instance, stream(trial_seed, 1));
    let outcome = run_algorithm(
        algorithm,
        settings,
        &mut oracle,
        spec.tau(),
        spec.eps(),
        budget,
        derive_seed(trial_seed, 2),
    );
    let flips = oracle.flips_used();
    let instance = oracle.into_backend().into_instance();
    let success = match &outcome {
        Ok(report) => match report.answer {
            Some(answer) => instance.is_good(answer, spec.eps())?,
            None => false,
        },
        Err(_) => false,
    };
    Ok(Trial {
        instance,
        report: outcome.ok(),
        flips,
        success,
    })
}

/// Aggregate of one campaign configuration; also the CSV row layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignRow {
    pub algorithm: String,
    pub distribution: String,
    pub n: u64,
    pub tau: f64,
    pub eps: f64,
    /// Empty for unbudgeted runs.
    pub budget: Option<u64>,
    pub trials: u64,
    pub successes: u64,
    pub mean_flips: f64,
    pub median_flips: f64,
    pub max_flips: u64,
    pub seed: u64,
}

impl CampaignRow {
    pub fn success_rate(&self) -> f64 {
        self.successes as f64 / self.trials as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CampaignResult {
    pub rows: Vec<CampaignRow>,
}

/// Runs `trials` independent trials and aggregates them.
pub fn run_campaign(
    algorithm: Algorithm,
    settings: &AlgorithmSettings,
    spec: &DistributionSpec,
    budget: Option<u64>,
    trials: u64,
    seed: u64,
) -> Result<CampaignRow> {
    if trials == 0 {
        return Err(Error::param("a campaign needs at least one trial"));
    }
    let mut flips = Vec::with_capacity(trials as usize);
    let mut successes = 0;
    for index in 0..trials {
        let trial = run_trial(algorithm, settings, spec, budget, seed, index)?;
        successes += trial.success as u64;
        flips.push(trial.flips);
    }
    Ok(summarize(algorithm, spec, budget, seed, successes, &mut flips))
}

fn summarize(
    algorithm: Algorithm,
    spec: &DistributionSpec,
    budget: Option<u64>,
    seed: u64,
    successes: u64,
    flips: &mut [u64],
) -> CampaignRow {
    flips.sort_unstable();
    let trials = flips.len();
    let mean = flips.iter().map(|&f| f as f64).sum::<f64>() / trials as f64;
    let median = if trials % 2 == 1 {
        flips[trials / 2] as f64
    } else {
        (flips[trials / 2 - 1] as f64 + flips[trials / 2] as f64) / 2.0
    };
    CampaignRow {
        algorithm: algorithm.name().to_string(),
        distribution: spec.kind.name().to_string(),
        n: spec.n,
        tau: spec.tau(),
        eps: spec.eps(),
        budget,
        trials: trials as u64,
        successes,
        mean_flips: mean,
        median_flips: median,
        max_flips: flips[trials - 1],
        seed,
    }
}

pub const CSV_HEADER: [&str; 12] = [
    "algorithm",
    "distribution",
    "n",
    "tau",
    "eps",
    "budget",
    "trials",
    "successes",
    "mean_flips",
    "median_flips",
    "max_flips",
    "seed",
];

/// Writes `result` as CSV, header first, one row per aggregate.
pub fn write_csv<W: Write>(result: &CampaignResult, out: W) -> std::result::Result<(), csv::Error> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for row in &result.rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn emit_csv(result: &CampaignResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv(result, file).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_csv(path: &Path) -> Result<CampaignResult> {
    let csv_err = |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut reader = csv::Reader::from_path(path).map_err(csv_err)?;
    let rows = reader
        .deserialize()
        .collect::<std::result::Result<Vec<CampaignRow>, _>>()
        .map_err(csv_err)?;
    Ok(CampaignResult { rows })
}

/// Lower end of the Wilson score interval for `successes` out of `trials`
/// at normal quantile `z`.
pub fn wilson_lower(successes: u64, trials: u64, z: f64) -> f64 {
    if trials == 0 {
        return 0.0;
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let center = p + z2 / (2.0 * n);
    let spread = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (center - spread) / (1.0 + z2 / n)
}
