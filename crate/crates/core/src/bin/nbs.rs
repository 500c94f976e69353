use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use nbs_core::harness::{
    calibrate_budget, emit_csv, run_algorithm, run_campaign, write_csv, Algorithm, AlgorithmSettings,
    CalibrationConfig, CampaignResult, DistributionKind, DistributionSpec, MetaSearch,
};
use nbs_core::oracle::{CommandCoins, SimulatedOracle};
use nbs_core::rng::{derive_seed, entropy_seed, stream};
use nbs_core::screening::{bayesian_screening_search, ScreeningConfig};
use nbs_core::{CoinOracle, Error, Oracle, Result};

#[derive(Parser)]
#[command(name = "nbs", version, about = "Noisy binary search over monotone coins")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one search on a generated instance and print its report.
    Simulate(SimulateArgs),
    /// Run campaigns over algorithms x distributions x sizes x budgets.
    Bench(BenchArgs),
    /// Find the budget at which an algorithm succeeds 80% and 90% of the time.
    Calibrate(CalibrateArgs),
    /// Search over coins backed by an external command.
    Search(SearchArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, default_value = "screening")]
    algo: Algorithm,
    #[arg(long, default_value = "standard")]
    dist: DistributionKind,
    #[arg(long, default_value_t = 1000)]
    n: u64,
    #[arg(long)]
    budget: Option<u64>,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "variant,naive")]
    algo: Vec<Algorithm>,
    #[arg(long, value_delimiter = ',', default_value = "standard")]
    dist: Vec<DistributionKind>,
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    n: Vec<u64>,
    /// Budgets to try; unbudgeted algorithms run once without a cap.
    #[arg(long, value_delimiter = ',')]
    budget: Vec<u64>,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    seed: Option<u64>,
    /// CSV destination; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[arg(long, value_delimiter = ',', default_value = "variant,naive")]
    algo: Vec<Algorithm>,
    #[arg(long, value_delimiter = ',', default_value = "standard")]
    dist: Vec<DistributionKind>,
    #[arg(long, value_delimiter = ',', default_value = "1000")]
    n: Vec<u64>,
    #[arg(long, default_value_t = 1.05)]
    grid_ratio: f64,
    /// Trials spent by each meta-search.
    #[arg(long, default_value_t = 6000)]
    meta_budget: u64,
    /// Run the full screening search over the grid instead of the budgeted variant.
    #[arg(long)]
    full_meta: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    /// Command run per flip; `{}` is replaced by the coin index, which is
    /// appended when there is no placeholder. Exit status 0 means heads.
    #[arg(long, required = true, num_args = 1.., allow_hyphen_values = true)]
    cmd: Vec<String>,
    #[arg(long)]
    n: u64,
    #[arg(long, default_value_t = 0.5)]
    tau: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long)]
    workdir: Option<PathBuf>,
    /// Seconds before a single flip is abandoned.
    #[arg(long)]
    timeout: Option<f64>,
    /// Stop after this many flips.
    #[arg(long)]
    max_flips: Option<u64>,
}

fn seed_or_entropy(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let seed = entropy_seed();
        eprintln!("seed: {seed}");
        seed
    })
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let seed = seed_or_entropy(args.seed);
    let spec = DistributionSpec::new(args.dist, args.n);
    let instance = nbs_core::harness::make_instance(&spec, &mut stream(seed, 0))?;
    let good = instance.good_intervals(spec.eps());
    let mut oracle = SimulatedOracle::simulated(instance, stream(seed, 1));
    let settings = AlgorithmSettings::with_delta(args.delta);
    let report = run_algorithm(
        args.algo,
        &settings,
        &mut oracle,
        spec.tau(),
        spec.eps(),
        args.budget,
        derive_seed(seed, 2),
    )?;
    let success = report.answer.is_some_and(|a| good.contains(&a));
    let json = serde_json::json!({
        "algorithm": args.algo.name(),
        "distribution": spec.kind.name(),
        "n": spec.n,
        "seed": seed,
        "success": success,
        "report": report,
    });
    println!("{}", serde_json::to_string_pretty(&json).expect("report serializes"));
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let seed = seed_or_entropy(args.seed);
    let settings = AlgorithmSettings::with_delta(args.delta);
    let mut result = CampaignResult::default();
    for &algorithm in &args.algo {
        for &kind in &args.dist {
            for &n in &args.n {
                let spec = DistributionSpec::new(kind, n);
                let budgets: Vec<Option<u64>> = if algorithm.is_budgeted() {
                    if args.budget.is_empty() {
                        return Err(Error::param(format!("{algorithm} needs --budget")));
                    }
                    args.budget.iter().map(|&b| Some(b)).collect()
                } else {
                    vec![None]
                };
                for budget in budgets {
                    let row = run_campaign(algorithm, &settings, &spec, budget, args.trials, seed)?;
                    eprintln!(
                        "{algorithm} {spec} budget {}: {}/{} succeeded, mean flips {:.1}",
                        budget.map_or("-".to_string(), |b| b.to_string()),
                        row.successes,
                        row.trials,
                        row.mean_flips
                    );
                    result.rows.push(row);
                }
            }
        }
    }
    match &args.out {
        Some(path) => emit_csv(&result, path),
        None => write_csv(&result, std::io::stdout().lock()).map_err(|source| Error::Csv {
            path: PathBuf::from("<stdout>"),
            source,
        }),
    }
}

fn calibrate(args: CalibrateArgs) -> Result<()> {
    let seed = seed_or_entropy(args.seed);
    let settings = AlgorithmSettings::with_delta(0.15);
    let cfg = CalibrationConfig {
        grid_ratio: args.grid_ratio,
        meta_budget: args.meta_budget,
        meta: if args.full_meta {
            MetaSearch::Screening
        } else {
            MetaSearch::Variant
        },
        ..CalibrationConfig::default()
    };
    let mut out = csv::Writer::from_writer(Vec::new());
    let csv_err = |source| Error::Csv {
        path: args.out.clone().unwrap_or_else(|| PathBuf::from("<stdout>")),
        source,
    };
    out.write_record([
        "algorithm",
        "distribution",
        "n",
        "lower",
        "upper",
        "point",
        "trials",
        "seed",
    ])
    .map_err(csv_err)?;
    for &algorithm in &args.algo {
        if !algorithm.is_budgeted() {
            return Err(Error::param(format!("{algorithm} does not take a budget")));
        }
        for &kind in &args.dist {
            for &n in &args.n {
                let spec = DistributionSpec::new(kind, n);
                let cal = calibrate_budget(algorithm, &settings, &spec, None, seed, &cfg)?;
                for v in &cal.non_monotone {
                    eprintln!(
                        "warning: {algorithm} {spec}: rate {:.3} at budget {} but {:.3} at {}",
                        v.lower_rate, v.lower_budget, v.higher_rate, v.higher_budget
                    );
                }
                eprintln!(
                    "{algorithm} {spec}: {} .. {} ({} trials)",
                    cal.lower, cal.upper, cal.trials
                );
                out.write_record([
                    algorithm.name().to_string(),
                    kind.name().to_string(),
                    n.to_string(),
                    cal.lower.to_string(),
                    cal.upper.to_string(),
                    format!("{:.1}", cal.point()),
                    cal.trials.to_string(),
                    seed.to_string(),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    let bytes = out.into_inner().map_err(|e| Error::Numeric(e.to_string()))?;
    match &args.out {
        Some(path) => std::fs::write(path, bytes).map_err(|source| Error::Io {
            path: path.clone(),
            source,
        }),
        None => {
            print!("{}", String::from_utf8_lossy(&bytes));
            Ok(())
        }
    }
}

fn search(args: SearchArgs) -> Result<()> {
    let template = if args.cmd.len() == 1 {
        args.cmd[0].split_whitespace().map(str::to_string).collect()
    } else {
        args.cmd
    };
    let mut coins = CommandCoins::new(args.n, template)?;
    if let Some(dir) = args.workdir {
        coins = coins.workdir(dir);
    }
    if let Some(secs) = args.timeout {
        coins = coins.timeout(Duration::from_secs_f64(secs));
    }
    let mut oracle = match args.max_flips {
        Some(cap) => CoinOracle::with_cap(coins, cap),
        None => CoinOracle::new(coins),
    };
    let report = bayesian_screening_search(
        &mut oracle,
        args.tau,
        args.eps,
        &ScreeningConfig::with_delta(args.delta),
    )?;
    let answer = report.answer.expect("screening always answers");
    println!("interval {answer} (coins {answer} and {})", answer + 1);
    println!("flips {}", oracle.flips_used());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Bench(args) => bench(args),
        Command::Calibrate(args) => calibrate(args),
        Command::Search(args) => search(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
