mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use output::Format;

/// Counterfactual realizability, exact evaluation and experiment simulation.
#[derive(Parser, Debug)]
#[command(name = "ctfkit", version, about, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Decide whether a query can be sampled with the given actions
    Realize(RealizeArgs),
    /// Evaluate a query exactly on a model
    Eval(EvalArgs),
    /// Draw samples of a query by simulating its plan
    Sample(SampleArgs),
    /// Run a bandit learner for several epochs
    Bandit(BanditArgs),
    /// Sample constrained fairness models and report their disparity
    Fairness(FairnessArgs),
    /// List the counterfactual randomization procedures of an expanded diagram
    Procedures(ProceduresArgs),
}

/// Where and how results are written.
#[derive(Args, Debug, Serialize)]
struct OutputArgs {
    /// Output directory [default: $CTFKIT_OUT_DIR/<subcommand>, else ./ctfkit-out/<subcommand>]
    #[arg(long, value_name = "DIR")]
    #[serde(skip)]
    out: Option<PathBuf>,
    /// Which result files to write
    #[arg(long, value_enum, default_value = "both")]
    format: Format,
}

#[derive(Args, Debug, Serialize)]
struct RealizeArgs {
    /// Fixture file, or the name of a builtin fixture
    #[arg(long, value_name = "FIXTURE")]
    graph: String,
    /// Query, e.g. "P(Y[X=1], X)"
    #[arg(long)]
    query: String,
    /// Feasible actions, e.g. "Rand(X), CtfRand(X->{Y,Z})"; reads are implied
    #[arg(long, value_name = "SPEC", conflicts_with_all = ["maximal", "expanded"])]
    actions: Option<String>,
    /// Use every Read and single-child CtfRand of the diagram
    #[arg(long)]
    maximal: bool,
    /// Use the actions enabled by the fixture's counterfactual mediators
    #[arg(long, conflicts_with = "maximal")]
    expanded: bool,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    /// Fixture file with mechanisms, or the name of a builtin fixture
    #[arg(long, value_name = "FIXTURE")]
    graph: String,
    /// Query; with values such as "P(Y[X=1]=1, X=0)" a single probability is printed
    #[arg(long)]
    query: String,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct SampleArgs {
    /// Fixture file with mechanisms, or the name of a builtin fixture
    #[arg(long, value_name = "FIXTURE")]
    graph: String,
    /// Query to sample
    #[arg(long)]
    query: String,
    /// Feasible actions; reads are implied
    #[arg(long, value_name = "SPEC", conflicts_with = "maximal")]
    actions: Option<String>,
    /// Use every Read and single-child CtfRand of the diagram
    #[arg(long)]
    maximal: bool,
    /// Number of accepted samples
    #[arg(long, default_value_t = 10_000)]
    n: usize,
    /// Master seed [default: drawn at random and recorded]
    #[arg(long)]
    seed: Option<u64>,
    /// Rejected units allowed per accepted sample
    #[arg(long, default_value_t = ctfkit::sim::DEFAULT_MAX_REJECTIONS)]
    max_rejections: u64,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct BanditArgs {
    /// Learner: ts, ts-aug, ts-ett, ts-opt or mab-opt
    #[arg(long, default_value = "ts-opt")]
    algo: String,
    /// Bandit fixture file, or a builtin name such as example3
    #[arg(long, default_value = "example3", value_name = "FIXTURE")]
    problem: String,
    /// Rounds per epoch
    #[arg(long = "T", visible_alias = "horizon", default_value_t = 2000, value_name = "T")]
    horizon: usize,
    /// Independent epochs
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    /// Master seed [default: drawn at random and recorded]
    #[arg(long)]
    seed: Option<u64>,
    /// Estimate the observational table from this many units instead of using exact values
    #[arg(long, value_name = "N")]
    obs_samples: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct FairnessArgs {
    /// Which metric the sampled models must keep small: l2 or l3
    #[arg(long, default_value = "l3")]
    constraint: String,
    /// Number of accepted models
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Bound on the constrained metric
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    /// Master seed [default: drawn at random and recorded]
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args, Debug, Serialize)]
struct ProceduresArgs {
    /// Fixture file with expanded-diagram metadata, or a builtin name
    #[arg(long, value_name = "FIXTURE")]
    graph: String,
    /// Decision variable whose procedures are listed [default: every mediated variable]
    #[arg(long = "var", value_name = "NAME")]
    var: Option<String>,
    #[command(flatten)]
    output: OutputArgs,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Realize(a) => commands::realize(a),
        Command::Eval(a) => commands::eval(a),
        Command::Sample(a) => commands::sample(a),
        Command::Bandit(a) => commands::bandit(a),
        Command::Fairness(a) => commands::fairness(a),
        Command::Procedures(a) => commands::procedures(a),
    };
    match result {
        Ok(commands::Outcome::Success) => ExitCode::SUCCESS,
        Ok(commands::Outcome::NotRealizable) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
