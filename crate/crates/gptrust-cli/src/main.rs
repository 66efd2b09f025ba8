//! `gptrust`: Gaussian process regression with knowledge scores, from the
//! command line. See `gptrust --help` for the subcommands.

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;

use gptrust_cli::commands;
use gptrust_cli::config::RawArgs;

#[derive(Parser)]
#[command(
    name = "gptrust",
    version,
    about = "Gaussian process regression that knows what it knows",
    long_about = "Fits Gaussian process models, scores how much the training data \
constrain each prediction, and uses that score to gate anomaly calls, \
forecasts, and gap interpolation."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared across subcommands; each command consults the ones it
/// understands and rejects the rest.
#[derive(Args)]
struct FlagSet {
    /// Config file: key=value lines, or a manifest.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV (x,y data, query points, or a time series, per command).
    #[arg(long)]
    data: Option<PathBuf>,
    /// Model file written by `fit`.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Kernel expression, e.g. "rbf(var=1, len=0.5)" or
    /// "sum(periodic(var=1, period=1, len=0.7), linear(var=0.1, offset=0))".
    #[arg(long)]
    kernel: Option<String>,
    /// Knowledge floor in [0, 1]: queries scoring below it are not trusted.
    #[arg(long)]
    rho: Option<f64>,
    /// Anomaly threshold as a multiple of the predictive standard deviation.
    #[arg(long)]
    multiplier: Option<f64>,
    /// Seed for fitting restarts and experiment data (overrides
    /// GPTRUST_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Scan grid start.
    #[arg(long)]
    from: Option<f64>,
    /// Scan grid end (inclusive).
    #[arg(long)]
    to: Option<f64>,
    /// Scan grid spacing.
    #[arg(long)]
    step: Option<f64>,
    /// Directory for output files (default: current directory).
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,
}

impl From<FlagSet> for RawArgs {
    fn from(f: FlagSet) -> RawArgs {
        RawArgs {
            config: f.config,
            data: f.data,
            model: f.model,
            kernel: f.kernel,
            rho: f.rho,
            multiplier: f.multiplier,
            seed: f.seed,
            from: f.from,
            to: f.to,
            step: f.step,
            out_dir: f.out_dir,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit kernel hyperparameters to x,y data and save the model.
    Fit(FlagSet),
    /// Predict with knowledge scores at query points.
    Score(FlagSet),
    /// Two-stage anomaly triage of observed x,y pairs.
    Triage(FlagSet),
    /// Find gaps in a time series and interpolate the trustworthy ones.
    Gaps(FlagSet),
    /// Scan forward and report where knowledge first drops below rho.
    Horizon(FlagSet),
    /// Run a canned seeded study: toy-anomaly, forecast-decay, or
    /// gap-triage.
    Experiment {
        name: String,
        #[command(flatten)]
        flags: FlagSet,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Fit(f) => commands::cmd_fit(f.into()),
        Cmd::Score(f) => commands::cmd_score(f.into()),
        Cmd::Triage(f) => commands::cmd_triage(f.into()),
        Cmd::Gaps(f) => commands::cmd_gaps(f.into()),
        Cmd::Horizon(f) => commands::cmd_horizon(f.into()),
        Cmd::Experiment { name, flags } => commands::cmd_experiment(&name, flags.into()),
    };
    if let Err(e) = result {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
