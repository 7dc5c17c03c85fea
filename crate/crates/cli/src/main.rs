//! `fpqr`: fit, apply, cross-validate and simulate fPQR / PLS models.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 bad input data or model
//! file, 4 numerical failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fpqr::{CenteringMode, Error, MetricKind, QuantileLevel};

#[derive(Parser)]
#[command(name = "fpqr", version, about = "Fast partial quantile regression and PLS")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write it to a model file.
    Fit(FitArgs),
    /// Predict responses for new rows with a saved model.
    Predict(PredictArgs),
    /// Choose the component count by k-fold cross-validation.
    Cv(CvArgs),
    /// Run one of the simulation studies.
    Simulate(SimulateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Fpqr,
    Pls,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Li,
    Dodge,
    Choi,
}

impl From<MetricArg> for MetricKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Li => MetricKind::Li,
            MetricArg::Dodge => MetricKind::Dodge,
            MetricArg::Choi => MetricKind::Choi,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CenterArg {
    Mean,
    None,
}

impl From<CenterArg> for CenteringMode {
    fn from(c: CenterArg) -> Self {
        match c {
            CenterArg::Mean => CenteringMode::Mean,
            CenterArg::None => CenteringMode::None,
        }
    }
}

fn parse_tau(s: &str) -> Result<QuantileLevel, String> {
    let v: f64 = s.parse().map_err(|_| format!("'{s}' is not a number"))?;
    QuantileLevel::new(v).map_err(|e| e.to_string())
}

/// Where the training data comes from and how it is modelled.
#[derive(Args, Clone)]
struct DataArgs {
    /// Predictor CSV (header row required).
    #[arg(long, requires = "y", conflicts_with = "data")]
    x: Option<PathBuf>,
    /// Response CSV with the same number of rows as --x.
    #[arg(long, requires = "x")]
    y: Option<PathBuf>,
    /// Single CSV holding predictors and responses.
    #[arg(long, requires = "response_cols")]
    data: Option<PathBuf>,
    /// Response column names in --data, comma separated.
    #[arg(long, value_delimiter = ',', requires = "data")]
    response_cols: Vec<String>,
    #[arg(long, value_enum, default_value = "fpqr")]
    method: MethodArg,
    /// Quantile dependence metric (fpqr only).
    #[arg(long, value_enum, default_value = "li")]
    metric: MetricArg,
    /// Quantile level in (0, 1) (fpqr only).
    #[arg(long, value_parser = parse_tau, default_value = "0.5")]
    tau: QuantileLevel,
    #[arg(long, value_enum, default_value = "mean")]
    center: CenterArg,
    /// Seed for any randomized step.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Number of latent components [default: min(10, n - 1, m)].
    #[arg(long)]
    components: Option<usize>,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV of new predictor rows.
    #[arg(long)]
    x: PathBuf,
    /// Output CSV [default: standard output].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Candidate counts: a range `1..6` (inclusive) or a list `1,3,5`.
    #[arg(long, default_value = "1..10")]
    components: String,
    /// Output CSV [default: standard output].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    scheme: fpqr::Scheme,
    /// Error law [default: chi2_3 for sim1/sim2, normal for sim3-*].
    #[arg(long)]
    error: Option<fpqr::ErrorLaw>,
    #[arg(long, default_value_t = 25)]
    reps: usize,
    /// Comma-separated recipes such as `fpqr-li,fpqr-dodge@0.25,pls`.
    #[arg(long, value_delimiter = ',', default_value = "fpqr-li,pls")]
    recipes: Vec<fpqr::Recipe>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV [default: standard output].
    #[arg(long)]
    out: Option<PathBuf>,
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::InvalidQuantile(_) | Error::InvalidComponents { .. } | Error::InvalidArgument(_) => 2,
        Error::SolverFailure { .. }
        | Error::Singular
        | Error::NoComponents
        | Error::AllZeroCrossProduct
        | Error::RankDeficient { .. } => 4,
        _ => 3,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Fit(a) => commands::fit(a),
        Command::Predict(a) => commands::predict(a),
        Command::Cv(a) => commands::cv(a),
        Command::Simulate(a) => commands::simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
