//! `lgi-selftest`: evaluate, certify and probe sequential-measurement scenarios.

mod commands;
mod output;
mod schema;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Exit codes: 0 success/pass, 1 certification fail, 2 usage or parse error,
/// 3 data-invariant error.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Invariant(String),
}

impl CliError {
    pub fn invariant(e: lgi_core::Error) -> Self {
        CliError::Invariant(e.to_string())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "lgi-selftest", version, about = "Self-testing of binary qubit measurements from temporal correlations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Correlators, K4, NSIT and predictability deviations of a scenario file.
    Evaluate(EvaluateArgs),
    /// Self-test verdict for a scenario or statistics file.
    Certify(CertifyArgs),
    /// Maximise K4 over biased/unsharp two-outcome POVMs.
    OptimizePovm(OptimizeArgs),
    /// Fidelity curve under dephasing and the operator-inequality sweep.
    Robustness(RobustnessArgs),
    /// Isometry extraction checks on an ideal block scenario.
    IsometryCheck(IsometryArgs),
}

#[derive(Args)]
pub struct EvaluateArgs {
    pub path: String,
    #[arg(long, conflicts_with = "csv")]
    pub json: bool,
    #[arg(long)]
    pub csv: bool,
}

#[derive(Args)]
pub struct CertifyArgs {
    pub path: String,
    #[arg(long, default_value_t = 1e-6)]
    pub epsilon: f64,
}

#[derive(Args)]
pub struct OptimizeArgs {
    #[arg(long, default_value_t = 7, value_parser = clap::value_parser!(u64).range(3..))]
    pub grid: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Fixes Alice's sharpness to this value (input becomes maximally mixed).
    #[arg(long)]
    pub cap_sharpness: Option<f64>,
    /// Lower bound on the magnitude of both biases.
    #[arg(long)]
    pub bias_floor: Option<f64>,
    /// Search directions over the whole sphere instead of the x–z plane.
    #[arg(long)]
    pub full_sphere: bool,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum SideArg {
    Alice,
    Bob,
}

#[derive(Args)]
pub struct RobustnessArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    pub curve_points: Option<u64>,
    #[arg(long)]
    pub check_inequality: bool,
    #[arg(long, value_enum, default_value = "alice")]
    pub side: SideArg,
    /// Slope s of the bound; defaults to (1 + √2)/2.
    #[arg(long)]
    pub slope: Option<f64>,
    #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(2..))]
    pub theta_grid: u64,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Also bisect for the largest certified slope.
    #[arg(long)]
    pub largest_slope: bool,
    /// Emit JSON instead of CSV.
    #[arg(long)]
    pub json: bool,
}

#[derive(Args)]
pub struct IsometryArgs {
    #[arg(long)]
    pub blocks: Option<usize>,
    /// Comma-separated block weights summing to 1; uniform by default.
    #[arg(long, value_delimiter = ',')]
    pub weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    /// Rotate every Bob block about y by this angle before checking.
    #[arg(long)]
    pub perturb: Option<f64>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("LGI_SELFTEST_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("LGI_SELFTEST_THREADS={raw:?} is not a thread count")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|()| match cli.command {
        Command::Evaluate(a) => commands::evaluate(&a),
        Command::Certify(a) => commands::certify(&a),
        Command::OptimizePovm(a) => commands::optimize_povm(&a),
        Command::Robustness(a) => commands::robustness(&a),
        Command::IsometryCheck(a) => commands::isometry_check(&a),
    });
    match result {
        Ok(out) => {
            print!("{}", out.text);
            ExitCode::from(out.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
