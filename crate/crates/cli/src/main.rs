//! `aoi-mech`: build, verify, simulate and evaluate update-procurement mechanisms.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{error::ErrorKind, Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;
mod output;

use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "aoi-mech", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tabulate the optimal mechanism.
    Mechanism(MechanismArgs),
    /// Tabulate the quantized mechanism cell by cell.
    Quantize(QuantizeArgs),
    /// Outcome of a baseline mechanism at given costs.
    Baseline(BaselineArgs),
    /// Certify truthfulness and participation by deviation search.
    Verify(VerifyArgs),
    /// Simulate the update process under a mechanism.
    Simulate(SimulateArgs),
    /// Run a parameter sweep and write its CSV table.
    Experiment(ExperimentArgs),
    /// Reference costs for the uniform and truncated exponential settings.
    #[command(name = "closed-forms")]
    ClosedForms(ClosedFormsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MechanismMode {
    Single,
    Multi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MechanismKind {
    Optimal,
    Quantized,
    Benchmark,
    Naive,
    Complete,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Baseline {
    Benchmark,
    Complete,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SettingKind {
    Uniform,
    #[value(name = "trunc_exp", alias = "trunc-exp")]
    TruncExp,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct MechanismArgs {
    mode: MechanismMode,
    #[command(flatten)]
    common: Common,
    /// Points of the cost grid (single).
    #[arg(long)]
    grid: Option<usize>,
    /// Comma-separated reported costs.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    costs: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct QuantizeArgs {
    #[command(flatten)]
    common: Common,
    /// Quantization step; falls back to `delta_q` in the configuration.
    #[arg(long)]
    delta: Option<f64>,
    /// Reports of the other sources when tabulating a multi-source mechanism.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    costs: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct BaselineArgs {
    #[arg(long)]
    kind: Baseline,
    #[command(flatten)]
    common: Common,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    costs: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value = "optimal")]
    mechanism: MechanismKind,
    #[command(flatten)]
    common: Common,
    /// Quantization step for `--mechanism quantized`.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Include the per-cost deviation table.
    #[arg(long)]
    points: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, default_value = "optimal")]
    mechanism: MechanismKind,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    updates: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// True costs of the sources; defaults to the configuration, then the prior medians.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    costs: Option<Vec<f64>>,
    #[arg(long)]
    delta: Option<f64>,
    /// Also write the sampled age trajectory here.
    #[arg(long)]
    ages: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    /// quantloss, fig5, fig6, fig7 or fig8.
    #[arg(long)]
    name: String,
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct ClosedFormsArgs {
    #[arg(long)]
    setting: SettingKind,
    #[arg(long)]
    alpha: f64,
    #[arg(long = "c-high")]
    c_high: f64,
    #[arg(long = "c-low", default_value_t = 0.0)]
    c_low: f64,
    /// Rate of the truncated exponential.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("AOI_MECH_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::Validation(format!(
            "AOI_MECH_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Validation(format!("thread pool: {e}")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let args: Vec<String> = std::env::args().skip(1).collect();
    let result = configure_threads().and_then(|()| commands::run(cli.command, &args));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
