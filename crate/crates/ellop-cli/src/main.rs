//! Command-line entry point.
//!
//! Exit codes: 0 when the run passes (or the diff is empty), 2 when a
//! criterion fails (or the diff found differences), 1 on any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ellop_cli::config::RunConfig;
use ellop_cli::diff::report_diff;
use ellop_cli::{experiments, RunnerError};
use ellop_core::Torus;
use num_complex::Complex64;

#[derive(Parser)]
#[command(
    name = "ellop",
    version,
    about = "Numerical laboratory for commuting difference operators on elliptic curves"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a configured experiment; writes report.json and CSV series.
    Run(RunArgs),
    /// Compare two run reports field by field.
    Diff(DiffArgs),
    /// Evaluate a basic function at one point, printing "re im".
    Eval(EvalArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path of the JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for this run.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct DiffArgs {
    /// First report.json.
    left: PathBuf,
    /// Second report.json.
    right: PathBuf,
    /// Relative tolerance below which two numbers count as equal.
    #[arg(long, default_value_t = 1e-12)]
    rel_tol: f64,
}

#[derive(Args)]
struct EvalArgs {
    /// Function to evaluate.
    #[arg(value_enum)]
    function: EvalFunction,
    /// Half-period omega as two floats RE IM.
    #[arg(long, num_args = 2, allow_negative_numbers = true, value_names = ["RE", "IM"])]
    omega: Vec<f64>,
    /// Half-period omega' as two floats RE IM.
    #[arg(long, num_args = 2, allow_negative_numbers = true, value_names = ["RE", "IM"])]
    omega_prime: Vec<f64>,
    /// Evaluation point as two floats RE IM.
    #[arg(long, num_args = 2, allow_negative_numbers = true, value_names = ["RE", "IM"])]
    z: Vec<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalFunction {
    /// Weierstrass P function.
    Wp,
    /// Weierstrass zeta function.
    Zeta,
    /// Weierstrass sigma function.
    Sigma,
}

/// Print a line to stdout, ignoring a closed pipe (e.g. piped into `head`)
/// so the exit code still reflects the computed result.
fn say(line: std::fmt::Arguments) {
    use std::io::Write;
    let _ = std::io::stdout().write_fmt(format_args!("{line}\n"));
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Run(args) => run_experiment(&args),
        Command::Diff(args) => diff_reports(&args),
        Command::Eval(args) => eval_function(&args),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run_experiment(args: &RunArgs) -> Result<ExitCode, RunnerError> {
    let mut config = RunConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .ok_or_else(|| {
            RunnerError::ConfigInvalid(
                "no output directory: pass --out or set output_dir in the config".into(),
            )
        })?;
    let config_dir = match args.config.parent() {
        Some(parent) if parent != Path::new("") => parent.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let artifacts = experiments::run(&config, &config_dir, &out_dir)?;
    for criterion in &artifacts.report.criteria {
        say(format_args!(
            "{:<26} {}  value {:.6e}  threshold {:.6e}",
            criterion.name,
            if criterion.pass { "PASS" } else { "FAIL" },
            criterion.value,
            criterion.threshold,
        ));
    }
    say(format_args!("report: {}", artifacts.report_path.display()));
    Ok(if artifacts.report.pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn diff_reports(args: &DiffArgs) -> Result<ExitCode, RunnerError> {
    let diffs = report_diff(&args.left, &args.right, args.rel_tol)?;
    if diffs.is_empty() {
        say(format_args!("reports agree"));
        return Ok(ExitCode::SUCCESS);
    }
    for diff in &diffs {
        say(format_args!("{diff}"));
    }
    say(format_args!("{} difference(s)", diffs.len()));
    Ok(ExitCode::from(2))
}

fn eval_function(args: &EvalArgs) -> Result<ExitCode, RunnerError> {
    let torus = Torus::new(complex_arg(&args.omega), complex_arg(&args.omega_prime))?;
    let z = complex_arg(&args.z);
    let value = match args.function {
        EvalFunction::Wp => torus.wp(z)?,
        EvalFunction::Zeta => torus.zeta_w(z)?,
        EvalFunction::Sigma => torus.sigma_w(z)?,
    };
    say(format_args!("{:.16e} {:.16e}", value.re, value.im));
    Ok(ExitCode::SUCCESS)
}

fn complex_arg(pair: &[f64]) -> Complex64 {
    Complex64::new(pair[0], pair[1])
}
