use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use canonoid::cli::report::Verdict;
use canonoid::cli::{execute, Command, Overrides};

/// Verify canonical and canonoid transformations and their trace invariants.
#[derive(Parser)]
#[command(name = "canonoid", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Run the pointwise checks (canonical, canonoid, torsion, lenard, involution, lie_derivative).
    Check(Opts),
    /// Integrate the trajectory and write trajectory.csv.
    Integrate(Opts),
    /// Integrate and measure the drift of tr(S^k); writes invariants.csv.
    Invariants(Opts),
    /// Merge check.json, integrate.json and invariants.json into report.json.
    Report(Opts),
    /// Everything the configuration requests.
    Run(Opts),
}

#[derive(Args)]
struct Opts {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    kmax: Option<usize>,
    /// Residual tolerance for the canonical, canonoid, lenard and lie_derivative checks.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, opts) = match cli.command {
        Sub::Check(o) => (Command::Check, o),
        Sub::Integrate(o) => (Command::Integrate, o),
        Sub::Invariants(o) => (Command::Invariants, o),
        Sub::Report(o) => (Command::Report, o),
        Sub::Run(o) => (Command::Run, o),
    };
    let overrides = Overrides { kmax: opts.kmax, tol: opts.tol, seed: opts.seed };
    match execute(command, opts.config.as_deref(), &opts.out, overrides) {
        Ok(report) => {
            for c in &report.checks {
                let v = match c.verdict {
                    Verdict::Pass => "pass",
                    Verdict::Fail => "fail",
                    Verdict::NotApplicable => "not-applicable",
                };
                println!("{}: {v} (residual {:e}, tol {:e})", c.check.name(), c.residual, c.tolerance);
            }
            for d in &report.drift {
                println!("drift {}: max rel {:e}", d.name, d.max_rel_drift);
            }
            if report.verdict == Verdict::Fail {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
