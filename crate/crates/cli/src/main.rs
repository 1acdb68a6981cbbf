use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nmme_cli::{run, selftest, Action, RunConfig, RunError};

/// Exact time-dependent coefficients and dynamics of non-Markovian master equations.
#[derive(Parser)]
#[command(name = "nmme", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads; 0 picks the core count. Overrides NMME_THREADS.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write the coefficient-function tables.
    #[arg(long)]
    dump_tables: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Tabulate the master-equation coefficients.
    Coeffs(RunArgs),
    /// Coefficients plus density-matrix propagation (or the ensemble for route = "unravel").
    Propagate(RunArgs),
    /// Run both routes and report their gaps and timings.
    Compare(RunArgs),
    /// Monte Carlo average of the stochastic Liouville equation.
    Unravel(RunArgs),
    /// Fast built-in consistency checks.
    Selftest,
}

fn thread_count(flag: Option<usize>) -> Result<usize, RunError> {
    if let Some(n) = flag {
        return Ok(n);
    }
    match std::env::var("NMME_THREADS") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| RunError::Config(nmme_cli::ConfigError::Invalid(format!("NMME_THREADS={v} is not a count")))),
        Err(_) => Ok(0),
    }
}

fn execute(cli: Cli) -> Result<(), RunError> {
    let threads = thread_count(cli.threads)?;
    // a pool may already exist when embedded; keep it
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    let (args, action) = match cli.command {
        Command::Coeffs(a) => (a, Action::Coeffs),
        Command::Propagate(a) => (a, Action::Propagate),
        Command::Compare(a) => (a, Action::Compare),
        Command::Unravel(a) => (a, Action::Unravel),
        Command::Selftest => {
            let checks = selftest::run_checks();
            let failed = checks.iter().filter(|c| !c.passed).count();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            return if failed == 0 { Ok(()) } else { Err(RunError::SelfTest { failed }) };
        }
    };
    let mut cfg = RunConfig::load(&args.config)?;
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    cfg.dump_tables |= args.dump_tables;
    let summary = run(&cfg, action)?;
    for line in &summary.lines {
        println!("{line}");
    }
    println!("wrote {} to {}", summary.files.join(", "), cfg.out_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
