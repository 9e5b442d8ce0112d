use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mfldp_harness::config::{ExperimentConfig, ExperimentKind};
use mfldp_harness::runner::{run_experiment, RunError, RunOptions};

/// Mean-field Gibbs measures: sampling, free-energy minimization and
/// large-deviation diagnostics.
#[derive(Parser)]
#[command(name = "mfldp", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the MCMC sampler and write the configuration stream.
    Sample(RunArgs),
    /// Minimize the free energy H_W.
    Minimize(RunArgs),
    /// Estimate (1/n) log P_n(L_n in event) over an n-list.
    Rate(RunArgs),
    /// Exact (and optionally estimated) (1/n) log Zn convergence tables.
    Zn(RunArgs),
    /// Exact verification suites for the decoupling and MGF inequalities.
    Verify(RunArgs),
    /// W_p concentration of L_n at the minimizer.
    Converge(RunArgs),
    /// Exact W_p between two measure files.
    Wasserstein(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML or JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (defaults to the config's `out`, then `./mfldp-out`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Write extra per-iteration / per-term tables.
    #[arg(long)]
    trace: bool,
    /// Exit with code 3 on soft numerical warnings (non-convergence,
    /// censored events, failed audits).
    #[arg(long)]
    strict: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match &cli.command {
        Command::Sample(a) => (ExperimentKind::Sample, a),
        Command::Minimize(a) => (ExperimentKind::Minimize, a),
        Command::Rate(a) => (ExperimentKind::Rate, a),
        Command::Zn(a) => (ExperimentKind::Zn, a),
        Command::Verify(a) => (ExperimentKind::Verify, a),
        Command::Converge(a) => (ExperimentKind::Converge, a),
        Command::Wasserstein(a) => (ExperimentKind::Wasserstein, a),
    };

    if let Ok(threads) = std::env::var("MFLDP_THREADS") {
        if let Ok(threads) = threads.parse::<usize>() {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads.max(1))
                .build_global()
                .ok();
        }
    }

    let (mut config, raw) = match ExperimentConfig::load(&args.config) {
        Ok(loaded) => loaded,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let out_dir = args
        .out
        .clone()
        .or_else(|| config.out.clone())
        .unwrap_or_else(|| PathBuf::from("mfldp-out"));

    let options = RunOptions {
        out_dir,
        trace: args.trace,
    };
    match run_experiment(kind, &config, &raw, &options) {
        Ok(outcome) => {
            for w in &outcome.warnings {
                eprintln!("warning: {w}");
            }
            println!("report written to {}", outcome.manifest.display());
            if args.strict && !outcome.warnings.is_empty() {
                return ExitCode::from(3);
            }
            ExitCode::SUCCESS
        }
        Err(RunError::Config(e)) => {
            eprintln!("config error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
