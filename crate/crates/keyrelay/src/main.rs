use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use keyrelay::config::{load_config_with_overrides, Experiment, Overrides};
use keyrelay::experiments::{run_experiment, RunOutcome};

/// Simulator for secret-key-aided secure transmission over an untrusted
/// decode-and-forward relay network.
#[derive(Debug, Parser)]
#[command(name = "keyrelay", version)]
struct Cli {
    /// JSON config file; omitted means the built-in default parameter set.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Experiment name (fig1_rates, fig2_throughput, validate_closed_forms,
    /// validate_chain); overrides the config file.
    #[arg(long)]
    experiment: Option<String>,
    /// Master seed; overrides the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("config error: cannot build thread pool: {e}");
            return ExitCode::from(2);
        }
    }

    let experiment = match cli.experiment.as_deref().map(Experiment::parse).transpose() {
        Ok(e) => e,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };

    let overrides = Overrides {
        experiment,
        seed: cli.seed,
        out_dir: cli.out,
    };
    let cfg = match load_config_with_overrides(cli.config.as_deref(), overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };

    println!(
        "running {} (seed {}) → {}",
        cfg.experiment.name(),
        cfg.seed,
        cfg.out_dir.display()
    );
    match run_experiment(&cfg) {
        Ok(RunOutcome::Pass) => ExitCode::SUCCESS,
        Ok(RunOutcome::ValidationFailed) => {
            eprintln!("one or more validation checks failed");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
