//! Command-line driver: analyze a network, simulate trajectories, estimate
//! discounted costs, verify the workload lower bound, or run the
//! statistical validation suite.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use qnetlab_cli::config::ExperimentConfig;
use qnetlab_cli::runs;

#[derive(Parser)]
#[command(
    name = "qnetlab",
    about = "Scheduling-control laboratory for critically loaded processing networks",
    version
)]
struct Cli {
    #[command(subcommand)]
    mode: Mode,
    /// Path to the experiment TOML.
    #[arg(long, global = true, default_value = "config.toml")]
    config: PathBuf,
    /// Output directory (overrides experiment.out_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Base seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Replication-count override.
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Comma-separated scaling parameters, e.g. --r 10,20,40.
    #[arg(long, global = true, value_delimiter = ',')]
    r: Option<Vec<f64>>,
}

#[derive(Subcommand)]
enum Mode {
    /// Heavy-traffic structural analysis and workload tables.
    Analyze,
    /// Simulate one trajectory per r and export event/scaled CSVs.
    Simulate,
    /// Monte Carlo discounted-cost table over the r list.
    Cost,
    /// Workload value function and the lower-bound report.
    Bound,
    /// Law-of-large-numbers / central-limit / martingale diagnostics.
    Validate,
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(&cli.config)
        .with_context(|| format!("reading {}", cli.config.display()))?;
    let env: Vec<(String, String)> = std::env::vars().collect();
    let mut cfg = ExperimentConfig::parse(&text, &env)?;
    if let Some(seed) = cli.seed {
        cfg.experiment.base_seed = seed;
    }
    if let Some(reps) = cli.reps {
        cfg.experiment.replications = reps;
    }
    if let Some(r) = &cli.r {
        cfg.experiment.r_list = r.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run = || -> Result<()> {
        let cfg = load_config(&cli)?;
        let out_dir = cli
            .out
            .clone()
            .unwrap_or_else(|| PathBuf::from(&cfg.experiment.out_dir));
        let outputs = match cli.mode {
            Mode::Analyze => runs::run_analyze(&cfg, &out_dir)?,
            Mode::Simulate => runs::run_simulate(&cfg, &out_dir)?,
            Mode::Cost => runs::run_cost(&cfg, &out_dir)?,
            Mode::Bound => runs::run_bound(&cfg, &out_dir)?,
            Mode::Validate => runs::run_validate(&cfg, &out_dir)?,
        };
        for path in outputs {
            eprintln!("wrote {}", path.display());
        }
        Ok(())
    };
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
