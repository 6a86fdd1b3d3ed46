//! Experiment runner: Monte-Carlo sum-rate CDFs, NMSE sweeps, and the
//! channel-orthogonality study, all emitted as CSV.

use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use hybeam_core::config::{load_config, ExperimentConfig};
use hybeam_core::experiment::{
    run_nmse_sweep, run_orthogonality_study, run_sumrate_cdf, write_csv, ResultTable,
};

#[derive(Parser)]
#[command(
    name = "hybeam",
    version,
    about = "Angle-domain hybrid massive MIMO experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Downlink sum-rate CDF across Monte-Carlo trials.
    SumrateCdf(RunArgs),
    /// Channel-estimation NMSE versus uplink training SNR.
    NmseSweep(RunArgs),
    /// Channel orthogonality versus array size.
    Lemma1(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML); built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count (per SNR point or array size for sweeps).
    #[arg(long)]
    trials: Option<usize>,
}

impl RunArgs {
    fn resolve_config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                load_config(path).with_context(|| format!("loading {}", path.display()))?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(trials) = self.trials {
            cfg.trials = trials;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_summaries(table: &ResultTable) {
    if table.summaries.is_empty() {
        return;
    }
    println!(
        "{:<12} {:<18} {:>4} {:>14}",
        "method", "metric", "pct", "value"
    );
    for s in &table.summaries {
        println!(
            "{:<12} {:<18} {:>4} {:>14.4}",
            s.method, s.metric, s.percentile, s.value
        );
    }
}

fn run() -> anyhow::Result<()> {
    let cli = Cli::parse();
    let (args, table) = match &cli.command {
        Command::SumrateCdf(args) => {
            let cfg = args.resolve_config()?;
            (args, run_sumrate_cdf(&cfg)?)
        }
        Command::NmseSweep(args) => {
            let cfg = args.resolve_config()?;
            (args, run_nmse_sweep(&cfg)?)
        }
        Command::Lemma1(args) => {
            let cfg = args.resolve_config()?;
            (args, run_orthogonality_study(&cfg)?)
        }
    };
    write_csv(&table, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    print_summaries(&table);
    println!("wrote {} rows to {}", table.rows.len(), args.out.display());
    Ok(())
}

fn main() {
    if let Err(err) = run() {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
