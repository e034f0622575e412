use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ocdeepiv_cli::commands::{self, default_plot_inputs, threads_from_env};
use ocdeepiv_cli::{ExperimentConfig, Result};

#[derive(Parser, Debug)]
#[command(name = "ocdeepiv", version, about = "Treatment-effect estimation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment config (key = value with [experiment], [dgp], [train]).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory; overrides `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a simulated dataset.
    Simulate,
    /// Train a network and write losses.csv and theta.csv.
    Train,
    /// Run the configured estimators and write comparison.csv.
    Compare,
    /// Finite-difference gradient checks.
    Gradcheck {
        /// `all`, `network`, or `layer:<name>`.
        #[arg(long, default_value = "all")]
        scope: String,
        /// Scales analytic gradients before comparison.
        #[arg(long, default_value_t = 1.0, hide = true)]
        corrupt: f64,
    },
    /// Render theta and loss plots from CSV files.
    Plot {
        #[arg(long)]
        theta: Option<PathBuf>,
        #[arg(long)]
        losses: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());

    match cli.command {
        Command::Simulate => {
            commands::simulate(&cfg, &out)?;
            println!("wrote {}", out.display());
        }
        Command::Train => {
            let run = commands::train(&cfg, &out)?;
            if let Some(last) = run.history.last() {
                println!(
                    "epoch {} total={} mse={} ortho={}",
                    last.epoch, last.total, last.mse, last.ortho
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Compare => {
            let (table, _) = commands::compare(&cfg, &out, threads_from_env()?)?;
            for row in table.ranked() {
                match (row.rank, row.mse_raw) {
                    (Some(rank), Some(m)) => println!("{rank:>2} {:<22} mse={}", row.kind.name(), m.mean),
                    _ => println!(" - {:<22} {:?}", row.kind.name(), row.status),
                }
            }
            println!("wrote {}", out.display());
        }
        Command::Gradcheck { scope, corrupt } => {
            commands::gradcheck(&scope, cfg.seed, corrupt)?;
        }
        Command::Plot { theta, losses } => {
            let (theta, losses) = default_plot_inputs(&out, theta, losses);
            commands::plot(&theta, &losses, &out, cfg.train.switch_epoch)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
