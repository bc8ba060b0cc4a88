use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};
use log::{info, warn};

use plane_diffusion::experiment::{load_config, run_ablation_suite, run_experiment, Record};
use plane_diffusion::Error;

#[derive(Parser)]
#[command(
    name = "plane-diffusion",
    version,
    about = "Plane-origin diffusion depth completion experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full model on every scene (and every sweep point, if any).
    Run(Common),
    /// Run the seven-variant ablation suite on every scene.
    Ablate(Common),
    /// Run the declared parameter sweeps; fails if the config declares none.
    Sweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// RNG seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Only print errors.
    #[arg(long)]
    quiet: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (Command::Run(common) | Command::Ablate(common) | Command::Sweep(common)) = &cli.command;
    let level = if common.quiet { "error" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();

    match execute(&cli.command, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Config(_))));
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}

fn execute(command: &Command, common: &Common) -> Result<()> {
    let loaded = load_config(&common.config)?;
    for w in &loaded.warnings {
        warn!("{}: {w}", common.config.display());
    }
    let mut cfg = loaded.config;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }

    let records = match command {
        Command::Run(_) => run_experiment(&cfg)?,
        Command::Ablate(_) => run_ablation_suite(&cfg)?,
        Command::Sweep(_) => {
            if cfg.sweeps.is_empty() {
                bail!(Error::Config(format!(
                    "{}: no sweeps declared",
                    common.config.display()
                )));
            }
            run_experiment(&cfg)?
        }
    };
    let csv = cfg.output_dir.join("metrics.csv");
    info!("wrote {} rows to {}", records.len(), csv.display());
    if !common.quiet {
        print_summary(&records);
    }
    Ok(())
}

fn print_summary(records: &[Record]) {
    let width = records
        .iter()
        .map(|r| r.variant.len())
        .max()
        .unwrap_or(7)
        .max(7);
    println!(
        "{:<14} {:<width$} {:>12} {:>12}",
        "scene", "variant", "coarse mm", "rmse mm"
    );
    for r in records {
        println!(
            "{:<14} {:<width$} {:>12.2} {:>12.2}",
            r.scene, r.variant, r.coarse.rmse, r.report.rmse
        );
    }
}
