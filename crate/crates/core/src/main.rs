//! `idmacs` — batch pipeline for illness-death cohort simulation and
//! rate estimation from aggregated current status tables.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use idmacs::cli::commands::{cmd_bootstrap, cmd_estimate, cmd_report, cmd_simulate, OutPaths};
use idmacs::cli::config::{parse_theta, ObjectiveChoice, RunConfig};
use idmacs::error::Result;

#[derive(Parser)]
#[command(
    name = "idmacs",
    about = "Simulate illness-death cohorts, aggregate current-status counts, \
             estimate incidence and mortality-rate-ratio, bootstrap confidence bands",
    version
)]
struct Cli {
    /// Key-value configuration file; flags override its entries.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a cohort and write the count table plus visit histogram.
    Simulate,
    /// Fit the rate parameters to a count table file.
    Estimate {
        /// The count table CSV (either orientation).
        #[arg(long)]
        acs: PathBuf,
        /// Objective(s) to fit: ls, ml or both.
        #[arg(long)]
        objective: Option<String>,
    },
    /// Re-simulate population and schema at a generator parameter and
    /// summarize the re-estimates by empirical quantiles.
    Bootstrap {
        /// Generator parameter as `onset,slope,ratio`; defaults to the
        /// configured theta_star, falling back to theta_true.
        #[arg(long)]
        theta_star: Option<String>,
        /// Number of replicates, overriding the config.
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Bin replicate estimates into histogram files.
    Report {
        /// A replicates.csv produced by `bootstrap`.
        #[arg(long)]
        replicates: PathBuf,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<()> {
    let out = OutPaths::new(&cli.out)?;
    match &cli.command {
        Command::Simulate => {
            let config = load_config(&cli)?;
            cmd_simulate(&config, &out)
        }
        Command::Estimate { acs, objective } => {
            let mut config = load_config(&cli)?;
            if let Some(choice) = objective {
                config.objective = ObjectiveChoice::parse(choice)?;
            }
            cmd_estimate(&config, acs, &out)
        }
        Command::Bootstrap { theta_star, replicates } => {
            let mut config = load_config(&cli)?;
            if let Some(spec) = theta_star {
                config.theta_star = Some(parse_theta(spec)?);
            }
            if let Some(b) = replicates {
                config.b_replicates = *b;
            }
            cmd_bootstrap(&config, &out)
        }
        Command::Report { replicates } => cmd_report(replicates, &out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
