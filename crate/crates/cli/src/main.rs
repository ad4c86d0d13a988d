use clap::{Parser, Subcommand};
use mixfilter_cli::commands::{self, Overrides};
use mixfilter_cli::config::ExperimentConfig;
use mixfilter_cli::CliError;
use std::path::PathBuf;
use std::process::ExitCode;

/// Exact mixture filters for discretely sampled diffusions: simulate
/// fixtures, filter them, evaluate exact likelihoods and validate against
/// independent oracles.
#[derive(Parser)]
#[command(name = "mixfilter", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output path, overriding the config's [output] entry.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Weight pruning threshold override.
    #[arg(long, value_name = "EPS")]
    prune: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a signal/observation fixture from the configured model.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the exact filter over a fixture and write the posterior trace.
    Filter {
        #[command(flatten)]
        common: CommonArgs,
        /// Fixture file produced by `simulate`.
        #[arg(long)]
        fixture: PathBuf,
    },
    /// Evaluate the exact log-likelihood of a fixture.
    Loglik {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        fixture: PathBuf,
    },
    /// Compare the exact filter against the grid and particle oracles.
    Validate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        fixture: PathBuf,
    },
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { common } => {
            let cfg = ExperimentConfig::from_path(&common.config)?;
            let ov = overrides(&common);
            let path = commands::cmd_simulate(&cfg, &ov)?;
            println!("fixture written to {}", path.display());
        }
        Command::Filter { common, fixture } => {
            let cfg = ExperimentConfig::from_path(&common.config)?;
            let ov = overrides(&common);
            let path = commands::cmd_filter(&cfg, &fixture, &ov)?;
            println!("trace written to {}", path.display());
        }
        Command::Loglik { common, fixture } => {
            let cfg = ExperimentConfig::from_path(&common.config)?;
            let ov = overrides(&common);
            let (loglik, path) = commands::cmd_loglik(&cfg, &fixture, &ov)?;
            println!("total_loglik = {loglik}");
            if let Some(p) = path {
                println!("report written to {}", p.display());
            }
        }
        Command::Validate { common, fixture } => {
            let cfg = ExperimentConfig::from_path(&common.config)?;
            let ov = overrides(&common);
            let (report, path) = commands::cmd_validate(&cfg, &fixture, &ov)?;
            let grid = &report["grid"];
            let particle = &report["particle"];
            println!(
                "grid: sup density diff {:.3e}, loglik diff {:.3e} -> {}",
                grid["sup_density_diff"].as_f64().unwrap_or(f64::NAN),
                grid["loglik_diff"].as_f64().unwrap_or(f64::NAN),
                if grid["pass"].as_bool() == Some(true) {
                    "PASS"
                } else {
                    "FAIL"
                },
            );
            println!(
                "particle: max |z| {:.3} -> {}",
                particle["max_abs_z"].as_f64().unwrap_or(f64::NAN),
                if particle["pass"].as_bool() == Some(true) {
                    "PASS"
                } else {
                    "FAIL"
                },
            );
            if let Some(p) = path {
                println!("report written to {}", p.display());
            }
            if report["pass"].as_bool() != Some(true) {
                return Err(CliError::Numeric(mixfilter::Error::Domain(
                    "validation thresholds exceeded (see report)".into(),
                )));
            }
        }
    }
    Ok(())
}

fn overrides(common: &CommonArgs) -> Overrides {
    Overrides {
        seed: common.seed,
        prune: common.prune,
        out: common.out.clone(),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
