use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ealab::cli::{self, json::to_canonical_string, ExperimentConfig};
use ealab::numerics::RandomStream;
use ealab::resale::{optimal_markup, Budget, MarkupGrid, Method};
use ealab::verify::{hazard_sweep, SweepFamily};
use ealab::{Error, Result};

#[derive(Parser)]
#[command(name = "ealab", version, about = "Execution-auction centralization laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunOpts {
    /// Override the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the configured Monte Carlo sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write densities.csv, shares.csv and surplus.csv into this directory.
    #[arg(long)]
    plot_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Two uniform builders with optimal take-it-or-leave-it resale.
    Example1(RunOpts),
    /// Three lognormal builders with markup-3 second-price resale.
    Example2(RunOpts),
    /// Run an experiment from a JSON config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        opts: RunOpts,
    },
    /// Check the margin chain on random hazard-ordered pairs.
    LemmaSweep {
        #[arg(long)]
        pairs: usize,
        /// uniform_scale | lognormal_mu
        #[arg(long)]
        family: SweepFamily,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// quadrature | monte_carlo
        #[arg(long, default_value = "quadrature")]
        method: Method,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Owner profit over a grid of reserve markups (common random numbers).
    MarkupScan {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        min: f64,
        #[arg(long)]
        max: f64,
        #[arg(long)]
        step: f64,
        /// Owner builder, numbered from 1.
        #[arg(long, default_value_t = 1)]
        owner: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit lognormal parameters to a single-column CSV of bids.
    Fit {
        #[arg(long)]
        input: PathBuf,
    },
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(Error::from),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_report(mut config: ExperimentConfig, opts: &RunOpts) -> Result<()> {
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    if let Some(samples) = opts.samples {
        config.samples = samples;
    }
    let report = cli::run_experiment(&config)?;
    emit(&report.to_json()?, opts.out.as_deref())?;
    if let Some(dir) = &opts.plot_dir {
        cli::emit_plot_data(&report, &config.builders, dir)?;
    }
    eprintln!(
        "{}: winner builder {} at price {:.6}; {} paper discrepancies flagged",
        config.name,
        report.winner,
        report.price,
        report.discrepancies().count()
    );
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Example1(opts) => run_report(cli::example1(), &opts),
        Command::Example2(opts) => run_report(cli::example2(), &opts),
        Command::Run { config, opts } => run_report(ExperimentConfig::from_path(&config)?, &opts),
        Command::LemmaSweep { pairs, family, seed, method, samples, out } => {
            let budget = samples.map_or_else(Budget::default, Budget::samples);
            let report = hazard_sweep(pairs, family, RandomStream::new(seed), method, budget)?;
            emit(&to_canonical_string(&report)?, out.as_deref())?;
            eprintln!("{} evaluated, {} hold, {} skipped", report.evaluated, report.holds, report.skipped);
            Ok(())
        }
        Command::MarkupScan { config, min, max, step, owner, seed, samples, out } => {
            let mut config = ExperimentConfig::from_path(&config)?;
            config.seed = seed.unwrap_or(config.seed);
            config.samples = samples.unwrap_or(config.samples);
            if owner == 0 || owner > config.builders.len() {
                return Err(Error::Config { path: "--owner".into(), message: format!("no builder {owner}") });
            }
            let grid = MarkupGrid { min, max, step };
            grid.points().map_err(|e| Error::Config { path: "--min/--max/--step".into(), message: e.to_string() })?;
            let scan = optimal_markup(&config.builders, owner - 1, grid, config.budget(), config.stream())?;
            emit(&to_canonical_string(&scan)?, out.as_deref())?;
            eprintln!("best markup {}", scan.markup);
            Ok(())
        }
        Command::Fit { input } => {
            let values = cli::read_bids_file(&input)?;
            let fit = cli::fit_lognormal(&values)?;
            emit(&to_canonical_string(&fit)?, None)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
