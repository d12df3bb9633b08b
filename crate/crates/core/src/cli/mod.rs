//! Experiment runner behind the `ealab` binary: configuration schema,
//! report assembly, plot data and bid-data fitting.

pub mod config;
pub mod fit;
pub mod json;
pub mod plot;
pub mod report;
pub mod targets;

pub use config::{example1, example2, ExperimentConfig};
pub use fit::{fit_lognormal, read_bids, read_bids_file, LognormalFit};
pub use plot::{emit_plot_data, PlotFiles};
pub use report::{Report, StageRow};
pub use targets::{paper_targets, Comparison, Instance, PaperTarget};

use crate::error::{Error, Result};
use crate::game::solve_equilibrium;
use crate::resale::{optimal_markup, Budget, MarkupGrid, ResalePolicy};
use crate::verify::lemma1_margins;

/// Replications per grid point of the markup scan attached to the
/// three-builder reference instance.
pub const MARKUP_SCAN_SAMPLES: usize = 100_000;

pub const REFERENCE_MARKUP_GRID: MarkupGrid = MarkupGrid { min: 1.0, max: 5.0, step: 0.25 };

const LEMMA_STREAM: u64 = 0x004c_454d_4d41;
const SCAN_STREAM: u64 = 0x5343_414e;

pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let spec = config.game_spec()?;
    let eq = solve_equilibrium(&spec)?;

    let lemma = if config.builders.len() == 2 && config.policy == ResalePolicy::OptimalOffer {
        match lemma1_margins(
            &config.builders[0],
            &config.builders[1],
            config.method,
            config.budget(),
            config.stream().derive(LEMMA_STREAM),
        ) {
            Ok(r) => Some(r),
            // builder order does not satisfy the hazard-rate precondition
            Err(Error::MechanismUnsupported(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };

    let instance = targets::detect_instance(config);
    let markup_scan = match instance {
        Some(Instance::Example2) => Some(optimal_markup(
            &config.builders,
            0,
            REFERENCE_MARKUP_GRID,
            Budget { samples: MARKUP_SCAN_SAMPLES, ..config.budget() },
            config.stream().derive(SCAN_STREAM),
        )?),
        _ => None,
    };
    let paper_targets = instance.map_or_else(Vec::new, |inst| paper_targets(inst, &eq, markup_scan.as_ref()));

    Ok(Report {
        config: config.clone(),
        stage_table: eq.stage_table.rows().map(StageRow::from).collect(),
        wtp: eq.wtp.clone(),
        wtp_error: eq.wtp_error.clone(),
        nonbuilder_wtp: eq.nonbuilder_wtp,
        winner: eq.winner + 1,
        price: eq.price,
        tie_flag: eq.tie_flag,
        shares_ea: eq.shares_ea.clone(),
        shares_baseline: eq.shares_baseline.clone(),
        lemma,
        provenance: report::Provenance {
            seed: config.seed,
            samples: config.samples,
            chunk: config.budget().chunk,
            rel_tol: config.rel_tol,
            markup_scan_samples: markup_scan.as_ref().map(|_| MARKUP_SCAN_SAMPLES),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        markup_scan,
        paper_targets,
    })
}

/// Process exit code for an error: 2 for bad input, 3 for numerical
/// accuracy failures, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. }
        | Error::Data(_)
        | Error::InsufficientData(_)
        | Error::InvalidDistribution(_)
        | Error::Domain(_)
        | Error::MechanismUnsupported(_) => 2,
        Error::Accuracy { .. } | Error::Bracketing { .. } => 3,
        Error::Io(_) => 1,
    }
}
