//! Plot-ready CSV output: densities, proposal shares and surpluses.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::json::format_f64;
use super::report::Report;
use statrs::function::erf::erfc;

use crate::distributions::{standard_normal_quantile, ValueDistribution, TAIL_QUANTILE};
use crate::error::{Error, Result};

/// Quantile points per distribution on the density grid.
pub const DENSITY_POINTS: usize = 400;
const PLOT_TAIL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct PlotFiles {
    pub densities: PathBuf,
    pub shares: PathBuf,
    pub surplus: PathBuf,
}

/// Union of per-distribution quantile grids plus the edges of bounded
/// supports, so every density is resolved where its mass is. Levels are
/// evenly spaced in normal scores, which keeps the tails dense.
pub fn density_grid(dists: &[ValueDistribution]) -> Vec<f64> {
    let mut xs = Vec::new();
    for d in dists {
        let z_max = -standard_normal_quantile(PLOT_TAIL);
        for k in 0..DENSITY_POINTS {
            let z = -z_max + 2.0 * z_max * k as f64 / (DENSITY_POINTS - 1) as f64;
            let q = 0.5 * erfc(-z / std::f64::consts::SQRT_2);
            xs.push(d.quantile(q.clamp(TAIL_QUANTILE, 1.0 - TAIL_QUANTILE)).unwrap_or(f64::NAN));
        }
        if d.is_bounded() {
            let (lo, hi) = d.support();
            let eps = 1e-9 * (hi - lo);
            xs.extend([lo - eps, lo, hi, hi + eps]);
        }
    }
    xs.retain(|x| x.is_finite());
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

pub fn densities_csv(dists: &[ValueDistribution]) -> String {
    let mut out = String::from("x");
    for i in 0..dists.len() {
        let _ = write!(out, ",f_{}", i + 1);
    }
    out.push('\n');
    for x in density_grid(dists) {
        out.push_str(&format_f64(x));
        for d in dists {
            out.push(',');
            out.push_str(&format_f64(d.pdf(x)));
        }
        out.push('\n');
    }
    out
}

pub fn shares_csv(report: &Report) -> String {
    let mut out = String::from("regime,builder,probability\n");
    for (regime, shares) in [("baseline", &report.shares_baseline), ("ea", &report.shares_ea)] {
        for (i, p) in shares.iter().enumerate() {
            let _ = writeln!(out, "{regime},builder{},{}", i + 1, format_f64(*p));
        }
    }
    out
}

pub fn surplus_csv(report: &Report) -> String {
    let mut out = String::from("owner,builder,expected_surplus\n");
    for row in &report.stage_table {
        for (i, s) in row.s.iter().enumerate() {
            let _ = writeln!(out, "{},builder{},{}", row.owner, i + 1, format_f64(*s));
        }
    }
    out
}

pub fn emit_plot_data(report: &Report, dists: &[ValueDistribution], dir: &Path) -> Result<PlotFiles> {
    if dists.is_empty() {
        return Err(Error::Domain("no distributions to plot".into()));
    }
    std::fs::create_dir_all(dir)?;
    let files = PlotFiles {
        densities: dir.join("densities.csv"),
        shares: dir.join("shares.csv"),
        surplus: dir.join("surplus.csv"),
    };
    std::fs::write(&files.densities, densities_csv(dists))?;
    std::fs::write(&files.shares, shares_csv(report))?;
    std::fs::write(&files.surplus, surplus_csv(report))?;
    Ok(files)
}
