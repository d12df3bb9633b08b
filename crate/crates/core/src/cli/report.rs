use serde::Serialize;

use super::config::ExperimentConfig;
use super::targets::PaperTarget;
use crate::resale::{MarkupScan, Method, StageErrors, StageValues};
use crate::verify::LemmaReport;

/// One row of the stage table. Builders are numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRow {
    pub owner: String,
    pub p: f64,
    pub s: Vec<f64>,
    pub shares: Vec<f64>,
    pub method: Method,
    pub stderr: Option<StageErrors>,
}

pub fn owner_label(owner: Option<usize>) -> String {
    match owner {
        Some(i) => format!("builder{}", i + 1),
        None => "nonbuilder".to_string(),
    }
}

impl From<&StageValues> for StageRow {
    fn from(sv: &StageValues) -> Self {
        StageRow {
            owner: owner_label(sv.owner),
            p: sv.p,
            s: sv.s.clone(),
            shares: sv.shares.clone(),
            method: sv.method,
            stderr: sv.stderr.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub seed: u64,
    pub samples: usize,
    pub chunk: usize,
    pub rel_tol: f64,
    pub markup_scan_samples: Option<usize>,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub stage_table: Vec<StageRow>,
    pub wtp: Vec<f64>,
    pub wtp_error: Vec<f64>,
    pub nonbuilder_wtp: f64,
    /// 1-based builder number.
    pub winner: usize,
    pub price: f64,
    pub tie_flag: bool,
    pub shares_ea: Vec<f64>,
    pub shares_baseline: Vec<f64>,
    pub lemma: Option<LemmaReport>,
    pub markup_scan: Option<MarkupScan>,
    pub paper_targets: Vec<PaperTarget>,
    pub provenance: Provenance,
}

impl Report {
    pub fn to_json(&self) -> crate::Result<String> {
        super::json::to_canonical_string(self)
    }

    pub fn discrepancies(&self) -> impl Iterator<Item = &PaperTarget> {
        self.paper_targets.iter().filter(|t| t.discrepancy_flag)
    }
}
