//! Numerical checks of the margin chain `p1 - s12 > p2 - s21 > p0` for two
//! hazard-ordered builders, the pointwise decomposition behind it, and
//! randomized sweeps over ordered pairs.

use std::cell::Cell;

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::{check_hazard_order, ValueDistribution, VirtualValueInverse};
use crate::error::{Error, Result};
use crate::game::{stage_table, GameSpec};
use crate::numerics::{integrate_with, QuadOptions, RandomStream};
use crate::resale::{Budget, Method, ResalePolicy, StageValues};

const HAZARD_GRID: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaTolerances {
    /// Numerical error of `margin1`, `margin2` and `p0`.
    pub margin1: f64,
    pub margin2: f64,
    pub p0: f64,
    /// Error estimate of the two double integrals.
    pub g_integrals: f64,
    /// Required slack multiple of the combined error.
    pub sigmas: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub margin1: f64,
    pub margin2: f64,
    pub p0: f64,
    pub int_g1_minus_g2: f64,
    pub int_g3: f64,
    pub holds: bool,
    pub method: Method,
    pub tolerances: LemmaTolerances,
}

impl LemmaReport {
    /// Smallest link of the chain.
    pub fn slack(&self) -> f64 {
        (self.margin1 - self.margin2).min(self.margin2 - self.p0)
    }
}

/// Offer-price curves of a two-builder instance.
#[derive(Debug, Clone, Copy)]
pub struct OfferCurves {
    f1: ValueDistribution,
    f2: ValueDistribution,
    inv1: VirtualValueInverse,
    inv2: VirtualValueInverse,
}

impl OfferCurves {
    pub fn new(f1: &ValueDistribution, f2: &ValueDistribution) -> Result<Self> {
        Ok(Self { f1: *f1, f2: *f2, inv1: f1.virtual_value_inverse()?, inv2: f2.virtual_value_inverse()? })
    }

    /// Price builder 1 posts to builder 2 when holding value `v1`
    /// (`+inf` when builder 1 keeps the right).
    pub fn offer_to_2(&self, v1: f64) -> f64 {
        self.inv2.invert(v1).unwrap_or(f64::INFINITY)
    }

    /// Price builder 2 posts to builder 1 when holding value `v2`.
    pub fn offer_to_1(&self, v2: f64) -> f64 {
        self.inv1.invert(v2).unwrap_or(f64::INFINITY)
    }

    pub fn g1(&self, v1: f64, v2: f64) -> f64 {
        if v2 > self.offer_to_2(v1) {
            v2
        } else {
            v1
        }
    }

    pub fn g2(&self, v1: f64, v2: f64) -> f64 {
        if v1 > self.offer_to_1(v2) {
            v1
        } else {
            v2
        }
    }

    /// Diagnostic function whose region mixes both builders' offer curves
    /// exactly as in the original decomposition.
    pub fn g3(&self, v1: f64, v2: f64) -> f64 {
        if v2 > self.offer_to_2(v1) || v1 > self.offer_to_1(v2) {
            0.0
        } else if v1 <= self.offer_to_2(v2) {
            v1 - v2
        } else {
            0.0
        }
    }

    /// Lower end (in `v1`) of the set where builder 2 would refuse builder
    /// 1's offer: `v2 <= offer_to_2(v1)` iff `phi_2(v2) <= v1`.
    fn refuse_from(&self, v2: f64) -> f64 {
        let (lo1, _) = self.f1.truncated_support();
        lo1.max(self.f2.virtual_value_unchecked(v2))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GIntegrals {
    pub int_g1_minus_g2: f64,
    pub int_g3: f64,
    pub error: f64,
}

/// Double integrals of `g1 - g2` and `g3` against `f1 x f2`. The inner
/// integral over `v1` runs between the offer curves, so both kinks are
/// panel boundaries.
pub fn g_integrals(f1: &ValueDistribution, f2: &ValueDistribution, budget: Budget) -> Result<GIntegrals> {
    let curves = OfferCurves::new(f1, f2)?;
    let (lo1, hi1) = f1.truncated_support();
    let (lo2, hi2) = f2.truncated_support();
    let opts = QuadOptions::rel(budget.rel_tol);
    let inner = opts.inner();

    let mut outer_points = vec![lo2, hi2];
    for p in [curves.inv2.invert(lo1), Some(curves.inv1.sup()), curves.inv2.invert(hi1)].into_iter().flatten() {
        if p > lo2 && p < hi2 {
            outer_points.push(p);
        }
    }
    if !f2.is_bounded() {
        outer_points.extend(f2.quantile_grid(9));
    }
    outer_points.sort_by(f64::total_cmp);
    outer_points.dedup();

    let failure = Cell::new(None);
    let band = |v2: f64, upper: f64| -> f64 {
        let a = curves.refuse_from(v2);
        let b = upper.min(hi1);
        if b.partial_cmp(&a) != Some(std::cmp::Ordering::Greater) {
            return 0.0;
        }
        match integrate_with(|v1| (v1 - v2) * f1.pdf(v1), &[a, b], inner) {
            Ok(q) => q.value,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        }
    };

    let diff = integrate_with(|v2| f2.pdf(v2) * band(v2, curves.offer_to_1(v2)), &outer_points, opts);
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let diff = diff?;
    let g3 = integrate_with(
        |v2| f2.pdf(v2) * band(v2, curves.offer_to_1(v2).min(curves.offer_to_2(v2))),
        &outer_points,
        opts,
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    let g3 = g3?;
    Ok(GIntegrals {
        int_g1_minus_g2: diff.value,
        int_g3: g3.value,
        error: diff.error + g3.error + budget.rel_tol * (diff.value.abs() + g3.value.abs()),
    })
}

fn require_preconditions(f1: &ValueDistribution, f2: &ValueDistribution) -> Result<()> {
    f1.check_monotone_virtual_value()?;
    f2.check_monotone_virtual_value()?;
    let order = check_hazard_order(f1, f2, HAZARD_GRID);
    if !order.ordered {
        return Err(Error::MechanismUnsupported(format!(
            "builder 1 must dominate builder 2 in the hazard-rate order (min gap {})",
            order.min_gap
        )));
    }
    Ok(())
}

fn entry_error(sv: &StageValues, value: f64, stderr: impl Fn(&crate::resale::StageErrors) -> f64, rel_tol: f64) -> f64 {
    match &sv.stderr {
        Some(e) => stderr(e),
        None => rel_tol * value.abs(),
    }
}

/// Computes both margins and the non-builder revenue, plus the `g`
/// integrals as diagnostics.
pub fn lemma1_margins(
    f1: &ValueDistribution,
    f2: &ValueDistribution,
    method: Method,
    budget: Budget,
    stream: RandomStream,
) -> Result<LemmaReport> {
    require_preconditions(f1, f2)?;
    let spec = GameSpec::new(vec![*f1, *f2], ResalePolicy::OptimalOffer, method, budget, stream)?;
    let table = stage_table(&spec)?;
    let (own1, own2, base) = (&table.owners[0], &table.owners[1], &table.baseline);
    let tol = budget.rel_tol;

    let margin1 = own1.p - own2.s[0];
    let margin2 = own2.p - own1.s[1];
    let p0 = base.p;
    let err1 = entry_error(own1, own1.p, |e| e.p, tol).hypot(entry_error(own2, own2.s[0], |e| e.s[0], tol));
    let err2 = entry_error(own2, own2.p, |e| e.p, tol).hypot(entry_error(own1, own1.s[1], |e| e.s[1], tol));
    let err0 = entry_error(base, p0, |e| e.p, tol);

    let g = g_integrals(f1, f2, budget)?;
    let sigmas = 3.0;
    let holds = margin1 - margin2 > sigmas * err1.hypot(err2) && margin2 - p0 > sigmas * err2.hypot(err0);
    Ok(LemmaReport {
        margin1,
        margin2,
        p0,
        int_g1_minus_g2: g.int_g1_minus_g2,
        int_g3: g.int_g3,
        holds,
        method,
        tolerances: LemmaTolerances { margin1: err1, margin2: err2, p0: err0, g_integrals: g.error, sigmas },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepFamily {
    /// `uniform(0, hi1)` against `uniform(0, hi2)` with `hi1 > hi2`.
    UniformScale,
    /// `lognormal(mu1, 1)` against `lognormal(mu2, 1)` with `mu1 > mu2`.
    LognormalMu,
}

impl std::str::FromStr for SweepFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform_scale" => Ok(SweepFamily::UniformScale),
            "lognormal_mu" => Ok(SweepFamily::LognormalMu),
            other => Err(Error::Domain(format!("unknown family `{other}` (uniform_scale | lognormal_mu)"))),
        }
    }
}

pub const UNIFORM_HI_RANGE: (f64, f64) = (0.5, 2.0);
pub const LOGNORMAL_MU_RANGE: (f64, f64) = (0.0, 3.0);

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPair {
    pub f1: ValueDistribution,
    pub f2: ValueDistribution,
    /// Strict hazard order and monotone virtual values both verified.
    pub certified: bool,
    pub skip_reason: Option<String>,
    pub report: Option<LemmaReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub family: SweepFamily,
    pub seed: u64,
    pub pairs: Vec<SweepPair>,
    pub evaluated: usize,
    pub holds: usize,
    pub skipped: usize,
    pub min_slack: Option<f64>,
}

/// Certifies one pair and, if it qualifies, runs the margin computation.
pub fn sweep_pair(
    f1: ValueDistribution,
    f2: ValueDistribution,
    method: Method,
    budget: Budget,
    stream: RandomStream,
) -> Result<SweepPair> {
    let order = check_hazard_order(&f1, &f2, HAZARD_GRID);
    let monotone = f1.check_monotone_virtual_value().and(f2.check_monotone_virtual_value());
    let skip_reason = if !order.strict {
        Some(format!("no strict hazard-rate order (min gap {})", order.min_gap))
    } else if let Err(e) = &monotone {
        Some(e.to_string())
    } else {
        None
    };
    let certified = skip_reason.is_none();
    let report = if certified { Some(lemma1_margins(&f1, &f2, method, budget, stream)?) } else { None };
    Ok(SweepPair { f1, f2, certified, skip_reason, report })
}

fn draw_pair(family: SweepFamily, stream: RandomStream) -> Result<(ValueDistribution, ValueDistribution)> {
    let mut rng = stream.rng();
    let (lo, hi) = match family {
        SweepFamily::UniformScale => UNIFORM_HI_RANGE,
        SweepFamily::LognormalMu => LOGNORMAL_MU_RANGE,
    };
    let a = lo + (hi - lo) * rng.uniform();
    let b = lo + (hi - lo) * rng.uniform();
    let (big, small) = if a >= b { (a, b) } else { (b, a) };
    Ok(match family {
        SweepFamily::UniformScale => (ValueDistribution::uniform(0.0, big)?, ValueDistribution::uniform(0.0, small)?),
        SweepFamily::LognormalMu => {
            (ValueDistribution::lognormal(big, 1.0)?, ValueDistribution::lognormal(small, 1.0)?)
        }
    })
}

/// Runs the margin check on `n_pairs` random ordered pairs of a family.
/// Pairs are drawn and evaluated on their own derived streams, so the report
/// does not depend on evaluation order.
pub fn hazard_sweep(
    n_pairs: usize,
    family: SweepFamily,
    stream: RandomStream,
    method: Method,
    budget: Budget,
) -> Result<SweepReport> {
    if n_pairs == 0 {
        return Err(Error::Domain("a sweep needs at least one pair".into()));
    }
    let pairs = (0..n_pairs)
        .into_par_iter()
        .map(|k| {
            let pair_stream = stream.derive(k as u64);
            let (f1, f2) = draw_pair(family, pair_stream)?;
            sweep_pair(f1, f2, method, budget, pair_stream.derive(u64::MAX))
        })
        .collect::<Result<Vec<_>>>()?;
    let reports: Vec<&LemmaReport> = pairs.iter().filter_map(|p| p.report.as_ref()).collect();
    Ok(SweepReport {
        family,
        seed: stream.seed,
        evaluated: reports.len(),
        holds: reports.iter().filter(|r| r.holds).count(),
        skipped: pairs.len() - reports.len(),
        min_slack: reports.iter().map(|r| r.slack()).reduce(f64::min),
        pairs,
    })
}
