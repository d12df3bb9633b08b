//! Period-2 mechanisms and their expected stage values.
//!
//! Three mechanisms are covered: the plain just-in-time second-price auction
//! run when no builder owns the right, the optimal take-it-or-leave-it offer
//! of a builder-owner facing a single rival, and the second-price resale with
//! a reserve equal to a markup of the owner's own value.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::distributions::{ValueDistribution, VirtualValueInverse};
use crate::error::{Error, Result};
use crate::numerics::{
    integrate_with, mc_estimate_vec, McEstimate, QuadOptions, RandomStream, StreamRng, DEFAULT_CHUNK, DEFAULT_REL_TOL,
    DEFAULT_SAMPLES,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum PolicyRepr {
    OptimalOffer,
    MarkupSecondPrice { markup: f64 },
}

/// How a builder-owner resells the right once values are realized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolicyRepr", into = "PolicyRepr")]
pub enum ResalePolicy {
    /// Posted price solving `phi_rival(price) = own value`; two builders only.
    OptimalOffer,
    /// Second-price auction among the other builders with reserve
    /// `markup * own value`.
    MarkupSecondPrice { markup: f64 },
}

impl ResalePolicy {
    pub fn markup(markup: f64) -> Result<Self> {
        PolicyRepr::MarkupSecondPrice { markup }.try_into()
    }
}

impl TryFrom<PolicyRepr> for ResalePolicy {
    type Error = Error;

    fn try_from(repr: PolicyRepr) -> Result<Self> {
        match repr {
            PolicyRepr::OptimalOffer => Ok(ResalePolicy::OptimalOffer),
            PolicyRepr::MarkupSecondPrice { markup } if markup >= 1.0 && markup.is_finite() => {
                Ok(ResalePolicy::MarkupSecondPrice { markup })
            }
            PolicyRepr::MarkupSecondPrice { markup } => {
                Err(Error::Domain(format!("markup must be finite and >= 1, got {markup}")))
            }
        }
    }
}

impl From<ResalePolicy> for PolicyRepr {
    fn from(p: ResalePolicy) -> Self {
        match p {
            ResalePolicy::OptimalOffer => PolicyRepr::OptimalOffer,
            ResalePolicy::MarkupSecondPrice { markup } => PolicyRepr::MarkupSecondPrice { markup },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quadrature" => Ok(Method::Quadrature),
            "monte_carlo" => Ok(Method::MonteCarlo),
            other => Err(Error::Domain(format!("unknown method `{other}` (quadrature | monte_carlo)"))),
        }
    }
}

/// Numerical budget shared by both estimation methods.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub samples: usize,
    pub rel_tol: f64,
    pub chunk: usize,
}

impl Default for Budget {
    fn default() -> Self {
        Self { samples: DEFAULT_SAMPLES, rel_tol: DEFAULT_REL_TOL, chunk: DEFAULT_CHUNK }
    }
}

impl Budget {
    pub fn samples(samples: usize) -> Self {
        Self { samples, ..Self::default() }
    }

    pub fn rel_tol(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }
}

/// Realized result of one period-2 subgame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResaleOutcome {
    pub proposer: usize,
    pub payment: f64,
    pub owner_profit: f64,
    pub surplus: Vec<f64>,
}

/// Monte Carlo standard errors attached to a [`StageValues`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageErrors {
    pub p: f64,
    pub s: Vec<f64>,
    pub shares: Vec<f64>,
}

/// Expected period-2 payoffs for a fixed period-1 owner.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageValues {
    /// `None` when a non-builder owns the right (plain JIT auction).
    pub owner: Option<usize>,
    /// Expected owner profit; for a non-builder owner this is the JIT revenue.
    pub p: f64,
    /// Expected surplus of every builder (zero for the owner).
    pub s: Vec<f64>,
    /// Probability that each builder ends up proposing.
    pub shares: Vec<f64>,
    pub method: Method,
    pub stderr: Option<StageErrors>,
}

impl StageValues {
    /// Win probabilities of the JIT auction (same as `shares`).
    pub fn win_probabilities(&self) -> &[f64] {
        &self.shares
    }

    fn from_estimates(owner: Option<usize>, n: usize, est: &[McEstimate]) -> Self {
        let mean: Vec<f64> = est.iter().map(|e| e.mean).collect();
        let se: Vec<f64> = est.iter().map(|e| e.stderr).collect();
        StageValues {
            owner,
            p: mean[0],
            s: mean[1..=n].to_vec(),
            shares: mean[n + 1..].to_vec(),
            method: Method::MonteCarlo,
            stderr: Some(StageErrors { p: se[0], s: se[1..=n].to_vec(), shares: se[n + 1..].to_vec() }),
        }
    }
}

/// Posted price for the single rival; `None` when the owner keeps the right.
pub fn optimal_offer_price(owner_value: f64, other: &ValueDistribution) -> Result<Option<f64>> {
    Ok(other.virtual_value_inverse()?.invert(owner_value))
}

/// A resale mechanism prepared for one owner and one set of distributions.
#[derive(Debug, Clone)]
pub struct ResaleMechanism {
    owner: usize,
    n: usize,
    rule: Rule,
}

#[derive(Debug, Clone)]
enum Rule {
    Offer { buyer: usize, inverse: VirtualValueInverse },
    Markup(f64),
}

impl ResaleMechanism {
    pub fn new(owner: usize, dists: &[ValueDistribution], policy: ResalePolicy) -> Result<Self> {
        let n = dists.len();
        if n < 2 {
            return Err(Error::Domain(format!("resale needs at least two builders, got {n}")));
        }
        if owner >= n {
            return Err(Error::Domain(format!("owner index {owner} out of range for {n} builders")));
        }
        let rule = match policy {
            ResalePolicy::OptimalOffer => {
                if n != 2 {
                    return Err(Error::MechanismUnsupported(format!(
                        "optimal offer resale is defined for two builders, got {n}; use markup_second_price"
                    )));
                }
                let buyer = 1 - owner;
                Rule::Offer { buyer, inverse: dists[buyer].virtual_value_inverse()? }
            }
            ResalePolicy::MarkupSecondPrice { markup } => Rule::Markup(markup),
        };
        Ok(Self { owner, n, rule })
    }

    pub fn realize(&self, values: &[f64]) -> Result<ResaleOutcome> {
        if values.len() != self.n {
            return Err(Error::Domain(format!("expected {} values, got {}", self.n, values.len())));
        }
        let mut surplus = vec![0.0; self.n];
        let (proposer, payment) = self.settle(values);
        let owner_profit = if proposer == self.owner { values[self.owner] } else { payment };
        if proposer != self.owner {
            surplus[proposer] = values[proposer] - payment;
        }
        Ok(ResaleOutcome { proposer, payment, owner_profit, surplus })
    }

    /// Returns `(proposer, payment)`; payment is zero when the owner keeps.
    #[inline]
    fn settle(&self, values: &[f64]) -> (usize, f64) {
        let own = values[self.owner];
        match &self.rule {
            Rule::Offer { buyer, inverse } => match inverse.invert(own) {
                Some(price) if values[*buyer] > price => (*buyer, price),
                _ => (self.owner, 0.0),
            },
            Rule::Markup(markup) => {
                let reserve = markup * own;
                let mut best: Option<usize> = None;
                let mut second = f64::NEG_INFINITY;
                for (j, &v) in values.iter().enumerate() {
                    if j == self.owner {
                        continue;
                    }
                    match best {
                        Some(b) if v <= values[b] => second = second.max(v),
                        Some(b) => {
                            second = second.max(values[b]);
                            best = Some(j);
                        }
                        None => best = Some(j),
                    }
                }
                match best {
                    Some(b) if values[b] > reserve => (b, reserve.max(second)),
                    _ => (self.owner, 0.0),
                }
            }
        }
    }

    fn sample_into(&self, dists: &[ValueDistribution], rng: &mut StreamRng, values: &mut [f64], out: &mut [f64]) {
        for (v, d) in values.iter_mut().zip(dists) {
            *v = d.draw(rng);
        }
        let (proposer, payment) = self.settle(values);
        if proposer == self.owner {
            out[0] = values[self.owner];
        } else {
            out[0] = payment;
            out[1 + proposer] = values[proposer] - payment;
        }
        out[1 + self.n + proposer] = 1.0;
    }
}

pub fn resale_realize(
    owner: usize,
    values: &[f64],
    dists: &[ValueDistribution],
    policy: ResalePolicy,
) -> Result<ResaleOutcome> {
    ResaleMechanism::new(owner, dists, policy)?.realize(values)
}

/// Expected owner profit, surpluses and proposal shares for a fixed owner.
pub fn stage_values(
    owner: usize,
    dists: &[ValueDistribution],
    policy: ResalePolicy,
    method: Method,
    budget: Budget,
    stream: RandomStream,
) -> Result<StageValues> {
    let mech = ResaleMechanism::new(owner, dists, policy)?;
    match method {
        Method::MonteCarlo => {
            let n = dists.len();
            let est = mc_estimate_vec(
                |rng, out| {
                    let mut values = [0.0; 16];
                    if n <= values.len() {
                        mech.sample_into(dists, rng, &mut values[..n], out);
                    } else {
                        let mut values = vec![0.0; n];
                        mech.sample_into(dists, rng, &mut values, out);
                    }
                },
                1 + 2 * n,
                check_samples(budget.samples)?,
                stream,
                budget.chunk,
            );
            Ok(StageValues::from_estimates(Some(owner), n, &est))
        }
        Method::Quadrature => match mech.rule {
            Rule::Offer { buyer, inverse } => offer_stage_quadrature(owner, buyer, dists, &inverse, budget.rel_tol),
            Rule::Markup(_) => Err(Error::MechanismUnsupported(
                "quadrature stage values are available for two-builder optimal offers only".into(),
            )),
        },
    }
}

fn check_samples(n: usize) -> Result<usize> {
    if n < 2 {
        return Err(Error::Domain(format!("Monte Carlo needs at least 2 samples, got {n}")));
    }
    Ok(n)
}

fn offer_stage_quadrature(
    owner: usize,
    buyer: usize,
    dists: &[ValueDistribution],
    inverse: &VirtualValueInverse,
    rel_tol: f64,
) -> Result<StageValues> {
    let fo = dists[owner];
    let fb = dists[buyer];
    let (lo, hi) = fo.truncated_support();
    let (_, buyer_hi) = fb.truncated_support();
    let opts = QuadOptions::rel(rel_tol);

    // The offer price switches regime where the owner's value crosses the
    // ends of the buyer's virtual-value range.
    let mut points = vec![lo, hi];
    let (blo, _) = fb.truncated_support();
    for y in [inverse.sup(), fb.virtual_value_unchecked(blo)] {
        if y > lo && y < hi {
            points.push(y);
        }
    }
    if !fo.is_bounded() {
        points.extend(fo.quantile_grid(9));
    }
    points.sort_by(f64::total_cmp);
    points.dedup();

    let p = integrate_with(
        |v| {
            let profit = match inverse.invert(v) {
                Some(price) => price * fb.sf(price) + v * fb.cdf(price),
                None => v,
            };
            fo.pdf(v) * profit
        },
        &points,
        opts,
    )?
    .value;

    let share =
        integrate_with(|v| fo.pdf(v) * inverse.invert(v).map_or(0.0, |price| fb.sf(price)), &points, opts)?.value;

    // E[(v_b - price)^+ | v_o] = integral of the buyer's survival above price
    let inner = opts.inner();
    let failure = Cell::new(None);
    let surplus = integrate_with(
        |v| match inverse.invert(v) {
            Some(price) if price < buyer_hi => match integrate_with(|x| fb.sf(x), &[price, buyer_hi], inner) {
                Ok(q) => fo.pdf(v) * q.value,
                Err(e) => {
                    failure.set(Some(e));
                    f64::NAN
                }
            },
            _ => 0.0,
        },
        &points,
        opts,
    );
    let surplus = match (failure.into_inner(), surplus) {
        (Some(e), _) => return Err(e),
        (None, r) => r?.value,
    };

    let mut s = vec![0.0; 2];
    s[buyer] = surplus;
    let mut shares = vec![0.0; 2];
    shares[buyer] = share;
    shares[owner] = 1.0 - share;
    Ok(StageValues { owner: Some(owner), p, s, shares, method: Method::Quadrature, stderr: None })
}

/// The just-in-time second-price auction with no builder-owner: revenue is
/// the second-highest value and the highest-value builder proposes.
pub fn baseline_jit(
    dists: &[ValueDistribution],
    method: Method,
    budget: Budget,
    stream: RandomStream,
) -> Result<StageValues> {
    let n = dists.len();
    if n < 2 {
        return Err(Error::Domain(format!("the JIT auction needs at least two builders, got {n}")));
    }
    match method {
        Method::MonteCarlo => {
            let est = mc_estimate_vec(
                |rng, out| {
                    let mut top = (0usize, f64::NEG_INFINITY);
                    let mut second = f64::NEG_INFINITY;
                    for (j, d) in dists.iter().enumerate() {
                        let v = d.draw(rng);
                        if v > top.1 {
                            second = top.1;
                            top = (j, v);
                        } else if v > second {
                            second = v;
                        }
                    }
                    out[0] = second;
                    out[1 + top.0] = top.1 - second;
                    out[1 + n + top.0] = 1.0;
                },
                1 + 2 * n,
                check_samples(budget.samples)?,
                stream,
                budget.chunk,
            );
            Ok(StageValues::from_estimates(None, n, &est))
        }
        Method::Quadrature => baseline_quadrature(dists, budget.rel_tol),
    }
}

fn breakpoints(dists: &[ValueDistribution]) -> Vec<f64> {
    let mut points = Vec::new();
    for d in dists {
        let (lo, hi) = d.truncated_support();
        points.push(lo);
        points.push(hi);
        if !d.is_bounded() {
            points.extend(d.quantile_grid(9));
            points.push(d.support().0);
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    points
}

fn others_cdf(dists: &[ValueDistribution], i: usize, x: f64) -> f64 {
    dists.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, d)| d.cdf(x)).product()
}

fn baseline_quadrature(dists: &[ValueDistribution], rel_tol: f64) -> Result<StageValues> {
    let n = dists.len();
    let points = breakpoints(dists);
    let base = points[0];
    let opts = QuadOptions::rel(rel_tol);

    // E[Y] = base + integral of P(Y > x) for Y >= base.
    let second_tail = |x: f64| {
        let all: f64 = dists.iter().map(|d| d.cdf(x)).product();
        let exactly_one_above: f64 = (0..n).map(|i| dists[i].sf(x) * others_cdf(dists, i, x)).sum();
        (1.0 - all - exactly_one_above).max(0.0)
    };
    let p = base + integrate_with(second_tail, &points, opts)?.value;

    let mut s = Vec::with_capacity(n);
    let mut shares = Vec::with_capacity(n);
    for i in 0..n {
        s.push(integrate_with(|x| others_cdf(dists, i, x) * dists[i].sf(x), &points, opts)?.value);
        shares.push(integrate_with(|x| dists[i].pdf(x) * others_cdf(dists, i, x), &points, opts)?.value);
    }
    Ok(StageValues { owner: None, p, s, shares, method: Method::Quadrature, stderr: None })
}

/// Expected highest value across builders (total surplus available).
pub fn expected_max(dists: &[ValueDistribution], rel_tol: f64) -> Result<f64> {
    let points = breakpoints(dists);
    let base = points[0];
    let tail = |x: f64| 1.0 - dists.iter().map(|d| d.cdf(x)).product::<f64>();
    Ok(base + integrate_with(tail, &points, QuadOptions::rel(rel_tol))?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkupGrid {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl MarkupGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.min >= 1.0 && self.max >= self.min && self.step > 0.0) {
            return Err(Error::Domain(format!("markup grid needs 1 <= min <= max and step > 0, got {self:?}")));
        }
        let count = ((self.max - self.min) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|k| self.min + k as f64 * self.step).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MarkupPoint {
    pub markup: f64,
    pub profit: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarkupScan {
    pub owner: usize,
    pub markup: f64,
    pub profit_curve: Vec<MarkupPoint>,
}

/// Owner profit over a grid of markups. Every grid point reuses the same
/// stream, so the curve is computed with common random numbers.
pub fn optimal_markup(
    dists: &[ValueDistribution],
    owner: usize,
    grid: MarkupGrid,
    budget: Budget,
    stream: RandomStream,
) -> Result<MarkupScan> {
    let mut profit_curve = Vec::new();
    for markup in grid.points()? {
        let sv = stage_values(owner, dists, ResalePolicy::markup(markup)?, Method::MonteCarlo, budget, stream)?;
        let stderr = sv.stderr.as_ref().map_or(0.0, |e| e.p);
        profit_curve.push(MarkupPoint { markup, profit: sv.p, stderr });
    }
    let best = profit_curve
        .iter()
        .fold(None::<&MarkupPoint>, |acc, pt| match acc {
            Some(b) if b.profit >= pt.profit => Some(b),
            _ => Some(pt),
        })
        .map(|b| b.markup)
        .unwrap_or(grid.min);
    Ok(MarkupScan { owner, markup: best, profit_curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn u(lo: f64, hi: f64) -> ValueDistribution {
        ValueDistribution::uniform(lo, hi).unwrap()
    }

    fn example1() -> Vec<ValueDistribution> {
        vec![u(0.0, 1.25), u(0.0, 1.0)]
    }

    #[test]
    fn offer_prices_from_example_one() {
        assert!((optimal_offer_price(0.5, &u(0.0, 1.0)).unwrap().unwrap() - 0.75).abs() < 1e-15);
        assert!((optimal_offer_price(0.2, &u(0.0, 1.25)).unwrap().unwrap() - 0.725).abs() < 1e-15);
        assert_eq!(optimal_offer_price(1.1, &u(0.0, 1.0)).unwrap(), None);
    }

    #[test]
    fn realize_offer_sale_and_refusal() {
        let d = example1();
        let out = resale_realize(0, &[0.5, 0.9], &d, ResalePolicy::OptimalOffer).unwrap();
        assert_eq!(out.proposer, 1);
        assert!((out.payment - 0.75).abs() < 1e-15);
        assert!((out.owner_profit - 0.75).abs() < 1e-15);
        assert!((out.surplus[1] - 0.15).abs() < 1e-12);
        assert_eq!(out.surplus[0], 0.0);

        let out = resale_realize(0, &[0.5, 0.6], &d, ResalePolicy::OptimalOffer).unwrap();
        assert_eq!((out.proposer, out.payment, out.owner_profit), (0, 0.0, 0.5));
    }

    #[test]
    fn boundary_tie_is_no_sale() {
        let d = example1();
        let out = resale_realize(0, &[0.5, 0.75], &d, ResalePolicy::OptimalOffer).unwrap();
        assert_eq!(out.proposer, 0);
        let d3 = vec![u(0.0, 10.0); 3];
        let out = resale_realize(0, &[2.0, 1.0, 6.0], &d3, ResalePolicy::markup(3.0).unwrap()).unwrap();
        assert_eq!(out.proposer, 0);
    }

    #[test]
    fn realize_markup_auction() {
        let d = vec![u(0.0, 10.0); 3];
        let out = resale_realize(0, &[2.0, 5.0, 7.0], &d, ResalePolicy::markup(3.0).unwrap()).unwrap();
        assert_eq!(out.proposer, 2);
        assert_eq!(out.payment, 6.0);
        assert_eq!(out.owner_profit, 6.0);
        assert_eq!(out.surplus, vec![0.0, 0.0, 1.0]);
        // second-highest bid above the reserve sets the price
        let out = resale_realize(1, &[9.0, 2.0, 7.0], &d, ResalePolicy::markup(3.0).unwrap()).unwrap();
        assert_eq!((out.proposer, out.payment), (0, 7.0));
    }

    #[test]
    fn optimal_offer_rejects_three_builders() {
        let d = vec![u(0.0, 1.0); 3];
        assert!(matches!(
            resale_realize(0, &[0.1, 0.2, 0.3], &d, ResalePolicy::OptimalOffer),
            Err(Error::MechanismUnsupported(_))
        ));
    }

    #[test]
    fn policy_schema() {
        let p: ResalePolicy = serde_json::from_str(r#"{"kind":"markup_second_price","markup":3.0}"#).unwrap();
        assert_eq!(p, ResalePolicy::MarkupSecondPrice { markup: 3.0 });
        assert!(serde_json::from_str::<ResalePolicy>(r#"{"kind":"markup_second_price","markup":0.5}"#).is_err());
        let p: ResalePolicy = serde_json::from_str(r#"{"kind":"optimal_offer"}"#).unwrap();
        assert_eq!(serde_json::to_string(&p).unwrap(), r#"{"kind":"optimal_offer"}"#);
    }

    #[test]
    fn example_one_quadrature_stage_values() {
        let d = example1();
        let q = Method::Quadrature;
        let b = Budget::rel_tol(1e-10);
        let s = RandomStream::new(0);
        let owner2 = stage_values(1, &d, ResalePolicy::OptimalOffer, q, b, s).unwrap();
        assert!((owner2.p - 151.0 / 240.0).abs() < 1e-9);
        assert!((owner2.s[0] - 31.0 / 480.0).abs() < 1e-9);
        let owner1 = stage_values(0, &d, ResalePolicy::OptimalOffer, q, b, s).unwrap();
        assert!((owner1.p - 83.0 / 120.0).abs() < 1e-9);
        assert!((owner1.s[1] - 1.0 / 30.0).abs() < 1e-9);
        assert!((owner1.shares[1] - 0.2).abs() < 1e-9);
    }

    #[test]
    fn example_one_baseline() {
        let base = baseline_jit(&example1(), Method::Quadrature, Budget::default(), RandomStream::new(0)).unwrap();
        assert!((base.p - 11.0 / 30.0).abs() < 1e-9);
        assert!((base.s[0] - 31.0 / 120.0).abs() < 1e-9);
        assert!((base.s[1] - 2.0 / 15.0).abs() < 1e-9);
        assert!((base.shares[0] - 0.6).abs() < 1e-9);
        assert!((base.shares[1] - 0.4).abs() < 1e-9);
    }

    #[test]
    fn worthless_rival_leaves_own_value() {
        let d = vec![u(0.0, 1.0), u(0.0, 1e-6)];
        let sv = stage_values(
            0,
            &d,
            ResalePolicy::OptimalOffer,
            Method::Quadrature,
            Budget::default(),
            RandomStream::new(0),
        )
        .unwrap();
        assert!((sv.p - 0.5).abs() < 1e-6);
    }

    #[test]
    fn markup_quadrature_is_unsupported() {
        let d = example1();
        let r = stage_values(
            0,
            &d,
            ResalePolicy::markup(2.0).unwrap(),
            Method::Quadrature,
            Budget::default(),
            RandomStream::new(0),
        );
        assert!(matches!(r, Err(Error::MechanismUnsupported(_))));
    }

    #[test]
    fn huge_markup_means_owner_keeps() {
        let d = vec![
            ValueDistribution::lognormal(2.18, 1.0).unwrap(),
            ValueDistribution::lognormal(1.99, 1.0).unwrap(),
            ValueDistribution::lognormal(1.0, 1.0).unwrap(),
        ];
        let sv = stage_values(
            0,
            &d,
            ResalePolicy::markup(1e3).unwrap(),
            Method::MonteCarlo,
            Budget::samples(20_000),
            RandomStream::new(5),
        )
        .unwrap();
        assert!(sv.shares[0] > 0.999);
        let own = stage_values(
            0,
            &d,
            ResalePolicy::markup(1e9).unwrap(),
            Method::MonteCarlo,
            Budget::samples(20_000),
            RandomStream::new(5),
        )
        .unwrap();
        assert!((sv.p - own.p).abs() < 0.01 * own.p);
    }

    #[test]
    fn flat_curve_for_worthless_rivals() {
        let d = vec![u(0.0, 1.0), u(0.0, 1e-9), u(0.0, 1e-9)];
        let grid = MarkupGrid { min: 1.0, max: 3.0, step: 0.5 };
        let scan = optimal_markup(&d, 0, grid, Budget::samples(10_000), RandomStream::new(2)).unwrap();
        assert_eq!(scan.profit_curve.len(), 5);
        let first = scan.profit_curve[0].profit;
        for pt in &scan.profit_curve {
            assert!((pt.profit - first).abs() < 1e-8);
        }
        assert!((first - 0.5).abs() < 3.0 * scan.profit_curve[0].stderr + 1e-8);
    }

    #[test]
    fn grid_validation() {
        assert!(MarkupGrid { min: 0.5, max: 2.0, step: 0.5 }.points().is_err());
        assert_eq!(MarkupGrid { min: 1.0, max: 5.0, step: 0.25 }.points().unwrap().len(), 17);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn welfare_accounting(owner in 0usize..3, v in proptest::collection::vec(0.0f64..20.0, 3), m in 1.0f64..5.0) {
            let d = vec![u(0.0, 20.0); 3];
            let out = resale_realize(owner, &v, &d, ResalePolicy::markup(m).unwrap()).unwrap();
            let total = out.owner_profit + out.surplus.iter().sum::<f64>();
            if out.proposer == owner {
                prop_assert_eq!(out.payment, 0.0);
                prop_assert_eq!(out.owner_profit, v[owner]);
            } else {
                prop_assert!((total - v[out.proposer]).abs() < 1e-12);
                prop_assert!(out.payment >= m * v[owner]);
            }
            prop_assert!(out.surplus.iter().all(|&s| s >= 0.0));
        }

        #[test]
        fn offer_price_above_own_value(v in 0.0f64..1.0, hi in 0.5f64..3.0) {
            if let Some(price) = optimal_offer_price(v, &u(0.0, hi)).unwrap() {
                prop_assert!(price >= v);
            }
        }

        #[test]
        fn stage_profit_bounds(h1 in 0.3f64..3.0, h2 in 0.3f64..3.0) {
            let d = vec![u(0.0, h1), u(0.0, h2)];
            let emax = expected_max(&d, 1e-10).unwrap();
            for owner in 0..2 {
                let sv = stage_values(owner, &d, ResalePolicy::OptimalOffer, Method::Quadrature, Budget::default(), RandomStream::new(0)).unwrap();
                prop_assert!(sv.p >= d[owner].mean() - 1e-9);
                prop_assert!(sv.p <= emax + 1e-9);
                prop_assert!(sv.s.iter().all(|&s| s >= -1e-12));
            }
        }
    }

    #[test]
    fn symmetric_builders_are_interchangeable() {
        let d = vec![u(0.0, 1.0), u(0.0, 1.0)];
        let q = |o| {
            stage_values(o, &d, ResalePolicy::OptimalOffer, Method::Quadrature, Budget::default(), RandomStream::new(0))
                .unwrap()
        };
        let (a, b) = (q(0), q(1));
        assert!((a.p - b.p).abs() < 1e-12);
        assert!((a.s[1] - b.s[0]).abs() < 1e-12);
    }
}
