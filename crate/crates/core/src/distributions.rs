//! Builder value distributions and the virtual-value machinery built on them.

use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::numerics::{find_root, StreamRng};

/// Quantile level at which unbounded supports are truncated (both tails).
pub const TAIL_QUANTILE: f64 = 1e-9;

/// Grid size of the monotone-virtual-value scan.
pub const MONOTONE_GRID: usize = 1024;

const MONOTONE_SLACK: f64 = 1e-12;
const INVERSE_TOL: f64 = 1e-12;

/// Parametric law of a builder's value. Use [`ValueDistribution`] for a
/// validated instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Law {
    Uniform { lo: f64, hi: f64 },
    Lognormal { mu: f64, sigma: f64 },
}

/// A validated value distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Law", into = "Law")]
pub struct ValueDistribution(Law);

impl TryFrom<Law> for ValueDistribution {
    type Error = Error;

    fn try_from(law: Law) -> Result<Self> {
        match law {
            Law::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidDistribution(format!(
                        "uniform needs finite lo < hi, got lo={lo}, hi={hi}"
                    )));
                }
            }
            Law::Lognormal { mu, sigma } => {
                if !(mu.is_finite() && sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::InvalidDistribution(format!(
                        "lognormal needs finite mu and sigma > 0, got mu={mu}, sigma={sigma}"
                    )));
                }
            }
        }
        Ok(Self(law))
    }
}

impl From<ValueDistribution> for Law {
    fn from(d: ValueDistribution) -> Law {
        d.0
    }
}

/// CDF, density and hazard rate at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub cdf: f64,
    pub pdf: f64,
    /// `+inf` at or above the upper end of the support.
    pub hazard: f64,
}

impl ValueDistribution {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        Law::Uniform { lo, hi }.try_into()
    }

    pub fn lognormal(mu: f64, sigma: f64) -> Result<Self> {
        Law::Lognormal { mu, sigma }.try_into()
    }

    pub fn law(&self) -> Law {
        self.0
    }

    /// Same family with every value multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("scale factor must be positive, got {c}")));
        }
        match self.0 {
            Law::Uniform { lo, hi } => Self::uniform(lo * c, hi * c),
            Law::Lognormal { mu, sigma } => Self::lognormal(mu + c.ln(), sigma),
        }
    }

    /// Exact support; the upper end is `+inf` for lognormal laws.
    pub fn support(&self) -> (f64, f64) {
        match self.0 {
            Law::Uniform { lo, hi } => (lo, hi),
            Law::Lognormal { .. } => (0.0, f64::INFINITY),
        }
    }

    /// Support used by quadrature and grid scans: exact when bounded,
    /// otherwise cut at the [`TAIL_QUANTILE`] quantiles.
    pub fn truncated_support(&self) -> (f64, f64) {
        match self.0 {
            Law::Uniform { lo, hi } => (lo, hi),
            Law::Lognormal { .. } => {
                (self.quantile_unchecked(TAIL_QUANTILE), self.quantile_unchecked(1.0 - TAIL_QUANTILE))
            }
        }
    }

    pub fn is_bounded(&self) -> bool {
        matches!(self.0, Law::Uniform { .. })
    }

    pub fn mean(&self) -> f64 {
        match self.0 {
            Law::Uniform { lo, hi } => 0.5 * (lo + hi),
            Law::Lognormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.0 {
            Law::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            Law::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    0.5 * erfc(-(x.ln() - mu) / (sigma * std::f64::consts::SQRT_2))
                }
            }
        }
    }

    /// Survival function `1 - cdf`, computed without cancellation in the
    /// upper tail.
    pub fn sf(&self, x: f64) -> f64 {
        match self.0 {
            Law::Uniform { .. } => 1.0 - self.cdf(x),
            Law::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    1.0
                } else {
                    0.5 * erfc((x.ln() - mu) / (sigma * std::f64::consts::SQRT_2))
                }
            }
        }
    }

    /// Density. Uniform densities are positive on the closed interval.
    pub fn pdf(&self, x: f64) -> f64 {
        match self.0 {
            Law::Uniform { lo, hi } => {
                if x >= lo && x <= hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            Law::Lognormal { mu, sigma } => {
                if x <= 0.0 {
                    0.0
                } else {
                    let z = (x.ln() - mu) / sigma;
                    (-0.5 * z * z).exp() / (x * sigma * (2.0 * std::f64::consts::PI).sqrt())
                }
            }
        }
    }

    pub fn hazard(&self, x: f64) -> f64 {
        if let Law::Uniform { hi, .. } = self.0 {
            if x >= hi {
                return f64::INFINITY;
            }
        }
        let sf = self.sf(x);
        if sf <= 0.0 {
            f64::INFINITY
        } else {
            self.pdf(x) / sf
        }
    }

    pub fn evaluate(&self, x: f64) -> Evaluation {
        Evaluation { cdf: self.cdf(x), pdf: self.pdf(x), hazard: self.hazard(x) }
    }

    pub fn quantile(&self, q: f64) -> Result<f64> {
        if !(q > 0.0 && q < 1.0) {
            return Err(Error::Domain(format!("quantile level must lie in (0, 1), got {q}")));
        }
        Ok(self.quantile_unchecked(q))
    }

    fn quantile_unchecked(&self, q: f64) -> f64 {
        match self.0 {
            Law::Uniform { lo, hi } => lo + q * (hi - lo),
            Law::Lognormal { mu, sigma } => (mu + sigma * standard_normal_quantile(q)).exp(),
        }
    }

    /// One draw by inversion of a single uniform variate.
    #[inline]
    pub fn draw(&self, rng: &mut StreamRng) -> f64 {
        self.quantile_unchecked(rng.uniform())
    }

    pub fn sample(&self, rng: &mut StreamRng, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.draw(rng)).collect()
    }

    /// Points at evenly spaced quantile levels spanning the truncated
    /// support.
    pub fn quantile_grid(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        (0..n)
            .map(|k| {
                let q = TAIL_QUANTILE + (1.0 - 2.0 * TAIL_QUANTILE) * k as f64 / (n - 1) as f64;
                self.quantile_unchecked(q)
            })
            .collect()
    }

    fn in_support(&self, x: f64) -> bool {
        match self.0 {
            Law::Uniform { lo, hi } => x >= lo && x <= hi,
            Law::Lognormal { .. } => x > 0.0 && x.is_finite(),
        }
    }

    /// `x - (1 - F(x)) / f(x)`.
    pub fn virtual_value(&self, x: f64) -> Result<f64> {
        if !self.in_support(x) {
            return Err(Error::Domain(format!("virtual value requested outside the support at {x}")));
        }
        Ok(self.virtual_value_unchecked(x))
    }

    #[inline]
    pub(crate) fn virtual_value_unchecked(&self, x: f64) -> f64 {
        match self.0 {
            Law::Uniform { hi, .. } => 2.0 * x - hi,
            Law::Lognormal { .. } => x - self.sf(x) / self.pdf(x),
        }
    }

    /// Scans the virtual value on a quantile grid and fails if it ever
    /// decreases.
    pub fn check_monotone_virtual_value(&self) -> Result<()> {
        if self.is_bounded() {
            // 2x - hi
            return Ok(());
        }
        let grid = self.quantile_grid(MONOTONE_GRID);
        let phi: Vec<f64> = grid.iter().map(|&x| self.virtual_value_unchecked(x)).collect();
        for (w, x) in phi.windows(2).zip(&grid) {
            let slack = MONOTONE_SLACK * w[0].abs().max(1.0);
            if w[1] < w[0] - slack {
                return Err(Error::MechanismUnsupported(format!(
                    "virtual value decreases near x={x}; use a markup resale policy"
                )));
            }
        }
        Ok(())
    }

    /// Validated inverse of the virtual value, reusable across many calls.
    pub fn virtual_value_inverse(&self) -> Result<VirtualValueInverse> {
        self.check_monotone_virtual_value()?;
        let (lo, hi) = self.truncated_support();
        Ok(VirtualValueInverse {
            dist: *self,
            lo,
            hi,
            phi_lo: self.virtual_value_unchecked(lo),
            phi_hi: self.virtual_value_unchecked(hi),
        })
    }
}

/// Inverse of a nondecreasing virtual value over the truncated support.
#[derive(Debug, Clone, Copy)]
pub struct VirtualValueInverse {
    dist: ValueDistribution,
    lo: f64,
    hi: f64,
    phi_lo: f64,
    phi_hi: f64,
}

impl VirtualValueInverse {
    /// Supremum of the virtual value on the searched region.
    pub fn sup(&self) -> f64 {
        self.phi_hi
    }

    /// Smallest `x` with `phi(x) = y`; `None` when `y` is above the
    /// supremum. Targets below the lowest virtual value map to the lower
    /// end of the support.
    pub fn invert(&self, y: f64) -> Option<f64> {
        if y.is_nan() || y > self.phi_hi {
            return None;
        }
        if y <= self.phi_lo {
            return Some(self.lo);
        }
        match self.dist.0 {
            Law::Uniform { hi, .. } => Some((0.5 * (y + hi)).clamp(self.lo, self.hi)),
            Law::Lognormal { .. } => {
                let d = self.dist;
                // The bracket has a sign change by construction.
                find_root(|x| d.virtual_value_unchecked(x) - y, self.lo, self.hi, INVERSE_TOL).ok()
            }
        }
    }
}

pub fn inverse_virtual_value(d: &ValueDistribution, y: f64) -> Result<Option<f64>> {
    Ok(d.virtual_value_inverse()?.invert(y))
}

/// Outcome of a pointwise hazard-rate comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HazardOrderReport {
    pub ordered: bool,
    pub strict: bool,
    /// Minimum over the grid of `hazard(b, x) - hazard(a, x)`; points where
    /// `b` has left its support are excluded.
    pub min_gap: f64,
    pub grid_size: usize,
}

/// Checks `hazard(a, x) <= hazard(b, x)`, i.e. that `a` dominates `b` in the
/// hazard-rate order, on the union of both quantile grids.
pub fn check_hazard_order(a: &ValueDistribution, b: &ValueDistribution, grid_size: usize) -> HazardOrderReport {
    let mut grid = a.quantile_grid(grid_size);
    grid.extend(b.quantile_grid(grid_size));
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut min_gap = f64::INFINITY;
    let mut ordered = true;
    for &x in &grid {
        let ha = a.hazard(x);
        let hb = b.hazard(x);
        if hb.is_infinite() {
            continue;
        }
        if ha.is_infinite() {
            ordered = false;
            min_gap = f64::NEG_INFINITY;
            continue;
        }
        let gap = hb - ha;
        if gap < -1e-12 * ha.max(hb).max(1.0) {
            ordered = false;
        }
        min_gap = min_gap.min(gap);
    }
    if min_gap == f64::INFINITY {
        min_gap = 0.0;
    }
    let strict = min_gap > 0.0;
    HazardOrderReport { ordered: ordered || strict, strict, min_gap, grid_size: grid.len() }
}

/// Standard normal quantile with one Newton polish step.
pub fn standard_normal_quantile(q: f64) -> f64 {
    let z = if q < 0.5 {
        -std::f64::consts::SQRT_2 * erfc_inv(2.0 * q)
    } else {
        std::f64::consts::SQRT_2 * erfc_inv(2.0 * (1.0 - q))
    };
    if !z.is_finite() {
        return z;
    }
    let (p, target) = if z < 0.0 {
        (0.5 * erfc(-z / std::f64::consts::SQRT_2), q)
    } else {
        (0.5 * erfc(z / std::f64::consts::SQRT_2), 1.0 - q)
    };
    let density = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if density > 0.0 {
        if z < 0.0 {
            z - (p - target) / density
        } else {
            z + (p - target) / density
        }
    } else {
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{integrate_with, QuadOptions, RandomStream};
    use proptest::prelude::*;

    fn u(lo: f64, hi: f64) -> ValueDistribution {
        ValueDistribution::uniform(lo, hi).unwrap()
    }

    fn ln(mu: f64, sigma: f64) -> ValueDistribution {
        ValueDistribution::lognormal(mu, sigma).unwrap()
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ValueDistribution::uniform(1.0, 1.0).is_err());
        assert!(ValueDistribution::uniform(2.0, 1.0).is_err());
        assert!(ValueDistribution::lognormal(0.0, 0.0).is_err());
        assert!(ValueDistribution::lognormal(f64::NAN, 1.0).is_err());
    }

    #[test]
    fn evaluate_uniform() {
        let e = u(0.0, 1.0).evaluate(0.5);
        assert_eq!((e.cdf, e.pdf, e.hazard), (0.5, 1.0, 2.0));
        let e = u(0.0, 1.25).evaluate(1.25);
        assert_eq!(e.cdf, 1.0);
        assert_eq!(e.pdf, 0.8);
        assert!(e.hazard.is_infinite() && e.hazard > 0.0);
    }

    #[test]
    fn lognormal_median() {
        assert!((ln(1.0, 1.0).cdf(std::f64::consts::E) - 0.5).abs() < 1e-15);
        let m = ln(2.18, 1.0).quantile(0.5).unwrap();
        assert!((m - 2.18f64.exp()).abs() < 1e-12);
        assert!((m - 8.8463).abs() < 1e-4);
    }

    #[test]
    fn lognormal_upper_quantile() {
        let d = ln(1.0, 1.0);
        let x = d.quantile(0.975).unwrap();
        assert!((d.cdf(x) - 0.975).abs() < 1e-12);
        // bisection oracle on the cdf
        let by_bisection = find_root(|x| d.cdf(x) - 0.975, 1e-6, 1e4, 1e-13).unwrap();
        assert!((x - by_bisection).abs() < 1e-9 * x);
        assert!((x - (1.0f64 + 1.959_963_984_540_054).exp()).abs() < 1e-9);
    }

    #[test]
    fn quantile_domain() {
        assert!(u(0.0, 1.0).quantile(0.0).is_err());
        assert!(u(0.0, 1.0).quantile(1.0).is_err());
        assert!((u(0.0, 1.25).quantile(0.5).unwrap() - 0.625).abs() < 1e-15);
    }

    #[test]
    fn sampling_is_deterministic_and_unbiased() {
        let s = RandomStream::new(3);
        let d = ln(1.0, 1.0);
        assert_eq!(d.sample(&mut s.rng(), 10), d.sample(&mut s.rng(), 10));

        let n = 1_000_000;
        for (d, mean, sd) in
            [(u(0.0, 1.0), 0.5, (1.0f64 / 12.0).sqrt()), (d, 1.5f64.exp(), (1.0f64.exp() - 1.0).sqrt() * 1.5f64.exp())]
        {
            let xs = d.sample(&mut s.rng(), n);
            let m = xs.iter().sum::<f64>() / n as f64;
            let se = sd / (n as f64).sqrt();
            assert!((m - mean).abs() <= 3.0 * se, "{m} vs {mean}");
        }
    }

    #[test]
    fn virtual_value_examples() {
        assert!((u(0.0, 1.0).virtual_value(0.75).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(u(0.0, 1.25).virtual_value(1.25).unwrap(), 1.25);
        assert!(u(0.0, 1.0).virtual_value(1.5).is_err());
        assert!(ln(1.0, 1.0).virtual_value(-1.0).is_err());
    }

    #[test]
    fn lognormal_virtual_value_against_log_survival_slope() {
        // (1 - F)/f = -1 / (d/dx log(1 - F))
        let d = ln(1.0, 1.0);
        let x = 5.0;
        let h = 1e-5;
        let slope = (d.sf(x + h).ln() - d.sf(x - h).ln()) / (2.0 * h);
        let oracle = x + 1.0 / slope;
        let phi = d.virtual_value(x).unwrap();
        assert!((phi - oracle).abs() < 1e-7, "{phi} vs {oracle}");
        // value computed from scipy-equivalent closed forms: 0.9086323243476...
        assert!((phi - 0.908_632_324_347_6).abs() < 1e-9);
    }

    #[test]
    fn inverse_virtual_value_examples() {
        assert!((inverse_virtual_value(&u(0.0, 1.0), 0.5).unwrap().unwrap() - 0.75).abs() < 1e-15);
        assert!((inverse_virtual_value(&u(0.0, 1.25), 0.0).unwrap().unwrap() - 0.625).abs() < 1e-15);
        assert_eq!(inverse_virtual_value(&u(0.0, 1.0), 1.1).unwrap(), None);
        // target below the lowest virtual value: sell at the bottom of the support
        assert_eq!(inverse_virtual_value(&u(0.9, 1.0), 0.1).unwrap(), Some(0.9));
    }

    #[test]
    fn lognormal_inverse_solves_offer_equation() {
        let d = ln(1.0, 1.0);
        let x = inverse_virtual_value(&d, 3.0).unwrap().unwrap();
        assert!((d.virtual_value(x).unwrap() - 3.0).abs() < 1e-9);
        let direct = find_root(|x| d.virtual_value_unchecked(x) - 3.0, 1.0, 1e3, 1e-12).unwrap();
        assert!((x - direct).abs() < 1e-10);
    }

    #[test]
    fn lognormal_sigma_one_passes_monotone_check() {
        for mu in [1.0, 1.99, 2.18] {
            ln(mu, 1.0).check_monotone_virtual_value().unwrap();
        }
    }

    #[test]
    fn hazard_order_examples() {
        let r = check_hazard_order(&u(0.0, 1.25), &u(0.0, 1.0), 200);
        assert!(r.ordered && r.strict && r.min_gap > 0.0);
        let r = check_hazard_order(&u(0.0, 1.0), &u(0.0, 1.0), 200);
        assert!(r.ordered && !r.strict);
        assert_eq!(r.min_gap, 0.0);
        let r = check_hazard_order(&u(0.0, 1.0), &u(0.0, 1.25), 200);
        assert!(!r.ordered && !r.strict);
    }

    #[test]
    fn lognormal_pair_hazard_report() {
        let r = check_hazard_order(&ln(2.18, 1.0), &ln(1.99, 1.0), 512);
        // measured: location shifts of a log-concave law stay hazard ordered
        assert!(r.ordered && r.strict, "{r:?}");
        assert_eq!(r.grid_size, 1024);
    }

    #[test]
    fn densities_integrate_to_one() {
        for d in [u(0.0, 1.0), u(-2.0, 3.0), ln(1.0, 1.0), ln(2.18, 1.0), ln(0.0, 0.4)] {
            let (lo, hi) = d.truncated_support();
            let mut pts = vec![lo, hi];
            if !d.is_bounded() {
                pts = d.quantile_grid(9);
            }
            let q = integrate_with(|x| d.pdf(x), &pts, QuadOptions::rel(1e-10)).unwrap();
            assert!((q.value - 1.0).abs() < 1e-7, "{d:?}: {}", q.value);
        }
    }

    #[test]
    fn serde_shape() {
        let d: ValueDistribution = serde_json::from_str(r#"{"kind":"lognormal","mu":1.0,"sigma":1.0}"#).unwrap();
        assert_eq!(d, ln(1.0, 1.0));
        assert_eq!(serde_json::to_string(&u(0.0, 1.0)).unwrap(), r#"{"kind":"uniform","lo":0.0,"hi":1.0}"#);
        assert!(serde_json::from_str::<ValueDistribution>(r#"{"kind":"uniform","lo":1.0,"hi":0.0}"#).is_err());
        assert!(serde_json::from_str::<ValueDistribution>(r#"{"kind":"uniform","lo":0.0,"hi":1.0,"x":2}"#).is_err());
    }

    fn any_dist() -> impl Strategy<Value = ValueDistribution> {
        prop_oneof![
            (-5.0f64..5.0, 0.01f64..10.0).prop_map(|(lo, w)| u(lo, lo + w)),
            (-2.0f64..4.0, 0.2f64..2.0).prop_map(|(mu, s)| ln(mu, s)),
        ]
    }

    proptest! {
        #[test]
        fn quantile_inverts_cdf(d in any_dist()) {
            for x in d.quantile_grid(1000).into_iter().skip(1).take(998) {
                let back = d.quantile(d.cdf(x)).unwrap();
                prop_assert!((back - x).abs() <= 1e-9 * x.abs().max(1.0), "{} -> {}", x, back);
            }
        }

        #[test]
        fn virtual_value_below_value(d in any_dist(), q in 0.001f64..0.999) {
            let x = d.quantile(q).unwrap();
            prop_assert!(d.virtual_value(x).unwrap() <= x);
        }

        #[test]
        fn uniform_virtual_value_closed_form(lo in -5.0f64..5.0, w in 0.01f64..10.0, t in 0.0f64..1.0) {
            let d = u(lo, lo + w);
            let x = lo + t * w;
            let numeric = x - (1.0 - d.cdf(x)) / d.pdf(x);
            prop_assert!((d.virtual_value(x).unwrap() - numeric).abs() <= 8.0 * f64::EPSILON * (lo.abs() + w));
        }

        #[test]
        fn inverse_round_trip(d in any_dist(), q in 0.01f64..0.99) {
            if let Ok(inv) = d.virtual_value_inverse() {
                let x = d.quantile(q).unwrap();
                let back = inv.invert(d.virtual_value(x).unwrap()).unwrap();
                prop_assert!((back - x).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }

        #[test]
        fn self_comparison_has_zero_gap(d in any_dist()) {
            prop_assert_eq!(check_hazard_order(&d, &d, 64).min_gap, 0.0);
        }
    }
}
