//! Globally adaptive Gauss-Kronrod (7/15) quadrature.
//!
//! Intervals are kept in a max-heap keyed by their error estimate and the
//! worst one is bisected until the summed error meets the tolerance.
//! Known kinks of the integrand are passed as breakpoints so every initial
//! panel is smooth.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

pub const DEFAULT_REL_TOL: f64 = 1e-9;

#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { rel_tol: DEFAULT_REL_TOL, abs_tol: 1e-14, max_evals: 1_000_000 }
    }
}

impl QuadOptions {
    pub fn rel(rel_tol: f64) -> Self {
        Self { rel_tol, ..Self::default() }
    }

    /// Options for an inner integral nested inside an outer one.
    pub fn inner(&self) -> Self {
        Self { rel_tol: self.rel_tol / 10.0, abs_tol: self.abs_tol / 10.0, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    Panel { a, b, value, error }
}

/// Integrates `f` over `[lo, hi]` to relative tolerance `rel_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_tol: f64) -> Result<f64> {
    integrate_with(f, &[lo, hi], QuadOptions::rel(rel_tol)).map(|q| q.value)
}

/// Integrates `f` over `[points[0], points[last]]`, treating every interior
/// point as a breakpoint. Points must be sorted; repeated points are
/// skipped.
pub fn integrate_with<F: Fn(f64) -> f64>(f: F, points: &[f64], opts: QuadOptions) -> Result<Quadrature> {
    if points.len() < 2 || points.iter().any(|p| !p.is_finite()) {
        return Err(Error::Domain("quadrature needs at least two finite points".into()));
    }
    if points.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("quadrature breakpoints must be sorted".into()));
    }
    let mut heap = BinaryHeap::new();
    let mut evals = 0usize;
    for w in points.windows(2) {
        if w[1] > w[0] {
            heap.push(gauss_kronrod(&f, w[0], w[1]));
            evals += 15;
        }
    }
    let (mut value, mut error) = sums(&heap);
    loop {
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target {
            break;
        }
        if !value.is_finite() || evals + 30 > opts.max_evals {
            return Err(Error::Accuracy { estimate: value, error });
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel is at floating-point resolution; its error cannot shrink.
            heap.push(Panel { error: 0.0, ..worst });
            let (v, e) = sums(&heap);
            value = v;
            if e == 0.0 && error > target {
                return Err(Error::Accuracy { estimate: value, error });
            }
            error = e;
            continue;
        }
        let left = gauss_kronrod(&f, worst.a, mid);
        let right = gauss_kronrod(&f, mid, worst.b);
        evals += 30;
        heap.push(left);
        heap.push(right);
        // Re-summing keeps the totals free of accumulated cancellation.
        let (v, e) = sums(&heap);
        value = v;
        error = e;
    }
    Ok(Quadrature { value, error, evals })
}

fn sums(heap: &BinaryHeap<Panel>) -> (f64, f64) {
    heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear() {
        assert!((integrate(|x| x, 0.0, 1.0, 1e-9).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pi() {
        let v = integrate(|x| 4.0 / (1.0 + x * x), 0.0, 1.0, 1e-9).unwrap();
        assert!((v - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn owner_one_inner_integral() {
        // antiderivative: v/4 - v^3/12 + v^2/4 + v^3/6 at v = 1 gives 7/12
        let v = integrate(|v| (1.0 - v * v) / 4.0 + (v + v * v) / 2.0, 0.0, 1.0, 1e-9).unwrap();
        assert!((v - 7.0 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn kink_with_and_without_breakpoint() {
        let f = |x: f64| (x - 0.3).abs();
        let exact = 0.5 * 0.3 * 0.3 + 0.5 * 0.7 * 0.7;
        let q = integrate_with(f, &[0.0, 0.3, 1.0], QuadOptions::default()).unwrap();
        assert!((q.value - exact).abs() < 1e-14);
        let q = integrate_with(f, &[0.0, 1.0], QuadOptions::default()).unwrap();
        assert!((q.value - exact).abs() < 1e-9);
    }

    #[test]
    fn zero_integral_converges_on_absolute_floor() {
        let q = integrate_with(|x| x - 0.5, &[0.0, 1.0], QuadOptions::default()).unwrap();
        assert!(q.value.abs() < 1e-14);
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        let opts = QuadOptions { max_evals: 40, ..QuadOptions::default() };
        match integrate_with(|x: f64| x.sqrt().recip(), &[1e-300, 1.0], opts) {
            Err(Error::Accuracy { estimate, .. }) => assert!(estimate > 0.0),
            other => panic!("expected accuracy error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_unsorted_points() {
        assert!(integrate_with(|x| x, &[1.0, 0.0], QuadOptions::default()).is_err());
    }
}
