use crate::error::{Error, Result};

pub const DEFAULT_ROOT_TOL: f64 = 1e-12;

/// Bisection on a sign-changing bracket until its width is at most `tol`
/// (or the bracket cannot be split further in floating point).
pub fn find_root<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa.signum() != fb.signum()) || fa.is_nan() || fb.is_nan() {
        return Err(Error::Bracketing { lo, hi });
    }
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sqrt_two() {
        let r = find_root(|x| x * x - 2.0, 0.0, 2.0, 1e-12).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() <= 1e-12);
    }

    #[test]
    fn uniform_offer_equation() {
        // 2x - 1 = 0.5 on [0, 1]
        let r = find_root(|x| 2.0 * x - 1.0 - 0.5, 0.0, 1.0, 1e-12).unwrap();
        assert!((r - 0.75).abs() <= 1e-12);
    }

    #[test]
    fn no_sign_change() {
        assert!(matches!(find_root(|x| x * x + 1.0, -1.0, 1.0, 1e-12), Err(Error::Bracketing { .. })));
    }
}
