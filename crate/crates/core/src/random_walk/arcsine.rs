use std::f64::consts::PI;

use crate::error::{Error, Result};

const TOLERANCE: f64 = 1e-8;
const MAX_DEPTH: u32 = 50;

/// Generalized arcsine distribution function
/// `(sin πρ / π) ∫₀ˣ u^{ρ−1} (1−u)^{−ρ} du`.
///
/// The endpoint singularities are removed by substitution before adaptive
/// Simpson integration: `u = sin²θ` for `ρ = 1/2`, otherwise `u = t^{1/ρ}` on
/// `[0, 1/2]` and `1 − u = w^{1/(1−ρ)}` on `[1/2, 1]`.
pub fn arcsine_cdf(rho: f64, x: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::domain(format!("ρ = {rho} not in (0,1)")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("x = {x} not in [0,1]")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(1.0);
    }
    let constant = (PI * rho).sin() / PI;
    let integral = if (rho - 0.5).abs() < 1e-15 {
        // u = sin²θ turns the integrand into the constant 2
        adaptive_simpson(&|_| 2.0, 0.0, x.sqrt().asin(), TOLERANCE / constant)
    } else {
        let lower = |t: f64| (1.0 - t.powf(1.0 / rho)).powf(-rho) / rho;
        let upper = |w: f64| (1.0 - w.powf(1.0 / (1.0 - rho))).powf(rho - 1.0) / (1.0 - rho);
        let split = 0.5f64;
        let head = adaptive_simpson(&lower, 0.0, x.min(split).powf(rho), TOLERANCE / constant);
        let tail = if x > split {
            let w_hi = (1.0 - split).powf(1.0 - rho);
            let w_lo = (1.0 - x).powf(1.0 - rho);
            adaptive_simpson(&upper, w_lo, w_hi, TOLERANCE / constant)
        } else {
            0.0
        };
        head + tail
    };
    Ok((constant * integral).clamp(0.0, 1.0))
}

fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

pub(crate) fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    refine(f, a, b, fa, fm, fb, whole, tol, MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn refine(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(fa, flm, fm, a, m);
    let right = simpson(fm, frm, fb, m, b);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    refine(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + refine(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}
