use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

/// Checks that `(α, ρ)` belongs to a strictly stable law that is not
/// one-sided: `ρ ∈ (0, 1)` for `α ≤ 1`, `ρ ∈ (1 − 1/α, 1/α)` for
/// `α ∈ (1, 2)`, and `ρ = 1/2` for `α = 2`.
pub fn check_stable(alpha: f64, rho: f64) -> Result<()> {
    let ok = if !(alpha > 0.0 && alpha <= 2.0) {
        false
    } else if alpha == 2.0 {
        (rho - 0.5).abs() < 1e-12
    } else if alpha <= 1.0 {
        rho > 0.0 && rho < 1.0
    } else {
        rho > 1.0 - 1.0 / alpha && rho < 1.0 / alpha
    };
    if ok {
        Ok(())
    } else {
        Err(Error::domain(format!("no two-sided strictly stable law with α = {alpha}, ρ = {rho}")))
    }
}

/// Skewness `β` of the strictly stable law with positivity `ρ`.
fn skewness(alpha: f64, rho: f64) -> f64 {
    (PI * alpha * (rho - 0.5)).tan() / (FRAC_PI_2 * alpha).tan()
}

/// One strictly stable variate with `P(X > 0) = ρ`, by the
/// Chambers–Mallows–Stuck transform of a uniform angle and a unit exponential.
/// For `α = 2` this is `Normal(0, 2)`; for `α = 1` a Cauchy variate plus drift
/// `tan(π(ρ − 1/2))`. Callers validate with [`check_stable`].
pub fn stable_variate<R: Rng + ?Sized>(alpha: f64, rho: f64, rng: &mut R) -> f64 {
    if alpha == 2.0 {
        let z: f64 = StandardNormal.sample(rng);
        return std::f64::consts::SQRT_2 * z;
    }
    let v = PI * (rng.random::<f64>() - 0.5);
    if alpha == 1.0 {
        return v.tan() + (PI * (rho - 0.5)).tan();
    }
    let w: f64 = Exp1.sample(rng);
    let beta = skewness(alpha, rho);
    let t = beta * (FRAC_PI_2 * alpha).tan();
    let b = t.atan() / alpha;
    let s = (1.0 + t * t).powf(1.0 / (2.0 * alpha));
    let av = alpha * (v + b);
    s * av.sin() / v.cos().powf(1.0 / alpha) * ((v - av).cos() / w).powf((1.0 - alpha) / alpha)
}

/// `W` on the uniform grid `t_k = k δ`, `k = 0..=steps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevyPath {
    pub delta: f64,
    pub w: Vec<f64>,
    pub alpha: f64,
    pub rho: f64,
}

impl LevyPath {
    pub fn t(&self, k: usize) -> f64 {
        k as f64 * self.delta
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

pub fn simulate_levy<R: Rng + ?Sized>(alpha: f64, rho: f64, delta: f64, steps: usize, rng: &mut R) -> Result<LevyPath> {
    check_stable(alpha, rho)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::domain(format!("grid step δ = {delta} must be positive")));
    }
    let scale = delta.powf(1.0 / alpha);
    let mut w = Vec::with_capacity(steps + 1);
    let mut acc = 0.0;
    w.push(acc);
    for _ in 0..steps {
        acc += scale * stable_variate(alpha, rho, rng);
        w.push(acc);
    }
    Ok(LevyPath { delta, w, alpha, rho })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelPath {
    pub delta: f64,
    pub l: Vec<f64>,
}

impl LevelPath {
    /// Level at the grid point nearest to `t`.
    pub fn at(&self, t: f64) -> f64 {
        let k = ((t / self.delta).round() as usize).min(self.l.len() - 1);
        self.l[k]
    }
}

/// Running minimum of the path over the grid.
pub fn level_of(path: &LevyPath) -> LevelPath {
    let mut current = f64::INFINITY;
    let l = path
        .w
        .iter()
        .map(|&w| {
            current = current.min(w);
            current
        })
        .collect();
    LevelPath { delta: path.delta, l }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn feasible_set() {
        assert!(check_stable(2.0, 0.5).is_ok());
        assert!(check_stable(2.0, 0.4).is_err());
        assert!(check_stable(1.5, 0.4).is_ok());
        assert!(check_stable(1.5, 0.3).is_err());
        assert!(check_stable(0.5, 0.9).is_ok());
        assert!(check_stable(0.5, 1.0).is_err());
        assert!(check_stable(2.5, 0.5).is_err());
    }

    #[test]
    fn gaussian_increments_have_variance_two_delta() {
        let mut rng = derive_stream(1, 0, "levy");
        let p = simulate_levy(2.0, 0.5, 0.01, 100_000, &mut rng).unwrap();
        let inc: Vec<f64> = p.w.windows(2).map(|w| w[1] - w[0]).collect();
        let var = inc.iter().map(|x| x * x).sum::<f64>() / inc.len() as f64;
        assert!((var / 0.02 - 1.0).abs() < 0.02, "{var}");
    }

    #[test]
    fn positivity_matches_rho() {
        let n = 100_000;
        for (alpha, rho, tol) in [(2.0, 0.5, 0.01), (1.5, 0.5, 0.01), (1.5, 0.45, 0.01), (0.7, 0.3, 0.01), (1.0, 0.6, 0.01)] {
            let mut rng = derive_stream(2, 0, "levy");
            let pos = (0..n).filter(|_| stable_variate(alpha, rho, &mut rng) > 0.0).count() as f64 / n as f64;
            assert!((pos - rho).abs() < tol, "α={alpha} ρ={rho}: {pos}");
        }
    }

    #[test]
    fn symmetric_median_near_zero() {
        let mut rng = derive_stream(3, 0, "levy");
        let mut xs: Vec<f64> = (0..100_000).map(|_| stable_variate(1.5, 0.5, &mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        assert!(xs[50_000].abs() < 0.02, "{}", xs[50_000]);
    }

    #[test]
    fn strict_stability_scaling() {
        // X1 + X2 has the law of 2^{1/α} X
        let (alpha, rho) = (1.3, 0.45);
        let mut rng = derive_stream(4, 0, "levy");
        let n = 50_000;
        let sums: Vec<f64> = (0..n)
            .map(|_| stable_variate(alpha, rho, &mut rng) + stable_variate(alpha, rho, &mut rng))
            .collect();
        let scaled: Vec<f64> = (0..n).map(|_| 2f64.powf(1.0 / alpha) * stable_variate(alpha, rho, &mut rng)).collect();
        let d = crate::stats::ks_two_sample(&sums, &scaled).unwrap().statistic;
        assert!(d < 0.015, "{d}");
    }

    #[test]
    fn level_examples() {
        let mk = |w: Vec<f64>| LevyPath { delta: 1.0, w, alpha: 2.0, rho: 0.5 };
        assert_eq!(level_of(&mk(vec![0.0, 1.0, 2.0])).l, vec![0.0, 0.0, 0.0]);
        assert_eq!(level_of(&mk(vec![0.0, -1.0, -0.5])).l, vec![0.0, -1.0, -1.0]);
        let p = simulate_levy(1.2, 0.5, 0.01, 1000, &mut derive_stream(5, 0, "levy")).unwrap();
        assert_eq!(p.w[0], 0.0);
        let l = level_of(&p);
        assert!(l.l.windows(2).all(|w| w[1] <= w[0]));
        assert!(l.l.iter().all(|&x| x <= 0.0));
    }
}
