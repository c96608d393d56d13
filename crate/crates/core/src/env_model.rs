//! I.i.d. random environments.
//!
//! One environment step `Q = (F, G)` pairs a geometric (fractional-linear)
//! offspring law `F` with a Poisson immigration law `G`. The offspring law is
//! coupled to the log-mean `X = ln f'(1)` through `q = 1/(1 + e^X)`, so the law
//! of `X` is exactly the declared step family.

use rand::Rng;
use rand_distr::{Distribution, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::{erf::erfc, gamma::gamma};
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::random_walk::StableSpec;

/// Geometric offspring law `P(k) = q (1-q)^k`, `k ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OffspringLaw {
    q: f64,
}

impl OffspringLaw {
    pub fn new(q: f64) -> Result<Self> {
        if q > 0.0 && q < 1.0 {
            Ok(Self { q })
        } else {
            Err(Error::domain(format!("geometric parameter q={q} not in (0,1)")))
        }
    }

    /// The law with log-mean `x`, i.e. `q = 1/(1+e^x)`. For `|x|` beyond the
    /// range of `f64` the parameter is clamped into the open unit interval.
    pub fn with_log_mean(x: f64) -> Self {
        let q = if x > 0.0 {
            let e = (-x).exp();
            e / (1.0 + e)
        } else {
            1.0 / (1.0 + x.exp())
        };
        Self {
            q: q.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0),
        }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn mean(&self) -> f64 {
        (1.0 - self.q) / self.q
    }
}

/// Poisson immigration law with rate `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImmigrationLaw {
    rate: f64,
}

impl ImmigrationLaw {
    pub fn new(rate: f64) -> Result<Self> {
        if rate > 0.0 && rate.is_finite() {
            Ok(Self { rate })
        } else {
            Err(Error::domain(format!("Poisson rate {rate} must be finite and > 0")))
        }
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }
}

/// One draw `Q_i` together with `X_i = ln f_i'(1)` and `μ_i = g_i'(1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentStep {
    pub offspring: OffspringLaw,
    pub immigration: ImmigrationLaw,
    pub x: f64,
    pub mu: f64,
}

impl EnvironmentStep {
    pub fn new(x: f64, rate: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::domain("log-mean must be finite"));
        }
        Ok(Self {
            offspring: OffspringLaw::with_log_mean(x),
            immigration: ImmigrationLaw::new(rate)?,
            x,
            mu: rate,
        })
    }

    /// Offspring mean `e^X`, evaluated from the stored log-mean.
    pub fn offspring_mean(&self) -> f64 {
        self.x.exp()
    }
}

/// `ln((1-q)/q)` recomputed from the offspring law.
pub fn log_mean(step: &EnvironmentStep) -> f64 {
    let q = step.offspring.q();
    (-q).ln_1p() - q.ln()
}

pub fn immigration_mean(step: &EnvironmentStep) -> f64 {
    step.immigration.rate()
}

/// Law of the log-mean `X_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum StepLaw {
    /// `Normal(0, σ²)`; attracted to the Gaussian law, `α = 2`.
    Normal { sigma: f64 },
    /// Symmetric two-sided Lomax: `P(|X| > x) = (1 + x/scale)^(-alpha)`.
    SymmetricPareto { alpha: f64, scale: f64 },
}

impl StepLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            StepLaw::Normal { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            StepLaw::SymmetricPareto { alpha, scale } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                let magnitude = scale * (u.powf(-1.0 / alpha) - 1.0);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            StepLaw::Normal { sigma } => 0.5 * erfc(-x * FRAC_1_SQRT_2 / sigma),
            StepLaw::SymmetricPareto { alpha, scale } => {
                let tail = 0.5 * (1.0 + x.abs() / scale).powf(-alpha);
                if x >= 0.0 {
                    1.0 - tail
                } else {
                    tail
                }
            }
        }
    }

    /// `P(X ≥ x)`; the laws are continuous so this is `1 - cdf(x)`, evaluated
    /// without cancellation in the upper tail.
    pub fn survival(&self, x: f64) -> f64 {
        self.cdf(-x)
    }

    /// Draws `X` conditioned on `X ≥ lower` by rejection. Callers only use
    /// thresholds with `P(X ≥ lower) ≥ 1/2`.
    pub fn sample_at_least<R: Rng + ?Sized>(&self, lower: f64, rng: &mut R) -> f64 {
        loop {
            let x = self.sample(rng);
            if x >= lower {
                return x;
            }
        }
    }

    /// Draws `X` conditioned on `X < upper` by rejection.
    pub fn sample_below<R: Rng + ?Sized>(&self, upper: f64, rng: &mut R) -> f64 {
        loop {
            let x = self.sample(rng);
            if x < upper {
                return x;
            }
        }
    }

    pub fn is_symmetric(&self) -> bool {
        true
    }

    /// Stable index of the attracting law.
    pub fn attraction_index(&self) -> f64 {
        match *self {
            StepLaw::Normal { .. } => 2.0,
            StepLaw::SymmetricPareto { alpha, .. } => alpha,
        }
    }

    /// Scale `c` with `C_n = c n^{1/α}` such that `S_n / C_n` converges to the
    /// strictly stable law generated by [`crate::limit_process::stable_variate`]
    /// (for `α = 2` that law is `Normal(0, 2)`).
    pub fn normalizing_scale(&self) -> f64 {
        match *self {
            StepLaw::Normal { sigma } => sigma * FRAC_1_SQRT_2,
            StepLaw::SymmetricPareto { alpha, scale } => {
                let tail_constant = if (alpha - 1.0).abs() < 1e-12 {
                    2.0 / PI
                } else {
                    (1.0 - alpha) / (gamma(2.0 - alpha) * (PI * alpha / 2.0).cos())
                };
                scale / tail_constant.powf(1.0 / alpha)
            }
        }
    }
}

/// Law of the Poisson rate `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum RateLaw {
    Constant { value: f64 },
    /// `ln λ ~ Normal(mu, sigma²)`.
    LogNormal { mu: f64, sigma: f64 },
    /// `ln λ` is Lomax with the given tail index, so `E(ln⁺ λ)^p < ∞` iff `p < tail`.
    LogPareto { tail: f64 },
}

impl RateLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            RateLaw::Constant { value } => value,
            RateLaw::LogNormal { mu, sigma } => LogNormal::new(mu, sigma)
                .expect("validated log-normal parameters")
                .sample(rng),
            RateLaw::LogPareto { tail } => {
                let u: f64 = 1.0 - rng.random::<f64>();
                (u.powf(-1.0 / tail) - 1.0).exp()
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            RateLaw::Constant { value } => value,
            RateLaw::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            RateLaw::LogPareto { .. } => f64::INFINITY,
        }
    }

    fn parameters_valid(&self) -> bool {
        match *self {
            RateLaw::Constant { value } => value > 0.0 && value.is_finite(),
            RateLaw::LogNormal { mu, sigma } => mu.is_finite() && sigma >= 0.0 && sigma.is_finite(),
            RateLaw::LogPareto { tail } => tail > 0.0 && tail.is_finite(),
        }
    }

    /// Whether `E(ln⁺ λ)^p` is finite.
    pub fn log_moment_finite(&self, p: f64) -> bool {
        match *self {
            RateLaw::Constant { .. } | RateLaw::LogNormal { .. } => true,
            RateLaw::LogPareto { tail } => p < tail,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentModel {
    pub step: StepLaw,
    pub rate: RateLaw,
    pub alpha: f64,
    pub rho: f64,
    pub epsilon: f64,
}

impl EnvironmentModel {
    /// `X ~ Normal(0, σ²)`, constant immigration rate.
    pub fn normal(sigma: f64, rate: f64) -> Self {
        Self {
            step: StepLaw::Normal { sigma },
            rate: RateLaw::Constant { value: rate },
            alpha: 2.0,
            rho: 0.5,
            epsilon: 1.0,
        }
    }

    pub fn symmetric_pareto(alpha: f64, scale: f64, rate: f64) -> Self {
        Self {
            step: StepLaw::SymmetricPareto { alpha, scale },
            rate: RateLaw::Constant { value: rate },
            alpha,
            rho: 0.5,
            epsilon: 1.0,
        }
    }

    pub fn with_rate(mut self, rate: RateLaw) -> Self {
        self.rate = rate;
        self
    }

    pub fn draw_step<R: Rng + ?Sized>(&self, rng: &mut R) -> EnvironmentStep {
        let x = self.step.sample(rng);
        let rate = self.rate.sample(rng);
        EnvironmentStep {
            offspring: OffspringLaw::with_log_mean(x),
            immigration: ImmigrationLaw { rate },
            x,
            mu: rate,
        }
    }

    /// Step with a prescribed log-mean and a freshly drawn rate.
    pub fn step_with_log_mean<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> EnvironmentStep {
        let rate = self.rate.sample(rng);
        EnvironmentStep {
            offspring: OffspringLaw::with_log_mean(x),
            immigration: ImmigrationLaw { rate },
            x,
            mu: rate,
        }
    }

    pub fn draw_environment<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<EnvironmentStep> {
        (0..n).map(|_| self.draw_step(rng)).collect()
    }

    pub fn stable_spec(&self) -> StableSpec {
        StableSpec {
            alpha: self.alpha,
            rho: self.rho,
            scale: self.step.normalizing_scale(),
        }
    }

    /// Runs every check and reports each outcome, never failing.
    pub fn diagnose(&self) -> ValidationReport {
        let mut checks = Vec::new();
        let step_ok = match self.step {
            StepLaw::Normal { sigma } => sigma > 0.0 && sigma.is_finite(),
            StepLaw::SymmetricPareto { alpha, scale } => {
                alpha > 0.0 && alpha < 2.0 && scale > 0.0 && scale.is_finite()
            }
        };
        checks.push(Check::new(
            "offspring_mean",
            step_ok,
            "0 < f'(1) = e^X < ∞ for every finite X drawn from a proper step family",
        ));
        checks.push(Check::new(
            "immigration_mean",
            self.rate.parameters_valid(),
            "0 < g'(1) = λ < ∞ almost surely",
        ));
        checks.push(Check::new(
            "stable_index",
            self.alpha > 0.0 && self.alpha <= 2.0,
            format!("α = {} must lie in (0, 2]", self.alpha),
        ));
        checks.push(Check::new(
            "positivity",
            self.rho > 0.0 && self.rho < 1.0,
            format!("ρ = {} must lie in (0, 1); ρ ∈ {{0, 1}} is a one-sided law", self.rho),
        ));
        let index = self.step.attraction_index();
        let consistent = (self.alpha - index).abs() < 1e-12
            && (!self.step.is_symmetric() || (self.rho - 0.5).abs() < 1e-12);
        checks.push(Check::new(
            "family_consistency",
            consistent,
            format!(
                "step family is attracted to a symmetric {index}-stable law (ρ = 1/2); declared α = {}, ρ = {}",
                self.alpha, self.rho
            ),
        ));
        let p = self.alpha + self.epsilon;
        checks.push(Check::new(
            "moment_condition",
            self.epsilon > 0.0 && self.rate.log_moment_finite(p),
            format!("E(ln⁺ μ)^(α+ε) with α+ε = {p}"),
        ));
        ValidationReport { checks }
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        let report = self.diagnose();
        if report.passed() {
            Ok(report)
        } else {
            let failed: Vec<_> = report
                .checks
                .iter()
                .filter(|c| !c.passed)
                .map(|c| format!("{} ({})", c.name, c.detail))
                .collect();
            Err(Error::InvalidModel(failed.join("; ")))
        }
    }
}

pub fn validate_model(model: &EnvironmentModel) -> Result<ValidationReport> {
    model.validate()
}

pub fn draw_step<R: Rng + ?Sized>(model: &EnvironmentModel, rng: &mut R) -> EnvironmentStep {
    model.draw_step(rng)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;
    use std::f64::consts::LN_2;

    #[test]
    fn critical_step() {
        let s = EnvironmentStep::new(0.0, 2.0).unwrap();
        assert_eq!(s.offspring.q(), 0.5);
        assert_eq!(s.offspring.mean(), 1.0);
        assert_eq!(log_mean(&s), 0.0);
        assert_eq!(immigration_mean(&s), 2.0);
    }

    #[test]
    fn log_two_inverts() {
        let s = EnvironmentStep::new(LN_2, 1.0).unwrap();
        assert!((s.offspring.q() - 1.0 / 3.0).abs() < 1e-15);
        assert!((log_mean(&s) - LN_2).abs() < 1e-15);
        assert_eq!(immigration_mean(&s), 1.0);
    }

    #[test]
    fn log_mean_from_q() {
        let half = EnvironmentStep {
            offspring: OffspringLaw::new(0.5).unwrap(),
            immigration: ImmigrationLaw::new(1.0).unwrap(),
            x: 0.0,
            mu: 1.0,
        };
        assert_eq!(log_mean(&half), 0.0);
        let mut s = half;
        s.offspring = OffspringLaw::new(1.0 / 3.0).unwrap();
        assert!((log_mean(&s) - LN_2).abs() < 1e-15);
        s.offspring = OffspringLaw::new(2.0 / 3.0).unwrap();
        assert!((log_mean(&s) + LN_2).abs() < 1e-15);
    }

    #[test]
    fn offspring_law_rejects_boundary() {
        assert!(OffspringLaw::new(0.0).is_err());
        assert!(OffspringLaw::new(1.0).is_err());
        assert!(ImmigrationLaw::new(0.0).is_err());
    }

    #[test]
    fn normal_draws_average_zero() {
        let model = EnvironmentModel::normal(1.0, 1.0);
        let mut rng = derive_stream(1, 0, "env");
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| model.draw_step(&mut rng).x).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "{mean}");
    }

    #[test]
    fn lognormal_rate_mean() {
        let model = EnvironmentModel::normal(1.0, 1.0).with_rate(RateLaw::LogNormal { mu: 0.0, sigma: 1.0 });
        let mut rng = derive_stream(2, 0, "env");
        let n = 100_000;
        let mean: f64 = (0..n).map(|_| model.draw_step(&mut rng).mu).sum::<f64>() / n as f64;
        let target = 0.5f64.exp();
        assert!((mean / target - 1.0).abs() < 0.02, "{mean} vs {target}");
    }

    #[test]
    fn drawn_steps_satisfy_coupling() {
        let mut rng = derive_stream(3, 0, "env");
        for model in [EnvironmentModel::normal(1.0, 1.0), EnvironmentModel::symmetric_pareto(1.5, 1.0, 1.0)] {
            for _ in 0..10_000 {
                let s = model.draw_step(&mut rng);
                if s.x.abs() > 30.0 {
                    continue;
                }
                let q = s.offspring.q();
                let product = log_mean(&s).exp() * q / (1.0 - q);
                assert!((product - 1.0).abs() < 1e-12, "{product}");
            }
        }
    }

    #[test]
    fn positive_fraction_and_autocorrelation() {
        let n = 100_000;
        for (k, model) in [EnvironmentModel::normal(1.0, 1.0), EnvironmentModel::symmetric_pareto(1.2, 1.0, 1.0)]
            .iter()
            .enumerate()
        {
            let mut rng = derive_stream(4, k as u64, "env");
            let xs: Vec<f64> = (0..n).map(|_| model.draw_step(&mut rng).x).collect();
            let pos = xs.iter().filter(|&&x| x > 0.0).count() as f64 / n as f64;
            assert!((pos - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt(), "{pos}");
            // rank-based lag-1 autocorrelation (heavy tails)
            let signs: Vec<f64> = xs.iter().map(|x| x.signum()).collect();
            let c: f64 = signs.windows(2).map(|w| w[0] * w[1]).sum::<f64>() / (n - 1) as f64;
            assert!(c.abs() < 3.0 / (n as f64).sqrt(), "{c}");
        }
    }

    #[test]
    fn validation_accepts_normal() {
        let report = EnvironmentModel::normal(1.0, 1.0).validate().unwrap();
        assert!(report.passed());
        assert_eq!(report.checks.len(), 6);
    }

    #[test]
    fn validation_rejects_one_sided() {
        let mut m = EnvironmentModel::normal(1.0, 1.0);
        m.rho = 0.0;
        let err = m.validate().unwrap_err();
        assert!(err.to_string().contains("positivity"));
    }

    #[test]
    fn validation_rejects_inconsistent_index() {
        let mut m = EnvironmentModel::normal(1.0, 1.0);
        m.alpha = 1.5;
        assert!(m.validate().is_err());
        let mut p = EnvironmentModel::symmetric_pareto(1.5, 1.0, 1.0);
        assert!(p.validate().is_ok());
        p.rho = 0.4;
        assert!(p.validate().is_err());
    }

    #[test]
    fn moment_condition() {
        for alpha in [0.5, 1.0, 1.7] {
            for eps in [0.1, 1.0, 5.0] {
                let mut m = EnvironmentModel::symmetric_pareto(alpha, 1.0, 3.0);
                m.epsilon = eps;
                assert!(m.validate().is_ok());
            }
        }
        let heavy = EnvironmentModel::normal(1.0, 1.0).with_rate(RateLaw::LogPareto { tail: 2.5 });
        let err = heavy.validate().unwrap_err();
        assert!(err.to_string().contains("moment_condition"));
        let light = EnvironmentModel::normal(1.0, 1.0).with_rate(RateLaw::LogPareto { tail: 3.5 });
        assert!(light.validate().is_ok());
    }

    #[test]
    fn cdf_matches_sampling() {
        let mut rng = derive_stream(5, 0, "cdf");
        for law in [StepLaw::Normal { sigma: 1.3 }, StepLaw::SymmetricPareto { alpha: 0.8, scale: 2.0 }] {
            let n = 50_000;
            let below = (0..n).filter(|_| law.sample(&mut rng) <= 0.7).count() as f64 / n as f64;
            assert!((below - law.cdf(0.7)).abs() < 0.01);
            assert!((law.survival(0.7) - (1.0 - law.cdf(0.7))).abs() < 1e-12);
            assert!((law.cdf(0.0) - 0.5).abs() < 1e-15);
        }
    }
}
