//! Two-sided conditioned environments and the series `Σ₁`, `Σ₂`.
//!
//! Index maps: `Q*_i = Q⁺_i` and `S*_i = S⁺_i` for `i ≥ 1` (resp. `i ≥ 0`),
//! `Q*_i = Q⁻_{−i+1}` for `i ≤ 0` and `S*_i = −S⁻_{−i}` for `i < 0`.

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::bpire::{offspring_total, Population, PopulationMode};
use crate::env_model::{EnvironmentModel, EnvironmentStep};
use crate::error::{Error, Result};
use crate::random_walk::{sample_conditioned_batch, ConditionedSample, ConditioningMethod, MethodTag, Side};
use crate::rng::StreamFamily;
use crate::stats::ks_two_sample;

/// Cohorts larger than this stop early; the martingale value at the
/// stopping generation is returned (bounded stopping keeps the mean).
pub const ZETA_STOP: f64 = 1_099_511_627_776.0; // 2^40

#[derive(Debug, Clone, PartialEq)]
pub struct TwoSidedEnvironment {
    /// `P⁺` sample: steps `Q⁺_1..Q⁺_{I+J}` and walk `S⁺`.
    pub positive: ConditionedSample,
    /// `P⁻` sample: steps `Q⁻_1..Q⁻_I` and walk `S⁻`.
    pub negative: ConditionedSample,
    pub method: MethodTag,
}

impl TwoSidedEnvironment {
    /// Largest `i` with `Q*_i` available.
    pub fn max_index(&self) -> isize {
        self.positive.steps.len() as isize
    }

    /// Smallest `i` with `S*_i` available.
    pub fn min_index(&self) -> isize {
        -(self.negative.steps.len() as isize)
    }

    pub fn s_star(&self, i: isize) -> f64 {
        if i >= 0 {
            self.positive.path.values()[i as usize]
        } else {
            -self.negative.path.values()[(-i) as usize]
        }
    }

    pub fn q_star(&self, i: isize) -> &EnvironmentStep {
        if i >= 1 {
            &self.positive.steps[(i - 1) as usize]
        } else {
            &self.negative.steps[(-i) as usize]
        }
    }

    pub fn mu_star(&self, i: isize) -> f64 {
        self.q_star(i).mu
    }

    /// `Σ_{i=−I}^{I−1} μ*_{i+1} e^{−S*_i}`.
    pub fn sigma1(&self, half_width: usize) -> f64 {
        let h = half_width as isize;
        (-h..h).map(|i| self.mu_star(i + 1) * (-self.s_star(i)).exp()).sum()
    }
}

/// Two-sided environments for a replica range: a `P⁺` batch at horizon
/// `I + J` and an independent `P⁻` batch at horizon `I`, paired by replica.
pub fn sample_two_sided_environment(
    model: &EnvironmentModel,
    half_width: usize,
    zeta_horizon: usize,
    method: ConditioningMethod<'_>,
    streams: &StreamFamily,
    replicas: Range<u64>,
) -> Result<Vec<TwoSidedEnvironment>> {
    if half_width == 0 {
        return Err(Error::domain("two-sided half width I must be at least 1"));
    }
    let pos = sample_conditioned_batch(
        model,
        half_width + zeta_horizon,
        Side::Positive,
        method,
        &streams.child("env-positive"),
        replicas.clone(),
    )?;
    let neg = sample_conditioned_batch(
        model,
        half_width,
        Side::Negative,
        method,
        &streams.child("env-negative"),
        replicas,
    )?;
    Ok(pos
        .samples
        .into_iter()
        .zip(neg.samples)
        .map(|(positive, negative)| TwoSidedEnvironment {
            positive,
            negative,
            method: method.tag(),
        })
        .collect())
}

/// `a*_{i,i+J} Z*_{i,i+J}` for the cohort of `η*_i ~ G*_{i+1}` immigrants.
pub fn estimate_zeta<R: Rng + ?Sized>(env: &TwoSidedEnvironment, i: isize, horizon: usize, rng: &mut R) -> Result<f64> {
    if horizon == 0 {
        return Err(Error::domain("ζ horizon J must be at least 1"));
    }
    if i < env.min_index() || i + horizon as isize > env.max_index() {
        return Err(Error::domain(format!(
            "cohort {i} with horizon {horizon} leaves the sampled environment"
        )));
    }
    let eta = Poisson::new(env.mu_star(i + 1))
        .map_err(|e| Error::domain(format!("immigration rate: {e}")))?
        .sample(rng) as u64;
    let mut z = Population::Exact(eta);
    let base = env.s_star(i);
    let mode = PopulationMode::Hybrid { threshold: ZETA_STOP };
    let mut k = i;
    while k < i + horizon as isize {
        if z.is_zero() || z.value() > ZETA_STOP {
            break;
        }
        z = offspring_total(env.q_star(k + 1), z, mode, (k - i + 1) as usize, rng)?;
        k += 1;
    }
    if z.is_zero() {
        return Ok(0.0);
    }
    Ok((z.ln_value() - (env.s_star(k) - base)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaSample {
    pub sigma1: f64,
    pub sigma2: f64,
    pub gamma: f64,
    pub half_width: usize,
    pub zeta_horizon: usize,
    pub method: MethodTag,
}

/// `Σ₁`, `Σ₂` over `i ∈ [−I, I−1]` on one environment.
pub fn gamma_from_environment<R: Rng + ?Sized>(
    env: &TwoSidedEnvironment,
    half_width: usize,
    zeta_horizon: usize,
    rng: &mut R,
) -> Result<GammaSample> {
    let h = half_width as isize;
    let sigma1 = env.sigma1(half_width);
    let mut sigma2 = 0.0;
    for i in -h..h {
        sigma2 += estimate_zeta(env, i, zeta_horizon, rng)? * (-env.s_star(i)).exp();
    }
    Ok(GammaSample {
        sigma1,
        sigma2,
        gamma: sigma2 / sigma1,
        half_width,
        zeta_horizon,
        method: env.method,
    })
}

/// One `γ` per replica. Environments use the `env-positive`/`env-negative`
/// children of `streams`, cohorts the `cohorts` child.
pub fn sample_gamma(
    model: &EnvironmentModel,
    half_width: usize,
    zeta_horizon: usize,
    method: ConditioningMethod<'_>,
    streams: &StreamFamily,
    replicas: Range<u64>,
) -> Result<Vec<GammaSample>> {
    if zeta_horizon == 0 {
        return Err(Error::domain("ζ horizon J must be at least 1"));
    }
    let envs = sample_two_sided_environment(model, half_width, zeta_horizon, method, streams, replicas.clone())?;
    let cohorts = streams.child("cohorts");
    envs.par_iter()
        .enumerate()
        .map(|(k, env)| {
            let r = replicas.start + k as u64;
            gamma_from_environment(env, half_width, zeta_horizon, &mut cohorts.stream(r))
        })
        .collect()
}

/// Outcome of the `J`-doubling rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonChoice {
    pub zeta_horizon: usize,
    /// `(J, KS distance between the γ laws at J and 2J)` per round.
    pub history: Vec<(usize, f64)>,
    pub converged: bool,
}

/// Doubles `J` from `initial` until the `γ` laws at `J` and `2J` on a pilot
/// batch differ by at most `tolerance`, or `max` is reached.
#[allow(clippy::too_many_arguments)]
pub fn choose_zeta_horizon(
    model: &EnvironmentModel,
    half_width: usize,
    initial: usize,
    max: usize,
    tolerance: f64,
    method: ConditioningMethod<'_>,
    streams: &StreamFamily,
    pilot: u64,
) -> Result<HorizonChoice> {
    let mut j = initial.max(1);
    let mut history = Vec::new();
    loop {
        let envs = sample_two_sided_environment(model, half_width, 2 * j, method, streams, 0..pilot)?;
        let run = |jj: usize, name: &str| -> Result<Vec<f64>> {
            let fam = streams.child(name);
            envs.par_iter()
                .enumerate()
                .map(|(r, env)| Ok(gamma_from_environment(env, half_width, jj, &mut fam.stream(r as u64))?.gamma))
                .collect()
        };
        let d = ks_two_sample(&run(j, "pilot-j")?, &run(2 * j, "pilot-2j")?)?.statistic;
        history.push((j, d));
        if d <= tolerance {
            return Ok(HorizonChoice {
                zeta_horizon: j,
                history,
                converged: true,
            });
        }
        if 2 * j > max {
            return Ok(HorizonChoice {
                zeta_horizon: j,
                history,
                converged: false,
            });
        }
        j *= 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random_walk::{default_ladder_grid, estimate_ladder_tables, sample_conditioned_positive, LadderTables};
    use crate::rng::derive_stream;
    use crate::stats::mean_and_se;

    fn tables(model: &EnvironmentModel) -> LadderTables {
        let grid = default_ladder_grid(model);
        estimate_ladder_tables(model, &grid, 20_000, &mut derive_stream(1, 0, "ladder")).unwrap()
    }

    #[test]
    fn glued_indices() {
        let model = EnvironmentModel::normal(1.0, 1.0);
        let t = tables(&model);
        let envs = sample_two_sided_environment(
            &model,
            8,
            4,
            ConditioningMethod::HTransform(&t),
            &StreamFamily::new(2, "ts"),
            0..200,
        )
        .unwrap();
        for e in &envs {
            assert_eq!(e.s_star(0), 0.0);
            assert!((0..=12).all(|i| e.s_star(i) >= 0.0));
            assert!((1..=8).all(|i| e.s_star(-i) > 0.0));
            assert_eq!(e.q_star(1), &e.positive.steps[0]);
            assert_eq!(e.q_star(0), &e.negative.steps[0]);
            assert_eq!(e.q_star(-7), &e.negative.steps[7]);
            assert!(e.sigma1(8) >= e.mu_star(1));
        }
    }

    #[test]
    fn first_coordinate_matches_direct_sampler() {
        let model = EnvironmentModel::normal(1.0, 1.0);
        let t = tables(&model);
        let method = ConditioningMethod::HTransform(&t);
        let envs =
            sample_two_sided_environment(&model, 4, 0, method, &StreamFamily::new(3, "ts"), 0..10_000).unwrap();
        let glued: Vec<f64> = envs.iter().map(|e| e.s_star(1)).collect();
        let direct =
            sample_conditioned_batch(&model, 4, Side::Positive, method, &StreamFamily::new(3, "direct"), 0..10_000)
                .unwrap();
        let direct: Vec<f64> = direct.samples.iter().map(|s| s.path.values()[1]).collect();
        let d = ks_two_sample(&glued, &direct).unwrap().statistic;
        assert!(d <= 0.05, "{d}");
    }

    #[test]
    fn zeta_mean_is_immigration_mean() {
        let model = EnvironmentModel::normal(1.0, 1.0);
        let t = tables(&model);
        let mut rng = derive_stream(4, 0, "zeta");
        let method = ConditioningMethod::HTransform(&t);
        let pos = sample_conditioned_positive(&model, 30, method, &mut rng).unwrap();
        let neg = crate::random_walk::sample_conditioned_negative(&model, 10, method, &mut rng).unwrap();
        let env = TwoSidedEnvironment {
            positive: pos,
            negative: neg,
            method: MethodTag::HTransform,
        };
        for (i, j) in [(0isize, 1usize), (2, 5), (-3, 20), (-10, 12)] {
            // consistency of the glued walk with the glued steps
            assert!((env.s_star(i + 1) - env.s_star(i) - env.q_star(i + 1).x).abs() < 1e-12);
            let vals: Vec<f64> = (0..50_000).map(|_| estimate_zeta(&env, i, j, &mut rng).unwrap()).collect();
            let (m, se) = mean_and_se(&vals);
            let target = env.mu_star(i + 1);
            assert!((m - target).abs() < 3.0 * se.max(1e-9), "i={i} J={j}: {m} ± {se} vs {target}");
        }
        assert!(estimate_zeta(&env, 25, 10, &mut rng).is_err());
    }

    #[test]
    fn zero_immigration_gives_zero() {
        let model = EnvironmentModel::normal(1.0, 1e-300);
        let t = tables(&model);
        let g = sample_gamma(&model, 4, 4, ConditioningMethod::HTransform(&t), &StreamFamily::new(5, "g"), 0..20)
            .unwrap();
        for s in g {
            assert_eq!(s.sigma2, 0.0);
            assert_eq!(s.gamma, 0.0);
            assert!(s.sigma1 > 0.0);
        }
    }
}
