//! Samplers for the walk conditioned to stay nonnegative (`P⁺`) or strictly
//! negative (`P⁻`).
//!
//! Both methods target the first `n` coordinates of `P⁺`, whose density
//! against the unconditioned walk is `v(S_n) 1{L_n ≥ 0}`. Rejection
//! resimulates until `{L_n ≥ 0}` (resp. `{M_n < 0}`) holds and carries the
//! weight `v(S_n)` (resp. `u(−S_n)`). The h-transform sampler proposes each
//! step from the step law restricted to keep the walk in the region and
//! carries the weight `Π_k P(stay | S_{k−1}) · v(S_n)`.
//!
//! [`sample_given_event`] returns the plain conditional law given the event,
//! which is the pre-limit object and differs from `P⁺` at finite `n`.

use std::ops::Range;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{LadderTables, WalkPath};
use crate::env_model::{EnvironmentModel, EnvironmentStep};
use crate::error::{Error, Result};
use crate::rng::StreamFamily;

/// Attempts allowed per accepted path in rejection sampling.
pub const REJECTION_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `L_n ≥ 0`
    Positive,
    /// `M_n < 0`
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodTag {
    Rejection,
    HTransform,
}

#[derive(Debug, Clone, Copy)]
pub enum ConditioningMethod<'a> {
    Rejection(&'a LadderTables),
    HTransform(&'a LadderTables),
}

impl<'a> ConditioningMethod<'a> {
    pub fn new(tag: MethodTag, tables: &'a LadderTables) -> Self {
        match tag {
            MethodTag::Rejection => ConditioningMethod::Rejection(tables),
            MethodTag::HTransform => ConditioningMethod::HTransform(tables),
        }
    }

    pub fn tag(&self) -> MethodTag {
        match self {
            ConditioningMethod::Rejection(_) => MethodTag::Rejection,
            ConditioningMethod::HTransform(_) => MethodTag::HTransform,
        }
    }

    pub fn tables(&self) -> &'a LadderTables {
        match *self {
            ConditioningMethod::Rejection(t) | ConditioningMethod::HTransform(t) => t,
        }
    }
}

/// A conditioned path with its environment steps `Q_1..Q_n` and the
/// unnormalized log importance weight (0 for exact samples).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedSample {
    pub path: WalkPath,
    pub steps: Vec<EnvironmentStep>,
    pub log_weight: f64,
}

impl ConditionedSample {
    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }
}

/// Equal-weight conditioned samples, after resampling when the sampler is
/// weighted.
#[derive(Debug, Clone)]
pub struct ConditionedBatch {
    pub samples: Vec<ConditionedSample>,
    /// Effective sample size of the final weights before resampling.
    pub effective_sample_size: f64,
    /// Intermediate resampling events (sequential h-transform only).
    pub resamplings: usize,
}

fn in_region(side: Side, s: f64) -> bool {
    match side {
        Side::Positive => s >= 0.0,
        Side::Negative => s < 0.0,
    }
}

fn rejection<R: Rng + ?Sized>(
    model: &EnvironmentModel,
    n: usize,
    side: Side,
    cap: u64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut xs = Vec::with_capacity(n);
    for _ in 0..cap {
        xs.clear();
        let mut s = 0.0;
        let mut ok = true;
        for _ in 0..n {
            let x = model.step.sample(rng);
            s += x;
            if !in_region(side, s) {
                ok = false;
                break;
            }
            xs.push(x);
        }
        if ok {
            return Ok(xs);
        }
    }
    Err(Error::RejectionExhausted {
        horizon: n,
        attempts: cap,
    })
}

fn h_transform<R: Rng + ?Sized>(
    model: &EnvironmentModel,
    n: usize,
    side: Side,
    tables: &LadderTables,
    rng: &mut R,
) -> (Vec<f64>, f64) {
    let mut xs = Vec::with_capacity(n);
    let mut s = 0.0;
    let mut log_weight = 0.0;
    for _ in 0..n {
        let x = match side {
            Side::Positive => {
                log_weight += model.step.survival(-s).ln();
                model.step.sample_at_least(-s, rng)
            }
            Side::Negative => {
                log_weight += model.step.cdf(-s).ln();
                model.step.sample_below(-s, rng)
            }
        };
        s += x;
        xs.push(x);
    }
    (xs, log_weight + harmonic(tables, side, s).ln())
}

fn harmonic(tables: &LadderTables, side: Side, s: f64) -> f64 {
    match side {
        Side::Positive => tables.v(s),
        Side::Negative => tables.u(-s),
    }
}

fn with_rates<R: Rng + ?Sized>(model: &EnvironmentModel, xs: Vec<f64>, log_weight: f64, rng: &mut R) -> ConditionedSample {
    // λ is independent of X, so the rates are drawn after the walk
    let steps = xs.iter().map(|&x| model.step_with_log_mean(x, rng)).collect();
    ConditionedSample {
        path: WalkPath::from_increments(xs),
        steps,
        log_weight,
    }
}

/// Exact draw from the unconditioned walk given `{L_n ≥ 0}` (resp.
/// `{M_n < 0}`), with its environment steps.
pub fn sample_given_event<R: Rng + ?Sized>(
    model: &EnvironmentModel,
    n: usize,
    side: Side,
    rng: &mut R,
) -> Result<ConditionedSample> {
    if n == 0 {
        return Err(Error::domain("conditioned horizon must be at least 1"));
    }
    let xs = rejection(model, n, side, REJECTION_CAP, rng)?;
    Ok(with_rates(model, xs, 0.0, rng))
}

pub fn sample_conditioned<R: Rng + ?Sized>(
    model: &EnvironmentModel,
    n: usize,
    side: Side,
    method: ConditioningMethod<'_>,
    rng: &mut R,
) -> Result<ConditionedSample> {
    if n == 0 {
        return Err(Error::domain("conditioned horizon must be at least 1"));
    }
    let (xs, log_weight) = match method {
        ConditioningMethod::Rejection(tables) => {
            let xs = rejection(model, n, side, REJECTION_CAP, rng)?;
            let s: f64 = xs.iter().sum();
            (xs, harmonic(tables, side, s).ln())
        }
        ConditioningMethod::HTransform(tables) => h_transform(model, n, side, tables, rng),
    };
    Ok(with_rates(model, xs, log_weight, rng))
}

pub fn sample_conditioned_positive<R: Rng + ?Sized>(
    model: &EnvironmentModel,
    n: usize,
    method: ConditioningMethod<'_>,
    rng: &mut R,
) -> Result<ConditionedSample> {
    sample_conditioned(model, n, Side::Positive, method, rng)
}

pub fn sample_conditioned_negative<R: Rng + ?Sized>(
    model: &EnvironmentModel,
    n: usize,
    method: ConditioningMethod<'_>,
    rng: &mut R,
) -> Result<ConditionedSample> {
    sample_conditioned(model, n, Side::Negative, method, rng)
}

/// Self-normalized weights from log weights.
pub fn normalize_weights(log_weights: &[f64]) -> Result<Vec<f64>> {
    let top = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return Err(Error::EmptySample);
    }
    let raw: Vec<f64> = log_weights.iter().map(|w| (w - top).exp()).collect();
    let total: f64 = raw.iter().sum();
    Ok(raw.into_iter().map(|w| w / total).collect())
}

/// `1 / Σ w_i²` for normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Systematic resampling: `count` indices drawn with one uniform offset.
pub fn resample_systematic(weights: &[f64], count: usize, u: f64) -> Vec<usize> {
    let mut out = Vec::with_capacity(count);
    let mut cumulative = 0.0;
    let mut j = 0;
    for k in 0..count {
        let target = (k as f64 + u) / count as f64;
        while j + 1 < weights.len() && cumulative + weights[j] < target {
            cumulative += weights[j];
            j += 1;
        }
        out.push(j);
    }
    out
}

/// One conditioned sample per replica index, each replica on its own stream.
/// The weights are self-normalized over the whole replica range and the batch
/// is resampled to equal weights.
///
/// The h-transform batch runs as a sequential sampler: after step `k` every
/// path carries the incremental weight `P(stay | S_{k−1}) h(S_k) / h(S_{k−1})`
/// and the batch is resampled whenever its effective size drops below half
/// the replica count. Each slot keeps its own replica stream across
/// resampling, so the result depends only on the replica range.
pub fn sample_conditioned_batch(
    model: &EnvironmentModel,
    n: usize,
    side: Side,
    method: ConditioningMethod<'_>,
    streams: &StreamFamily,
    replicas: Range<u64>,
) -> Result<ConditionedBatch> {
    if replicas.is_empty() {
        return Err(Error::EmptySample);
    }
    if n == 0 {
        return Err(Error::domain("conditioned horizon must be at least 1"));
    }
    let (samples, resamplings) = match method {
        ConditioningMethod::Rejection(_) => {
            let samples = replicas
                .clone()
                .into_par_iter()
                .map(|r| sample_conditioned(model, n, side, method, &mut streams.stream(r)))
                .collect::<Result<Vec<_>>>()?;
            (samples, 0)
        }
        ConditioningMethod::HTransform(tables) => sequential(model, n, side, tables, streams, replicas.clone())?,
    };
    let log_w: Vec<f64> = samples.iter().map(|s| s.log_weight).collect();
    let weights = normalize_weights(&log_w)?;
    let ess = effective_sample_size(&weights);
    let u: f64 = streams.child("resample").stream(replicas.start).random();
    let picks = resample_systematic(&weights, samples.len(), u);
    let samples = picks
        .into_iter()
        .map(|j| ConditionedSample {
            log_weight: 0.0,
            ..samples[j].clone()
        })
        .collect();
    Ok(ConditionedBatch {
        samples,
        effective_sample_size: ess,
        resamplings,
    })
}

struct Particle {
    xs: Vec<f64>,
    s: f64,
    log_weight: f64,
}

fn sequential(
    model: &EnvironmentModel,
    n: usize,
    side: Side,
    tables: &LadderTables,
    streams: &StreamFamily,
    replicas: Range<u64>,
) -> Result<(Vec<ConditionedSample>, usize)> {
    let mut rngs: Vec<_> = replicas.clone().map(|r| streams.stream(r)).collect();
    let mut particles: Vec<Particle> = (0..rngs.len())
        .map(|_| Particle {
            xs: Vec::with_capacity(n),
            s: 0.0,
            log_weight: 0.0,
        })
        .collect();
    let resample_stream = streams.child("resample-step");
    let mut resamplings = 0;
    for k in 0..n {
        particles.par_iter_mut().zip(rngs.par_iter_mut()).for_each(|(p, rng)| {
            let before = harmonic(tables, side, p.s);
            let x = match side {
                Side::Positive => {
                    p.log_weight += model.step.survival(-p.s).ln();
                    model.step.sample_at_least(-p.s, rng)
                }
                Side::Negative => {
                    p.log_weight += model.step.cdf(-p.s).ln();
                    model.step.sample_below(-p.s, rng)
                }
            };
            p.s += x;
            p.xs.push(x);
            p.log_weight += (harmonic(tables, side, p.s) / before).ln();
        });
        if k + 1 == n {
            break;
        }
        let log_w: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
        let weights = normalize_weights(&log_w)?;
        if effective_sample_size(&weights) < 0.5 * particles.len() as f64 {
            let u: f64 = resample_stream.stream(replicas.start + k as u64).random();
            let picks = resample_systematic(&weights, particles.len(), u);
            particles = picks
                .into_iter()
                .map(|j| Particle {
                    xs: particles[j].xs.clone(),
                    s: particles[j].s,
                    log_weight: 0.0,
                })
                .collect();
            resamplings += 1;
        }
    }
    let samples = particles
        .into_par_iter()
        .zip(rngs.par_iter_mut())
        .map(|(p, rng)| with_rates(model, p.xs, p.log_weight, rng))
        .collect();
    Ok((samples, resamplings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random_walk::{default_ladder_grid, estimate_ladder_tables, summarize};
    use crate::rng::derive_stream;
    use crate::stats::ks_two_sample;

    fn setup() -> (EnvironmentModel, LadderTables) {
        let model = EnvironmentModel::normal(1.0, 1.0);
        let grid = default_ladder_grid(&model);
        let t = estimate_ladder_tables(&model, &grid, 20_000, &mut derive_stream(1, 0, "ladder")).unwrap();
        (model, t)
    }

    #[test]
    fn paths_respect_the_event() {
        let (model, t) = setup();
        let mut rng = derive_stream(2, 0, "cond");
        for method in [ConditioningMethod::Rejection(&t), ConditioningMethod::HTransform(&t)] {
            for _ in 0..200 {
                let p = sample_conditioned_positive(&model, 30, method, &mut rng).unwrap();
                assert!(summarize(&p.path).l_n >= 0.0);
                assert_eq!(p.steps.len(), 30);
                let q = sample_conditioned_negative(&model, 30, method, &mut rng).unwrap();
                assert!(summarize(&q.path).m_n < 0.0);
            }
        }
    }

    #[test]
    fn single_step_weight_is_half_v() {
        let (model, t) = setup();
        let mut rng = derive_stream(3, 0, "cond");
        let s = sample_conditioned_positive(&model, 1, ConditioningMethod::HTransform(&t), &mut rng).unwrap();
        let x = s.path.terminal();
        assert!(x >= 0.0);
        assert!((s.weight() - 0.5 * t.v(x)).abs() < 1e-12);
    }

    #[test]
    fn rejection_and_h_transform_agree_at_five_steps() {
        let (model, t) = setup();
        for side in [Side::Positive, Side::Negative] {
            let fam_r = StreamFamily::new(4, "rej");
            let fam_h = StreamFamily::new(4, "h");
            let terminal = |b: ConditionedBatch| b.samples.iter().map(|s| s.path.terminal()).collect::<Vec<_>>();
            let a = sample_conditioned_batch(&model, 5, side, ConditioningMethod::Rejection(&t), &fam_r, 0..10_000)
                .unwrap();
            let b = sample_conditioned_batch(&model, 5, side, ConditioningMethod::HTransform(&t), &fam_h, 0..10_000)
                .unwrap();
            assert!(b.effective_sample_size > 5_000.0, "{}", b.effective_sample_size);
            let d = ks_two_sample(&terminal(a), &terminal(b)).unwrap().statistic;
            assert!(d <= 0.05, "{side:?}: {d}");
        }
    }

    #[test]
    fn exhaustion_is_reported() {
        let model = EnvironmentModel::normal(1.0, 1.0);
        let err = rejection(&model, 10_000, Side::Positive, 1, &mut derive_stream(5, 0, "x")).unwrap_err();
        assert!(matches!(err, Error::RejectionExhausted { attempts: 1, .. }));
        assert!(matches!(
            sample_given_event(&model, 0, Side::Positive, &mut derive_stream(5, 0, "x")),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn systematic_resampling_counts() {
        let idx = resample_systematic(&[0.5, 0.25, 0.25], 4, 0.5);
        assert_eq!(idx, vec![0, 0, 1, 2]);
        let w = normalize_weights(&[0.0, 0.0]).unwrap();
        assert_eq!(w, vec![0.5, 0.5]);
        assert!((effective_sample_size(&w) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn batch_is_deterministic() {
        let (model, t) = setup();
        let fam = StreamFamily::new(6, "det");
        let a = sample_conditioned_batch(&model, 10, Side::Positive, ConditioningMethod::HTransform(&t), &fam, 0..500)
            .unwrap();
        let b = sample_conditioned_batch(&model, 10, Side::Positive, ConditioningMethod::HTransform(&t), &fam, 0..500)
            .unwrap();
        assert_eq!(a.samples, b.samples);
    }
}
