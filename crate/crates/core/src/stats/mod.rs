//! Empirical distributions, Kolmogorov–Smirnov distances, bootstrap intervals
//! and the two-time joint law check.

mod joint;

pub use joint::{joint_two_time_test, quantile_probes, JointTestReport, PROBE_QUANTILES};

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Empirical distribution function of a finite sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

pub fn ecdf(sample: &[f64]) -> Result<Ecdf> {
    Ecdf::new(sample.to_vec())
}

impl Ecdf {
    pub fn new(mut sample: Vec<f64>) -> Result<Self> {
        if sample.is_empty() {
            return Err(Error::EmptySample);
        }
        if sample.iter().any(|x| x.is_nan()) {
            return Err(Error::domain("sample contains NaN"));
        }
        sample.sort_by(f64::total_cmp);
        Ok(Self { sorted: sample })
    }

    /// `#{x_i ≤ x} / N`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    /// Smallest sample value `x` with `eval(x) ≥ p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let n = self.sorted.len();
        let k = ((p * n as f64).ceil() as usize).clamp(1, n);
        self.sorted[k - 1]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub n1: usize,
    /// Second sample size; `None` for the one-sample distance.
    pub n2: Option<usize>,
}

impl KsResult {
    pub fn passes(&self, threshold: f64) -> bool {
        self.statistic <= threshold
    }
}

fn sorted_copy(sample: &[f64]) -> Result<Vec<f64>> {
    Ok(Ecdf::new(sample.to_vec())?.sorted)
}

/// Exact two-sample distance by a merge scan over the pooled support; tied
/// values advance both step functions before the gap is measured.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    let a = sorted_copy(a)?;
    let b = sorted_copy(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult {
        statistic: d,
        n1: a.len(),
        n2: Some(b.len()),
    })
}

/// One-sample distance `sup |F_N − F|` evaluated on both sides of every jump.
pub fn ks_against_cdf(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsResult> {
    let sorted = sorted_copy(sample)?;
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (k, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max((k + 1) as f64 / n - f).max(f - k as f64 / n);
    }
    Ok(KsResult {
        statistic: d,
        n1: sorted.len(),
        n2: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

/// Percentile bootstrap interval at the given coverage level.
pub fn bootstrap_ci<R: Rng + ?Sized>(
    sample: &[f64],
    statistic: impl Fn(&[f64]) -> f64,
    reps: usize,
    level: f64,
    rng: &mut R,
) -> Result<Interval> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if reps < 200 {
        return Err(Error::domain(format!("bootstrap needs at least 200 resamples, got {reps}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("coverage level {level} not in (0,1)")));
    }
    let n = sample.len();
    let mut buffer = vec![0.0; n];
    let mut stats = Vec::with_capacity(reps);
    for _ in 0..reps {
        for slot in buffer.iter_mut() {
            *slot = sample[rng.random_range(0..n)];
        }
        stats.push(statistic(&buffer));
    }
    let e = Ecdf::new(stats)?;
    let tail = (1.0 - level) / 2.0;
    Ok(Interval {
        low: e.quantile(tail),
        high: e.quantile(1.0 - tail),
    })
}

pub fn mean(sample: &[f64]) -> f64 {
    sample.iter().sum::<f64>() / sample.len() as f64
}

/// Sample mean and its standard error.
pub fn mean_and_se(sample: &[f64]) -> (f64, f64) {
    let n = sample.len() as f64;
    let m = mean(sample);
    let var = sample.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, (var / n).sqrt())
}
