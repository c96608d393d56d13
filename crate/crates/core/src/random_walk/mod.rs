//! The associated random walk `S_n = X_1 + … + X_n` and its machinery:
//! extrema and the first argmin, the generalized arcsine law, ladder-height
//! renewal functions, and samplers for the walk conditioned to stay
//! nonnegative (`P⁺`) or strictly negative (`P⁻`).

mod arcsine;
mod conditioned;
mod ladder;

pub use arcsine::arcsine_cdf;
pub use conditioned::{
    effective_sample_size, normalize_weights, resample_systematic, sample_conditioned, sample_given_event,
    sample_conditioned_batch, sample_conditioned_negative, sample_conditioned_positive,
    ConditionedBatch, ConditionedSample, ConditioningMethod, MethodTag, Side, REJECTION_CAP,
};
pub use ladder::{default_ladder_grid, estimate_ladder_tables, LadderTables, TailRule};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env_model::EnvironmentModel;
use crate::error::{Error, Result};

/// Values `S_0, …, S_n` with `S_0 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkPath {
    s: Vec<f64>,
}

impl WalkPath {
    pub fn from_values(s: Vec<f64>) -> Result<Self> {
        match s.first() {
            Some(&0.0) => Ok(Self { s }),
            Some(_) => Err(Error::domain("walk path must start at 0")),
            None => Err(Error::EmptySample),
        }
    }

    pub fn from_increments(xs: impl IntoIterator<Item = f64>) -> Self {
        let mut s = vec![0.0];
        let mut acc = 0.0;
        for x in xs {
            acc += x;
            s.push(acc);
        }
        Self { s }
    }

    pub fn values(&self) -> &[f64] {
        &self.s
    }

    /// Number of steps `n`.
    pub fn len(&self) -> usize {
        self.s.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn terminal(&self) -> f64 {
        *self.s.last().expect("nonempty path")
    }
}

/// `L_n` (minimum over `0..=n`), `M_n` (maximum over `1..=n`), the first
/// argmin `τ_n` and `S_n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkSummary {
    pub l_n: f64,
    pub m_n: f64,
    pub tau_n: usize,
    pub s_n: f64,
}

pub fn simulate_walk<R: Rng + ?Sized>(model: &EnvironmentModel, n: usize, rng: &mut R) -> Result<WalkPath> {
    if n == 0 {
        return Err(Error::domain("walk horizon must be at least 1"));
    }
    Ok(WalkPath::from_increments((0..n).map(|_| model.step.sample(rng))))
}

pub fn summarize(path: &WalkPath) -> WalkSummary {
    let s = path.values();
    let mut l_n = s[0];
    let mut tau_n = 0;
    for (i, &v) in s.iter().enumerate().skip(1) {
        if v < l_n {
            l_n = v;
            tau_n = i;
        }
    }
    let m_n = s[1..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    WalkSummary {
        l_n,
        m_n,
        tau_n,
        s_n: path.terminal(),
    }
}

/// `S_{τ+i} − S_τ` for `i = −window..=window`, with `0` wherever `τ + i`
/// falls outside `0..=n`. Entry `k` of the result holds index `k − window`.
pub fn centered_at_min(path: &WalkPath, window: usize) -> Result<Vec<f64>> {
    if window > path.len() {
        return Err(Error::domain(format!("window {window} exceeds horizon {}", path.len())));
    }
    let s = path.values();
    let tau = summarize(path).tau_n as isize;
    let base = s[tau as usize];
    Ok((-(window as isize)..=window as isize)
        .map(|i| {
            let j = tau + i;
            if j >= 0 && (j as usize) < s.len() {
                s[j as usize] - base
            } else {
                0.0
            }
        })
        .collect())
}

/// Parameters of the attracting strictly stable law, with `C_n = scale · n^{1/α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableSpec {
    pub alpha: f64,
    pub rho: f64,
    pub scale: f64,
}

impl StableSpec {
    pub fn normalizer(&self, n: usize) -> f64 {
        self.scale * (n as f64).powf(1.0 / self.alpha)
    }
}

pub fn normalizer(spec: &StableSpec, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("normalizer needs n ≥ 1"));
    }
    Ok(spec.normalizer(n))
}
