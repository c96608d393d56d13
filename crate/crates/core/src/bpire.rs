//! The population process `Z_n`, its immigrant cohorts `Z_{i,n}` and the
//! random normalization `Y_n(t) = a_{⌊nt⌋} Z_{⌊nt⌋} / b_{⌊nt⌋}`.
//!
//! A generation of `N` particles with geometric offspring of parameter `q`
//! has a negative binomial total, drawn as a Poisson variate with rate
//! `e^X · Gamma(N, 1)`.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::env_model::EnvironmentStep;
use crate::error::{Error, Result};

/// Largest population representable in exact mode.
pub const SATURATION: u64 = i64::MAX as u64;
/// Default switch point of [`PopulationMode::Hybrid`].
pub const HYBRID_THRESHOLD: f64 = 1_099_511_627_776.0; // 2^40

/// How generation sizes are represented.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PopulationMode {
    /// Integer counts; exceeding [`SATURATION`] is an error.
    Exact,
    /// Integer counts below `threshold`; above it the negative binomial
    /// total is replaced by its normal approximation and sizes are carried
    /// as reals until they fall back below the threshold.
    Hybrid { threshold: f64 },
}

impl Default for PopulationMode {
    fn default() -> Self {
        PopulationMode::Hybrid {
            threshold: HYBRID_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Population {
    Exact(u64),
    /// Natural logarithm of a size above the hybrid threshold.
    Large(f64),
}

impl Population {
    /// May be `inf` for `Large` sizes beyond the `f64` range; prefer
    /// [`Population::ln_value`] when forming ratios.
    pub fn value(&self) -> f64 {
        match *self {
            Population::Exact(z) => z as f64,
            Population::Large(l) => l.exp(),
        }
    }

    pub fn ln_value(&self) -> f64 {
        match *self {
            Population::Exact(z) => (z as f64).ln(),
            Population::Large(l) => l,
        }
    }

    pub fn exact(&self) -> Option<u64> {
        match *self {
            Population::Exact(z) => Some(z),
            Population::Large(_) => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.value() == 0.0
    }
}

impl std::fmt::Display for Population {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Population::Exact(z) => write!(f, "{z}"),
            Population::Large(l) if l < 709.0 => write!(f, "{:e}", l.exp()),
            Population::Large(l) => write!(f, "exp({l})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `Z_0, …, Z_n`
    pub z: Vec<Population>,
    /// `η_0, …, η_{n−1}`
    pub eta: Vec<u64>,
    /// `Q_1, …, Q_n`
    pub env: Vec<EnvironmentStep>,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.eta.len()
    }

    pub fn z_value(&self, k: usize) -> f64 {
        self.z[k].value()
    }
}

fn immigrants<R: Rng + ?Sized>(step: &EnvironmentStep, rng: &mut R) -> u64 {
    let rate = step.immigration.rate();
    if rate <= 0.0 {
        return 0;
    }
    Poisson::new(rate).expect("finite positive rate").sample(rng) as u64
}

/// Total offspring of `particles` individuals reproducing with the law of `step`.
pub fn offspring_total<R: Rng + ?Sized>(
    step: &EnvironmentStep,
    particles: Population,
    mode: PopulationMode,
    generation: usize,
    rng: &mut R,
) -> Result<Population> {
    let ln_n = particles.ln_value();
    let x = step.x;
    if ln_n == f64::NEG_INFINITY || x == f64::NEG_INFINITY {
        return Ok(Population::Exact(0));
    }
    if let (Population::Large(_), PopulationMode::Hybrid { .. }) = (particles, mode) {
        // NB(N, q): mean N m, variance N m (1 + m); relative spread
        // sqrt(1/(N m) + 1/N)
        let rel = ((-(ln_n + x)).exp() + (-ln_n).exp()).sqrt();
        let xi: f64 = StandardNormal.sample(rng);
        return Ok(from_log(ln_n + x + (rel * xi).max(-1.0).ln_1p(), mode));
    }
    let n = particles.value();
    let g: f64 = Gamma::new(n, 1.0).map_err(|e| Error::domain(format!("gamma rate: {e}")))?.sample(rng);
    let ln_rate = g.ln() + x;
    if ln_rate < POISSON_LN_LIMIT {
        let rate = ln_rate.exp();
        if rate <= 0.0 {
            return Ok(Population::Exact(0));
        }
        let total = Poisson::new(rate).map_err(|e| Error::domain(format!("poisson rate: {e}")))?.sample(rng);
        return Ok(from_log(total.ln(), mode));
    }
    // Poisson(r) ≈ r + √r ξ for r above 2^50
    let xi: f64 = StandardNormal.sample(rng);
    let ln_total = ln_rate + (xi * (-0.5 * ln_rate).exp()).ln_1p();
    if mode == PopulationMode::Exact && ln_total >= LN_SATURATION {
        return Err(Error::Saturation { generation });
    }
    Ok(from_log(ln_total, mode))
}

const POISSON_LN_LIMIT: f64 = 50.0 * std::f64::consts::LN_2;
const LN_SATURATION: f64 = 63.0 * std::f64::consts::LN_2;

fn from_log(ln_total: f64, mode: PopulationMode) -> Population {
    match mode {
        PopulationMode::Hybrid { threshold } if ln_total > threshold.ln() => Population::Large(ln_total),
        _ => Population::Exact(ln_total.exp().round() as u64),
    }
}

fn add(z: Population, eta: u64, mode: PopulationMode, generation: usize) -> Result<Population> {
    match z {
        Population::Exact(z) => match z.checked_add(eta).filter(|&s| s <= SATURATION) {
            Some(s) => Ok(Population::Exact(s)),
            None => match mode {
                PopulationMode::Exact => Err(Error::Saturation { generation }),
                PopulationMode::Hybrid { .. } => Ok(Population::Large((z as f64 + eta as f64).ln())),
            },
        },
        Population::Large(l) => Ok(Population::Large(l + (eta as f64 * (-l).exp()).ln_1p())),
    }
}

fn check_horizon(env: &[EnvironmentStep], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("horizon must be at least 1"));
    }
    if env.len() < n {
        return Err(Error::domain(format!("environment has {} steps, horizon {n}", env.len())));
    }
    Ok(())
}

/// `η_{k−1} ~ G_k` joins generation `k−1`, and the `Z_{k−1} + η_{k−1}`
/// particles of generation `k−1` reproduce with `F_k`.
pub fn simulate_bpire<R: Rng + ?Sized>(
    env: &[EnvironmentStep],
    n: usize,
    mode: PopulationMode,
    rng: &mut R,
) -> Result<Trajectory> {
    check_horizon(env, n)?;
    let mut z = Vec::with_capacity(n + 1);
    let mut eta = Vec::with_capacity(n);
    z.push(Population::Exact(0));
    for (k, step) in env[..n].iter().enumerate() {
        let e = immigrants(step, rng);
        let particles = add(z[k], e, mode, k + 1)?;
        z.push(offspring_total(step, particles, mode, k + 1, rng)?);
        eta.push(e);
    }
    Ok(Trajectory {
        z,
        eta,
        env: env[..n].to_vec(),
    })
}

/// Sizes `Z_{i,i}, …, Z_{i,i+len}` of one cohort of `initial` particles in
/// generation `i` evolving in `steps` (`steps[k]` drives generation `i+k → i+k+1`).
pub fn evolve_cohort<R: Rng + ?Sized>(
    steps: &[EnvironmentStep],
    initial: u64,
    mode: PopulationMode,
    rng: &mut R,
) -> Result<Vec<Population>> {
    let mut sizes = Vec::with_capacity(steps.len() + 1);
    let mut current = Population::Exact(initial);
    sizes.push(current);
    for (k, step) in steps.iter().enumerate() {
        current = offspring_total(step, current, mode, k + 1, rng)?;
        sizes.push(current);
    }
    Ok(sizes)
}

/// Cohort sizes `Z_{i,k}` (`cohorts[i][k]`, zero for `k ≤ i`).
#[derive(Debug, Clone, PartialEq)]
pub struct DecomposedTrajectory {
    pub cohorts: Vec<Vec<u64>>,
    pub eta: Vec<u64>,
    pub env: Vec<EnvironmentStep>,
}

/// Largest horizon accepted by [`simulate_decomposed`] (memory is O(n²)).
pub const MAX_DECOMPOSED_HORIZON: usize = 512;

impl DecomposedTrajectory {
    pub fn horizon(&self) -> usize {
        self.eta.len()
    }

    pub fn cohort(&self, i: usize, k: usize) -> u64 {
        if i >= k {
            0
        } else {
            self.cohorts[i][k]
        }
    }

    /// Row sums `Z_k = Σ_{i<k} Z_{i,k}`.
    pub fn to_trajectory(&self) -> Trajectory {
        let n = self.horizon();
        let z = (0..=n)
            .map(|k| Population::Exact((0..k).map(|i| self.cohorts[i][k]).sum()))
            .collect();
        Trajectory {
            z,
            eta: self.eta.clone(),
            env: self.env.clone(),
        }
    }
}

/// Each cohort `η_i` evolves on its own in the shared environment, in exact
/// mode. The row sums form a trajectory with the law of [`simulate_bpire`].
pub fn simulate_decomposed<R: Rng + ?Sized>(
    env: &[EnvironmentStep],
    n: usize,
    rng: &mut R,
) -> Result<DecomposedTrajectory> {
    check_horizon(env, n)?;
    if n > MAX_DECOMPOSED_HORIZON {
        return Err(Error::domain(format!(
            "cohort tracking limited to horizons ≤ {MAX_DECOMPOSED_HORIZON}"
        )));
    }
    let mut cohorts = vec![vec![0u64; n + 1]; n];
    let mut eta = Vec::with_capacity(n);
    for i in 0..n {
        let e = immigrants(&env[i], rng);
        eta.push(e);
        let sizes = evolve_cohort(&env[i..n], e, PopulationMode::Exact, rng)?;
        for (k, size) in sizes.into_iter().enumerate().skip(1) {
            cohorts[i][i + k] = size.exact().expect("exact mode");
        }
    }
    let total_ok = (1..=n).all(|k| (0..k).try_fold(0u64, |acc, i| acc.checked_add(cohorts[i][k])).is_some());
    if !total_ok {
        return Err(Error::Saturation { generation: n });
    }
    Ok(DecomposedTrajectory {
        cohorts,
        eta,
        env: env[..n].to_vec(),
    })
}

/// `a_k = e^{−S_k}` and `b_k = Σ_{i<k} μ_{i+1} e^{−S_i}`, `k = 0..=n`, with
/// the walk values `S_k`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizerPair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub s: Vec<f64>,
}

impl NormalizerPair {
    /// `a_{i,n} = e^{−(S_n − S_i)}`.
    pub fn a_between(&self, i: usize, n: usize) -> f64 {
        (-(self.s[n] - self.s[i])).exp()
    }
}

pub fn compute_normalizers(env: &[EnvironmentStep]) -> Result<NormalizerPair> {
    if env.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = env.len();
    let mut s = Vec::with_capacity(n + 1);
    let mut a = Vec::with_capacity(n + 1);
    let mut b = Vec::with_capacity(n + 1);
    s.push(0.0);
    a.push(1.0);
    b.push(0.0);
    for (i, step) in env.iter().enumerate() {
        b.push(b[i] + step.mu * a[i]);
        s.push(s[i] + step.x);
        a.push((-s[i + 1]).exp());
    }
    Ok(NormalizerPair { a, b, s })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalizedPath {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
}

/// `ln(b_k / a_k) = ln Σ_{i<k} μ_{i+1} e^{S_k − S_i}`, computed without
/// overflow for walks far from 0.
fn log_inverse_ratio(traj: &Trajectory, norms: &NormalizerPair, k: usize) -> f64 {
    let terms: Vec<f64> = (0..k).map(|i| traj.env[i].mu.ln() + norms.s[k] - norms.s[i]).collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

pub fn normalized_process(
    traj: &Trajectory,
    norms: &NormalizerPair,
    n: usize,
    grid: &[f64],
) -> Result<NormalizedPath> {
    let mut y = Vec::with_capacity(grid.len());
    for &t in grid {
        if t.is_nan() || t < 0.0 {
            return Err(Error::domain(format!("time {t} must be nonnegative")));
        }
        let k = (n as f64 * t).floor() as usize;
        if k > traj.horizon() || k >= norms.a.len() {
            return Err(Error::domain(format!("⌊nt⌋ = {k} beyond the simulated horizon")));
        }
        let ln_z = traj.z[k].ln_value();
        y.push(if k == 0 || ln_z == f64::NEG_INFINITY {
            0.0
        } else {
            (ln_z - log_inverse_ratio(traj, norms, k)).exp()
        });
    }
    Ok(NormalizedPath { t: grid.to_vec(), y })
}

/// `a_{i,n} Z_{i,n}`.
pub fn cohort_martingale_value(decomp: &DecomposedTrajectory, i: usize, n: usize) -> Result<f64> {
    if i >= n || n > decomp.horizon() {
        return Err(Error::domain(format!("need 0 ≤ i < n ≤ horizon, got i={i}, n={n}")));
    }
    let s: f64 = decomp.env[i..n].iter().map(|q| q.x).sum();
    let cohort = decomp.cohort(i, n);
    Ok(if cohort == 0 { 0.0 } else { ((cohort as f64).ln() - s).exp() })
}

/// CSV rows `n,Z_n,eta_n,S_n,a_n,b_n` under a `#` provenance line.
pub fn trajectory_csv(traj: &Trajectory, norms: &NormalizerPair, provenance: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {provenance}");
    out.push_str("n,Z_n,eta_n,S_n,a_n,b_n\n");
    for k in 0..=traj.horizon() {
        let eta = traj.eta.get(k).map(|e| e.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{k},{},{eta},{},{},{}",
            traj.z[k], norms.s[k], norms.a[k], norms.b[k]
        );
    }
    out
}
