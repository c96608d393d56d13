//! Monte Carlo renewal functions of ladder heights.
//!
//! `v(x)` counts the absolute strict descending ladder heights with cumulative
//! depth at most `x` (plus one for the zeroth ladder point), `u(x)` does the
//! same for weak ascending ladder heights. Heights are sampled one epoch at a
//! time; an epoch that has not ended after `cap` steps is censored and
//! dropped.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_1_SQRT_2;

use crate::env_model::{EnvironmentModel, StepLaw};
use crate::error::{Error, Result};

/// Steps allowed for a single ladder epoch.
pub const EPOCH_CAP: u64 = 10_000_000;
/// Largest fraction of censored epochs accepted before signalling nonconvergence.
pub const MAX_CENSORED_FRACTION: f64 = 1e-3;
const GRID_POINTS: usize = 512;

/// How the renewal functions are continued beyond the last grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum TailRule {
    /// Least-squares line through the upper half of the grid (finite mean
    /// ladder heights, renewal theorem).
    Linear {
        v_slope: f64,
        v_intercept: f64,
        u_slope: f64,
        u_intercept: f64,
    },
    /// `f(x) = f(x_max) (x / x_max)^exponent` (regularly varying renewal
    /// function, exponent `αρ` resp. `α(1−ρ)`).
    Power { v_exponent: f64, u_exponent: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LadderTables {
    pub grid: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
    pub v_se: Vec<f64>,
    pub u_se: Vec<f64>,
    pub epochs: usize,
    pub censored: usize,
    pub cap: u64,
    pub v_sequences: usize,
    pub u_sequences: usize,
    pub tail: TailRule,
}

/// 512 points spanning `[0, 10·E|H|]` where `E|H| = σ/√2` is the mean strict
/// descending ladder height of a symmetric Gaussian walk. Ladder heights of
/// the heavy-tailed family have infinite mean; there the span is ten scale
/// units.
pub fn default_ladder_grid(model: &EnvironmentModel) -> Vec<f64> {
    let span = match model.step {
        StepLaw::Normal { sigma } => 10.0 * sigma * FRAC_1_SQRT_2,
        StepLaw::SymmetricPareto { scale, .. } => 10.0 * scale,
    };
    (0..GRID_POINTS)
        .map(|i| span * i as f64 / (GRID_POINTS - 1) as f64)
        .collect()
}

#[derive(Clone, Copy)]
enum Ladder {
    StrictDescending,
    WeakAscending,
}

/// One ladder height, or `None` when the epoch is censored.
fn ladder_height<R: Rng + ?Sized>(step: &StepLaw, kind: Ladder, cap: u64, rng: &mut R) -> Option<f64> {
    let mut s = 0.0;
    for _ in 0..cap {
        s += step.sample(rng);
        match kind {
            Ladder::StrictDescending if s < 0.0 => return Some(-s),
            Ladder::WeakAscending if s >= 0.0 => return Some(s),
            _ => {}
        }
    }
    None
}

struct Renewal {
    mean: Vec<f64>,
    se: Vec<f64>,
    sequences: usize,
}

/// Splits i.i.d. heights into consecutive renewal sequences, each ending at
/// the first partial sum beyond the grid, and averages the counts.
fn renewal_counts(grid: &[f64], heights: &[f64]) -> Renewal {
    let top = *grid.last().expect("nonempty grid");
    let m = grid.len();
    let mut sum = vec![0.0; m];
    let mut sum_sq = vec![0.0; m];
    let mut sequences = 0usize;
    let mut diff = vec![0i64; m + 1];
    let mut cumulative = 0.0;
    for &h in heights {
        cumulative += h;
        if cumulative <= top {
            let first = grid.partition_point(|&g| g < cumulative);
            diff[first] += 1;
            continue;
        }
        let mut count = 0i64;
        for j in 0..m {
            count += diff[j];
            let c = count as f64;
            sum[j] += c;
            sum_sq[j] += c * c;
        }
        sequences += 1;
        diff.iter_mut().for_each(|d| *d = 0);
        cumulative = 0.0;
    }
    let k = sequences.max(1) as f64;
    let mean: Vec<f64> = sum.iter().map(|s| 1.0 + s / k).collect();
    let se = sum
        .iter()
        .zip(&sum_sq)
        .map(|(s, sq)| {
            let mu = s / k;
            let var = (sq / k - mu * mu).max(0.0) * k / (k - 1.0).max(1.0);
            (var / k).sqrt()
        })
        .collect();
    Renewal { mean, se, sequences }
}

fn upper_half_line(grid: &[f64], values: &[f64]) -> (f64, f64) {
    let start = grid.len() / 2;
    let xs = &grid[start..];
    let ys = &values[start..];
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let slope = if sxx > 0.0 { (sxy / sxx).max(0.0) } else { 0.0 };
    (slope, my - slope * mx)
}

/// Estimates `v` and `u` on `grid` from `budget` ladder epochs of each kind.
pub fn estimate_ladder_tables<R: Rng + ?Sized>(
    model: &EnvironmentModel,
    grid: &[f64],
    budget: usize,
    rng: &mut R,
) -> Result<LadderTables> {
    estimate_with_cap(model, grid, budget, EPOCH_CAP, rng)
}

pub(crate) fn estimate_with_cap<R: Rng + ?Sized>(
    model: &EnvironmentModel,
    grid: &[f64],
    budget: usize,
    cap: u64,
    rng: &mut R,
) -> Result<LadderTables> {
    if budget < 1000 {
        return Err(Error::domain(format!("ladder budget {budget} below 1000 epochs")));
    }
    if grid.len() < 4 || grid[0] != 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("ladder grid must start at 0 and increase strictly"));
    }
    let mut censored = 0usize;
    let mut draw = |kind| {
        let mut heights = Vec::with_capacity(budget);
        for _ in 0..budget {
            match ladder_height(&model.step, kind, cap, rng) {
                Some(h) => heights.push(h),
                None => censored += 1,
            }
        }
        heights
    };
    let down = draw(Ladder::StrictDescending);
    let up = draw(Ladder::WeakAscending);
    let epochs = 2 * budget;
    if censored as f64 > MAX_CENSORED_FRACTION * epochs as f64 {
        return Err(Error::LadderNonconvergence { censored, epochs, cap });
    }
    let v = renewal_counts(grid, &down);
    let u = renewal_counts(grid, &up);
    if v.sequences < 2 || u.sequences < 2 {
        return Err(Error::domain("ladder budget too small for the grid span"));
    }
    let tail = if model.alpha >= 2.0 {
        let (v_slope, v_intercept) = upper_half_line(grid, &v.mean);
        let (u_slope, u_intercept) = upper_half_line(grid, &u.mean);
        TailRule::Linear {
            v_slope,
            v_intercept,
            u_slope,
            u_intercept,
        }
    } else {
        TailRule::Power {
            v_exponent: model.alpha * model.rho,
            u_exponent: model.alpha * (1.0 - model.rho),
        }
    };
    Ok(LadderTables {
        grid: grid.to_vec(),
        v: v.mean,
        u: u.mean,
        v_se: v.se,
        u_se: u.se,
        epochs,
        censored,
        cap,
        v_sequences: v.sequences,
        u_sequences: u.sequences,
        tail,
    })
}

impl LadderTables {
    /// Renewal function of absolute strict descending ladder heights.
    pub fn v(&self, x: f64) -> f64 {
        self.evaluate(&self.v, x, true)
    }

    /// Renewal function of weak ascending ladder heights.
    pub fn u(&self, x: f64) -> f64 {
        self.evaluate(&self.u, x, false)
    }

    fn evaluate(&self, table: &[f64], x: f64, descending: bool) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let top = *self.grid.last().unwrap();
        if x <= top {
            let j = self.grid.partition_point(|&g| g <= x);
            if j >= self.grid.len() {
                return table[table.len() - 1];
            }
            let (x0, x1) = (self.grid[j - 1], self.grid[j]);
            let w = (x - x0) / (x1 - x0);
            return table[j - 1] * (1.0 - w) + table[j] * w;
        }
        let last = table[table.len() - 1];
        match self.tail {
            TailRule::Linear {
                v_slope,
                v_intercept,
                u_slope,
                u_intercept,
            } => {
                let (slope, intercept) = if descending {
                    (v_slope, v_intercept)
                } else {
                    (u_slope, u_intercept)
                };
                // continue from the last grid value with the fitted slope
                let fitted_top = intercept + slope * top;
                last + (intercept + slope * x - fitted_top)
            }
            TailRule::Power { v_exponent, u_exponent } => {
                let e = if descending { v_exponent } else { u_exponent };
                last * (x / top).powf(e)
            }
        }
    }

    pub fn to_keyed_text(&self) -> String {
        toml::to_string(self).expect("ladder tables serialize")
    }

    pub fn from_keyed_text(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("ladder tables: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn tables(seed: u64) -> LadderTables {
        let model = EnvironmentModel::normal(1.0, 1.0);
        let grid = default_ladder_grid(&model);
        estimate_ladder_tables(&model, &grid, 20_000, &mut derive_stream(seed, 0, "ladder")).unwrap()
    }

    #[test]
    fn normalization_and_monotonicity() {
        let t = tables(1);
        assert_eq!(t.v(0.0), 1.0);
        assert_eq!(t.u(0.0), 1.0);
        assert!(t.v.windows(2).all(|w| w[1] >= w[0]));
        assert!(t.u.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(t.v(-0.5), 0.0);
        let mut prev = 0.0;
        for k in 0..200 {
            let x = k as f64 * 0.2;
            let y = t.v(x);
            assert!(y >= prev - 1e-12, "v not monotone at {x}");
            prev = y;
        }
    }

    #[test]
    fn renewal_slope_stabilizes() {
        // Gaussian steps: E H = 1/√2, so v(x)/x → √2.
        let t = tables(2);
        let top = *t.grid.last().unwrap();
        let r1 = t.v(top / 2.0) / (top / 2.0);
        let r2 = t.v(top) / top;
        let slope_lo = (t.v(top / 2.0) - t.v(top / 4.0)) / (top / 4.0);
        let slope_hi = (t.v(top) - t.v(top / 2.0)) / (top / 2.0);
        assert!(r2 > 0.0 && r1 > r2);
        assert!((slope_hi / slope_lo - 1.0).abs() < 0.1, "{slope_lo} {slope_hi}");
        assert!((slope_hi - 2f64.sqrt()).abs() < 0.1, "{slope_hi}");
    }

    #[test]
    fn symmetric_walk_has_equal_tables() {
        let t = tables(3);
        for x in [0.5, 2.0, 5.0] {
            let d = (t.v(x) - t.u(x)).abs();
            let se = (t.v_se[100].powi(2) + t.u_se[100].powi(2)).sqrt().max(1e-3);
            assert!(d < 0.1 * t.v(x) || d < 4.0 * se, "{x}: {} vs {}", t.v(x), t.u(x));
        }
    }

    #[test]
    fn budget_and_grid_errors() {
        let model = EnvironmentModel::normal(1.0, 1.0);
        let grid = default_ladder_grid(&model);
        let mut rng = derive_stream(4, 0, "ladder");
        assert!(estimate_ladder_tables(&model, &grid, 999, &mut rng).is_err());
        assert!(estimate_ladder_tables(&model, &[0.0, 2.0, 1.0, 3.0], 1000, &mut rng).is_err());
    }

    #[test]
    fn tiny_cap_signals_nonconvergence() {
        let model = EnvironmentModel::normal(1.0, 1.0);
        let grid = default_ladder_grid(&model);
        let err = estimate_with_cap(&model, &grid, 1000, 1, &mut derive_stream(5, 0, "ladder")).unwrap_err();
        assert!(matches!(err, Error::LadderNonconvergence { .. }));
    }

    #[test]
    fn keyed_text_round_trip() {
        let t = tables(6);
        let text = t.to_keyed_text();
        assert!(text.contains("grid"));
        let back = LadderTables::from_keyed_text(&text).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn heavy_tailed_family_uses_power_tail() {
        let model = EnvironmentModel::symmetric_pareto(1.5, 1.0, 1.0);
        let grid = default_ladder_grid(&model);
        let t = estimate_ladder_tables(&model, &grid, 5_000, &mut derive_stream(7, 0, "ladder")).unwrap();
        assert!(matches!(t.tail, TailRule::Power { .. }));
        let top = *t.grid.last().unwrap();
        assert!((t.v(4.0 * top) / t.v(top) - 4f64.powf(0.75)).abs() < 1e-9);
    }
}
