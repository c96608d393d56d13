use std::fmt::Write as _;

use rand::Rng;
use serde::Serialize;

use super::levy::{level_of, simulate_levy};
use crate::error::{Error, Result};

/// One draw of `(Y(t_1), …, Y(t_m))`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitFdd {
    pub t: Vec<f64>,
    pub y: Vec<f64>,
    /// `γ_1, γ_2, …` in the order consumed.
    pub gammas: Vec<f64>,
    /// `level_change[k]`: `L(t_{k+2}) < L(t_{k+1})`.
    pub level_change: Vec<bool>,
    pub levels: Vec<f64>,
}

/// Simulates one Lévy path on a grid of step `delta` reaching `t_m` and
/// assigns `Ŷ_1 = γ_1`, `Ŷ_{k+1} = Ŷ_k` unless the level drops strictly
/// between `t_k` and `t_{k+1}`, in which case the next unused `γ` is taken.
/// `gammas` must hold at least `m` values drawn independently of `rng`.
pub fn sample_limit_fdd<R: Rng + ?Sized>(
    t: &[f64],
    alpha: f64,
    rho: f64,
    delta: f64,
    gammas: &[f64],
    rng: &mut R,
) -> Result<LimitFdd> {
    if t.is_empty() || t[0] <= 0.0 || t.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::domain("time points must satisfy 0 < t_1 < … < t_m"));
    }
    if gammas.len() < t.len() {
        return Err(Error::domain(format!("{} γ values supplied for {} time points", gammas.len(), t.len())));
    }
    let t_max = *t.last().unwrap();
    let steps = (t_max / delta).round() as usize;
    let path = simulate_levy(alpha, rho, delta, steps, rng)?;
    let level = level_of(&path);
    let levels: Vec<f64> = t.iter().map(|&tk| level.at(tk)).collect();
    let mut used = 1;
    let mut y = vec![gammas[0]];
    let mut level_change = Vec::with_capacity(t.len() - 1);
    for k in 1..t.len() {
        let changed = levels[k] < levels[k - 1];
        level_change.push(changed);
        if changed {
            y.push(gammas[used]);
            used += 1;
        } else {
            y.push(y[k - 1]);
        }
    }
    Ok(LimitFdd {
        t: t.to_vec(),
        y,
        gammas: gammas[..used].to_vec(),
        level_change,
        levels,
    })
}

/// Rows `replica,t,y,level,level_change` under a `#` provenance line.
pub fn fdd_csv(samples: &[LimitFdd], provenance: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {provenance}");
    out.push_str("replica,t,y,level,level_change\n");
    for (r, s) in samples.iter().enumerate() {
        for k in 0..s.t.len() {
            let change = if k == 0 { false } else { s.level_change[k - 1] };
            let _ = writeln!(out, "{r},{},{},{},{}", s.t[k], s.y[k], s.levels[k], u8::from(change));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    #[test]
    fn single_time_takes_first_gamma() {
        let mut rng = derive_stream(1, 0, "fdd");
        let f = sample_limit_fdd(&[0.7], 2.0, 0.5, 0.01, &[3.5], &mut rng).unwrap();
        assert_eq!(f.y, vec![3.5]);
        assert!(f.level_change.is_empty());
    }

    #[test]
    fn coordinates_follow_level_changes() {
        let mut rng = derive_stream(2, 0, "fdd");
        for _ in 0..200 {
            let f = sample_limit_fdd(&[0.5, 1.0, 1.5, 2.0], 1.5, 0.5, 0.01, &[1.0, 2.0, 3.0, 4.0], &mut rng).unwrap();
            assert_eq!(f.y[0], 1.0);
            let mut next = 1;
            for k in 1..4 {
                if f.level_change[k - 1] {
                    next += 1;
                    assert_eq!(f.y[k], next as f64);
                    assert!(f.levels[k] < f.levels[k - 1]);
                } else {
                    assert_eq!(f.y[k], f.y[k - 1]);
                    assert_eq!(f.levels[k], f.levels[k - 1]);
                }
            }
            assert_eq!(f.gammas.len(), next);
        }
    }

    #[test]
    fn brownian_level_change_probability_is_half() {
        let mut rng = derive_stream(3, 0, "fdd");
        let n = 10_000;
        let changed = (0..n)
            .filter(|_| sample_limit_fdd(&[1.0, 2.0], 2.0, 0.5, 0.002, &[0.0, 0.0], &mut rng).unwrap().level_change[0])
            .count() as f64
            / n as f64;
        assert!((changed - 0.5).abs() < 0.02, "{changed}");
    }

    #[test]
    fn rejects_bad_times() {
        let mut rng = derive_stream(4, 0, "fdd");
        assert!(sample_limit_fdd(&[0.0, 1.0], 2.0, 0.5, 0.01, &[1.0, 1.0], &mut rng).is_err());
        assert!(sample_limit_fdd(&[1.0, 1.0], 2.0, 0.5, 0.01, &[1.0, 1.0], &mut rng).is_err());
        assert!(sample_limit_fdd(&[1.0, 2.0], 2.0, 0.5, 0.01, &[1.0], &mut rng).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut rng = derive_stream(5, 0, "fdd");
        let f = sample_limit_fdd(&[1.0, 2.0], 2.0, 0.5, 0.01, &[1.0, 2.0], &mut rng).unwrap();
        let csv = fdd_csv(&[f], "seed=5");
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("# seed=5\nreplica,t,y,level,level_change\n0,1,1,"));
    }
}
