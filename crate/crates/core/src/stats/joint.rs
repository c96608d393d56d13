use serde::Serialize;

use super::Ecdf;
use crate::error::{Error, Result};

/// Gamma-law quantiles used for each probe coordinate.
pub const PROBE_QUANTILES: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointTestReport {
    pub p_change: f64,
    /// Mixture weights `(p_change, 1 − p_change)`.
    pub weights: (f64, f64),
    pub probes: Vec<(f64, f64)>,
    pub predicted: Vec<f64>,
    pub observed: Vec<f64>,
    pub discrepancies: Vec<f64>,
    pub max_discrepancy: f64,
    pub pairs: usize,
    pub gammas: usize,
}

/// 5×5 probe grid at the [`PROBE_QUANTILES`] of the gamma sample.
pub fn quantile_probes(gammas: &[f64]) -> Result<Vec<(f64, f64)>> {
    let e = Ecdf::new(gammas.to_vec())?;
    let q: Vec<f64> = PROBE_QUANTILES.iter().map(|&p| e.quantile(p)).collect();
    Ok(q.iter().flat_map(|&x1| q.iter().map(move |&x2| (x1, x2))).collect())
}

/// Compares the observed joint distribution function of `pairs` with
/// `F(x₁)F(x₂)·p + F(min(x₁, x₂))·(1 − p)`, `F` the gamma distribution
/// function.
pub fn joint_two_time_test(
    pairs: &[(f64, f64)],
    gammas: &[f64],
    p_change: f64,
    probes: &[(f64, f64)],
) -> Result<JointTestReport> {
    if pairs.is_empty() || probes.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(0.0..=1.0).contains(&p_change) {
        return Err(Error::domain(format!("level-change probability {p_change} not in [0,1]")));
    }
    let f = Ecdf::new(gammas.to_vec())?;
    let mut predicted = Vec::with_capacity(probes.len());
    let mut observed = Vec::with_capacity(probes.len());
    for &(x1, x2) in probes {
        predicted.push(f.eval(x1) * f.eval(x2) * p_change + f.eval(x1.min(x2)) * (1.0 - p_change));
        let hits = pairs.iter().filter(|&&(y1, y2)| y1 <= x1 && y2 <= x2).count();
        observed.push(hits as f64 / pairs.len() as f64);
    }
    let discrepancies: Vec<f64> = predicted.iter().zip(&observed).map(|(p, o)| (p - o).abs()).collect();
    let max_discrepancy = discrepancies.iter().copied().fold(0.0, f64::max);
    Ok(JointTestReport {
        p_change,
        weights: (p_change, 1.0 - p_change),
        probes: probes.to_vec(),
        predicted,
        observed,
        discrepancies,
        max_discrepancy,
        pairs: pairs.len(),
        gammas: gammas.len(),
    })
}
