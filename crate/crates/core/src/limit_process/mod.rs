//! Limit objects: the stable Lévy process and its level, two-sided
//! conditioned environments, the martingale limits `ζ*_i`, the ratio
//! `γ = Σ₂/Σ₁` and finite-dimensional vectors of `Y`.

mod fdd;
mod levy;
mod two_sided;

pub use fdd::{fdd_csv, sample_limit_fdd, LimitFdd};
pub use levy::{check_stable, level_of, simulate_levy, stable_variate, LevelPath, LevyPath};
pub use two_sided::{
    choose_zeta_horizon, estimate_zeta, gamma_from_environment, sample_gamma, sample_two_sided_environment,
    GammaSample, HorizonChoice, TwoSidedEnvironment, ZETA_STOP,
};

use std::fmt::Write as _;

/// Rows `replica,sigma1,sigma2,gamma,I,J,method` under a `#` provenance line.
pub fn gamma_csv(samples: &[GammaSample], provenance: &str) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {provenance}");
    out.push_str("replica,sigma1,sigma2,gamma,I,J,method\n");
    for (r, s) in samples.iter().enumerate() {
        let method = match s.method {
            crate::random_walk::MethodTag::Rejection => "rejection",
            crate::random_walk::MethodTag::HTransform => "h-transform",
        };
        let _ = writeln!(
            out,
            "{r},{},{},{},{},{},{method}",
            s.sigma1, s.sigma2, s.gamma, s.half_width, s.zeta_horizon
        );
    }
    out
}
