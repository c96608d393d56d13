use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::env_model::EnvironmentModel;
use crate::error::{Error, Result};
use crate::limit_process::check_stable;
use crate::random_walk::{MethodTag, StableSpec};

/// Run configuration. Every field has a default; the materialized document
/// is echoed into each report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: EnvironmentModel,
    /// Defaults to the model's attracting law and normalizing scale.
    pub stable: Option<StableSpec>,
    pub seed: u64,
    /// Worker threads; not echoed since results do not depend on it.
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    #[serde(skip_serializing)]
    pub out: PathBuf,
    pub conditioning: MethodTag,
    pub ladder: LadderConfig,
    pub walk: WalkConfig,
    pub arcsine: SampleConfig,
    pub measure_change: SampleConfig,
    pub lemmas: LemmaConfig,
    pub martingale: MartingaleConfig,
    pub gamma: GammaConfig,
    pub theorem: TheoremConfig,
    pub thresholds: Thresholds,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: EnvironmentModel::normal(1.0, 1.0),
            stable: None,
            seed: 20240601,
            workers: None,
            out: PathBuf::from("bpire-out"),
            conditioning: MethodTag::Rejection,
            ladder: LadderConfig::default(),
            walk: WalkConfig::default(),
            arcsine: SampleConfig { n: 2000, replicas: 20_000 },
            measure_change: SampleConfig { n: 5, replicas: 10_000 },
            lemmas: LemmaConfig::default(),
            martingale: MartingaleConfig::default(),
            gamma: GammaConfig::default(),
            theorem: TheoremConfig::default(),
            thresholds: Thresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderConfig {
    pub budget: usize,
    /// Load tables from this keyed text file instead of estimating them.
    pub tables: Option<PathBuf>,
}

impl Default for LadderConfig {
    fn default() -> Self {
        Self {
            budget: 100_000,
            tables: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub n: usize,
    pub replicas: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self { n: 2000, replicas: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkConfig {
    pub n: usize,
    pub replicas: u64,
    /// Horizon and replicas of the Gaussian-family CLT check.
    pub clt_n: usize,
    pub clt_replicas: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            replicas: 20_000,
            clt_n: 10_000,
            clt_replicas: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LemmaConfig {
    pub n: usize,
    pub replicas: u64,
    /// Offsets `i` of `S'_{i,n}` compared with `S*_i`.
    pub offsets: Vec<i64>,
    /// Offset `i` in the four normalizer ratios.
    pub ratio_offset: usize,
    /// Truncation of the limit series. The one-sided tails beyond `I` decay
    /// only polynomially in `I`, so this should be comparable to `n`.
    pub half_width: usize,
    /// Horizons `n` and `2n` of the cohort stabilization check are
    /// `cohort_n` and `2 cohort_n`.
    pub cohort_n: usize,
}

impl Default for LemmaConfig {
    fn default() -> Self {
        Self {
            n: 2000,
            replicas: 10_000,
            offsets: vec![-2, -1, 1, 2],
            ratio_offset: 2,
            half_width: 2000,
            cohort_n: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MartingaleConfig {
    pub replicas: u64,
    /// Cohort index `i`.
    pub cohort: usize,
    /// Values of `n − i`.
    pub lags: Vec<usize>,
    /// Generations `k` of the conditional-mean check.
    pub generations: Vec<usize>,
    /// Number of fixed environments in the conditional-mean check.
    pub environments: usize,
}

impl Default for MartingaleConfig {
    fn default() -> Self {
        Self {
            replicas: 100_000,
            cohort: 3,
            lags: vec![1, 5, 20],
            generations: vec![1, 3, 10],
            environments: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GammaConfig {
    pub half_width: usize,
    pub zeta_horizon: usize,
    pub replicas: u64,
    /// Double `J` until the pilot γ laws at `J` and `2J` agree.
    pub adaptive: bool,
    pub max_zeta_horizon: usize,
    pub pilot_replicas: u64,
}

impl Default for GammaConfig {
    fn default() -> Self {
        Self {
            half_width: 64,
            zeta_horizon: 64,
            replicas: 10_000,
            adaptive: true,
            max_zeta_horizon: 512,
            pilot_replicas: 2_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoremConfig {
    pub horizons: Vec<usize>,
    pub replicas: u64,
    pub t_values: Vec<f64>,
    /// Horizon of the two-time comparison.
    pub two_time_n: usize,
    /// Lévy grid step; defaults to `10⁻³ t_m`.
    pub delta: Option<f64>,
    pub levy_replicas: u64,
    pub band_n: usize,
    pub band_replicas: u64,
    pub epsilons: Vec<f64>,
}

impl Default for TheoremConfig {
    fn default() -> Self {
        Self {
            horizons: vec![200, 800, 3200],
            replicas: 10_000,
            t_values: vec![1.0, 2.0],
            two_time_n: 3200,
            delta: None,
            levy_replicas: 20_000,
            band_n: 2000,
            band_replicas: 10_000,
            epsilons: vec![0.2, 0.1, 0.05],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Half width of the band around `ρ` for `P(S_n > 0)`.
    pub positivity_band: f64,
    pub clt_ks: f64,
    pub arcsine_ks: f64,
    pub measure_change_ks: f64,
    pub lemma1_ks: f64,
    pub cohort_ks: f64,
    pub lemma5_ks: f64,
    pub lemma7_ks: f64,
    pub truncation_ks: f64,
    pub onedim_ks: f64,
    pub onedim_slack: f64,
    pub level_change_band: f64,
    pub joint_discrepancy: f64,
    pub band_fraction: f64,
    /// Multiple of the standard error allowed in mean identities.
    pub se_multiple: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            positivity_band: 0.03,
            clt_ks: 0.02,
            arcsine_ks: 0.03,
            measure_change_ks: 0.05,
            lemma1_ks: 0.06,
            cohort_ks: 0.05,
            lemma5_ks: 0.06,
            lemma7_ks: 0.06,
            truncation_ks: 0.05,
            onedim_ks: 0.08,
            onedim_slack: 0.01,
            level_change_band: 0.03,
            joint_discrepancy: 0.05,
            band_fraction: 0.05,
            se_multiple: 3.0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut config: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.materialize();
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Fills derived defaults so the echoed document is complete.
    pub fn materialize(&mut self) {
        if self.stable.is_none() {
            self.stable = Some(self.model.stable_spec());
        }
        if self.theorem.delta.is_none() {
            let t_max = self.theorem.t_values.iter().copied().fold(0.0, f64::max);
            self.theorem.delta = Some(1e-3 * t_max);
        }
    }

    pub fn stable(&self) -> StableSpec {
        self.stable.unwrap_or_else(|| self.model.stable_spec())
    }

    pub fn delta(&self) -> f64 {
        self.theorem.delta.unwrap_or(1e-3)
    }

    /// Collects every field-level problem into one error.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut need = |ok: bool, field: &str, what: &str| {
            if !ok {
                problems.push(format!("{field}: {what}"));
            }
        };
        let positive_counts = [
            ("walk.replicas", self.walk.replicas),
            ("walk.clt_replicas", self.walk.clt_replicas),
            ("arcsine.replicas", self.arcsine.replicas),
            ("measure_change.replicas", self.measure_change.replicas),
            ("lemmas.replicas", self.lemmas.replicas),
            ("martingale.replicas", self.martingale.replicas),
            ("gamma.replicas", self.gamma.replicas),
            ("gamma.pilot_replicas", self.gamma.pilot_replicas),
            ("theorem.replicas", self.theorem.replicas),
            ("theorem.levy_replicas", self.theorem.levy_replicas),
            ("theorem.band_replicas", self.theorem.band_replicas),
        ];
        for (field, value) in positive_counts {
            need(value >= 2, field, "must be at least 2");
        }
        let horizons = [
            ("walk.n", self.walk.n),
            ("walk.clt_n", self.walk.clt_n),
            ("arcsine.n", self.arcsine.n),
            ("measure_change.n", self.measure_change.n),
            ("lemmas.n", self.lemmas.n),
            ("lemmas.half_width", self.lemmas.half_width),
            ("lemmas.cohort_n", self.lemmas.cohort_n),
            ("gamma.half_width", self.gamma.half_width),
            ("gamma.zeta_horizon", self.gamma.zeta_horizon),
            ("theorem.two_time_n", self.theorem.two_time_n),
            ("theorem.band_n", self.theorem.band_n),
        ];
        for (field, value) in horizons {
            need(value >= 1, field, "must be at least 1");
        }
        need(self.ladder.budget >= 1000, "ladder.budget", "must be at least 1000 epochs");
        need(
            self.lemmas.offsets.iter().all(|&i| i != 0 && i.unsigned_abs() as usize <= self.lemmas.n),
            "lemmas.offsets",
            "offsets must be nonzero and at most lemmas.n in size",
        );
        need(self.lemmas.ratio_offset < self.lemmas.half_width, "lemmas.ratio_offset", "must be below lemmas.half_width");
        need(!self.martingale.lags.is_empty() && self.martingale.lags.iter().all(|&l| l >= 1), "martingale.lags", "need at least one lag ≥ 1");
        need(
            self.martingale.cohort + self.martingale.lags.iter().max().copied().unwrap_or(1)
                <= crate::bpire::MAX_DECOMPOSED_HORIZON,
            "martingale.lags",
            "cohort + lag must not exceed 512",
        );
        need(!self.martingale.generations.is_empty() && self.martingale.generations.iter().all(|&k| k >= 1), "martingale.generations", "need at least one generation ≥ 1");
        need(self.martingale.environments >= 1, "martingale.environments", "must be at least 1");
        need(
            self.gamma.max_zeta_horizon >= self.gamma.zeta_horizon,
            "gamma.max_zeta_horizon",
            "must be at least gamma.zeta_horizon",
        );
        need(!self.theorem.horizons.is_empty() && self.theorem.horizons.iter().all(|&n| n >= 1), "theorem.horizons", "need at least one horizon ≥ 1");
        let t = &self.theorem.t_values;
        need(
            t.len() == 2 && t[0] > 0.0 && t[1] > t[0],
            "theorem.t_values",
            "need exactly two times 0 < t₁ < t₂",
        );
        need(
            self.theorem.delta.is_none_or(|d| d > 0.0 && d.is_finite()),
            "theorem.delta",
            "must be positive",
        );
        need(
            !self.theorem.epsilons.is_empty() && self.theorem.epsilons.iter().all(|&e| e > 0.0),
            "theorem.epsilons",
            "need positive band widths",
        );
        need(self.workers != Some(0), "workers", "must be at least 1");
        if let Err(e) = self.model.validate() {
            problems.push(format!("model: {e}"));
        }
        let s = self.stable();
        if let Err(e) = check_stable(s.alpha, s.rho) {
            problems.push(format!("stable: {e}"));
        }
        if !(s.scale > 0.0 && s.scale.is_finite()) {
            problems.push("stable.scale: must be positive".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems.join("; ")))
        }
    }

    /// JSON echo of the configuration (without worker count and output
    /// directory).
    pub fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_gives_defaults() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c.arcsine.n, 2000);
        assert_eq!(c.stable().alpha, 2.0);
        assert!((c.stable().scale - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
        assert!((c.delta() - 0.002).abs() < 1e-15);
    }

    #[test]
    fn field_level_messages() {
        let err = RunConfig::from_json(r#"{"walk": {"replicas": 0}, "theorem": {"t_values": [2.0, 1.0]}}"#).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("walk.replicas"), "{msg}");
        assert!(msg.contains("theorem.t_values"), "{msg}");
        let err = RunConfig::from_json(r#"{"walk": {"replicaz": 3}}"#).unwrap_err();
        assert!(err.to_string().contains("replicaz"));
        let err = RunConfig::from_json(r#"{"model": {"step": {"family": "normal", "sigma": 1.0}, "rate": {"family": "constant", "value": 1.0}, "alpha": 2.0, "rho": 0.0, "epsilon": 1.0}}"#).unwrap_err();
        assert!(err.to_string().contains("positivity"));
    }

    #[test]
    fn echo_omits_scheduling_fields() {
        let mut c = RunConfig {
            workers: Some(3),
            ..RunConfig::default()
        };
        c.materialize();
        let v = c.echo();
        assert!(v.get("workers").is_none());
        assert!(v.get("out").is_none());
        assert!(v.get("stable").unwrap().is_object());
    }
}
