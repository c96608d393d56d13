//! One function per subcommand. Every replica draws from its own stream, so
//! results do not depend on the worker count.

use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use super::config::RunConfig;
use super::report::{Dataset, Rule, TestRecord};
use crate::bpire::{
    compute_normalizers, evolve_cohort, simulate_bpire, simulate_decomposed, trajectory_csv, cohort_martingale_value,
    PopulationMode,
};
use crate::env_model::{EnvironmentModel, EnvironmentStep};
use crate::error::{Error, Result};
use crate::limit_process::{
    choose_zeta_horizon, gamma_csv, sample_gamma, sample_two_sided_environment, GammaSample, HorizonChoice,
};
use crate::random_walk::{
    arcsine_cdf, centered_at_min, default_ladder_grid, estimate_ladder_tables, sample_conditioned_batch,
    sample_conditioned, sample_given_event, simulate_walk, summarize, ConditioningMethod, LadderTables, MethodTag,
    Side,
};
use crate::rng::StreamFamily;
use crate::stats::{ecdf, ks_against_cdf, ks_two_sample, mean_and_se};

/// Records, tables and raw text files produced by one experiment.
#[derive(Debug, Default)]
pub struct Output {
    pub records: Vec<TestRecord>,
    pub datasets: Vec<Dataset>,
    /// `(file name, contents)`
    pub files: Vec<(String, String)>,
}

impl Output {
    pub fn extend(&mut self, other: Output) {
        self.records.extend(other.records);
        self.datasets.extend(other.datasets);
        self.files.extend(other.files);
    }
}

/// The γ law used by the theorem checks, with the chosen ζ horizon.
pub struct GammaLaw {
    pub samples: Vec<GammaSample>,
    pub choice: Option<HorizonChoice>,
    pub zeta_horizon: usize,
}

impl GammaLaw {
    pub fn gammas(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.gamma).collect()
    }
}

pub struct Context<'a> {
    pub config: &'a RunConfig,
    /// First line (without `#`) of every written file.
    pub provenance: String,
    tables: OnceLock<LadderTables>,
    gamma: OnceLock<GammaLaw>,
}

impl<'a> Context<'a> {
    pub fn new(config: &'a RunConfig, provenance: String) -> Self {
        Self {
            config,
            provenance,
            tables: OnceLock::new(),
            gamma: OnceLock::new(),
        }
    }

    pub fn model(&self) -> &EnvironmentModel {
        &self.config.model
    }

    pub fn seed(&self) -> u64 {
        self.config.seed
    }

    pub fn streams(&self, name: &str) -> StreamFamily {
        StreamFamily::new(self.config.seed, name)
    }

    pub fn tables(&self) -> Result<&LadderTables> {
        if let Some(t) = self.tables.get() {
            return Ok(t);
        }
        let tables = match &self.config.ladder.tables {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("ladder.tables: cannot read {}: {e}", path.display())))?;
                LadderTables::from_keyed_text(&text)?
            }
            None => {
                let grid = default_ladder_grid(self.model());
                estimate_ladder_tables(
                    self.model(),
                    &grid,
                    self.config.ladder.budget,
                    &mut self.streams("ladder").stream(0),
                )?
            }
        };
        Ok(self.tables.get_or_init(|| tables))
    }

    /// Tables estimated or loaded during the run, if any.
    pub fn computed_tables(&self) -> Option<&LadderTables> {
        self.tables.get()
    }

    pub fn method(&self) -> Result<ConditioningMethod<'_>> {
        Ok(ConditioningMethod::new(self.config.conditioning, self.tables()?))
    }

    pub fn gamma_law(&self) -> Result<&GammaLaw> {
        if let Some(g) = self.gamma.get() {
            return Ok(g);
        }
        let c = &self.config.gamma;
        let method = self.method()?;
        let choice = if c.adaptive {
            Some(choose_zeta_horizon(
                self.model(),
                c.half_width,
                c.zeta_horizon,
                c.max_zeta_horizon,
                self.config.thresholds.truncation_ks,
                method,
                &self.streams("gamma/pilot"),
                c.pilot_replicas,
            )?)
        } else {
            None
        };
        let zeta_horizon = choice.as_ref().map_or(c.zeta_horizon, |h| h.zeta_horizon);
        let samples = sample_gamma(
            self.model(),
            c.half_width,
            zeta_horizon,
            method,
            &self.streams("gamma/law"),
            0..c.replicas,
        )?;
        Ok(self.gamma.get_or_init(|| GammaLaw {
            samples,
            choice,
            zeta_horizon,
        }))
    }
}

pub(crate) fn replicate<T: Send>(replicas: u64, f: impl Fn(u64) -> Result<T> + Sync + Send) -> Result<Vec<T>> {
    (0..replicas).into_par_iter().map(f).collect()
}

const QUANTILES: usize = 99;

/// Quantiles at `p = 0.01, …, 0.99` of each sample, one column per sample.
pub(crate) fn quantile_table(name: &str, samples: &[(&str, &[f64])]) -> Result<Dataset> {
    let mut columns = vec!["p"];
    columns.extend(samples.iter().map(|(c, _)| *c));
    let mut d = Dataset::new(name, &columns);
    let ecdfs = samples.iter().map(|(_, s)| ecdf(s)).collect::<Result<Vec<_>>>()?;
    for k in 1..=QUANTILES {
        let p = k as f64 / (QUANTILES + 1) as f64;
        let mut row = vec![p];
        row.extend(ecdfs.iter().map(|e| e.quantile(p)));
        d.push(row);
    }
    Ok(d)
}

fn ks_record(name: &str, a: &[f64], b: &[f64], threshold: f64, seed: u64) -> Result<TestRecord> {
    let ks = ks_two_sample(a, b)?;
    Ok(TestRecord::new(name, ks.statistic, Rule::AtMost { threshold }, seed, (a.len() + b.len()) as u64)
        .input("n1", a.len())
        .input("n2", b.len()))
}

/// `|mean − target| / se`, with `se = 0` treated as exact agreement only
/// when the difference vanishes.
fn standardized_gap(values: &[f64], target: f64) -> (f64, f64, f64) {
    let (m, se) = mean_and_se(values);
    let gap = (m - target).abs();
    let z = if se > 0.0 {
        gap / se
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    (z, m, se)
}

pub fn validate_env(ctx: &Context) -> Result<Output> {
    let report = ctx.model().diagnose();
    let records = report
        .checks
        .iter()
        .map(|c| {
            TestRecord::new(
                &format!("validate-env/{}", c.name),
                if c.passed { 0.0 } else { 1.0 },
                Rule::Holds,
                ctx.seed(),
                0,
            )
            .input("detail", &c.detail)
        })
        .collect();
    Ok(Output {
        records,
        ..Output::default()
    })
}

pub fn walk_stats(ctx: &Context) -> Result<Output> {
    let cfg = &ctx.config.walk;
    let model = ctx.model();
    let fam = ctx.streams("walk-stats/paths");
    let results = replicate(cfg.replicas, |r| {
        let path = simulate_walk(model, cfg.n, &mut fam.stream(r))?;
        let s = summarize(&path);
        let v = path.values();
        let ok = v[s.tau_n] == s.l_n && v[..s.tau_n].iter().all(|&x| x > s.l_n) && s.l_n <= 0.0;
        Ok((s.s_n > 0.0, ok))
    })?;
    let positive = results.iter().filter(|r| r.0).count() as f64 / cfg.replicas as f64;
    let violations = results.iter().filter(|r| !r.1).count() as f64;
    let rho = model.rho;
    let band = ctx.config.thresholds.positivity_band;
    let mut out = Output::default();
    out.records.push(
        TestRecord::new(
            "walk-stats/positivity",
            positive,
            Rule::Within {
                low: rho - band,
                high: rho + band,
            },
            ctx.seed(),
            cfg.replicas,
        )
        .input("n", cfg.n)
        .input("rho", rho),
    );
    out.records.push(
        TestRecord::new("walk-stats/argmin-invariants", violations, Rule::Holds, ctx.seed(), cfg.replicas)
            .input("n", cfg.n),
    );
    if model.alpha == 2.0 {
        // S_n / C_n against the Normal(0, 2) limit
        let spec = ctx.config.stable();
        let fam = ctx.streams("walk-stats/clt");
        let scaled = replicate(cfg.clt_replicas, |r| {
            let mut rng = fam.stream(r);
            let s: f64 = (0..cfg.clt_n).map(|_| model.step.sample(&mut rng)).sum();
            Ok(s / spec.normalizer(cfg.clt_n))
        })?;
        let limit = |x: f64| 0.5 * erfc(-x / 2.0);
        let ks = ks_against_cdf(&scaled, limit)?;
        out.records.push(
            TestRecord::new(
                "walk-stats/clt",
                ks.statistic,
                Rule::AtMost {
                    threshold: ctx.config.thresholds.clt_ks,
                },
                ctx.seed(),
                cfg.clt_replicas,
            )
            .input("n", cfg.clt_n),
        );
        let e = ecdf(&scaled)?;
        let mut d = Dataset::new("walk_clt", &["x", "ecdf", "limit_cdf"]);
        for k in 0..=120 {
            let x = -6.0 + 0.1 * k as f64;
            d.push(vec![x, e.eval(x), limit(x)]);
        }
        out.datasets.push(d);
    }
    Ok(out)
}

pub fn arcsine(ctx: &Context) -> Result<Output> {
    let cfg = &ctx.config.arcsine;
    let model = ctx.model();
    let fam = ctx.streams("arcsine/paths");
    let ratios = replicate(cfg.replicas, |r| {
        let path = simulate_walk(model, cfg.n, &mut fam.stream(r))?;
        Ok(summarize(&path).tau_n as f64 / cfg.n as f64)
    })?;
    let rho = model.rho;
    let ks = ks_against_cdf(&ratios, |x| arcsine_cdf(rho, x.clamp(0.0, 1.0)).unwrap_or(f64::NAN))?;
    let mut out = Output::default();
    out.records.push(
        TestRecord::new(
            "arcsine/ks",
            ks.statistic,
            Rule::AtMost {
                threshold: ctx.config.thresholds.arcsine_ks,
            },
            ctx.seed(),
            cfg.replicas,
        )
        .input("n", cfg.n)
        .input("rho", rho),
    );
    let e = ecdf(&ratios)?;
    let mut d = Dataset::new("arcsine_ecdf", &["x", "ecdf", "arcsine_cdf"]);
    for k in 0..=200 {
        let x = k as f64 / 200.0;
        d.push(vec![x, e.eval(x), arcsine_cdf(rho, x)?]);
    }
    out.datasets.push(d);
    Ok(out)
}

pub fn measure_change(ctx: &Context) -> Result<Output> {
    let cfg = &ctx.config.measure_change;
    let model = ctx.model();
    let tables = ctx.tables()?;
    let threshold = ctx.config.thresholds.measure_change_ks;
    let mut out = Output::default();
    let mut columns: Vec<(String, Vec<f64>)> = Vec::new();
    for (side, label) in [(Side::Positive, "positive"), (Side::Negative, "negative")] {
        let terminal = |tag: MethodTag| -> Result<(Vec<f64>, f64)> {
            let b = sample_conditioned_batch(
                model,
                cfg.n,
                side,
                ConditioningMethod::new(tag, tables),
                &ctx.streams(&format!("measure-change/{label}/{tag:?}")),
                0..cfg.replicas,
            )?;
            Ok((b.samples.iter().map(|s| s.path.terminal()).collect(), b.effective_sample_size))
        };
        let (rej, rej_ess) = terminal(MethodTag::Rejection)?;
        let (sis, sis_ess) = terminal(MethodTag::HTransform)?;
        out.records.push(
            ks_record(&format!("measure-change/{label}"), &rej, &sis, threshold, ctx.seed())?
                .input("n", cfg.n)
                .input("ess_rejection", rej_ess)
                .input("ess_h_transform", sis_ess),
        );
        // E(φ(S_n) | event) with φ = min(|S_n|, 3): plain rejection against the
        // proposal weights without the harmonic factor
        let phi = |s: f64| s.abs().min(3.0);
        let fam = ctx.streams(&format!("measure-change/{label}/event"));
        let plain = replicate(cfg.replicas, |r| Ok(phi(sample_given_event(model, cfg.n, side, &mut fam.stream(r))?.path.terminal())))?;
        let fam = ctx.streams(&format!("measure-change/{label}/weighted"));
        let weighted = replicate(cfg.replicas, |r| {
            let s = sample_conditioned(model, cfg.n, side, ConditioningMethod::HTransform(tables), &mut fam.stream(r))?;
            let x = s.path.terminal();
            let h = match side {
                Side::Positive => tables.v(x),
                Side::Negative => tables.u(-x),
            };
            Ok((phi(x), s.log_weight - h.ln()))
        })?;
        let (m1, se1) = mean_and_se(&plain);
        let logw: Vec<f64> = weighted.iter().map(|w| w.1).collect();
        let w = crate::random_walk::normalize_weights(&logw)?;
        let m2: f64 = w.iter().zip(&weighted).map(|(w, v)| w * v.0).sum();
        let se2 = w.iter().zip(&weighted).map(|(w, v)| w * w * (v.0 - m2).powi(2)).sum::<f64>().sqrt();
        let combined = (se1 * se1 + se2 * se2).sqrt();
        out.records.push(
            TestRecord::new(
                &format!("measure-change/{label}-conditional-mean"),
                (m1 - m2).abs() / combined,
                Rule::AtMost {
                    threshold: ctx.config.thresholds.se_multiple,
                },
                ctx.seed(),
                2 * cfg.replicas,
            )
            .input("rejection_mean", m1)
            .input("weighted_mean", m2)
            .input("n", cfg.n),
        );
        columns.push((format!("rejection_{label}"), rej));
        columns.push((format!("h_transform_{label}"), sis));
    }
    let refs: Vec<(&str, &[f64])> = columns.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    out.datasets.push(quantile_table("measure_change_terminal", &refs)?);
    Ok(out)
}

pub fn lemma1(ctx: &Context) -> Result<Output> {
    let cfg = &ctx.config.lemmas;
    let model = ctx.model();
    let window = cfg.offsets.iter().map(|i| i.unsigned_abs() as usize).max().unwrap_or(1);
    let fam = ctx.streams("lemma1/paths");
    let pre = replicate(cfg.replicas, |r| {
        let path = simulate_walk(model, cfg.n, &mut fam.stream(r))?;
        centered_at_min(&path, window)
    })?;
    let envs = sample_two_sided_environment(model, window, 0, ctx.method()?, &ctx.streams("lemma1/limit"), 0..cfg.replicas)?;
    let mut out = Output::default();
    let mut columns = Vec::new();
    for &i in &cfg.offsets {
        let a: Vec<f64> = pre.iter().map(|c| c[(i + window as i64) as usize]).collect();
        let b: Vec<f64> = envs.iter().map(|e| e.s_star(i as isize)).collect();
        out.records.push(
            ks_record(&format!("lemma1/offset{i:+}"), &a, &b, ctx.config.thresholds.lemma1_ks, ctx.seed())?
                .input("n", cfg.n)
                .input("offset", i),
        );
        columns.push((format!("prelimit_{i:+}"), a));
        columns.push((format!("limit_{i:+}"), b));
    }
    let refs: Vec<(&str, &[f64])> = columns.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    out.datasets.push(quantile_table("lemma1_quantiles", &refs)?);
    Ok(out)
}

fn series(steps: &[EnvironmentStep]) -> f64 {
    let mut s = 0.0_f64;
    let mut total = 0.0;
    for q in steps {
        total += q.mu * (-s).exp();
        s += q.x;
    }
    total
}

pub fn lemma5(ctx: &Context) -> Result<Output> {
    let cfg = &ctx.config.lemmas;
    let model = ctx.model();
    let fam = ctx.streams("lemma5/prelimit");
    let pre = replicate(cfg.replicas, |r| {
        Ok(series(&sample_given_event(model, cfg.n, Side::Positive, &mut fam.stream(r))?.steps))
    })?;
    let limit = sample_conditioned_batch(
        model,
        cfg.half_width,
        Side::Positive,
        ConditioningMethod::HTransform(ctx.tables()?),
        &ctx.streams("lemma5/limit"),
        0..cfg.replicas,
    )?;
    let lim: Vec<f64> = limit.samples.iter().map(|s| series(&s.steps)).collect();
    let mut out = Output::default();
    out.records.push(
        ks_record("lemma5/positive-series", &pre, &lim, ctx.config.thresholds.lemma5_ks, ctx.seed())?
            .input("n", cfg.n)
            .input("half_width", cfg.half_width)
            .input("ess", limit.effective_sample_size),
    );
    out.datasets.push(quantile_table("lemma5_quantiles", &[("prelimit", &pre), ("limit", &lim)])?);
    Ok(out)
}

pub fn lemma7(ctx: &Context) -> Result<Output> {
    let cfg = &ctx.config.lemmas;
    let model = ctx.model();
    let i = cfg.ratio_offset;
    let fam = ctx.streams("lemma7/prelimit");
    let pre = replicate(cfg.replicas, |r| {
        let env = model.draw_environment(cfg.n, &mut fam.stream(r));
        let norms = compute_normalizers(&env)?;
        let n = cfg.n;
        let mut tau = 0;
        for k in 1..=n {
            if norms.s[k] < norms.s[tau] {
                tau = k;
            }
        }
        // a and b rescaled by e^{S_τ}; the ratios are unchanged and nothing overflows
        let a: Vec<f64> = norms.s.iter().map(|s| (-(s - norms.s[tau])).exp()).collect();
        let mut b = vec![0.0; n + 1];
        for k in 0..n {
            b[k + 1] = b[k] + env[k].mu * a[k];
        }
        let bn = b[n];
        // indices outside 0..=n are clamped for b and give 0 for a
        let upper = (bn - b[(tau + i).min(n)]) / bn;
        let lower = b[tau.saturating_sub(i)] / bn;
        let forward = if tau + i <= n { a[tau + i] / bn } else { 0.0 };
        let backward = if tau >= i { a[tau - i] / bn } else { 0.0 };
        Ok([upper, lower, forward, backward])
    })?;
    let h = cfg.half_width;
    let envs = sample_two_sided_environment(model, h, 0, ctx.method()?, &ctx.streams("lemma7/limit"), 0..cfg.replicas)?;
    let lim: Vec<[f64; 4]> = envs
        .iter()
        .map(|e| {
            let s1 = e.sigma1(h);
            let (hi, ii) = (h as isize, i as isize);
            let upper: f64 = (ii..hi).map(|j| e.mu_star(j + 1) * (-e.s_star(j)).exp()).sum::<f64>() / s1;
            let lower: f64 = (ii + 1..=hi).map(|j| e.mu_star(-j + 1) * (-e.s_star(-j)).exp()).sum::<f64>() / s1;
            let forward = (-e.s_star(ii)).exp() / s1;
            let backward = (-e.s_star(-ii)).exp() / s1;
            [upper, lower, forward, backward]
        })
        .collect();
    let names = ["upper-tail", "lower-head", "a-forward", "a-backward"];
    let mut out = Output::default();
    let mut columns = Vec::new();
    for (k, name) in names.iter().enumerate() {
        let a: Vec<f64> = pre.iter().map(|v| v[k]).collect();
        let b: Vec<f64> = lim.iter().map(|v| v[k]).collect();
        out.records.push(
            ks_record(&format!("lemma7/{name}"), &a, &b, ctx.config.thresholds.lemma7_ks, ctx.seed())?
                .input("n", cfg.n)
                .input("offset", i)
                .input("half_width", h),
        );
        columns.push((format!("prelimit_{name}"), a));
        columns.push((format!("limit_{name}"), b));
    }
    let refs: Vec<(&str, &[f64])> = columns.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    out.datasets.push(quantile_table("lemma7_quantiles", &refs)?);
    Ok(out)
}

pub fn martingale(ctx: &Context) -> Result<Output> {
    let cfg = &ctx.config.martingale;
    let model = ctx.model();
    let seed = ctx.seed();
    let se_multiple = ctx.config.thresholds.se_multiple;
    let mut out = Output::default();

    // a_{i,n} Z_{i,n} along one decomposed run per replica
    let i = cfg.cohort;
    let horizon = i + cfg.lags.iter().copied().max().unwrap_or(1);
    let env = model.draw_environment(horizon, &mut ctx.streams("martingale/environment").stream(0));
    let fam = ctx.streams("martingale/cohorts");
    let runs = replicate(cfg.replicas, |r| {
        let d = simulate_decomposed(&env, horizon, &mut fam.stream(r))?;
        let values = cfg
            .lags
            .iter()
            .map(|&lag| cohort_martingale_value(&d, i, i + lag))
            .collect::<Result<Vec<_>>>()?;
        let t = d.to_trajectory();
        let identity = (0..=horizon).all(|k| {
            let sum: u64 = (0..k).map(|j| d.cohort(j, k)).sum();
            t.z[k].exact() == Some(sum)
        });
        Ok((values, identity))
    })?;
    let target = env[i].mu;
    for (k, &lag) in cfg.lags.iter().enumerate() {
        let values: Vec<f64> = runs.iter().map(|r| r.0[k]).collect();
        let (z, m, se) = standardized_gap(&values, target);
        out.records.push(
            TestRecord::new(
                &format!("martingale/cohort-lag{lag}"),
                z,
                Rule::AtMost { threshold: se_multiple },
                seed,
                cfg.replicas,
            )
            .input("cohort", i)
            .input("n", i + lag)
            .input("mean", m)
            .input("standard_error", se)
            .input("target", target),
        );
    }
    let broken = runs.iter().filter(|r| !r.1).count() as f64;
    out.records.push(
        TestRecord::new("martingale/decomposition-identity", broken, Rule::Holds, seed, cfg.replicas)
            .input("horizon", horizon),
    );

    // E(Z_k | env) = b_k / a_k
    let kmax = cfg.generations.iter().copied().max().unwrap_or(1);
    for e in 0..cfg.environments {
        let env = model.draw_environment(kmax, &mut ctx.streams("martingale/fixed-environments").stream(e as u64));
        let norms = compute_normalizers(&env)?;
        let fam = ctx.streams(&format!("martingale/conditional-mean/{e}"));
        let runs = replicate(cfg.replicas, |r| {
            let t = simulate_bpire(&env, kmax, PopulationMode::Exact, &mut fam.stream(r))?;
            Ok(cfg.generations.iter().map(|&k| t.z_value(k)).collect::<Vec<_>>())
        })?;
        for (j, &k) in cfg.generations.iter().enumerate() {
            let values: Vec<f64> = runs.iter().map(|r| r[j]).collect();
            let target = norms.b[k] / norms.a[k];
            let (z, m, se) = standardized_gap(&values, target);
            out.records.push(
                TestRecord::new(
                    &format!("martingale/conditional-mean-env{e}-k{k}"),
                    z,
                    Rule::AtMost { threshold: se_multiple },
                    seed,
                    cfg.replicas,
                )
                .input("mean", m)
                .input("standard_error", se)
                .input("target", target),
            );
        }
        if e == 0 {
            let t = simulate_bpire(&env, kmax, PopulationMode::Exact, &mut fam.child("export").stream(0))?;
            out.files.push(("trajectory_sample.csv".to_string(), trajectory_csv(&t, &norms, &ctx.provenance)));
        }
    }

    // a_{0,n} Z_{0,n} under {L_n ≥ 0} at n and 2n
    let lc = &ctx.config.lemmas;
    let cohort_value = |n: usize, name: &str| {
        let fam = ctx.streams(name);
        replicate(lc.replicas, move |r| {
            let mut rng = fam.stream(r);
            let env = sample_given_event(model, n, Side::Positive, &mut rng)?.steps;
            let eta = rand_distr::Distribution::sample(&rand_distr::Poisson::new(env[0].mu).expect("positive rate"), &mut rng) as u64;
            let sizes = evolve_cohort(&env, eta, PopulationMode::default(), &mut rng)?;
            let s: f64 = env.iter().map(|q| q.x).sum();
            Ok(if sizes[n].is_zero() { 0.0 } else { (sizes[n].ln_value() - s).exp() })
        })
    };
    let a = cohort_value(lc.cohort_n, "martingale/stabilization-n")?;
    let b = cohort_value(2 * lc.cohort_n, "martingale/stabilization-2n")?;
    out.records.push(
        ks_record("martingale/cohort-stabilization", &a, &b, ctx.config.thresholds.cohort_ks, seed)?
            .input("n", lc.cohort_n)
            .input("n2", 2 * lc.cohort_n),
    );
    Ok(out)
}

pub fn gamma_dist(ctx: &Context) -> Result<Output> {
    let c = &ctx.config.gamma;
    let model = ctx.model();
    let method = ctx.method()?;
    let seed = ctx.seed();
    let base = sample_gamma(model, c.half_width, c.zeta_horizon, method, &ctx.streams("gamma/base"), 0..c.replicas)?;
    let doubled = sample_gamma(
        model,
        2 * c.half_width,
        2 * c.zeta_horizon,
        method,
        &ctx.streams("gamma/doubled"),
        0..c.replicas,
    )?;
    let g1: Vec<f64> = base.iter().map(|s| s.gamma).collect();
    let g2: Vec<f64> = doubled.iter().map(|s| s.gamma).collect();
    let mut out = Output::default();
    out.records.push(
        ks_record("gamma-dist/truncation-stability", &g1, &g2, ctx.config.thresholds.truncation_ks, seed)?
            .input("I", c.half_width)
            .input("J", c.zeta_horizon)
            .input("I2", 2 * c.half_width)
            .input("J2", 2 * c.zeta_horizon),
    );
    let nonpositive = base.iter().chain(&doubled).filter(|s| s.sigma1.is_nan() || s.sigma1 <= 0.0).count() as f64;
    out.records.push(TestRecord::new("gamma-dist/sigma1-positive", nonpositive, Rule::Holds, seed, 2 * c.replicas));
    if c.adaptive {
        let law = ctx.gamma_law()?;
        if let Some(choice) = &law.choice {
            let last = choice.history.last().map_or(0.0, |h| h.1);
            out.records.push(
                TestRecord::new(
                    "gamma-dist/zeta-horizon",
                    last,
                    Rule::AtMost {
                        threshold: ctx.config.thresholds.truncation_ks,
                    },
                    seed,
                    c.pilot_replicas,
                )
                .input("chosen_J", choice.zeta_horizon)
                .input("history", &choice.history),
            );
        }
    }
    out.files.push(("gamma_samples.csv".to_string(), gamma_csv(&base, &ctx.provenance)));
    out.datasets.push(quantile_table("gamma_quantiles", &[("base", &g1), ("doubled", &g2)])?);
    Ok(out)
}

/// `Y_n(t)` at the given times for one replica on an unconditioned environment.
pub(crate) fn normalized_values<R: Rng + ?Sized>(model: &EnvironmentModel, n: usize, times: &[f64], rng_env: &mut R, rng_pop: &mut R) -> Result<Vec<f64>> {
    let horizon = times.iter().map(|&t| (n as f64 * t).floor() as usize).max().unwrap_or(n).max(1);
    let env = model.draw_environment(horizon, rng_env);
    let traj = simulate_bpire(&env, horizon, PopulationMode::default(), rng_pop)?;
    let norms = compute_normalizers(&env)?;
    Ok(crate::bpire::normalized_process(&traj, &norms, n, times)?.y)
}
