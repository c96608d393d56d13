use super::experiments::{normalized_values, quantile_table, replicate, Context, Output};
use super::report::{Dataset, Rule, TestRecord};
use crate::limit_process::{fdd_csv, level_of, sample_gamma, sample_limit_fdd, simulate_levy};
use crate::random_walk::{arcsine_cdf, simulate_walk};
use crate::stats::{joint_two_time_test, ks_two_sample, quantile_probes};
use crate::error::Result;

pub fn onedim(ctx: &Context) -> Result<Output> {
    let cfg = &ctx.config.theorem;
    let th = &ctx.config.thresholds;
    let model = ctx.model();
    let seed = ctx.seed();
    let gammas = ctx.gamma_law()?.gammas();
    let mut out = Output::default();
    let mut distances = Vec::new();
    let mut columns = vec![("gamma".to_string(), gammas.clone())];
    for &n in &cfg.horizons {
        let env = ctx.streams(&format!("theorem1-onedim/{n}/environment"));
        let pop = ctx.streams(&format!("theorem1-onedim/{n}/population"));
        let y = replicate(cfg.replicas, |r| {
            Ok(normalized_values(model, n, &[1.0], &mut env.stream(r), &mut pop.stream(r))?[0])
        })?;
        let d = ks_two_sample(&y, &gammas)?.statistic;
        out.records.push(
            TestRecord::new(&format!("theorem1-onedim/n{n}"), d, Rule::Reported, seed, cfg.replicas)
                .input("n", n)
                .input("gamma_replicas", gammas.len()),
        );
        distances.push(d);
        columns.push((format!("y_n{n}"), y));
    }
    let worst_increase = distances.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    if distances.len() > 1 {
        out.records.push(
            TestRecord::new(
                "theorem1-onedim/monotone",
                worst_increase,
                Rule::AtMost {
                    threshold: th.onedim_slack,
                },
                seed,
                cfg.replicas * distances.len() as u64,
            )
            .input("horizons", &cfg.horizons)
            .input("distances", &distances),
        );
    }
    out.records.push(
        TestRecord::new(
            "theorem1-onedim/final",
            *distances.last().expect("at least one horizon"),
            Rule::AtMost { threshold: th.onedim_ks },
            seed,
            cfg.replicas,
        )
        .input("n", cfg.horizons.last()),
    );
    let refs: Vec<(&str, &[f64])> = columns.iter().map(|(n, v)| (n.as_str(), v.as_slice())).collect();
    out.datasets.push(quantile_table("theorem1_onedim_quantiles", &refs)?);
    Ok(out)
}

/// Fraction of Lévy paths whose level drops strictly between `t₁` and `t₂`.
fn level_change_probability(ctx: &Context, delta: f64, name: &str) -> Result<f64> {
    let cfg = &ctx.config.theorem;
    let s = ctx.config.stable();
    let (t1, t2) = (cfg.t_values[0], cfg.t_values[1]);
    let steps = (t2 / delta).round() as usize;
    let fam = ctx.streams(name);
    let changed = replicate(cfg.levy_replicas, |r| {
        let level = level_of(&simulate_levy(s.alpha, s.rho, delta, steps, &mut fam.stream(r))?);
        Ok(level.at(t2) < level.at(t1))
    })?;
    Ok(changed.iter().filter(|&&c| c).count() as f64 / cfg.levy_replicas as f64)
}

pub fn twodim(ctx: &Context) -> Result<Output> {
    let cfg = &ctx.config.theorem;
    let th = &ctx.config.thresholds;
    let model = ctx.model();
    let seed = ctx.seed();
    let spec = ctx.config.stable();
    let (t1, t2) = (cfg.t_values[0], cfg.t_values[1]);
    let delta = ctx.config.delta();
    let mut out = Output::default();

    // the argmin of the level on [0, t₂] lies beyond t₁
    let expected = 1.0 - arcsine_cdf(spec.rho, t1 / t2)?;
    let mut refinement = Dataset::new("level_change_refinement", &["delta", "p_change"]);
    let mut p_change = 0.0;
    for factor in [4.0, 2.0, 1.0] {
        let d = factor * delta;
        let p = level_change_probability(ctx, d, &format!("theorem1-twodim/levy-{factor}"))?;
        refinement.push(vec![d, p]);
        p_change = p;
    }
    out.records.push(
        TestRecord::new(
            "theorem1-twodim/level-change",
            p_change,
            Rule::Within {
                low: expected - th.level_change_band,
                high: expected + th.level_change_band,
            },
            seed,
            cfg.levy_replicas,
        )
        .input("delta", delta)
        .input("expected", expected)
        .input("refinement", &refinement.rows),
    );
    out.datasets.push(refinement);

    let law = ctx.gamma_law()?;
    let gammas = law.gammas();
    let probes = quantile_probes(&gammas)?;

    let n = cfg.two_time_n;
    let env = ctx.streams("theorem1-twodim/environment");
    let pop = ctx.streams("theorem1-twodim/population");
    let pairs = replicate(cfg.replicas, |r| {
        let y = normalized_values(model, n, &cfg.t_values, &mut env.stream(r), &mut pop.stream(r))?;
        Ok((y[0], y[1]))
    })?;
    let joint = joint_two_time_test(&pairs, &gammas, p_change, &probes)?;
    out.records.push(
        TestRecord::new(
            "theorem1-twodim/joint",
            joint.max_discrepancy,
            Rule::AtMost {
                threshold: th.joint_discrepancy,
            },
            seed,
            cfg.replicas,
        )
        .input("n", n)
        .input("p_change", p_change),
    );
    let mut table = Dataset::new("theorem1_twodim_joint", &["x1", "x2", "predicted", "observed"]);
    for ((&(x1, x2), p), o) in probes.iter().zip(&joint.predicted).zip(&joint.observed) {
        table.push(vec![x1, x2, *p, *o]);
    }
    out.datasets.push(table);

    // limit vectors built from a separate γ pool, two values per replica
    let pool = sample_gamma(
        model,
        ctx.config.gamma.half_width,
        law.zeta_horizon,
        ctx.method()?,
        &ctx.streams("theorem1-twodim/gamma-pool"),
        0..2 * cfg.replicas,
    )?;
    let fam = ctx.streams("theorem1-twodim/limit-paths");
    let fdds = replicate(cfg.replicas, |r| {
        let k = 2 * r as usize;
        let g = [pool[k].gamma, pool[k + 1].gamma];
        sample_limit_fdd(&cfg.t_values, spec.alpha, spec.rho, delta, &g, &mut fam.stream(r))
    })?;
    let limit_pairs: Vec<(f64, f64)> = fdds.iter().map(|f| (f.y[0], f.y[1])).collect();
    let limit_change = fdds.iter().filter(|f| f.level_change[0]).count() as f64 / fdds.len() as f64;
    let reproduced = joint_two_time_test(&limit_pairs, &gammas, limit_change, &probes)?;
    out.records.push(
        TestRecord::new(
            "theorem1-twodim/limit-reproduction",
            reproduced.max_discrepancy,
            Rule::AtMost {
                threshold: th.joint_discrepancy,
            },
            seed,
            cfg.replicas,
        )
        .input("p_change", limit_change),
    );

    // γ₁ is drawn independently of the level path
    let g: Vec<f64> = fdds.iter().map(|f| f.y[0]).collect();
    let l: Vec<f64> = fdds.iter().map(|f| f.levels[0]).collect();
    let corr = correlation(&g, &l);
    let root_n = (fdds.len() as f64).sqrt();
    out.records.push(
        TestRecord::new(
            "theorem1-twodim/gamma-level-independence",
            corr.abs() * root_n,
            Rule::AtMost {
                threshold: th.se_multiple,
            },
            seed,
            cfg.replicas,
        )
        .input("correlation", corr),
    );
    out.files.push(("limit_fdd.csv".to_string(), fdd_csv(&fdds, &ctx.provenance)));

    // ε-band around equal pre-limit levels
    let bn = cfg.band_n;
    let k1 = (bn as f64 * t1).floor() as usize;
    let k2 = (bn as f64 * t2).floor() as usize;
    let c_n = spec.normalizer(bn);
    let fam = ctx.streams("theorem1-twodim/band");
    let gaps = replicate(cfg.band_replicas, |r| {
        let s = simulate_walk(model, k2, &mut fam.stream(r))?;
        let v = s.values();
        let l1 = v[..=k1].iter().copied().fold(f64::INFINITY, f64::min);
        let l12 = v[k1..=k2].iter().copied().fold(f64::INFINITY, f64::min);
        Ok((l1 - l12).abs() / c_n)
    })?;
    let mut band = Dataset::new("level_band", &["epsilon", "fraction"]);
    let mut fractions = Vec::new();
    for &eps in &cfg.epsilons {
        let f = gaps.iter().filter(|&&g| g <= eps).count() as f64 / gaps.len() as f64;
        band.push(vec![eps, f]);
        fractions.push((eps, f));
    }
    fractions.sort_by(|a, b| b.0.total_cmp(&a.0));
    let not_decreasing = fractions.windows(2).filter(|w| w[1].1 >= w[0].1).count() as f64;
    out.records.push(
        TestRecord::new("theorem1-twodim/band-monotone", not_decreasing, Rule::Holds, seed, cfg.band_replicas)
            .input("fractions", &fractions),
    );
    let (eps, smallest) = *fractions.last().expect("at least one width");
    out.records.push(
        TestRecord::new(
            "theorem1-twodim/band",
            smallest,
            Rule::AtMost {
                threshold: th.band_fraction,
            },
            seed,
            cfg.band_replicas,
        )
        .input("epsilon", eps)
        .input("n", bn),
    );
    out.datasets.push(band);
    Ok(out)
}

fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}
