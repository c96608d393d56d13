//! Acceptance criteria at default settings. Runs as a plain program so the
//! per-criterion lines are always printed.

use std::collections::HashMap;
use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use bpire_lab::runner::{run, Experiment, RunConfig, TestRecord};

struct Criterion {
    id: u32,
    title: &'static str,
    experiment: Experiment,
    /// Record names (or prefixes ending in `*`) that must all pass.
    records: &'static [&'static str],
    budget: Duration,
}

const fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

const CRITERIA: [Criterion; 12] = [
    Criterion {
        id: 1,
        title: "P(S_n > 0) within 0.03 of rho",
        experiment: Experiment::WalkStats,
        records: &["walk-stats/positivity"],
        budget: secs(10),
    },
    Criterion {
        id: 2,
        title: "tau_n/n against the arcsine law",
        experiment: Experiment::Arcsine,
        records: &["arcsine/ks"],
        budget: secs(20),
    },
    Criterion {
        id: 3,
        title: "rejection and h-transform laws of S_5 agree",
        experiment: Experiment::MeasureChange,
        records: &["measure-change/positive", "measure-change/negative"],
        budget: secs(60),
    },
    Criterion {
        id: 4,
        title: "walk around its minimum against the two-sided walk",
        experiment: Experiment::Lemma1,
        records: &["lemma1/*"],
        budget: secs(120),
    },
    Criterion {
        id: 5,
        title: "cohort martingale means",
        experiment: Experiment::Martingale,
        records: &["martingale/cohort-lag*"],
        budget: secs(30),
    },
    Criterion {
        id: 6,
        title: "conditional means of Z_k",
        experiment: Experiment::Martingale,
        records: &["martingale/conditional-mean-*"],
        budget: secs(30),
    },
    Criterion {
        id: 7,
        title: "gamma law stable under doubled truncation",
        experiment: Experiment::GammaDist,
        records: &["gamma-dist/truncation-stability", "gamma-dist/sigma1-positive"],
        budget: secs(300),
    },
    Criterion {
        id: 8,
        title: "conditioned series against its limit",
        experiment: Experiment::Lemma5,
        records: &["lemma5/positive-series"],
        budget: secs(120),
    },
    Criterion {
        id: 9,
        title: "normalizer ratios against their limits",
        experiment: Experiment::Lemma7,
        records: &["lemma7/*"],
        budget: secs(180),
    },
    Criterion {
        id: 10,
        title: "Y_n(1) approaches the gamma law",
        experiment: Experiment::Theorem1Onedim,
        records: &["theorem1-onedim/monotone", "theorem1-onedim/final"],
        budget: secs(480),
    },
    Criterion {
        id: 11,
        title: "level-change probability and two-time joint law",
        experiment: Experiment::Theorem1Twodim,
        records: &["theorem1-twodim/level-change", "theorem1-twodim/joint"],
        budget: secs(480),
    },
    Criterion {
        id: 12,
        title: "equal-level band shrinks with epsilon",
        experiment: Experiment::Theorem1Twodim,
        records: &["theorem1-twodim/band", "theorem1-twodim/band-monotone"],
        budget: secs(60),
    },
];

fn matches(pattern: &str, name: &str) -> bool {
    match pattern.strip_suffix('*') {
        Some(prefix) => name.starts_with(prefix),
        None => pattern == name,
    }
}

fn summary(records: &[&TestRecord]) -> String {
    records
        .iter()
        .map(|r| format!("{}={:.4}", r.name.rsplit('/').next().unwrap_or(&r.name), r.statistic))
        .collect::<Vec<_>>()
        .join(" ")
}

fn determinism() -> Result<String, String> {
    let bin = env!("CARGO_BIN_EXE_bpire-lab");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = dir.path().join("config.json");
    fs::write(&config, "{}").map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for (k, workers) in ["1", "1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let status = Command::new(bin)
            .args(["walk-stats", "--config"])
            .arg(&config)
            .args(["--workers", workers, "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        // 1 only reports a failed check; anything else is a crash or usage error
        if !matches!(status.status.code(), Some(0 | 1)) {
            return Err(format!("run {k} exited with {}", status.status));
        }
        reports.push(fs::read(out.join("report.json")).map_err(|e| e.to_string())?);
    }
    if reports[0] != reports[1] {
        return Err("repeated runs differ".to_string());
    }
    if reports[0] != reports[2] {
        return Err("runs with 1 and 2 workers differ".to_string());
    }
    Ok(format!("{} identical bytes over 3 runs", reports[0].len()))
}

fn main() -> ExitCode {
    let config = RunConfig::default();
    let mut cache: HashMap<&'static str, (Vec<TestRecord>, Duration)> = HashMap::new();
    let mut failures = 0;
    let mut supplementary = Vec::new();
    for c in &CRITERIA {
        let name = c.experiment.name();
        if !cache.contains_key(name) {
            let start = Instant::now();
            match run(&config, c.experiment) {
                Ok((report, _)) => {
                    cache.insert(name, (report.records, start.elapsed()));
                }
                Err(e) => {
                    println!("criterion {:>2} FAIL {}: {e}", c.id, c.title);
                    failures += 1;
                    continue;
                }
            }
        }
        let (records, elapsed) = &cache[name];
        let chosen: Vec<&TestRecord> = records
            .iter()
            .filter(|r| c.records.iter().any(|p| matches(p, &r.name)))
            .collect();
        let within_budget = *elapsed <= c.budget;
        let passed = !chosen.is_empty() && chosen.iter().all(|r| r.passed) && within_budget;
        if !passed {
            failures += 1;
        }
        println!(
            "criterion {:>2} {} {}: {} [{:.1}s of {}s]",
            c.id,
            if passed { "PASS" } else { "FAIL" },
            c.title,
            summary(&chosen),
            elapsed.as_secs_f64(),
            c.budget.as_secs()
        );
    }
    match determinism() {
        Ok(detail) => println!("criterion 13 PASS byte-identical reports: {detail}"),
        Err(e) => {
            failures += 1;
            println!("criterion 13 FAIL byte-identical reports: {e}");
        }
    }
    for (records, _) in cache.values() {
        for r in records.iter().filter(|r| !CRITERIA.iter().any(|c| c.records.iter().any(|p| matches(p, &r.name)))) {
            supplementary.push(format!("{} {}={:.4}", if r.passed { "ok  " } else { "FAIL" }, r.name, r.statistic));
        }
    }
    supplementary.sort();
    println!("supplementary checks:");
    for line in &supplementary {
        println!("  {line}");
    }
    if failures == 0 {
        println!("acceptance: all 13 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria failed");
        ExitCode::FAILURE
    }
}
