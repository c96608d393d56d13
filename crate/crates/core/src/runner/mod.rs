//! Experiment driver behind the `bpire-lab` binary.

mod config;
mod experiments;
mod report;
mod theorem;

pub use config::{
    GammaConfig, LadderConfig, LemmaConfig, MartingaleConfig, RunConfig, SampleConfig, TheoremConfig, Thresholds,
    WalkConfig,
};
pub use experiments::{Context, GammaLaw, Output};
pub use report::{Dataset, Provenance, Report, Rule, TestRecord};

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const TOOL: &str = "bpire-lab";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    ValidateEnv,
    WalkStats,
    Arcsine,
    MeasureChange,
    Lemma1,
    Lemma5,
    Lemma7,
    Martingale,
    GammaDist,
    Theorem1Onedim,
    Theorem1Twodim,
    All,
}

impl Experiment {
    pub const SINGLE: [Experiment; 11] = [
        Experiment::ValidateEnv,
        Experiment::WalkStats,
        Experiment::Arcsine,
        Experiment::MeasureChange,
        Experiment::Lemma1,
        Experiment::Lemma5,
        Experiment::Lemma7,
        Experiment::Martingale,
        Experiment::GammaDist,
        Experiment::Theorem1Onedim,
        Experiment::Theorem1Twodim,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::ValidateEnv => "validate-env",
            Experiment::WalkStats => "walk-stats",
            Experiment::Arcsine => "arcsine",
            Experiment::MeasureChange => "measure-change",
            Experiment::Lemma1 => "lemma1",
            Experiment::Lemma5 => "lemma5",
            Experiment::Lemma7 => "lemma7",
            Experiment::Martingale => "martingale",
            Experiment::GammaDist => "gamma-dist",
            Experiment::Theorem1Onedim => "theorem1-onedim",
            Experiment::Theorem1Twodim => "theorem1-twodim",
            Experiment::All => "all",
        }
    }

    fn execute(self, ctx: &Context) -> Result<Output> {
        let result = match self {
            Experiment::ValidateEnv => experiments::validate_env(ctx),
            Experiment::WalkStats => experiments::walk_stats(ctx),
            Experiment::Arcsine => experiments::arcsine(ctx),
            Experiment::MeasureChange => experiments::measure_change(ctx),
            Experiment::Lemma1 => experiments::lemma1(ctx),
            Experiment::Lemma5 => experiments::lemma5(ctx),
            Experiment::Lemma7 => experiments::lemma7(ctx),
            Experiment::Martingale => experiments::martingale(ctx),
            Experiment::GammaDist => experiments::gamma_dist(ctx),
            Experiment::Theorem1Onedim => theorem::onedim(ctx),
            Experiment::Theorem1Twodim => theorem::twodim(ctx),
            Experiment::All => {
                let mut out = Output::default();
                for e in Self::SINGLE {
                    out.extend(e.execute(ctx)?);
                }
                return Ok(out);
            }
        };
        result.map_err(|e| e.in_test(self.name()))
    }
}

/// Runs `experiment` on `config` without touching the file system.
pub fn run(config: &RunConfig, experiment: Experiment) -> Result<(Report, Output)> {
    config.validate()?;
    let mut config = config.clone();
    config.materialize();
    let provenance = Provenance {
        tool: TOOL.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: experiment.name().to_string(),
        config: config.echo(),
    };
    let line = provenance.line();
    let header = format!("# {line}\n");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("workers: {e}")))?;
    let output = pool.install(|| {
        let ctx = Context::new(&config, line);
        let mut output = experiment.execute(&ctx)?;
        if let Some(tables) = ctx.computed_tables() {
            output.files.push(("ladder.toml".to_string(), header + &tables.to_keyed_text()));
        }
        Ok::<_, Error>(output)
    })?;
    let report = Report::new(provenance, output.records.clone());
    Ok((report, output))
}

/// Writes `report.json`, one CSV per dataset and the raw files into `dir`.
pub fn write_outputs(dir: &Path, report: &Report, output: &Output) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.json"), report.to_json())?;
    let line = report.provenance.line();
    for d in &output.datasets {
        fs::write(dir.join(format!("{}.csv", d.name)), d.to_csv(&line))?;
    }
    for (name, body) in &output.files {
        fs::write(dir.join(name), body)?;
    }
    Ok(())
}
