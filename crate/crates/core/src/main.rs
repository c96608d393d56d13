use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bpire_lab::runner::{run, write_outputs, Experiment, RunConfig};
use bpire_lab::Error;

#[derive(Parser)]
#[command(name = "bpire-lab", version, about = "Monte Carlo checks for branching processes with immigration in random environment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory for report.json and CSV files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
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

impl From<Command> for Experiment {
    fn from(c: Command) -> Self {
        match c {
            Command::ValidateEnv => Experiment::ValidateEnv,
            Command::WalkStats => Experiment::WalkStats,
            Command::Arcsine => Experiment::Arcsine,
            Command::MeasureChange => Experiment::MeasureChange,
            Command::Lemma1 => Experiment::Lemma1,
            Command::Lemma5 => Experiment::Lemma5,
            Command::Lemma7 => Experiment::Lemma7,
            Command::Martingale => Experiment::Martingale,
            Command::GammaDist => Experiment::GammaDist,
            Command::Theorem1Onedim => Experiment::Theorem1Onedim,
            Command::Theorem1Twodim => Experiment::Theorem1Twodim,
            Command::All => Experiment::All,
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(workers) = cli.workers {
        config.workers = Some(workers);
    }
    if let Some(out) = &cli.out {
        config.out = out.clone();
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match load(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let result = run(&config, cli.command.into()).and_then(|(report, output)| {
        write_outputs(&config.out, &report, &output)?;
        Ok(report)
    });
    match result {
        Ok(report) => {
            for r in &report.records {
                println!("{} {} statistic={}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.statistic);
            }
            println!("report written to {}", config.out.join("report.json").display());
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
