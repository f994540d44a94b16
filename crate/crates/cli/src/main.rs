//! `opsgd`: command-line runner for the experiment harness.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use opsgd::harness::{run_experiment, ExperimentConfig, ExperimentKind};

#[derive(Parser)]
#[command(
    name = "opsgd",
    version,
    about = "Run regularized kernel SGD experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML config; defaults for the subcommand are used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the config output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Expectation rate study.
    Rate,
    /// High-probability (quantile) rate study.
    Highprob,
    /// Error decomposition audit.
    Decompose,
    /// Operator-norm bound audit.
    Lemmas,
    /// Surrogate structured prediction demo.
    Structured,
    /// PCA encoder-decoder demo.
    Pca,
    /// Explicit-feature dual runs against the spectral estimator.
    Crosscheck,
}

impl Command {
    fn kind(self) -> ExperimentKind {
        match self {
            Command::Rate => ExperimentKind::RateExpectation,
            Command::Highprob => ExperimentKind::RateHighprob,
            Command::Decompose => ExperimentKind::Decomposition,
            Command::Lemmas => ExperimentKind::LemmaAudit,
            Command::Structured => ExperimentKind::StructuredDemo,
            Command::Pca => ExperimentKind::PcaDemo,
            Command::Crosscheck => ExperimentKind::DualVsSpectral,
        }
    }
}

fn load(cli: &Cli) -> anyhow::Result<ExperimentConfig> {
    let kind = cli.command.kind();
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_path(path)
            .with_context(|| format!("loading {}", path.display()))?,
        None => ExperimentConfig::for_kind(kind),
    };
    if cfg.experiment != kind {
        bail!(
            "config experiment is {} but the subcommand runs {}",
            cfg.experiment.as_str(),
            kind.as_str()
        );
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> anyhow::Result<bool> {
    let cfg = load(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.jobs {
        if n == 0 {
            bail!("--jobs must be at least 1");
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build()?;
    let (outcome, files) = pool.install(|| run_experiment(&cfg))?;
    for (name, pass) in outcome.checks() {
        println!("{} {name}", if pass { "PASS" } else { "FAIL" });
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(outcome.passed())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
