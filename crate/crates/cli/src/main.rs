use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use dpal::orchestrator::{
    audit_log, baseline_random_subset, emit_report, plan_from_config, run_dp_al, RunConfig,
};
use dpal::selection::{bench_mechanism, BenchParams, Mechanism};
use dpal::Error;

const EXIT_AUDIT_FAILURE: u8 = 2;

#[derive(Parser)]
#[command(name = "dpal", version, about = "Differentially private active learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the training schedule for a config without training.
    Plan {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run the full active-learning loop and write reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        /// Run the random-subset baseline instead of active learning.
        #[arg(long)]
        random_subset: bool,
    },
    /// Recompute privacy loss from an event log.
    Audit {
        #[arg(long)]
        log: PathBuf,
        /// Run report to compare the replayed losses against.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Monte-Carlo selection quality of the private top-k mechanisms.
    MechBench {
        /// Mechanisms to sweep; `random` adds the uniform baseline.
        #[arg(long, value_enum, value_delimiter = ',', default_value = "laplace,clipped-laplace,gaussian,subsampled-gaussian,random")]
        mechanism: Vec<BenchMechanism>,
        #[arg(long, value_delimiter = ',', default_value = "0.1,0.5,1,2,5,10")]
        epsilons: Vec<f64>,
        #[arg(long, default_value_t = 1000)]
        pool_size: usize,
        #[arg(long, default_value_t = 100)]
        k: usize,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-5)]
        delta: f64,
        /// CSV output path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchMechanism {
    Laplace,
    ClippedLaplace,
    Gaussian,
    SubsampledGaussian,
    Random,
}

impl BenchMechanism {
    fn mechanism(self) -> Option<Mechanism> {
        match self {
            BenchMechanism::Laplace => Some(Mechanism::Laplace),
            BenchMechanism::ClippedLaplace => Some(Mechanism::ClippedLaplace),
            BenchMechanism::Gaussian => Some(Mechanism::Gaussian),
            BenchMechanism::SubsampledGaussian => Some(Mechanism::SubsampledGaussian),
            BenchMechanism::Random => None,
        }
    }
}

fn read_config(path: &Path) -> Result<RunConfig> {
    let file = File::open(path).with_context(|| format!("opening config {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing config {}", path.display()))
}

fn plan(config: &Path) -> Result<()> {
    let cfg = read_config(config)?;
    let report = plan_from_config(&cfg)?;
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &report)?;
    writeln!(out)?;
    Ok(())
}

fn run(config: &Path, seed: Option<u64>, out: &Path, random_subset: bool) -> Result<()> {
    let mut cfg = read_config(config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let output = if random_subset { baseline_random_subset(&cfg)? } else { run_dp_al(&cfg)? };
    let files = emit_report(&output, out)?;
    let r = &output.report;
    println!(
        "final test accuracy {:.4}; audit {}; max group epsilon {:.6} of {}",
        r.final_test_accuracy,
        if r.audit.passed { "pass" } else { "FAIL" },
        r.accounting.groups.iter().map(|g| g.total_epsilon).fold(0.0, f64::max),
        r.epsilon,
    );
    for note in &r.notes {
        println!("note: {note}");
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(())
}

/// Returns whether the audit passed.
fn audit(log: &Path, report: Option<&Path>) -> Result<bool> {
    let outcome = audit_log(log, report)?;
    let mut out = io::stdout().lock();
    for g in &outcome.audit.summary.groups {
        writeln!(
            out,
            "group {:>3}  size {:>7}  selection {:.6}  training {:.6}  total {:.6}",
            g.group, g.size, g.selection_epsilon, g.training_epsilon, g.total_epsilon
        )?;
    }
    writeln!(out, "never selected: {:.6}", outcome.audit.summary.unselected_epsilon)?;
    for v in outcome.audit.violations.iter().chain(&outcome.mismatches) {
        writeln!(out, "violation: {v}")?;
    }
    writeln!(out, "audit {}", if outcome.passed { "pass" } else { "FAIL" })?;
    Ok(outcome.passed)
}

#[allow(clippy::too_many_arguments)]
fn mech_bench(
    mechanisms: &[BenchMechanism],
    epsilons: &[f64],
    pool_size: usize,
    k: usize,
    trials: usize,
    seed: u64,
    delta: f64,
    out: Option<&Path>,
) -> Result<()> {
    if mechanisms.is_empty() || epsilons.is_empty() {
        bail!("need at least one mechanism and one epsilon");
    }
    let params = BenchParams { pool_size, k, trials, seed, delta, ..BenchParams::default() };
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(File::create(path).with_context(|| format!("creating {}", path.display()))?),
        None => Box::new(io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["mechanism", "epsilon", "accuracy_mean", "accuracy_std", "iou_mean", "mse_mean"])?;
    for m in mechanisms {
        for &eps in epsilons {
            let row = bench_mechanism(m.mechanism(), eps, &params)?;
            w.write_record([
                row.mechanism,
                row.epsilon.to_string(),
                row.accuracy_mean.to_string(),
                row.accuracy_std.to_string(),
                row.iou_mean.to_string(),
                row.mse_mean.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Plan { config } => plan(config),
        Command::Run { config, seed, out, random_subset } => run(config, *seed, out, *random_subset),
        Command::Audit { log, report } => match audit(log, report.as_deref()) {
            Ok(true) => Ok(()),
            Ok(false) => return ExitCode::from(EXIT_AUDIT_FAILURE),
            Err(e) => Err(e),
        },
        Command::MechBench { mechanism, epsilons, pool_size, k, trials, seed, delta, out } => {
            mech_bench(mechanism, epsilons, *pool_size, *k, *trials, *seed, *delta, out.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if matches!(e.downcast_ref::<Error>(), Some(Error::AuditFailed(_))) {
                ExitCode::from(EXIT_AUDIT_FAILURE)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
