use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use sspi_lab::adversary::FixedOrder;
use sspi_lab::error::{Error, Result};
use sspi_lab::generate::{write_instances, GeneratorSpec};
use sspi_lab::harness::{estimate_ratio, exact_ratio, trace_trial, write_csv, AdversaryMode, CompetitiveReport, ExperimentConfig};
use sspi_lab::model::Instance;
use sspi_lab::suites::{run_property_suite, Suite, SuiteConfig};

#[derive(Parser)]
#[command(name = "sspi-lab", version, about = "Single-sample prophet inequality experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo competitive ratio.
    Run(RunArgs),
    /// Exact competitive ratio over every realization pattern.
    Exact(RunArgs),
    /// Property suites.
    Verify(VerifyArgs),
    /// Random instance files.
    Gen(GenArgs),
    /// Worst static order plus every heuristic order.
    Worst(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    policy: String,
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// random | fixed:<name> | exhaustive | adaptive
    #[arg(long)]
    adversary: Option<AdversaryMode>,
    /// CSV report path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON event log of trial 0.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite name, or `all`.
    #[arg(long, default_value = "all")]
    suite: String,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 25)]
    min_reports: usize,
    /// CSV of per-check results.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// e.g. random-graph(4,1.0), bipartite(2,3,0.5), budget-additive(2,3,1,10)
    #[arg(long)]
    family: String,
    /// uniform | exponential | two-point | mixed
    #[arg(long, default_value = "mixed")]
    values: String,
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

fn config(args: &RunArgs, default_adversary: AdversaryMode) -> Result<ExperimentConfig> {
    let instance = Instance::load(&args.instance)?;
    let label = args
        .instance
        .file_stem()
        .map_or_else(|| "instance".to_string(), |s| s.to_string_lossy().into_owned());
    Ok(ExperimentConfig::new(&args.policy, instance, &label)
        .with_trials(args.trials)
        .with_seed(args.seed)
        .with_adversary(args.adversary.unwrap_or(default_adversary)))
}

fn emit(reports: &[CompetitiveReport], out: Option<&Path>) -> Result<bool> {
    let mut ok = true;
    for r in reports {
        let verdict = if r.clears_bound() { "pass" } else { "FAIL" };
        println!("[{verdict}] {}", r.summary());
        if let Some(order) = &r.worst_order {
            println!("       order: {order}");
        }
        ok &= r.clears_bound();
    }
    if let Some(path) = out {
        write_csv(BufWriter::new(File::create(path)?), reports)?;
    }
    Ok(ok)
}

fn write_trace(cfg: &ExperimentConfig, report: &CompetitiveReport, path: &Path) -> Result<()> {
    let order: Option<Vec<usize>> = match cfg.adversary {
        AdversaryMode::Exhaustive => report
            .worst_order
            .as_deref()
            .map(|s| s.split_whitespace().map(|u| u.parse().expect("orders are printed as integers")).collect()),
        _ => None,
    };
    let mut out = BufWriter::new(File::create(path)?);
    trace_trial(cfg, 0, order.as_deref(), &mut out)?;
    Ok(())
}

fn run(args: &RunArgs, exact: bool) -> Result<bool> {
    let default = if exact { AdversaryMode::Exhaustive } else { AdversaryMode::Random };
    let cfg = config(args, default)?;
    let report = if exact { exact_ratio(&cfg)? } else { estimate_ratio(&cfg)? };
    if let Some(path) = &args.trace {
        write_trace(&cfg, &report, path)?;
    }
    emit(std::slice::from_ref(&report), args.out.as_deref())
}

fn worst(args: &RunArgs) -> Result<bool> {
    let base = config(args, AdversaryMode::Exhaustive)?;
    let mut reports = vec![estimate_ratio(&base)?];
    if let Some(path) = &args.trace {
        write_trace(&base, &reports[0], path)?;
    }
    for kind in FixedOrder::ALL {
        let cfg = base.clone().with_adversary(AdversaryMode::Fixed(kind));
        reports.push(estimate_ratio(&cfg)?);
    }
    emit(&reports, args.out.as_deref())
}

#[derive(Serialize)]
struct CheckRow<'a> {
    suite: &'a str,
    check: &'a str,
    samples: u64,
    violations: u64,
    statistic: f64,
    threshold: f64,
    passed: bool,
}

fn verify(args: &VerifyArgs) -> Result<bool> {
    let suites: Vec<Suite> = if args.suite == "all" {
        Suite::ALL.to_vec()
    } else {
        vec![args.suite.parse()?]
    };
    let cfg = SuiteConfig {
        trials: args.trials,
        seed: args.seed,
        min_reports: args.min_reports,
    };
    let mut ok = true;
    let mut reports = Vec::new();
    for s in suites {
        let report = run_property_suite(s, &cfg)?;
        println!("{}:", report.suite);
        for c in &report.checks {
            println!("  {c}");
        }
        ok &= report.passed();
        reports.push(report);
    }
    if let Some(path) = &args.out {
        let mut w = csv::Writer::from_path(path).map_err(std::io::Error::from)?;
        for r in &reports {
            for c in &r.checks {
                w.serialize(CheckRow {
                    suite: &r.suite,
                    check: &c.name,
                    samples: c.samples,
                    violations: c.violations,
                    statistic: c.statistic,
                    threshold: c.threshold,
                    passed: c.passed,
                })
                .map_err(std::io::Error::from)?;
            }
        }
        w.flush()?;
    }
    Ok(ok)
}

fn gen(args: &GenArgs) -> Result<bool> {
    let spec = GeneratorSpec {
        family: args.family.parse()?,
        values: args.values.parse()?,
        seed: args.seed,
        count: args.count,
    };
    for path in write_instances(&spec, &args.out)? {
        println!("{}", path.display());
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run(a) => run(a, false),
        Command::Exact(a) => run(a, true),
        Command::Verify(a) => verify(a),
        Command::Gen(a) => gen(a),
        Command::Worst(a) => worst(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
