//! Monte Carlo and exact competitive-ratio estimation, reports, CSV rows,
//! per-arrival traces and the worker pool.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use crate::adversary::{
    all_orders, argmin_first, fixed_order, order_values, worst_order_adaptive, FixedOrder, ADAPTIVE_CAP,
};
use crate::error::{Error, Result};
use crate::model::{check_permutation, draw_realization, enumerate_realizations, Instance, Realization, DEFAULT_ENUMERATION_CAP};
use crate::oracles::OracleLimits;
use crate::policy::{by_name, Policy};
use crate::rng::RandomSource;
use crate::stats::{PairedEstimate, PairedMoments};
use crate::trace::write_event_log;

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "SSPI_LAB_THREADS";

/// Trials per work unit. Fixed so that aggregation order, and hence every
/// float, is independent of the number of workers.
pub const CHUNK: u64 = 512;

/// Pool sized by [`THREADS_ENV`] when set, else by rayon's default.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let n: usize = raw
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::Config(format!("{THREADS_ENV} must be a positive integer, got `{raw}`")))?;
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AdversaryMode {
    /// Fresh uniformly random order per trial.
    Random,
    /// A named heuristic order per trial.
    Fixed(FixedOrder),
    /// One static order minimizing the ensemble mean.
    Exhaustive,
    /// Per-realization adaptive minimum.
    Adaptive,
}

impl fmt::Display for AdversaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryMode::Random => f.write_str("random"),
            AdversaryMode::Fixed(o) => write!(f, "fixed:{o}"),
            AdversaryMode::Exhaustive => f.write_str("exhaustive"),
            AdversaryMode::Adaptive => f.write_str("adaptive"),
        }
    }
}

impl FromStr for AdversaryMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(AdversaryMode::Random),
            "exhaustive" => Ok(AdversaryMode::Exhaustive),
            "adaptive" => Ok(AdversaryMode::Adaptive),
            _ => match s.strip_prefix("fixed:") {
                Some(name) => Ok(AdversaryMode::Fixed(name.parse()?)),
                None => Err(Error::Config(format!(
                    "unknown adversary `{s}`; expected random, fixed:<name>, exhaustive or adaptive"
                ))),
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub policy: String,
    pub instance: Arc<Instance>,
    pub instance_label: String,
    pub trials: u64,
    pub seed: u64,
    pub adversary: AdversaryMode,
    pub limits: OracleLimits,
    pub enumeration_cap: usize,
}

impl ExperimentConfig {
    pub fn new(policy: &str, instance: Instance, label: &str) -> Self {
        Self {
            policy: policy.to_string(),
            instance: Arc::new(instance),
            instance_label: label.to_string(),
            trials: 100_000,
            seed: 0,
            adversary: AdversaryMode::Random,
            limits: OracleLimits::default(),
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }

    pub fn with_trials(mut self, trials: u64) -> Self {
        self.trials = trials;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_adversary(mut self, adversary: AdversaryMode) -> Self {
        self.adversary = adversary;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    MonteCarlo,
    Exact,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompetitiveReport {
    pub policy: String,
    pub instance: String,
    pub adversary: String,
    pub mode: Mode,
    /// Trials, or realization patterns in exact mode.
    pub trials: u64,
    pub seed: u64,
    pub bound: f64,
    #[serde(flatten)]
    pub estimate: PairedEstimate,
    /// `E[ALG] = 0`: no ratio is reported.
    pub degenerate: bool,
    pub worst_order: Option<String>,
    #[serde(skip)]
    pub elapsed: Duration,
}

impl CompetitiveReport {
    pub fn ratio(&self) -> Option<f64> {
        self.estimate.ratio
    }

    /// `bound * (E[ALG] - hw) >= E[OPT] + hw`: the bound holds with the whole
    /// 99% interval on its side.
    pub fn clears_bound(&self) -> bool {
        let e = &self.estimate;
        self.bound * (e.e_alg - e.hw_alg) >= e.e_opt + e.hw_opt
    }

    /// The ratio does not exceed the bound by more than its 99% half-width.
    pub fn within_bound(&self) -> bool {
        let e = &self.estimate;
        match (e.ratio, e.hw_ratio) {
            (Some(r), Some(hw)) => r - hw <= self.bound,
            _ => e.e_opt - e.hw_opt <= 0.0,
        }
    }

    /// Compact one-line summary.
    pub fn summary(&self) -> String {
        let e = &self.estimate;
        let ratio = match (e.ratio, e.hw_ratio) {
            (Some(r), Some(hw)) => format!("{r:.4} ± {hw:.4}"),
            _ => "n/a (E[ALG] = 0)".to_string(),
        };
        let (mode, unit) = match self.mode {
            Mode::MonteCarlo => ("monte carlo", "trials"),
            Mode::Exact => ("exact", "patterns"),
        };
        format!(
            "{} on {} [{}; {mode}; {} {unit}]: E[ALG] = {:.6} ± {:.6}, E[OPT] = {:.6} ± {:.6}, ratio {} (bound {})",
            self.policy, self.instance, self.adversary, self.trials, e.e_alg, e.hw_alg, e.e_opt, e.hw_opt, ratio, self.bound
        )
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    policy: &'a str,
    instance: &'a str,
    adversary: &'a str,
    trials: u64,
    e_alg: f64,
    e_opt: f64,
    ratio: Option<f64>,
    ci: Option<f64>,
    worst_order: &'a str,
    seed: u64,
}

/// Header plus one row per report, in the fixed column order.
pub fn write_csv<W: Write>(out: W, reports: &[CompetitiveReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in reports {
        w.serialize(CsvRow {
            policy: &r.policy,
            instance: &r.instance,
            adversary: &r.adversary,
            trials: r.trials,
            e_alg: r.estimate.e_alg,
            e_opt: r.estimate.e_opt,
            ratio: r.estimate.ratio,
            ci: r.estimate.hw_ratio,
            worst_order: r.worst_order.as_deref().unwrap_or(""),
            seed: r.seed,
        })
        .map_err(std::io::Error::from)?;
    }
    if reports.is_empty() {
        w.write_record([
            "policy", "instance", "adversary", "trials", "e_alg", "e_opt", "ratio", "ci", "worst_order", "seed",
        ])
        .map_err(std::io::Error::from)?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_order(order: &[usize]) -> String {
    order.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

#[derive(Clone, Debug)]
struct Stats {
    single: PairedMoments,
    per_order: Vec<PairedMoments>,
}

impl Stats {
    fn new(orders: usize) -> Self {
        Self {
            single: PairedMoments::default(),
            per_order: vec![PairedMoments::default(); orders],
        }
    }

    fn merge(&mut self, other: &Stats) {
        self.single.merge(&other.single);
        for (a, b) in self.per_order.iter_mut().zip(&other.per_order) {
            a.merge(b);
        }
    }
}

struct Driver<'a> {
    config: &'a ExperimentConfig,
    policy: Box<dyn Policy>,
    orders: Vec<Vec<usize>>,
}

impl<'a> Driver<'a> {
    fn new(config: &'a ExperimentConfig) -> Result<Self> {
        let policy = by_name(&config.policy)?;
        policy.check_instance(&config.instance)?;
        let units = policy.arrival_units(&config.instance);
        let orders = match config.adversary {
            AdversaryMode::Exhaustive => all_orders(units)?,
            AdversaryMode::Adaptive if units > ADAPTIVE_CAP => {
                return Err(Error::Size {
                    what: "arrival units for adaptive search",
                    actual: units,
                    cap: ADAPTIVE_CAP,
                })
            }
            _ => Vec::new(),
        };
        Ok(Self { config, policy, orders })
    }

    fn optimum(&self, real: &Realization) -> Result<f64> {
        self.policy
            .offline_optimum(&self.config.instance, &real.reward_values(), &self.config.limits)
            .map_err(|e| Error::Oracle {
                instance: self.config.instance_label.clone(),
                source: Box::new(e),
            })
    }

    fn order_for(&self, real: &Realization, order_rng: &mut RandomSource) -> Vec<usize> {
        let inst = &self.config.instance;
        match self.config.adversary {
            AdversaryMode::Fixed(kind) => fixed_order(kind, self.policy.as_ref(), inst, real, order_rng),
            _ => {
                let mut o: Vec<usize> = (0..self.policy.arrival_units(inst)).collect();
                o.shuffle(order_rng);
                o
            }
        }
    }

    fn run_order(&self, real: &Realization, policy_rng: &RandomSource, order: &[usize]) -> Result<f64> {
        let mut run = self.policy.start(&self.config.instance, real, &mut policy_rng.clone())?;
        for &u in order {
            run.arrive(u)?;
        }
        if !run.is_feasible() {
            return Err(Error::Contract(format!("{} collected an infeasible set", self.policy.name())));
        }
        Ok(run.value())
    }

    fn observe(
        &self,
        stats: &mut Stats,
        real: &Realization,
        weight: f64,
        policy_rng: &RandomSource,
        mut order_rng: RandomSource,
    ) -> Result<()> {
        let opt = self.optimum(real)?;
        let inst = &self.config.instance;
        match self.config.adversary {
            AdversaryMode::Exhaustive => {
                let vals = order_values(self.policy.as_ref(), inst, real, policy_rng)?;
                for (m, v) in stats.per_order.iter_mut().zip(vals) {
                    m.push_weighted(v, opt, weight);
                }
            }
            AdversaryMode::Adaptive => {
                let a = worst_order_adaptive(self.policy.as_ref(), inst, real, policy_rng)?;
                stats.single.push_weighted(a.value, opt, weight);
            }
            _ => {
                let order = self.order_for(real, &mut order_rng);
                let v = self.run_order(real, policy_rng, &order)?;
                stats.single.push_weighted(v, opt, weight);
            }
        }
        Ok(())
    }

    /// Splits `0..n` into fixed chunks, runs them on the pool and merges the
    /// partial statistics in chunk order.
    fn fan_out(&self, n: u64, item: impl Fn(&mut Stats, u64) -> Result<()> + Sync) -> Result<Stats> {
        let chunks = n.div_ceil(CHUNK);
        let pool = worker_pool()?;
        let parts: Vec<Result<Stats>> = pool.install(|| {
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut st = Stats::new(self.orders.len());
                    for k in c * CHUNK..((c + 1) * CHUNK).min(n) {
                        item(&mut st, k)?;
                    }
                    Ok(st)
                })
                .collect()
        });
        let mut total = Stats::new(self.orders.len());
        for p in parts {
            total.merge(&p?);
        }
        Ok(total)
    }

    fn report(&self, stats: Stats, mode: Mode, trials: u64, started: Instant) -> CompetitiveReport {
        let n = (mode == Mode::MonteCarlo).then_some(trials as f64);
        let (estimate, worst_order) = match self.config.adversary {
            AdversaryMode::Exhaustive => {
                let means: Vec<f64> = stats.per_order.iter().map(|m| m.alg.value() / m.count).collect();
                let best = argmin_first(&means);
                (stats.per_order[best].estimate(n), Some(format_order(&self.orders[best])))
            }
            other => (stats.single.estimate(n), Some(other.to_string())),
        };
        CompetitiveReport {
            policy: self.policy.name(),
            instance: self.config.instance_label.clone(),
            adversary: self.config.adversary.to_string(),
            mode,
            trials,
            seed: self.config.seed,
            bound: self.policy.bound(&self.config.instance),
            degenerate: estimate.ratio.is_none(),
            estimate,
            worst_order,
            elapsed: started.elapsed(),
        }
    }
}

/// Per-trial random streams: realization, policy coins, order.
pub fn trial_streams(seed: u64, trial: u64) -> (RandomSource, RandomSource, RandomSource) {
    let t = RandomSource::new(seed).fork_indexed("trial", trial);
    (t.fork("realization"), t.fork("policy"), t.fork("order"))
}

/// Monte Carlo estimate of `E[ALG]`, `E[OPT]` and their ratio.
pub fn estimate_ratio(config: &ExperimentConfig) -> Result<CompetitiveReport> {
    let started = Instant::now();
    if config.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let driver = Driver::new(config)?;
    let stats = driver.fan_out(config.trials, |st, t| {
        let (mut real_rng, policy_rng, order_rng) = trial_streams(config.seed, t);
        let real = draw_realization(&config.instance, &mut real_rng)?;
        driver.observe(st, &real, 1.0, &policy_rng, order_rng)
    })?;
    Ok(driver.report(stats, Mode::MonteCarlo, config.trials, started))
}

/// Exact expectations over every realization pattern.
pub fn exact_ratio(config: &ExperimentConfig) -> Result<CompetitiveReport> {
    let started = Instant::now();
    let driver = Driver::new(config)?;
    if driver.policy.is_randomized(&config.instance) {
        return Err(Error::Unsupported(format!(
            "exact mode needs a deterministic policy; {} draws its own coins on this instance",
            driver.policy.name()
        )));
    }
    if matches!(config.adversary, AdversaryMode::Random | AdversaryMode::Fixed(FixedOrder::Random)) {
        return Err(Error::Config("exact mode needs a deterministic adversary".into()));
    }
    let patterns = enumerate_realizations(&config.instance, config.enumeration_cap)?;
    let root = RandomSource::new(config.seed);
    let stats = driver.fan_out(patterns.len() as u64, |st, k| {
        let p = &patterns[k as usize];
        driver.observe(st, &p.realization, p.probability, &root.fork("policy"), root.fork("order"))
    })?;
    Ok(driver.report(stats, Mode::Exact, patterns.len() as u64, started))
}

/// Runs trial `trial` of `config` with event recording and writes the JSON
/// event log. `order` overrides the adversary. Returns the order used.
pub fn trace_trial<W: Write>(
    config: &ExperimentConfig,
    trial: u64,
    order: Option<&[usize]>,
    out: &mut W,
) -> Result<Vec<usize>> {
    let driver = Driver::new(config)?;
    let policy = driver.policy.as_ref();
    let inst = &config.instance;
    let (mut real_rng, policy_rng, mut order_rng) = trial_streams(config.seed, trial);
    let real = draw_realization(inst, &mut real_rng)?;
    let order = match (order, config.adversary) {
        (Some(o), _) => {
            check_permutation(o, policy.arrival_units(inst), "arrival units")?;
            o.to_vec()
        }
        (None, AdversaryMode::Adaptive) => worst_order_adaptive(policy, inst, &real, &policy_rng)?.order,
        (None, AdversaryMode::Exhaustive) => (0..policy.arrival_units(inst)).collect(),
        (None, _) => driver.order_for(&real, &mut order_rng),
    };
    let mut run = policy.start(inst, &real, &mut policy_rng.clone())?;
    run.record_events();
    for &u in &order {
        run.arrive(u)?;
    }
    write_event_log(out, inst, &policy.name(), run.events())?;
    Ok(order)
}
