//! Property suites: structural and probabilistic invariants of every policy,
//! checked over seeded random instances and fixed fixtures.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bipartite::{
    enumerate_misreports, run_transversal, run_transversal_offline_sim, run_vertex_arrival,
    run_vertex_arrival_offline_sim, safe_edges_bipartite,
};
use crate::budget::{diagnostics_budget, run_budget_additive, run_budget_additive_offline_sim};
use crate::error::{Error, Result};
use crate::generate::{generate_instance, Family, ValueFamily};
use crate::harness::{worker_pool, CHUNK};
use crate::matching::{run_edge_arrival, run_edge_arrival_offline_sim, safe_edges};
use crate::model::{draw_realization, Distribution, Instance, Realization};
use crate::oracles::{
    greedy_budget_assignment, greedy_matching, is_forest, max_weight_forest, optimal_budget_assignment,
    optimal_matching, BudgetValue, Graph, OracleLimits,
};
use crate::policy::{by_name, psspi_to_oos, AlphaPartition, Policy};
use crate::reductions::{alpha_partition_sspi, PartitionArrival};
use crate::rng::RandomSource;
use crate::stats::{proportion_half_width, CompensatedSum, Z99};

/// Relative float slack for per-trace inequalities between sums.
pub const FLOAT_SLACK: f64 = 1e-9;
/// Conditioning events seen fewer times are not tested.
pub const MIN_HITS: u64 = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Coupling,
    SafeProbability,
    Collection,
    GreedyQuality,
    Truthfulness,
    Reduction,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Coupling,
        Suite::SafeProbability,
        Suite::Collection,
        Suite::GreedyQuality,
        Suite::Truthfulness,
        Suite::Reduction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Coupling => "coupling",
            Suite::SafeProbability => "safe-probability",
            Suite::Collection => "collection",
            Suite::GreedyQuality => "greedy-quality",
            Suite::Truthfulness => "truthfulness",
            Suite::Reduction => "reduction",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown suite `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuiteConfig {
    /// Trials (or random instances) per check.
    pub trials: u64,
    pub seed: u64,
    /// Least number of report vectors tried per buyer.
    pub min_reports: usize,
}

impl SuiteConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        Self {
            trials,
            seed,
            min_reports: 25,
        }
    }
}

/// One invariant's verdict. `statistic` is the headline number and
/// `threshold` what it is compared with; `passed` is authoritative.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyCheck {
    pub name: String,
    pub samples: u64,
    pub violations: u64,
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl fmt::Display for PropertyCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: {} samples, {} violations, statistic {:.6} vs {:.6}",
            if self.passed { "pass" } else { "FAIL" },
            self.name,
            self.samples,
            self.violations,
            self.statistic,
            self.threshold
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<PropertyCheck>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub fn run_property_suite(suite: Suite, config: &SuiteConfig) -> Result<SuiteReport> {
    if config.trials == 0 {
        return Err(Error::Config("trials must be at least 1".into()));
    }
    let root = RandomSource::new(config.seed).fork(suite.name());
    let checks = match suite {
        Suite::Coupling => coupling(config, &root)?,
        Suite::SafeProbability => safe_probability(config, &root)?,
        Suite::Collection => collection(config, &root)?,
        Suite::GreedyQuality => greedy_quality(config, &root)?,
        Suite::Truthfulness => truthfulness(config, &root)?,
        Suite::Reduction => reduction(config, &root)?,
    };
    Ok(SuiteReport {
        suite: suite.name().to_string(),
        checks,
    })
}

/// Chunked parallel fold over `0..trials`, merged in chunk order.
fn fold_trials<A: Send>(
    trials: u64,
    zero: impl Fn() -> A + Sync,
    step: impl Fn(&mut A, u64) -> Result<()> + Sync,
    merge: impl Fn(&mut A, A),
) -> Result<A> {
    let pool = worker_pool()?;
    let parts: Vec<Result<A>> = pool.install(|| {
        (0..trials.div_ceil(CHUNK))
            .into_par_iter()
            .map(|c| {
                let mut acc = zero();
                for t in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                    step(&mut acc, t)?;
                }
                Ok(acc)
            })
            .collect()
    });
    let mut total = zero();
    for p in parts {
        merge(&mut total, p?);
    }
    Ok(total)
}

/// Per-sample inequality `lhs >= rhs`; `worst` is the least `lhs - rhs`.
#[derive(Clone, Copy, Debug)]
struct Tally {
    samples: u64,
    violations: u64,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Self {
            samples: 0,
            violations: 0,
            worst: f64::INFINITY,
        }
    }

    fn at_least(&mut self, lhs: f64, rhs: f64) {
        self.samples += 1;
        let gap = lhs - rhs;
        if gap < -FLOAT_SLACK * rhs.abs().max(1.0) {
            self.violations += 1;
        }
        self.worst = self.worst.min(gap);
    }

    fn holds(&mut self, ok: bool) {
        self.samples += 1;
        if !ok {
            self.violations += 1;
        }
    }

    fn merge(&mut self, other: Tally) {
        self.samples += other.samples;
        self.violations += other.violations;
        self.worst = self.worst.min(other.worst);
    }

    fn inequality(&self, name: &str) -> PropertyCheck {
        PropertyCheck {
            name: name.to_string(),
            samples: self.samples,
            violations: self.violations,
            statistic: if self.samples == 0 { 0.0 } else { self.worst },
            threshold: 0.0,
            passed: self.violations == 0 && self.samples > 0,
        }
    }

    fn zero_violations(&self, name: &str) -> PropertyCheck {
        PropertyCheck {
            name: name.to_string(),
            samples: self.samples,
            violations: self.violations,
            statistic: self.violations as f64,
            threshold: 0.0,
            passed: self.violations == 0 && self.samples > 0,
        }
    }
}

/// Hit and success counts of one conditional probability per key.
#[derive(Clone, Debug)]
struct Conditional {
    counts: Vec<(u64, u64)>,
}

impl Conditional {
    fn new(keys: usize) -> Self {
        Self {
            counts: vec![(0, 0); keys],
        }
    }

    fn hit(&mut self, key: usize, success: bool) {
        self.counts[key].0 += 1;
        self.counts[key].1 += u64::from(success);
    }

    fn merge(&mut self, other: Conditional) {
        for (a, b) in self.counts.iter_mut().zip(other.counts) {
            a.0 += b.0;
            a.1 += b.1;
        }
    }

    /// Keys with at least [`MIN_HITS`] hits must have `p_hat >= bound - hw`,
    /// `hw` the 99% half-width at `bound`. Reports the least margin.
    fn at_least(&self, name: &str, bound: f64) -> PropertyCheck {
        let mut samples = 0;
        let mut violations = 0;
        let mut worst = f64::INFINITY;
        for &(hits, wins) in self.counts.iter().filter(|c| c.0 >= MIN_HITS) {
            samples += 1;
            let margin = wins as f64 / hits as f64 - (bound - proportion_half_width(bound, hits));
            if margin < 0.0 {
                violations += 1;
            }
            worst = worst.min(margin);
        }
        PropertyCheck {
            name: name.to_string(),
            samples,
            violations,
            statistic: if samples == 0 { 0.0 } else { worst },
            threshold: 0.0,
            passed: violations == 0 && samples > 0,
        }
    }
}

/// Mean of `x - c y` with its 99% half-width.
#[derive(Clone, Copy, Debug, Default)]
struct MeanGap {
    n: u64,
    sum: CompensatedSum,
    sq: CompensatedSum,
}

impl MeanGap {
    fn push(&mut self, d: f64) {
        self.n += 1;
        self.sum.add(d);
        self.sq.add(d * d);
    }

    fn merge(&mut self, other: MeanGap) {
        self.n += other.n;
        self.sum.merge(&other.sum);
        self.sq.merge(&other.sq);
    }

    /// Passes when the mean gap is at least minus its half-width.
    fn nonnegative(&self, name: &str) -> PropertyCheck {
        let n = self.n as f64;
        let mean = self.sum.value() / n;
        let var = (self.sq.value() / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
        let hw = Z99 * (var / n).sqrt();
        PropertyCheck {
            name: name.to_string(),
            samples: self.n,
            violations: u64::from(mean < -hw),
            statistic: mean,
            threshold: -hw,
            passed: self.n > 1 && mean >= -hw,
        }
    }
}

fn shuffled(n: usize, rng: &mut RandomSource) -> Vec<usize> {
    let mut o: Vec<usize> = (0..n).collect();
    o.shuffle(rng);
    o
}

const DENSITIES: [f64; 4] = [0.25, 0.5, 0.75, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Shape {
    General,
    Bipartite,
    Transversal,
    Budget,
}

impl Shape {
    const ALL: [Shape; 4] = [Shape::General, Shape::Bipartite, Shape::Transversal, Shape::Budget];

    fn name(self) -> &'static str {
        match self {
            Shape::General => "general graph",
            Shape::Bipartite => "bipartite",
            Shape::Transversal => "transversal",
            Shape::Budget => "budget-additive",
        }
    }

    /// Random sizes up to 8 vertices, 5x5 buyers and items, or 3x4 for budgets.
    fn draw(self, rng: &mut RandomSource) -> Result<Instance> {
        let p = DENSITIES[rng.random_range(0..DENSITIES.len())];
        let family = match self {
            Shape::General => Family::RandomGraph {
                n: rng.random_range(2..=8),
                p,
            },
            Shape::Bipartite => Family::Bipartite {
                buyers: rng.random_range(1..=5),
                items: rng.random_range(1..=5),
                p,
            },
            Shape::Transversal => Family::Transversal {
                buyers: rng.random_range(1..=5),
                items: rng.random_range(1..=5),
                p,
            },
            Shape::Budget => Family::BudgetAdditive {
                buyers: rng.random_range(1..=3),
                items: rng.random_range(1..=4),
                lo: 1,
                hi: 12,
            },
        };
        generate_instance(family, ValueFamily::Mixed, rng)
    }

    fn units(self, instance: &Instance) -> usize {
        match self {
            Shape::General => instance.edges().len(),
            _ => instance.buyers().len(),
        }
    }
}

fn trial_parts(root: &RandomSource, shape: Shape, t: u64) -> Result<(Instance, Realization, Vec<usize>)> {
    let mut rng = root.fork(shape.name()).fork_indexed("trial", t);
    let inst = shape.draw(&mut rng)?;
    let real = draw_realization(&inst, &mut rng)?;
    let order = shuffled(shape.units(&inst), &mut rng);
    Ok((inst, real, order))
}

fn coupling(config: &SuiteConfig, root: &RandomSource) -> Result<Vec<PropertyCheck>> {
    let mut checks = Vec::new();
    for shape in Shape::ALL {
        let (same, feasible) = fold_trials(
            config.trials,
            || (Tally::new(), Tally::new()),
            |(same, feasible), t| {
                let (inst, real, order) = trial_parts(root, shape, t)?;
                let graph = Graph::of(&inst);
                match shape {
                    Shape::General => {
                        let on = run_edge_arrival(&inst, &real, &order)?;
                        let off = run_edge_arrival_offline_sim(&inst, &real, &order)?;
                        same.holds(on.coupled_sets() == off.coupled_sets());
                        feasible.holds(on.collected.is_matching_in(&graph));
                    }
                    Shape::Bipartite | Shape::Transversal => {
                        let (on, off) = if shape == Shape::Bipartite {
                            (run_vertex_arrival(&inst, &real, &order)?, run_vertex_arrival_offline_sim(&inst, &real, &order)?)
                        } else {
                            (run_transversal(&inst, &real, &order)?, run_transversal_offline_sim(&inst, &real, &order)?)
                        };
                        same.holds(on.coupled_sets() == off.coupled_sets());
                        feasible.holds(on.collected.is_matching_in(&graph));
                    }
                    Shape::Budget => {
                        let on = run_budget_additive(&inst, &real, &order)?;
                        let off = run_budget_additive_offline_sim(&inst, &real, &order)?;
                        same.holds(on.coupled_sets() == off.coupled_sets());
                        feasible.holds(on.collected.is_feasible(inst.budgets()));
                    }
                }
                Ok(())
            },
            |a, b| {
                a.0.merge(b.0);
                a.1.merge(b.1);
            },
        )?;
        checks.push(same.zero_violations(&format!("{}: online and offline traces coincide", shape.name())));
        checks.push(feasible.zero_violations(&format!("{}: collected set is feasible", shape.name())));
    }
    Ok(checks)
}

/// Complete graph on four vertices with mixed continuous and discrete laws.
pub fn safe_fixture_graph() -> Instance {
    let laws = [
        Distribution::uniform(0.0, 10.0),
        Distribution::exponential(0.5),
        Distribution::two_point(1.0, 5.0, 0.5),
        Distribution::uniform(0.0, 4.0),
        Distribution::exponential(1.0),
        Distribution::uniform(2.0, 6.0),
    ];
    let edges = (0..4).tuple_combinations().zip(laws).map(|((u, v), d)| (u, v, d)).collect();
    Instance::general_graph(4, edges).expect("fixture is valid")
}

/// Three buyers, three items, seven edges.
pub fn safe_fixture_bipartite() -> Instance {
    let pairs = [(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2)];
    let laws = [
        Distribution::uniform(0.0, 10.0),
        Distribution::uniform(0.0, 6.0),
        Distribution::exponential(0.25),
        Distribution::two_point(2.0, 7.0, 0.25),
        Distribution::uniform(1.0, 3.0),
        Distribution::exponential(0.5),
        Distribution::uniform(0.0, 8.0),
    ];
    let edges = pairs.into_iter().zip(laws).map(|((b, i), d)| (b, i, d)).collect();
    Instance::bipartite(3, 3, edges).expect("fixture is valid")
}

/// Two buyers with budgets 6 and 9 over three items, complete.
pub fn safe_fixture_budget() -> Instance {
    let laws = [
        Distribution::uniform(0.0, 5.0),
        Distribution::uniform(0.0, 8.0),
        Distribution::exponential(0.5),
        Distribution::uniform(1.0, 6.0),
        Distribution::two_point(1.0, 4.0, 0.5),
        Distribution::uniform(0.0, 10.0),
    ];
    let edges = (0..2).cartesian_product(0..3).zip(laws).map(|((b, i), d)| (b, i, d)).collect();
    Instance::budget_additive(3, edges, vec![6.0, 9.0]).expect("fixture is valid")
}

fn fixture_trial(root: &RandomSource, label: &str, inst: &Instance, units: usize, t: u64) -> Result<(Realization, Vec<usize>)> {
    let mut rng = root.fork(label).fork_indexed("trial", t);
    let real = draw_realization(inst, &mut rng)?;
    Ok((real, shuffled(units, &mut rng)))
}

fn safe_probability(config: &SuiteConfig, root: &RandomSource) -> Result<Vec<PropertyCheck>> {
    let mut checks = Vec::new();

    let graph = safe_fixture_graph();
    let (n, m) = (graph.vertex_count(), graph.edges().len());
    let (cond, gap) = fold_trials(
        config.trials,
        || (Conditional::new(n * m), MeanGap::default()),
        |(cond, gap), t| {
            let (real, order) = fixture_trial(root, "graph", &graph, m, t)?;
            let trace = run_edge_arrival(&graph, &real, &order)?;
            let safe = safe_edges(&trace);
            for (v, best) in trace.best_candidates().iter().enumerate() {
                if let Some((e, _)) = best {
                    cond.hit(v * m + e, safe[v] == Some(*e));
                }
            }
            gap.push(trace.best_candidate_sum() - trace.sample_matching.weight());
            Ok(())
        },
        |a, b| {
            a.0.merge(b.0);
            a.1.merge(b.1);
        },
    )?;
    checks.push(cond.at_least("edge arrival: P[e_v safe for v | e_v = e] >= 1/4 (margin)", 0.25));
    checks.push(gap.nonnegative("edge arrival: E[sum_v r(e_v)] - E[w(M_S)] >= 0"));

    let bip = safe_fixture_bipartite();
    let (buyers, m) = (bip.buyers().len(), bip.edges().len());
    let cond = fold_trials(
        config.trials,
        || Conditional::new(buyers * m),
        |cond, t| {
            let (real, order) = fixture_trial(root, "bipartite", &bip, buyers, t)?;
            let trace = run_vertex_arrival(&bip, &real, &order)?;
            let safe = safe_edges_bipartite(&trace);
            for (b, cand) in trace.buyer_candidates().iter().enumerate() {
                if let Some((e, _)) = cand {
                    cond.hit(b * m + e, safe[b] == Some(*e));
                }
            }
            Ok(())
        },
        Conditional::merge,
    )?;
    checks.push(cond.at_least("vertex arrival: P[e_b safe for b | e_b = e] >= 1/2 (margin)", 0.5));

    let budget = safe_fixture_budget();
    let (buyers, m) = (budget.buyers().len(), budget.edges().len());
    let (cond, plus_gap, safe_gap) = fold_trials(
        config.trials,
        || (Conditional::new(m), MeanGap::default(), MeanGap::default()),
        |(cond, plus_gap, safe_gap), t| {
            let (real, order) = fixture_trial(root, "budget", &budget, buyers, t)?;
            let trace = run_budget_additive(&budget, &real, &order)?;
            let diag = diagnostics_budget(&trace);
            for &e in diag.plus.iter().flatten() {
                cond.hit(e, diag.safe.contains(&e));
            }
            plus_gap.push(diag.plus_weight - 0.25 * trace.sample_greedy.total());
            safe_gap.push(diag.safe_plus_weight - 0.5 * diag.plus_weight);
            Ok(())
        },
        |a, b| {
            a.0.merge(b.0);
            a.1.merge(b.1);
            a.2.merge(b.2);
        },
    )?;
    checks.push(cond.at_least("budget: P[e in E_safe | e in E+] >= 1/2 (margin)", 0.5));
    checks.push(plus_gap.nonnegative("budget: E[w(E+)] - E[w(G_S)]/4 >= 0"));
    checks.push(safe_gap.nonnegative("budget: E[w(E_safe & E+)] - E[w(E+)]/2 >= 0"));
    Ok(checks)
}

fn collection(config: &SuiteConfig, root: &RandomSource) -> Result<Vec<PropertyCheck>> {
    let mut checks = Vec::new();
    for shape in Shape::ALL {
        let tally = fold_trials(
            config.trials,
            Tally::new,
            |tally, t| {
                let (inst, real, order) = trial_parts(root, shape, t)?;
                match shape {
                    Shape::General => {
                        let trace = run_edge_arrival(&inst, &real, &order)?;
                        tally.at_least(trace.collected.weight(), 0.5 * trace.safe_reward_sum());
                    }
                    Shape::Bipartite => {
                        let trace = run_vertex_arrival(&inst, &real, &order)?;
                        tally.at_least(trace.collected.weight(), trace.safe_reward_sum());
                    }
                    Shape::Transversal => {
                        let trace = run_transversal(&inst, &real, &order)?;
                        tally.at_least(trace.collected.weight(), trace.safe_reward_sum());
                    }
                    Shape::Budget => {
                        let trace = run_budget_additive(&inst, &real, &order)?;
                        let diag = diagnostics_budget(&trace);
                        tally.at_least(trace.collected.total(), diag.safe_plus_weight);
                    }
                }
                Ok(())
            },
            Tally::merge,
        )?;
        let name = match shape {
            Shape::General => "general graph: w(M) >= 1/2 sum_v r(e_v) 1{safe}",
            Shape::Bipartite => "bipartite: w(M) >= sum_b r(e_b) 1{safe}",
            Shape::Transversal => "transversal: w(M) >= sum_b r(e_b) 1{safe}",
            Shape::Budget => "budget-additive: w(M) >= w(E_safe & E+)",
        };
        checks.push(tally.inequality(name));
    }
    Ok(checks)
}

fn greedy_quality(config: &SuiteConfig, root: &RandomSource) -> Result<Vec<PropertyCheck>> {
    let limits = OracleLimits::default();
    let budget = fold_trials(
        config.trials,
        Tally::new,
        |tally, t| {
            let mut rng = root.fork("budget").fork_indexed("trial", t);
            let inst = Shape::Budget.draw(&mut rng)?;
            let samples = draw_realization(&inst, &mut rng)?.samples();
            let values = BudgetValue::of(&inst, &samples);
            let greedy = greedy_budget_assignment(&values, inst.budgets(), inst.items().len());
            let tuples: Vec<_> = values.iter().map(|v| (v.edge, v.buyer, v.item, v.value.value)).collect();
            let opt = optimal_budget_assignment(&tuples, inst.budgets(), inst.items().len(), &limits)?;
            tally.at_least(3.0 * greedy.assignment.welfare(inst.budgets()), opt.welfare(inst.budgets()));
            Ok(())
        },
        Tally::merge,
    )?;
    let matching = fold_trials(
        config.trials,
        Tally::new,
        |tally, t| {
            let mut rng = root.fork("matching").fork_indexed("trial", t);
            // at most 15 edges keeps the exact oracle cheap
            let n = rng.random_range(2..=6);
            let p = DENSITIES[rng.random_range(0..DENSITIES.len())];
            let inst = generate_instance(Family::RandomGraph { n, p }, ValueFamily::Mixed, &mut rng)?;
            let samples = draw_realization(&inst, &mut rng)?.samples();
            let graph = Graph::of(&inst);
            let keyed: Vec<_> = samples.iter().copied().enumerate().collect();
            let plain: Vec<_> = samples.iter().map(|d| d.value).enumerate().collect();
            let greedy = greedy_matching(&graph, &keyed).weight();
            let opt = optimal_matching(&graph, &plain, &limits)?.weight();
            tally.at_least(2.0 * greedy, opt);
            Ok(())
        },
        Tally::merge,
    )?;
    Ok(vec![
        budget.inequality("budget greedy: 3 w(G_S) >= OPT(samples)"),
        matching.inequality("matching greedy: 2 w(M_S) >= OPT(samples)"),
    ])
}

/// Three buyers, two items: buyer 0 likes both, buyer 1 item 0, buyer 2 item 1.
pub fn truthful_fixture() -> (Instance, Realization, Vec<usize>) {
    let d = || Distribution::uniform(0.0, 10.0);
    let inst = Instance::bipartite(3, 2, vec![(0, 0, d()), (0, 1, d()), (1, 0, d()), (2, 1, d())])
        .expect("fixture is valid");
    let real = Realization::from_values(&[(0.5, 10.0), (0.5, 6.0), (9.0, 0.0), (1.0, 0.0)]);
    (inst, real, vec![0, 1, 2])
}

fn truthfulness(config: &SuiteConfig, root: &RandomSource) -> Result<Vec<PropertyCheck>> {
    let min_reports = config.min_reports;
    let check_buyers = |inst: &Instance, real: &Realization, order: &[usize], viol: &mut Tally, grid: &mut Tally| {
        for b in 0..inst.buyers().len() {
            let table = enumerate_misreports(inst, real, order, b, min_reports)?;
            viol.at_least(0.0, table.max_violation);
            if !inst.buyer_edges(b).is_empty() {
                grid.holds(table.reports_tested >= min_reports);
            }
        }
        Ok::<(), Error>(())
    };

    let (inst, real, _) = truthful_fixture();
    let (mut fixture, mut fixture_grid) = (Tally::new(), Tally::new());
    for order in (0..3).permutations(3) {
        check_buyers(&inst, &real, &order, &mut fixture, &mut fixture_grid)?;
    }

    let (random, random_grid) = fold_trials(
        config.trials,
        || (Tally::new(), Tally::new()),
        |(viol, grid), t| {
            let mut rng = root.fork("random").fork_indexed("trial", t);
            let family = Family::Bipartite {
                buyers: rng.random_range(1..=3),
                items: rng.random_range(1..=3),
                p: DENSITIES[rng.random_range(1..DENSITIES.len())],
            };
            let inst = generate_instance(family, ValueFamily::Mixed, &mut rng)?;
            let real = draw_realization(&inst, &mut rng)?;
            let order = shuffled(inst.buyers().len(), &mut rng);
            check_buyers(&inst, &real, &order, viol, grid)
        },
        |a, b| {
            a.0.merge(b.0);
            a.1.merge(b.1);
        },
    )?;
    let mut grid = fixture_grid;
    grid.merge(random_grid);
    let mut grid_check = grid.zero_violations(&format!("at least {min_reports} reports per buyer"));
    grid_check.threshold = min_reports as f64;
    Ok(vec![
        fixture.inequality("two-item fixture: max utility gain from misreporting <= 0"),
        random.inequality("random bipartite: max utility gain from misreporting <= 0"),
        grid_check,
    ])
}

fn reduction(config: &SuiteConfig, root: &RandomSource) -> Result<Vec<PropertyCheck>> {
    let alpha = AlphaPartition;
    let (forest, independent, alpha_gap) = fold_trials(
        config.trials,
        || (Tally::new(), Tally::new(), MeanGap::default()),
        |(forest, independent, gap), t| {
            let mut rng = root.fork("graphic").fork_indexed("trial", t);
            let n = rng.random_range(2..=7);
            let p = DENSITIES[rng.random_range(0..DENSITIES.len())];
            let inst = generate_instance(Family::RandomGraph { n, p }, ValueFamily::Mixed, &mut rng)?;
            let real = draw_realization(&inst, &mut rng)?;
            let order = shuffled(inst.num_elements(), &mut rng);
            let part_rng = rng.fork("partition");

            let (partition, graph) = alpha.partition_for(&inst, &mut part_rng.clone())?;
            let graph = graph.expect("graphic partition carries its graph");
            let picked = alpha_partition_sspi(&partition, &real.samples(), &real.rewards(), &order)?;
            let ids: Vec<usize> = picked.iter().map(|&(e, _)| e).collect();
            forest.holds(partition.is_independent(&ids) && is_forest(&graph, &ids));

            // same samples and coins, rewards permuted
            let mut rewards = real.rewards();
            rewards.shuffle(&mut rng);
            let (again, _) = alpha.partition_for(&inst, &mut part_rng.clone())?;
            let before = PartitionArrival::new(partition.clone(), &real.samples(), &real.rewards())?;
            let after = PartitionArrival::new(again.clone(), &real.samples(), &rewards)?;
            independent.holds(again == partition && before.thresholds() == after.thresholds());

            let w = real.reward_values();
            gap.push(partition.max_independent_weight(&w) - 0.5 * max_weight_forest(&graph, &w).weight());
            Ok(())
        },
        |a, b| {
            a.0.merge(b.0);
            a.1.merge(b.1);
            a.2.merge(b.2);
        },
    )?;

    let oos_cases: [(&str, Shape); 4] = [
        ("single-choice", Shape::General),
        ("edge-matching", Shape::General),
        ("bipartite", Shape::Bipartite),
        ("budget-additive", Shape::Budget),
    ];
    let mut checks = vec![
        forest.zero_violations("alpha-partition: output meets each group once and is a forest"),
        independent.zero_violations("alpha-partition: partition unchanged when rewards are permuted"),
        alpha_gap.nonnegative("graphic partition: E[max over partition] - E[max forest]/2 >= 0"),
    ];
    for (name, shape) in oos_cases {
        let inner: Arc<dyn Policy> = Arc::from(by_name(name)?);
        let tally = fold_trials(
            config.trials,
            Tally::new,
            |tally, t| {
                let mut rng = root.fork("oos").fork(name).fork_indexed("trial", t);
                let inst = if name == "single-choice" {
                    let n = rng.random_range(1..=5);
                    generate_instance(Family::SingleChoice { n }, ValueFamily::Mixed, &mut rng)?
                } else {
                    shape.draw(&mut rng)?
                };
                let inst = Arc::new(inst);
                let weights = draw_realization(&inst, &mut rng)?.reward_values();
                let order = shuffled(inner.arrival_units(&inst), &mut rng);
                match psspi_to_oos(inner.as_ref(), &inst, &weights, &mut rng, &order) {
                    Ok(out) => {
                        let observed: Vec<usize> = out
                            .observed_units
                            .iter()
                            .flat_map(|&u| inner.unit_elements(&inst, u))
                            .collect();
                        tally.holds(out.accepted.iter().all(|e| !observed.contains(e)));
                    }
                    Err(Error::Contract(_)) => tally.holds(false),
                    Err(e) => return Err(e),
                }
                Ok(())
            },
            Tally::merge,
        )?;
        checks.push(tally.zero_violations(&format!("oos-wrapped {name}: no observed element accepted, set stays feasible")));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(s.name().parse::<Suite>().unwrap(), s);
        }
        assert!("lemmas".parse::<Suite>().is_err());
    }

    #[test]
    fn every_suite_passes_at_small_scale() {
        for s in Suite::ALL {
            let trials = if s == Suite::SafeProbability { 20_000 } else { 200 };
            let report = run_property_suite(s, &SuiteConfig::new(trials, 3)).unwrap();
            for c in &report.checks {
                assert!(c.passed, "{c}");
            }
        }
    }

    #[test]
    fn suites_are_deterministic() {
        let cfg = SuiteConfig::new(300, 11);
        let a = run_property_suite(Suite::Collection, &cfg).unwrap();
        let b = run_property_suite(Suite::Collection, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn conditional_ignores_rare_keys() {
        let mut c = Conditional::new(2);
        for k in 0..MIN_HITS {
            c.hit(0, k % 2 == 0);
        }
        c.hit(1, false);
        let check = c.at_least("x", 0.5);
        assert_eq!(check.samples, 1);
        assert!(check.passed);
        let check = c.at_least("x", 0.9);
        assert!(!check.passed);
    }

    #[test]
    fn tally_respects_relative_slack() {
        let mut t = Tally::new();
        t.at_least(1e6 * (1.0 - 1e-12), 1e6);
        assert_eq!(t.violations, 0);
        t.at_least(0.9, 1.0);
        assert_eq!(t.violations, 1);
    }
}
