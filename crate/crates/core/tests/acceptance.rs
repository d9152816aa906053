//! One pass/fail line per acceptance criterion; exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

use itertools::Itertools;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;

use sspi_lab::error::Result;
use sspi_lab::generate::{generate_instance, Family, ValueFamily};
use sspi_lab::harness::{
    estimate_ratio, exact_ratio, write_csv, AdversaryMode, CompetitiveReport, ExperimentConfig, THREADS_ENV,
};
use sspi_lab::model::{draw_realization, Distribution, Instance};
use sspi_lab::oracles::{max_weight_forest, max_weight_forest_brute, Graph, OracleLimits};
use sspi_lab::rng::RandomSource;
use sspi_lab::suites::{run_property_suite, PropertyCheck, Suite, SuiteConfig, SuiteReport};

const SEED: u64 = 20_240_601;
const MC_TRIALS: u64 = 100_000;
const COUPLING_TRIALS: u64 = 10_000;
const SAFE_TRIALS: u64 = 100_000;
const MIN_REPORTS: usize = 25;
/// Largest arrival-unit count for the exhaustive Monte Carlo adversary here.
const MC_UNITS: usize = 5;
/// Largest element count for exact-mode fixtures.
const EXACT_ELEMENTS: usize = 5;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict {
        pass,
        detail: detail.into(),
    })
}

fn suite(s: Suite, trials: u64) -> Result<SuiteReport> {
    run_property_suite(
        s,
        &SuiteConfig {
            trials,
            seed: SEED,
            min_reports: MIN_REPORTS,
        },
    )
}

fn failed_checks(checks: &[&PropertyCheck]) -> String {
    let bad: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.to_string()).collect();
    if bad.is_empty() {
        format!("{} checks, all pass", checks.len())
    } else {
        bad.join("; ")
    }
}

/// Deterministic fixtures: `count` instances from `family` with dyadic
/// two-point laws and between 1 and `max_elements` elements.
fn exact_fixtures(label: &str, count: usize, max_elements: usize, family: impl Fn(&mut RandomSource) -> Family) -> Result<Vec<(String, Instance)>> {
    let root = RandomSource::new(SEED).fork(label);
    let mut out = Vec::new();
    let mut k = 0u64;
    while out.len() < count {
        let mut rng = root.fork_indexed("fixture", k);
        k += 1;
        let inst = generate_instance(family(&mut rng), ValueFamily::TwoPoint, &mut rng)?;
        if (1..=max_elements).contains(&inst.num_elements()) {
            out.push((format!("{label}-{}", out.len()), inst));
        }
    }
    Ok(out)
}

/// Exact worst-static-order ratios; passes iff every ratio meets the bound.
fn exact_sweep(policy: &str, fixtures: &[(String, Instance)]) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    let mut degenerate = 0;
    let mut ok = true;
    for (label, inst) in fixtures {
        let cfg = ExperimentConfig::new(policy, inst.clone(), label).with_adversary(AdversaryMode::Exhaustive);
        let r = exact_ratio(&cfg)?;
        ok &= r.clears_bound();
        match r.ratio() {
            Some(x) => worst = worst.max(x),
            None => degenerate += 1,
        }
    }
    Ok((
        ok,
        format!("{} exact fixtures ({degenerate} with E[ALG] = 0), largest ratio {worst:.4}", fixtures.len()),
    ))
}

/// Monte Carlo fixture: mixed laws, at most `MC_UNITS` arrival units.
fn mc_fixture(label: &str, family: impl Fn(&mut RandomSource) -> Family, units: impl Fn(&Instance) -> usize) -> Result<Instance> {
    let root = RandomSource::new(SEED).fork(label);
    for k in 0.. {
        let mut rng = root.fork_indexed("fixture", k);
        let inst = generate_instance(family(&mut rng), ValueFamily::Mixed, &mut rng)?;
        if (3..=MC_UNITS).contains(&units(&inst)) {
            return Ok(inst);
        }
    }
    unreachable!()
}

fn mc(policy: &str, inst: &Instance, label: &str) -> Result<CompetitiveReport> {
    let cfg = ExperimentConfig::new(policy, inst.clone(), label)
        .with_trials(MC_TRIALS)
        .with_seed(SEED)
        .with_adversary(AdversaryMode::Exhaustive);
    estimate_ratio(&cfg)
}

fn mc_line(r: &CompetitiveReport) -> String {
    format!(
        "MC {} ratio {:.4} ± {:.4} (bound {})",
        r.instance,
        r.ratio().unwrap_or(f64::NAN),
        r.estimate.hw_ratio.unwrap_or(f64::NAN),
        r.bound
    )
}

fn graph_family(max_n: usize) -> impl Fn(&mut RandomSource) -> Family {
    move |rng| Family::RandomGraph {
        n: rng.random_range(3..=max_n),
        p: [0.3, 0.5, 0.7][rng.random_range(0..3)],
    }
}

fn buyer_family(transversal: bool, max_buyers: usize, max_items: usize) -> impl Fn(&mut RandomSource) -> Family {
    move |rng| {
        let buyers = rng.random_range(1..=max_buyers);
        let items = rng.random_range(1..=max_items);
        let p = [0.5, 0.75, 1.0][rng.random_range(0..3)];
        if transversal {
            Family::Transversal { buyers, items, p }
        } else {
            Family::Bipartite { buyers, items, p }
        }
    }
}

fn edges(inst: &Instance) -> usize {
    inst.edges().len()
}

fn buyers(inst: &Instance) -> usize {
    inst.buyers().len()
}

fn criterion_1() -> Result<Verdict> {
    let report = suite(Suite::Coupling, COUPLING_TRIALS)?;
    let checks: Vec<&PropertyCheck> = report.checks.iter().collect();
    let mismatches: u64 = checks.iter().map(|c| c.violations).sum();
    verdict(report.passed(), format!("{COUPLING_TRIALS} instances per family, {mismatches} mismatches; {}", failed_checks(&checks)))
}

/// Per element: (sample, reward, reward key above sample key, probability).
type Outcome = (BigRational, BigRational, bool, BigRational);

fn rational(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite")
}

/// Independent exact oracle for the single-choice rule on two-point laws
/// whose `2n` atoms are pairwise distinct. Returns the least expected value
/// over all orders and the expected maximum reward.
fn single_choice_oracle(laws: &[(f64, f64, f64)]) -> (BigRational, BigRational) {
    let half = BigRational::new(1.into(), 2.into());
    let per_element: Vec<Vec<Outcome>> = laws
        .iter()
        .map(|&(lo, hi, p_lo)| {
            let (lo, hi, p) = (rational(lo), rational(hi), rational(p_lo));
            let q = BigRational::one() - &p;
            let mut v = Vec::new();
            for above in [false, true] {
                v.push((lo.clone(), lo.clone(), above, &p * &p * &half));
                v.push((hi.clone(), hi.clone(), above, &q * &q * &half));
            }
            v.push((lo.clone(), hi.clone(), true, &p * &q));
            v.push((hi.clone(), lo.clone(), false, &q * &p));
            v
        })
        .collect();
    let n = laws.len();
    let orders: Vec<Vec<usize>> = (0..n).permutations(n).collect();
    let mut per_order = vec![BigRational::zero(); orders.len()];
    let mut e_max = BigRational::zero();
    for joint in per_element.iter().map(|v| v.iter()).multi_cartesian_product() {
        let prob = joint.iter().fold(BigRational::one(), |acc, o| acc * &o.3);
        let leader = (0..n).max_by(|&a, &b| joint[a].0.cmp(&joint[b].0)).expect("n >= 1");
        let beats = |k: usize| {
            let (s, r, above, _) = joint[k];
            if k == leader {
                r > s || (r == s && *above)
            } else {
                *r > joint[leader].0
            }
        };
        let max_reward = joint.iter().map(|o| o.1.clone()).max().expect("n >= 1");
        e_max += &prob * max_reward;
        for (slot, order) in per_order.iter_mut().zip(&orders) {
            if let Some(&k) = order.iter().find(|&&k| beats(k)) {
                *slot += &prob * &joint[k].1;
            }
        }
    }
    (per_order.into_iter().min().expect("orders"), e_max)
}

fn criterion_2() -> Result<Verdict> {
    let root = RandomSource::new(SEED).fork("single-choice-exact");
    let mut fixtures = 0;
    let mut agree = true;
    let mut bound = true;
    let mut tightest = f64::INFINITY;
    for n in 1..=5usize {
        let count = if n == 5 { 8 } else { 13 };
        for k in 0..count {
            let mut rng = root.fork_indexed(&format!("n{n}"), k);
            // 2n distinct quarter-integer atoms
            let mut atoms: Vec<u32> = Vec::new();
            while atoms.len() < 2 * n {
                let a = rng.random_range(0..=40);
                if !atoms.contains(&a) {
                    atoms.push(a);
                }
            }
            let laws: Vec<(f64, f64, f64)> = atoms
                .chunks(2)
                .map(|c| {
                    let (lo, hi) = (c[0].min(c[1]) as f64 / 4.0, c[0].max(c[1]) as f64 / 4.0);
                    (lo, hi, [0.25, 0.5, 0.75][rng.random_range(0..3)])
                })
                .collect();
            let inst = Instance::single_choice(laws.iter().map(|&(lo, hi, p)| Distribution::two_point(lo, hi, p)).collect())?;
            let cfg = ExperimentConfig::new("single-choice", inst, "fixture").with_adversary(AdversaryMode::Exhaustive);
            let report = exact_ratio(&cfg)?;
            let (min_alg, e_max) = single_choice_oracle(&laws);
            agree &= rational(report.estimate.e_alg) == min_alg && rational(report.estimate.e_opt) == e_max;
            let two = BigRational::from_integer(2.into());
            bound &= &two * &min_alg >= e_max;
            tightest = tightest.min(2.0 * report.estimate.e_alg - report.estimate.e_opt);
            fixtures += 1;
        }
    }
    verdict(
        agree && bound && fixtures >= 50,
        format!(
            "{fixtures} fixtures (n <= 5); library matches rational oracle: {agree}; 2 min E[ALG] >= E[max] exactly: {bound} (least slack {tightest:.4})"
        ),
    )
}

fn criterion_3() -> Result<Verdict> {
    let fixtures = exact_fixtures("graph-exact", 24, EXACT_ELEMENTS, graph_family(6))?;
    let (exact_ok, exact_line) = exact_sweep("edge-matching", &fixtures)?;
    let mut ok = exact_ok;
    let mut lines = vec![exact_line];
    for (label, max_n) in [("graph-mc-a", 5), ("graph-mc-b", 7)] {
        let inst = mc_fixture(label, graph_family(max_n), edges)?;
        let r = mc("edge-matching", &inst, label)?;
        ok &= r.clears_bound();
        lines.push(mc_line(&r));
    }
    verdict(ok, lines.join("; "))
}

fn criterion_4() -> Result<Verdict> {
    let bip = exact_fixtures("bipartite-exact", 24, EXACT_ELEMENTS, buyer_family(false, 3, 3))?;
    let trans = exact_fixtures("transversal-exact", 24, EXACT_ELEMENTS, buyer_family(true, 4, 4))?;
    let (ok_b, line_b) = exact_sweep("bipartite", &bip)?;
    let (ok_t, line_t) = exact_sweep("transversal", &trans)?;
    let inst_b = mc_fixture("bipartite-mc", buyer_family(false, 5, 5), buyers)?;
    let inst_t = mc_fixture("transversal-mc", buyer_family(true, 5, 5), buyers)?;
    let r_b = mc("bipartite", &inst_b, "bipartite-mc")?;
    let r_t = mc("transversal", &inst_t, "transversal-mc")?;
    verdict(
        ok_b && ok_t && r_b.clears_bound() && r_t.clears_bound(),
        format!("bipartite: {line_b}, {}; transversal: {line_t}, {}", mc_line(&r_b), mc_line(&r_t)),
    )
}

fn criterion_5() -> Result<Verdict> {
    let fixtures = exact_fixtures("truthful-exact", 24, EXACT_ELEMENTS, buyer_family(false, 3, 3))?;
    let (exact_ok, exact_line) = exact_sweep("truthful", &fixtures)?;
    let inst = mc_fixture("truthful-mc", buyer_family(false, 5, 5), buyers)?;
    let r = mc("truthful", &inst, "truthful-mc")?;
    let truth = suite(Suite::Truthfulness, 2_000)?;
    let checks: Vec<&PropertyCheck> = truth.checks.iter().collect();
    verdict(
        exact_ok && r.clears_bound() && truth.passed(),
        format!("{exact_line}; {}; misreports: {}", mc_line(&r), failed_checks(&checks)),
    )
}

fn criterion_6() -> Result<Verdict> {
    let fixtures = exact_fixtures("budget-exact", 20, 6, |rng| Family::BudgetAdditive {
        buyers: rng.random_range(1..=2),
        items: rng.random_range(1..=3),
        lo: 1,
        hi: 8,
    })?;
    let (exact_ok, exact_line) = exact_sweep("budget-additive", &fixtures)?;
    let root = RandomSource::new(SEED).fork("budget-mc");
    let inst = generate_instance(
        Family::BudgetAdditive {
            buyers: 3,
            items: 4,
            lo: 2,
            hi: 10,
        },
        ValueFamily::Mixed,
        &mut root.fork("fixture"),
    )?;
    let r = mc("budget-additive", &inst, "budget-3x4")?;
    verdict(exact_ok && r.clears_bound(), format!("{exact_line}; {}", mc_line(&r)))
}

fn criterion_7() -> Result<Verdict> {
    let report = suite(Suite::GreedyQuality, 10_000)?;
    let checks: Vec<&PropertyCheck> = report.checks.iter().collect();
    verdict(report.passed(), failed_checks(&checks))
}

fn criterion_8() -> Result<Verdict> {
    let safe = suite(Suite::SafeProbability, SAFE_TRIALS)?;
    let collection = suite(Suite::Collection, 10_000)?;
    let checks: Vec<&PropertyCheck> = safe.checks.iter().chain(&collection.checks).collect();
    verdict(safe.passed() && collection.passed(), failed_checks(&checks))
}

fn criterion_9(reduction: &SuiteReport) -> Result<Verdict> {
    let mut ok = true;
    let mut lines = Vec::new();
    let limits = OracleLimits::default();
    let mut oracle_gaps = 0u64;
    for label in ["graphic-a", "graphic-b"] {
        let inst = mc_fixture(label, graph_family(7), edges)?;
        let r = mc("alpha-partition", &inst, label)?;
        ok &= r.within_bound();
        lines.push(mc_line(&r));
        // the Monte Carlo benchmark against subset enumeration
        let graph = Graph::of(&inst);
        let mut rng = RandomSource::new(SEED).fork(label).fork("forest-check");
        for _ in 0..10_000 {
            let w = draw_realization(&inst, &mut rng)?.reward_values();
            let fast = max_weight_forest(&graph, &w).weight();
            let brute = max_weight_forest_brute(&graph, &w, &limits)?;
            if (fast - brute).abs() > 1e-12 * brute.max(1.0) {
                oracle_gaps += 1;
            }
        }
    }
    let partition: Vec<&PropertyCheck> = reduction.checks.iter().filter(|c| c.name.starts_with("alpha-partition") || c.name.starts_with("graphic")).collect();
    ok &= oracle_gaps == 0 && partition.iter().all(|c| c.passed);
    verdict(
        ok,
        format!("{}; fast vs brute-force forest mismatches {oracle_gaps}; partition: {}", lines.join("; "), failed_checks(&partition)),
    )
}

fn criterion_10(reduction: &SuiteReport) -> Result<Verdict> {
    let mut ok = true;
    let mut lines = Vec::new();
    for (label, laws) in [
        ("oos-5", vec![
            Distribution::uniform(0.0, 1.0),
            Distribution::exponential(1.0),
            Distribution::two_point(0.0, 4.0, 0.75),
            Distribution::uniform(0.5, 1.5),
            Distribution::point(0.8),
        ]),
        ("oos-3", vec![Distribution::exponential(2.0), Distribution::uniform(0.0, 2.0), Distribution::two_point(0.25, 1.0, 0.5)]),
    ] {
        let inst = Instance::single_choice(laws)?;
        let r = mc("oos-wrapped:single-choice", &inst, label)?;
        ok &= r.within_bound();
        lines.push(mc_line(&r));
    }
    let oos: Vec<&PropertyCheck> = reduction.checks.iter().filter(|c| c.name.starts_with("oos-wrapped")).collect();
    ok &= oos.iter().all(|c| c.passed);
    verdict(ok, format!("{}; phase-1 acceptance: {}", lines.join("; "), failed_checks(&oos)))
}

fn fingerprint() -> Result<String> {
    let mut out = String::new();
    let graph = mc_fixture("graph-mc-a", graph_family(5), edges)?;
    let bip = &exact_fixtures("bipartite-exact", 2, EXACT_ELEMENTS, buyer_family(false, 3, 3))?[1].1;
    let mut reports = Vec::new();
    for (policy, inst, adversary) in [
        ("edge-matching", &graph, AdversaryMode::Exhaustive),
        ("alpha-partition", &graph, AdversaryMode::Adaptive),
        ("oos-wrapped:edge-matching", &graph, AdversaryMode::Random),
        ("bipartite", bip, AdversaryMode::Random),
    ] {
        let cfg = ExperimentConfig::new(policy, inst.clone(), "determinism")
            .with_trials(3_000)
            .with_seed(SEED)
            .with_adversary(adversary);
        reports.push(estimate_ratio(&cfg)?);
    }
    let exact = ExperimentConfig::new("truthful", bip.clone(), "determinism").with_adversary(AdversaryMode::Exhaustive);
    reports.push(exact_ratio(&exact)?);
    let mut csv = Vec::new();
    write_csv(&mut csv, &reports)?;
    out.push_str(&String::from_utf8(csv).expect("utf-8"));
    for r in &reports {
        out.push_str(&serde_json::to_string(r)?);
    }
    for s in Suite::ALL {
        let trials = if s == Suite::Truthfulness { 60 } else { 1_500 };
        out.push_str(&serde_json::to_string(&suite(s, trials)?)?);
    }
    Ok(out)
}

fn criterion_11() -> Result<Verdict> {
    let first = fingerprint()?;
    let again = fingerprint()?;
    std::env::set_var(THREADS_ENV, "3");
    let threaded = fingerprint();
    std::env::remove_var(THREADS_ENV);
    let threaded = threaded?;
    verdict(
        first == again && first == threaded,
        format!(
            "{} bytes of reports; rerun identical: {}; 3-worker pool identical: {}",
            first.len(),
            first == again,
            first == threaded
        ),
    )
}

fn with_reduction(report: &Result<SuiteReport>, check: fn(&SuiteReport) -> Result<Verdict>) -> Result<Verdict> {
    match report {
        Ok(r) => check(r),
        Err(e) => verdict(false, format!("reduction suite error: {e}")),
    }
}

fn main() -> ExitCode {
    let started = Instant::now();
    let reduction = suite(Suite::Reduction, 10_000);
    let criteria: Vec<(&str, Box<dyn Fn() -> Result<Verdict>>)> = vec![
        ("coupling of online and offline traces", Box::new(criterion_1)),
        ("single-choice exact worst order >= 1/2 E[max]", Box::new(criterion_2)),
        ("edge arrival, bound 16", Box::new(criterion_3)),
        ("vertex arrival and transversal, bound 8", Box::new(criterion_4)),
        ("truthful pricing, bound 16 and no profitable misreport", Box::new(criterion_5)),
        ("budget-additive, bound 24", Box::new(criterion_6)),
        ("greedy approximation factors", Box::new(criterion_7)),
        ("safe probabilities and collection inequalities", Box::new(criterion_8)),
        ("graphic matroid pipeline, bound 4", Box::new(|| with_reduction(&reduction, criterion_9))),
        ("wrapped single-choice, bound 4", Box::new(|| with_reduction(&reduction, criterion_10))),
        ("bit-reproducibility", Box::new(criterion_11)),
    ];
    let mut all = true;
    for (k, (title, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let (pass, detail) = match run() {
            Ok(v) => (v.pass, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= pass;
        println!(
            "criterion {:>2} [{}] {title} ({:.1}s): {detail}",
            k + 1,
            if pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} in {:.1}s", if all { "PASS" } else { "FAIL" }, started.elapsed().as_secs_f64());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
