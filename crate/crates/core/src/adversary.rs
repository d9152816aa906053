//! Arrival orders over a policy's arrival units: named heuristics, the
//! exhaustive static search against a realization ensemble, and the
//! per-realization adaptive min tree.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use itertools::Itertools;
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::model::{check_permutation, Instance, Realization};
use crate::policy::{Policy, PolicyRun};
use crate::rng::RandomSource;
use crate::stats::CompensatedSum;

/// Largest unit count searched over all static permutations.
pub const EXHAUSTIVE_CAP: usize = 7;
/// Largest unit count searched by the adaptive game tree.
pub const ADAPTIVE_CAP: usize = 6;

/// Heuristic orders. They carry no optimality claim.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FixedOrder {
    Identity,
    Reverse,
    Random,
    AscendingReward,
    DescendingReward,
    /// Increasing `max(reward - sample)` over the unit's elements.
    AscendingMargin,
}

impl FixedOrder {
    pub const ALL: [FixedOrder; 6] = [
        FixedOrder::Identity,
        FixedOrder::Reverse,
        FixedOrder::Random,
        FixedOrder::AscendingReward,
        FixedOrder::DescendingReward,
        FixedOrder::AscendingMargin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FixedOrder::Identity => "identity",
            FixedOrder::Reverse => "reverse",
            FixedOrder::Random => "random",
            FixedOrder::AscendingReward => "ascending-reward",
            FixedOrder::DescendingReward => "descending-reward",
            FixedOrder::AscendingMargin => "ascending-margin",
        }
    }
}

impl fmt::Display for FixedOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FixedOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FixedOrder::ALL
            .into_iter()
            .find(|o| o.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown fixed order `{s}`")))
    }
}

/// Largest reward and largest reward-minus-sample margin per unit.
fn unit_scores(policy: &dyn Policy, instance: &Instance, realization: &Realization) -> Vec<(f64, f64)> {
    (0..policy.arrival_units(instance))
        .map(|u| {
            policy
                .unit_elements(instance, u)
                .iter()
                .map(|&e| {
                    let d = realization.element(e);
                    (d.reward.value, d.reward.value - d.sample.value)
                })
                .reduce(|a, b| (a.0.max(b.0), a.1.max(b.1)))
                .unwrap_or((0.0, 0.0))
        })
        .collect()
}

/// One heuristic order for a realization; `rng` is only used by `Random`.
pub fn fixed_order(
    kind: FixedOrder,
    policy: &dyn Policy,
    instance: &Instance,
    realization: &Realization,
    rng: &mut RandomSource,
) -> Vec<usize> {
    let n = policy.arrival_units(instance);
    let mut order: Vec<usize> = (0..n).collect();
    let by = |order: &mut Vec<usize>, key: &dyn Fn(usize) -> f64| {
        order.sort_by(|&a, &b| key(a).total_cmp(&key(b)));
    };
    match kind {
        FixedOrder::Identity => {}
        FixedOrder::Reverse => order.reverse(),
        FixedOrder::Random => order.shuffle(rng),
        FixedOrder::AscendingReward => {
            let s = unit_scores(policy, instance, realization);
            by(&mut order, &|u| s[u].0);
        }
        FixedOrder::DescendingReward => {
            let s = unit_scores(policy, instance, realization);
            by(&mut order, &|u| -s[u].0);
        }
        FixedOrder::AscendingMargin => {
            let s = unit_scores(policy, instance, realization);
            by(&mut order, &|u| s[u].1);
        }
    }
    order
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedOrder {
    pub name: &'static str,
    pub order: Vec<usize>,
}

pub fn fixed_orders(
    policy: &dyn Policy,
    instance: &Instance,
    realization: &Realization,
    rng: &mut RandomSource,
) -> Vec<NamedOrder> {
    FixedOrder::ALL
        .into_iter()
        .map(|k| NamedOrder {
            name: k.name(),
            order: fixed_order(k, policy, instance, realization, rng),
        })
        .collect()
}

/// All permutations of `0..n` in lexicographic order.
pub fn all_orders(n: usize) -> Result<Vec<Vec<usize>>> {
    if n > EXHAUSTIVE_CAP {
        return Err(Error::Size {
            what: "arrival units for exhaustive order search",
            actual: n,
            cap: EXHAUSTIVE_CAP,
        });
    }
    Ok((0..n).permutations(n).collect())
}

/// Policy value under one order.
pub fn evaluate_order(
    policy: &dyn Policy,
    instance: &Arc<Instance>,
    realization: &Realization,
    rng: &RandomSource,
    order: &[usize],
) -> Result<f64> {
    check_permutation(order, policy.arrival_units(instance), "arrival units")?;
    let mut run = policy.start(instance, realization, &mut rng.clone())?;
    for &u in order {
        run.arrive(u)?;
    }
    Ok(run.value())
}

/// Policy value under every order, indexed like [`all_orders`]. Shared
/// prefixes are simulated once.
pub fn order_values(
    policy: &dyn Policy,
    instance: &Arc<Instance>,
    realization: &Realization,
    rng: &RandomSource,
) -> Result<Vec<f64>> {
    let n = policy.arrival_units(instance);
    if n > EXHAUSTIVE_CAP {
        return Err(Error::Size {
            what: "arrival units for exhaustive order search",
            actual: n,
            cap: EXHAUSTIVE_CAP,
        });
    }
    let mut run = policy.start(instance, realization, &mut rng.clone())?;
    let mut out = Vec::with_capacity((1..=n).product());
    let mut remaining: Vec<usize> = (0..n).collect();
    leaves(&mut run, &mut remaining, &mut out)?;
    Ok(out)
}

fn leaves(run: &mut Box<dyn PolicyRun>, remaining: &mut Vec<usize>, out: &mut Vec<f64>) -> Result<()> {
    if remaining.is_empty() {
        check_feasible(run.as_ref())?;
        out.push(run.value());
        return Ok(());
    }
    for i in 0..remaining.len() {
        let u = remaining.remove(i);
        let mut child = run.boxed_clone();
        child.arrive(u)?;
        leaves(&mut child, remaining, out)?;
        remaining.insert(i, u);
    }
    Ok(())
}

fn check_feasible(run: &dyn PolicyRun) -> Result<()> {
    if run.is_feasible() {
        Ok(())
    } else {
        Err(Error::Contract("policy collected an infeasible set".into()))
    }
}

/// One realization of an ensemble with its probability mass and the policy's
/// private random stream.
#[derive(Clone, Debug)]
pub struct EnsembleMember {
    pub realization: Realization,
    pub weight: f64,
    pub policy_rng: RandomSource,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorstOrder {
    pub order: Vec<usize>,
    /// Weighted mean policy value under `order`.
    pub value: f64,
    pub orders_searched: usize,
}

/// Lexicographically first minimizer of weighted-mean policy value
/// among all static orders.
pub fn worst_order_exhaustive(
    policy: &dyn Policy,
    instance: &Arc<Instance>,
    ensemble: &[EnsembleMember],
) -> Result<WorstOrder> {
    let orders = all_orders(policy.arrival_units(instance))?;
    let mut sums = vec![CompensatedSum::default(); orders.len()];
    let mut mass = CompensatedSum::default();
    for m in ensemble {
        let vals = order_values(policy, instance, &m.realization, &m.policy_rng)?;
        for (s, v) in sums.iter_mut().zip(vals) {
            s.add(m.weight * v);
        }
        mass.add(m.weight);
    }
    let total = mass.value();
    let means: Vec<f64> = sums.iter().map(|s| if total > 0.0 { s.value() / total } else { 0.0 }).collect();
    let best = argmin_first(&means);
    Ok(WorstOrder {
        order: orders[best].clone(),
        value: means[best],
        orders_searched: orders.len(),
    })
}

/// Index of the first minimum.
pub fn argmin_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v < values[best] {
            best = k;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptiveTrace {
    /// Units in the order the adversary revealed them.
    pub order: Vec<usize>,
    pub value: f64,
    pub nodes: usize,
}

/// Full min tree over adaptive unit choices for one realization. Ties go to
/// the smallest unit index.
pub fn worst_order_adaptive(
    policy: &dyn Policy,
    instance: &Arc<Instance>,
    realization: &Realization,
    rng: &RandomSource,
) -> Result<AdaptiveTrace> {
    let n = policy.arrival_units(instance);
    if n > ADAPTIVE_CAP {
        return Err(Error::Size {
            what: "arrival units for adaptive search",
            actual: n,
            cap: ADAPTIVE_CAP,
        });
    }
    let run = policy.start(instance, realization, &mut rng.clone())?;
    let mut nodes = 0;
    let remaining: Vec<usize> = (0..n).collect();
    let (value, mut order) = min_tree(run, &remaining, &mut nodes)?;
    order.reverse();
    Ok(AdaptiveTrace { order, value, nodes })
}

/// Returns the subtree value and the chosen suffix, reversed.
fn min_tree(run: Box<dyn PolicyRun>, remaining: &[usize], nodes: &mut usize) -> Result<(f64, Vec<usize>)> {
    *nodes += 1;
    if remaining.is_empty() {
        check_feasible(run.as_ref())?;
        return Ok((run.value(), Vec::new()));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for (i, &u) in remaining.iter().enumerate() {
        let mut child = run.boxed_clone();
        child.arrive(u)?;
        let rest: Vec<usize> = remaining[..i].iter().chain(&remaining[i + 1..]).copied().collect();
        let (v, mut suffix) = min_tree(child, &rest, nodes)?;
        if best.as_ref().is_none_or(|(b, _)| v < *b) {
            suffix.push(u);
            best = Some((v, suffix));
        }
    }
    Ok(best.expect("remaining is nonempty"))
}
