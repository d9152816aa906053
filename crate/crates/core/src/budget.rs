//! Budget-additive combinatorial auctions: the online item-threshold policy,
//! its offline twin, the sample-side prefix capacity and the capacity-aware
//! diagnostic sets.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matching::CoupledSets;
use crate::model::{check_permutation, Draw, Instance, InstanceKind, Realization};
use crate::oracles::{greedy_budget_assignment, Assignment, BudgetValue, GreedyBudget, Matching};
use crate::trace::{ArrivalEvent, Decision, ElementCheck};

#[derive(Clone, Debug)]
pub struct BudgetRunTrace {
    pub buyers: usize,
    pub items: usize,
    pub ends: Arc<Vec<(usize, usize)>>,
    pub budgets: Vec<f64>,
    /// `M`.
    pub collected: Assignment,
    /// `G_S`, the greedy assignment on samples.
    pub sample_greedy: Assignment,
    pub blocked: Vec<bool>,
    /// `E'` with reward keys.
    pub candidates: Vec<(usize, Draw)>,
    /// Item thresholds as sample keys; `None` is threshold 0 below every reward.
    pub thresholds: Vec<Option<Draw>>,
    /// Final `C_R(b)`.
    pub loads: Vec<f64>,
    pub events: Vec<ArrivalEvent>,
}

impl BudgetRunTrace {
    pub fn candidate_set(&self) -> Matching {
        Matching {
            edges: self.candidates.iter().map(|&(e, d)| (e, d.value)).collect(),
        }
    }

    pub fn coupled_sets(&self) -> CoupledSets {
        let bits = |v: Vec<(usize, f64)>| Matching { edges: v }.sorted();
        CoupledSets {
            candidates: self.candidate_set().sorted(),
            sample: bits(self.sample_greedy.edges()),
            collected: bits(self.collected.edges()),
        }
    }
}

/// `C_S(b, a)` read off the greedy history.
pub fn capacity_prefix(greedy: &GreedyBudget, buyer: usize, a: Draw) -> f64 {
    greedy.capacity_above(buyer, a)
}

#[derive(Debug)]
struct Shared {
    buyers: usize,
    items: usize,
    ends: Arc<Vec<(usize, usize)>>,
    budgets: Vec<f64>,
    /// Per buyer, edges by decreasing reward key.
    buyer_edges: Vec<Vec<usize>>,
    rewards: Vec<Draw>,
    greedy: GreedyBudget,
    thresholds: Vec<Option<Draw>>,
}

fn check_kind(instance: &Instance, realization: &Realization) -> Result<()> {
    if instance.kind() != InstanceKind::BudgetAdditive {
        return Err(Error::Input(format!(
            "budget-additive policy cannot run on a {:?} instance",
            instance.kind()
        )));
    }
    if realization.len() != instance.edges().len() {
        return Err(Error::Input("realization does not match the instance edges".into()));
    }
    Ok(())
}

/// Online state of the budget-additive policy.
#[derive(Clone, Debug)]
pub struct BudgetArrival {
    shared: Arc<Shared>,
    item_taken: Vec<bool>,
    loads: Vec<f64>,
    arrived: Vec<bool>,
    collected: Assignment,
    candidates: Vec<(usize, Draw)>,
    events: Option<Vec<ArrivalEvent>>,
    step: usize,
}

impl BudgetArrival {
    /// Runs the greedy on samples and fixes the item thresholds.
    pub fn new(instance: &Instance, realization: &Realization) -> Result<Self> {
        check_kind(instance, realization)?;
        let buyers = instance.buyers().len();
        let items = instance.items().len();
        let ends: Vec<(usize, usize)> = instance.edges().iter().map(|e| (e.u, e.v)).collect();
        let rewards = realization.rewards();
        let greedy = greedy_budget_assignment(
            &BudgetValue::of(instance, &realization.samples()),
            instance.budgets(),
            items,
        );
        let thresholds = greedy.item_owner.iter().map(|o| o.map(|(_, d)| d)).collect();
        let mut buyer_edges: Vec<Vec<usize>> = (0..buyers).map(|b| instance.buyer_edges(b).to_vec()).collect();
        for list in &mut buyer_edges {
            list.sort_by(|&a, &b| rewards[b].cmp(&rewards[a]));
        }
        Ok(Self {
            item_taken: vec![false; items],
            loads: vec![0.0; buyers],
            arrived: vec![false; buyers],
            collected: Assignment::with_buyers(buyers),
            candidates: Vec::new(),
            events: None,
            step: 0,
            shared: Arc::new(Shared {
                buyers,
                items,
                ends: Arc::new(ends),
                budgets: instance.budgets().to_vec(),
                buyer_edges,
                rewards,
                greedy,
                thresholds,
            }),
        })
    }

    pub fn record_events(&mut self) {
        self.events.get_or_insert_with(Vec::new);
    }

    pub fn events(&self) -> &[ArrivalEvent] {
        self.events.as_deref().unwrap_or_default()
    }

    pub fn collected(&self) -> &Assignment {
        &self.collected
    }

    pub fn greedy(&self) -> &GreedyBudget {
        &self.shared.greedy
    }

    /// Scans the buyer's edges by decreasing reward.
    pub fn arrive(&mut self, buyer: usize) -> Result<f64> {
        if buyer >= self.arrived.len() || std::mem::replace(&mut self.arrived[buyer], true) {
            return Err(Error::Input(format!("buyer {buyer} arrived twice or does not exist")));
        }
        let sh = &self.shared;
        let cap = sh.budgets[buyer];
        let mut gained = 0.0;
        let mut ev = self.events.as_ref().map(|_| ArrivalEvent::new(self.step, buyer));
        for &k in &sh.buyer_edges[buyer] {
            let r = sh.rewards[k];
            let item = sh.ends[k].1;
            let tau = sh.thresholds[item];
            let sample_cap = sh.greedy.capacity_above(buyer, r);
            // a buyer blocked above r has no room at all, zero rewards included
            let blocked = sh.greedy.blocked_at[buyer].is_some_and(|x| x > r);
            let (decision, reason) = if !tau.is_none_or(|t| r > t) {
                (Decision::Rejected, "below-threshold")
            } else if blocked || r.value + sample_cap > cap {
                (Decision::Rejected, "sample-capacity")
            } else {
                self.candidates.push((k, r));
                if r.value + self.loads[buyer] <= cap && !self.item_taken[item] {
                    self.loads[buyer] += r.value;
                    self.item_taken[item] = true;
                    self.collected.assign(buyer, item, k, r.value);
                    gained += r.value;
                    (Decision::Collected, "collected")
                } else if self.item_taken[item] {
                    (Decision::Admitted, "item-taken")
                } else {
                    (Decision::Admitted, "budget")
                }
            };
            if let Some(ev) = &mut ev {
                ev.checks.push(ElementCheck {
                    element: k,
                    reward: r.value,
                    threshold: tau.map_or(0.0, |t| t.value),
                    capacity: Some(sample_cap),
                    decision,
                    reason,
                });
            }
        }
        if let (Some(events), Some(mut ev)) = (&mut self.events, ev) {
            ev.gained = gained;
            events.push(ev);
        }
        self.step += 1;
        Ok(gained)
    }

    pub fn finish(self) -> BudgetRunTrace {
        let sh = &self.shared;
        BudgetRunTrace {
            buyers: sh.buyers,
            items: sh.items,
            ends: sh.ends.clone(),
            budgets: sh.budgets.clone(),
            collected: self.collected,
            sample_greedy: sh.greedy.assignment.clone(),
            blocked: sh.greedy.blocked_at.iter().map(Option::is_some).collect(),
            candidates: self.candidates,
            thresholds: sh.thresholds.clone(),
            loads: self.loads,
            events: self.events.unwrap_or_default(),
        }
    }
}

pub fn run_budget_additive(instance: &Instance, realization: &Realization, order: &[usize]) -> Result<BudgetRunTrace> {
    check_permutation(order, instance.buyers().len(), "buyers")?;
    let mut state = BudgetArrival::new(instance, realization)?;
    state.record_events();
    for &b in order {
        state.arrive(b)?;
    }
    Ok(state.finish())
}

/// Offline twin: one pass over all draws in decreasing order maintaining
/// `C_S(b)` and the free sample items, then extraction in the buyer order.
pub fn run_budget_additive_offline_sim(
    instance: &Instance,
    realization: &Realization,
    order: &[usize],
) -> Result<BudgetRunTrace> {
    check_kind(instance, realization)?;
    let buyers = instance.buyers().len();
    let items = instance.items().len();
    check_permutation(order, buyers, "buyers")?;
    let ends: Vec<(usize, usize)> = instance.edges().iter().map(|e| (e.u, e.v)).collect();
    let budgets = instance.budgets().to_vec();
    let m = ends.len();
    let mut sample_load = vec![0.0; buyers];
    let mut blocked = vec![false; buyers];
    let mut item_free = vec![true; items];
    let mut thresholds: Vec<Option<Draw>> = vec![None; items];
    let mut seen = vec![false; m];
    let mut r_used = vec![false; m];
    let mut in_candidates = vec![false; m];
    let mut candidates = Vec::new();
    let mut sample_greedy = Assignment::with_buyers(buyers);
    for (e, a, is_reward) in realization.decreasing_draws() {
        let (b, i) = ends[e];
        let sample_turn = if !seen[e] {
            seen[e] = true;
            if is_reward {
                r_used[e] = true;
                if !blocked[b] && a.value + sample_load[b] <= budgets[b] && item_free[i] {
                    candidates.push((e, a));
                    in_candidates[e] = true;
                }
                false
            } else {
                true
            }
        } else {
            r_used[e]
        };
        // a blocked buyer takes nothing more, even at value 0
        if sample_turn && item_free[i] && !blocked[b] {
            if a.value + sample_load[b] <= budgets[b] {
                sample_load[b] += a.value;
                sample_greedy.assign(b, i, e, a.value);
                item_free[i] = false;
                thresholds[i] = Some(a);
            } else {
                sample_load[b] = budgets[b];
                blocked[b] = true;
            }
        }
    }
    let rewards = realization.rewards();
    let mut loads = vec![0.0; buyers];
    let mut taken = vec![false; items];
    let mut collected = Assignment::with_buyers(buyers);
    for &b in order {
        let mut edges = instance.buyer_edges(b).to_vec();
        edges.sort_by(|&x, &y| rewards[y].cmp(&rewards[x]));
        for k in edges {
            let i = ends[k].1;
            let r = rewards[k].value;
            if in_candidates[k] && r + loads[b] <= budgets[b] && !taken[i] {
                loads[b] += r;
                taken[i] = true;
                collected.assign(b, i, k, r);
            }
        }
    }
    Ok(BudgetRunTrace {
        buyers,
        items,
        ends: Arc::new(ends),
        budgets,
        collected,
        sample_greedy,
        blocked,
        candidates,
        thresholds,
        loads,
        events: Vec::new(),
    })
}

/// Capacity-aware candidate set `E+` and the safe set of a budget run.
#[derive(Clone, Debug, PartialEq)]
pub struct BudgetDiagnostics {
    /// `E+(b)` per buyer.
    pub plus: Vec<Vec<usize>>,
    /// `E_safe`: candidates with no smaller-reward candidate at their item.
    pub safe: Vec<usize>,
    pub plus_weight: f64,
    pub safe_plus_weight: f64,
}

pub fn diagnostics_budget(trace: &BudgetRunTrace) -> BudgetDiagnostics {
    let mut per_buyer: Vec<Vec<(usize, Draw)>> = vec![Vec::new(); trace.buyers];
    let mut per_item: Vec<Vec<Draw>> = vec![Vec::new(); trace.items];
    for &(e, r) in &trace.candidates {
        let (b, i) = trace.ends[e];
        per_buyer[b].push((e, r));
        per_item[i].push(r);
    }
    let safe: Vec<usize> = trace
        .candidates
        .iter()
        .filter(|&&(e, r)| per_item[trace.ends[e].1].iter().all(|&r2| r2 >= r))
        .map(|&(e, _)| e)
        .collect();
    let mut plus = vec![Vec::new(); trace.buyers];
    let mut plus_weight = 0.0;
    let mut safe_plus_weight = 0.0;
    for (b, list) in per_buyer.iter_mut().enumerate() {
        list.sort_by(|x, y| y.1.cmp(&x.1));
        let mut above = 0.0;
        for &(e, r) in list.iter() {
            if r.value + above <= trace.budgets[b] {
                plus[b].push(e);
                plus_weight += r.value;
                if safe.contains(&e) {
                    safe_plus_weight += r.value;
                }
            }
            above += r.value;
        }
    }
    BudgetDiagnostics {
        plus,
        safe,
        plus_weight,
        safe_plus_weight,
    }
}
