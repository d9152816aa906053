//! Buyer-arrival policies on bipartite graphs: the vertex-arrival threshold
//! policy and its offline twin, the truthful posted-price variant, and the
//! transversal-matroid policy.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::matching::{CoupledSets, PriceTable};
use crate::model::{check_permutation, Draw, Instance, InstanceKind, Realization};
use crate::oracles::{greedy_matching, Graph, Matching};
use crate::trace::{ArrivalEvent, Decision, ElementCheck};

/// Final membership flags of the offline twin's working sets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OfflineSets {
    pub buyers_sample: Vec<bool>,
    pub buyers_reward: Vec<bool>,
    pub items_sample: Vec<bool>,
}

#[derive(Clone, Debug)]
pub struct BipartiteRunTrace {
    pub buyers: usize,
    pub items: usize,
    /// `(buyer, item)` per edge.
    pub ends: Arc<Vec<(usize, usize)>>,
    pub collected: Matching,
    /// `E⊕` with reward keys; at most one edge per buyer.
    pub candidates: Vec<(usize, Draw)>,
    pub sample_matching: Matching,
    /// Prices over buyers then items.
    pub prices: PriceTable,
    pub offline_sets: Option<OfflineSets>,
    pub events: Vec<ArrivalEvent>,
}

impl BipartiteRunTrace {
    pub fn candidate_set(&self) -> Matching {
        Matching {
            edges: self.candidates.iter().map(|&(e, d)| (e, d.value)).collect(),
        }
    }

    pub fn coupled_sets(&self) -> CoupledSets {
        CoupledSets {
            candidates: self.candidate_set().sorted(),
            sample: self.sample_matching.sorted(),
            collected: self.collected.sorted(),
        }
    }

    /// `e_b` per buyer.
    pub fn buyer_candidates(&self) -> Vec<Option<(usize, Draw)>> {
        let mut out = vec![None; self.buyers];
        for &(e, r) in &self.candidates {
            out[self.ends[e].0] = Some((e, r));
        }
        out
    }

    pub fn candidate_sum(&self) -> f64 {
        self.candidates.iter().map(|(_, r)| r.value).fold(0.0, |acc, x| acc + x)
    }

    /// `sum_b r_{e_b} 1{e_b safe for b}`.
    pub fn safe_reward_sum(&self) -> f64 {
        let best = self.buyer_candidates();
        safe_edges_bipartite(self)
            .iter()
            .zip(&best)
            .filter_map(|(s, b)| s.and(b.map(|(_, r)| r.value)))
            .fold(0.0, |acc, x| acc + x)
    }
}

/// Per buyer, its `E⊕` edge if no `E⊕` edge at the same item has a smaller reward.
pub fn safe_edges_bipartite(trace: &BipartiteRunTrace) -> Vec<Option<usize>> {
    let mut at_item: Vec<Vec<Draw>> = vec![Vec::new(); trace.items];
    let mut per_buyer: Vec<Vec<(usize, Draw)>> = vec![Vec::new(); trace.buyers];
    for &(e, r) in &trace.candidates {
        let (b, i) = trace.ends[e];
        at_item[i].push(r);
        per_buyer[b].push((e, r));
    }
    per_buyer
        .iter()
        .map(|list| {
            let [(e, r)] = list[..] else {
                return None;
            };
            at_item[trace.ends[e].1].iter().all(|&r2| r2 >= r).then_some(e)
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Rule {
    /// Largest admitted reward.
    BestReward,
    /// First admitted item in item order; all of a buyer's edges share one draw pair.
    FirstItem,
}

#[derive(Debug)]
struct Shared {
    buyers: usize,
    items: usize,
    ends: Arc<Vec<(usize, usize)>>,
    /// Per buyer, its edges sorted by item index.
    buyer_edges: Vec<Vec<usize>>,
    rewards: Vec<Draw>,
    prices: PriceTable,
    sample_matching: Matching,
    rule: Rule,
}

impl Shared {
    fn new(instance: &Instance, realization: &Realization, rule: Rule) -> Result<Self> {
        let (element_of_edge, expected): (Box<dyn Fn(usize) -> usize>, usize) = match (rule, instance.kind()) {
            (Rule::BestReward, InstanceKind::Bipartite) => (Box::new(|k| k), instance.edges().len()),
            (Rule::FirstItem, InstanceKind::Transversal) => {
                let ends: Vec<usize> = instance.edges().iter().map(|e| e.u).collect();
                (Box::new(move |k| ends[k]), instance.buyers().len())
            }
            (_, kind) => {
                return Err(Error::Input(format!("buyer-arrival policy cannot run on a {kind:?} instance")));
            }
        };
        if realization.len() != expected {
            return Err(Error::Input(format!(
                "realization has {} elements, expected {expected}",
                realization.len()
            )));
        }
        let buyers = instance.buyers().len();
        let items = instance.items().len();
        let ends: Vec<(usize, usize)> = instance.edges().iter().map(|e| (e.u, e.v)).collect();
        let m = ends.len();
        let rewards: Vec<Draw> = (0..m).map(|k| realization.reward(element_of_edge(k))).collect();
        let samples: Vec<Draw> = (0..m).map(|k| realization.sample(element_of_edge(k))).collect();
        let mut buyer_edges: Vec<Vec<usize>> = vec![Vec::new(); buyers];
        for (k, &(b, _)) in ends.iter().enumerate() {
            buyer_edges[b].push(k);
        }
        for list in &mut buyer_edges {
            list.sort_by_key(|&k| (ends[k].1, k));
        }
        let flat: Vec<(usize, usize)> = ends.iter().map(|&(b, i)| (b, buyers + i)).collect();
        let sample_matching = match rule {
            Rule::BestReward => {
                let keyed: Vec<(usize, Draw)> = samples.iter().copied().enumerate().collect();
                greedy_matching(&Graph::bipartite(buyers, items, flat.clone()), &keyed)
            }
            Rule::FirstItem => {
                // buyers by decreasing sample; each takes its first free item
                let mut order: Vec<usize> = (0..buyers).filter(|&b| !buyer_edges[b].is_empty()).collect();
                order.sort_by(|&a, &b| samples[buyer_edges[b][0]].cmp(&samples[buyer_edges[a][0]]));
                let mut taken = vec![false; items];
                let mut out = Matching::default();
                for b in order {
                    if let Some(&k) = buyer_edges[b].iter().find(|&&k| !taken[ends[k].1]) {
                        taken[ends[k].1] = true;
                        out.edges.push((k, samples[k].value));
                    }
                }
                out
            }
        };
        let keyed: Vec<(usize, Draw)> = sample_matching.edges.iter().map(|&(k, _)| (k, samples[k])).collect();
        let prices = PriceTable::from_matching(buyers + items, &flat, &keyed);
        Ok(Self {
            buyers,
            items,
            ends: Arc::new(ends),
            buyer_edges,
            rewards,
            prices,
            sample_matching,
            rule,
        })
    }

    fn admits(&self, k: usize, reward: Draw) -> bool {
        let (b, i) = self.ends[k];
        self.prices.admits(reward, b, self.buyers + i)
    }

    fn threshold(&self, k: usize) -> f64 {
        let (b, i) = self.ends[k];
        self.prices.threshold(b, self.buyers + i)
    }
}

/// Online state of the vertex-arrival and transversal policies.
#[derive(Clone, Debug)]
pub struct VertexArrival {
    shared: Arc<Shared>,
    item_taken: Vec<bool>,
    arrived: Vec<bool>,
    collected: Matching,
    candidates: Vec<(usize, Draw)>,
    events: Option<Vec<ArrivalEvent>>,
    step: usize,
}

impl VertexArrival {
    /// Vertex-arrival matching on a bipartite instance.
    pub fn new(instance: &Instance, realization: &Realization) -> Result<Self> {
        Ok(Self::from_shared(Shared::new(instance, realization, Rule::BestReward)?))
    }

    /// Transversal policy; realization elements are buyers.
    pub fn transversal(instance: &Instance, realization: &Realization) -> Result<Self> {
        Ok(Self::from_shared(Shared::new(instance, realization, Rule::FirstItem)?))
    }

    fn from_shared(shared: Shared) -> Self {
        Self {
            item_taken: vec![false; shared.items],
            arrived: vec![false; shared.buyers],
            collected: Matching::default(),
            candidates: Vec::new(),
            events: None,
            step: 0,
            shared: Arc::new(shared),
        }
    }

    pub fn record_events(&mut self) {
        self.events.get_or_insert_with(Vec::new);
    }

    pub fn events(&self) -> &[ArrivalEvent] {
        self.events.as_deref().unwrap_or_default()
    }

    pub fn prices(&self) -> &PriceTable {
        &self.shared.prices
    }

    pub fn collected(&self) -> &Matching {
        &self.collected
    }

    pub fn arrive(&mut self, buyer: usize) -> Result<f64> {
        if buyer >= self.arrived.len() || std::mem::replace(&mut self.arrived[buyer], true) {
            return Err(Error::Input(format!("buyer {buyer} arrived twice or does not exist")));
        }
        let sh = &self.shared;
        let edges = &sh.buyer_edges[buyer];
        let chosen = match sh.rule {
            Rule::BestReward => edges
                .iter()
                .copied()
                .filter(|&k| sh.admits(k, sh.rewards[k]))
                .max_by_key(|&k| sh.rewards[k]),
            Rule::FirstItem => edges.iter().copied().find(|&k| sh.admits(k, sh.rewards[k])),
        };
        let mut gained = 0.0;
        let mut outcome = None;
        if let Some(k) = chosen {
            let r = sh.rewards[k];
            self.candidates.push((k, r));
            let item = sh.ends[k].1;
            if !self.item_taken[item] {
                self.item_taken[item] = true;
                self.collected.edges.push((k, r.value));
                gained = r.value;
                outcome = Some((k, Decision::Collected, "collected"));
            } else {
                outcome = Some((k, Decision::Admitted, "item-taken"));
            }
        }
        if let Some(events) = &mut self.events {
            let mut ev = ArrivalEvent::new(self.step, buyer);
            for &k in edges {
                let (decision, reason) = match outcome {
                    Some((c, d, why)) if c == k => (d, why),
                    _ if sh.admits(k, sh.rewards[k]) => (Decision::Rejected, "not-selected"),
                    _ => (Decision::Rejected, "below-price"),
                };
                ev.checks.push(ElementCheck {
                    element: k,
                    reward: sh.rewards[k].value,
                    threshold: sh.threshold(k),
                    capacity: None,
                    decision,
                    reason,
                });
            }
            ev.gained = gained;
            events.push(ev);
        }
        self.step += 1;
        Ok(gained)
    }

    pub fn finish(self) -> BipartiteRunTrace {
        BipartiteRunTrace {
            buyers: self.shared.buyers,
            items: self.shared.items,
            ends: self.shared.ends.clone(),
            collected: self.collected,
            candidates: self.candidates,
            sample_matching: self.shared.sample_matching.clone(),
            prices: self.shared.prices.clone(),
            offline_sets: None,
            events: self.events.unwrap_or_default(),
        }
    }
}

fn run_online(mut state: VertexArrival, order: &[usize]) -> Result<BipartiteRunTrace> {
    check_permutation(order, state.shared.buyers, "buyers")?;
    state.record_events();
    for &b in order {
        state.arrive(b)?;
    }
    Ok(state.finish())
}

/// Vertex-arrival policy over a full buyer order.
pub fn run_vertex_arrival(instance: &Instance, realization: &Realization, order: &[usize]) -> Result<BipartiteRunTrace> {
    run_online(VertexArrival::new(instance, realization)?, order)
}

/// Transversal-matroid policy over a full buyer order.
pub fn run_transversal(instance: &Instance, realization: &Realization, order: &[usize]) -> Result<BipartiteRunTrace> {
    run_online(VertexArrival::transversal(instance, realization)?, order)
}

/// Offline twin shared by both buyer-arrival policies. Draw pairs are per
/// edge for the matching policy and per buyer for the transversal one.
fn offline(sh: &Shared, realization: &Realization, order: &[usize]) -> Result<BipartiteRunTrace> {
    check_permutation(order, sh.buyers, "buyers")?;
    let mut buyers_sample = vec![true; sh.buyers];
    let mut buyers_reward = vec![true; sh.buyers];
    let mut items_sample = vec![true; sh.items];
    let mut seen = vec![false; realization.len()];
    let mut r_used = vec![false; realization.len()];
    let mut candidates: Vec<(usize, Draw)> = Vec::new();
    let mut sample_matching = Matching::default();
    let mut keyed = Vec::new();
    // edges an element stands for, and the one it would use given the item set
    let pick = |element: usize, items_sample: &[bool]| -> Option<usize> {
        match sh.rule {
            Rule::BestReward => Some(element).filter(|&k| items_sample[sh.ends[k].1]),
            Rule::FirstItem => sh.buyer_edges[element].iter().copied().find(|&k| items_sample[sh.ends[k].1]),
        }
    };
    let buyer_of = |element: usize| match sh.rule {
        Rule::BestReward => sh.ends[element].0,
        Rule::FirstItem => element,
    };
    for (el, a, is_reward) in realization.decreasing_draws() {
        let b = buyer_of(el);
        if !seen[el] {
            seen[el] = true;
            if is_reward {
                r_used[el] = true;
                if buyers_reward[b] {
                    if let Some(k) = pick(el, &items_sample) {
                        candidates.push((k, a));
                        buyers_reward[b] = false;
                    }
                }
            } else if buyers_sample[b] {
                if let Some(k) = pick(el, &items_sample) {
                    sample_matching.edges.push((k, a.value));
                    keyed.push((k, a));
                    buyers_sample[b] = false;
                    buyers_reward[b] = false;
                    items_sample[sh.ends[k].1] = false;
                }
            }
        } else if r_used[el] && buyers_sample[b] {
            if let Some(k) = pick(el, &items_sample) {
                sample_matching.edges.push((k, a.value));
                keyed.push((k, a));
                buyers_sample[b] = false;
                items_sample[sh.ends[k].1] = false;
            }
        }
    }
    let mut of_buyer: Vec<Option<(usize, Draw)>> = vec![None; sh.buyers];
    for &(k, r) in &candidates {
        of_buyer[sh.ends[k].0] = Some((k, r));
    }
    let mut taken = vec![false; sh.items];
    let mut collected = Matching::default();
    for &b in order {
        if let Some((k, r)) = of_buyer[b] {
            let i = sh.ends[k].1;
            if !taken[i] {
                taken[i] = true;
                collected.edges.push((k, r.value));
            }
        }
    }
    let flat: Vec<(usize, usize)> = sh.ends.iter().map(|&(b, i)| (b, sh.buyers + i)).collect();
    Ok(BipartiteRunTrace {
        buyers: sh.buyers,
        items: sh.items,
        ends: sh.ends.clone(),
        collected,
        candidates,
        sample_matching,
        prices: PriceTable::from_matching(sh.buyers + sh.items, &flat, &keyed),
        offline_sets: Some(OfflineSets {
            buyers_sample,
            buyers_reward,
            items_sample,
        }),
        events: Vec::new(),
    })
}

pub fn run_vertex_arrival_offline_sim(
    instance: &Instance,
    realization: &Realization,
    order: &[usize],
) -> Result<BipartiteRunTrace> {
    offline(&Shared::new(instance, realization, Rule::BestReward)?, realization, order)
}

pub fn run_transversal_offline_sim(
    instance: &Instance,
    realization: &Realization,
    order: &[usize],
) -> Result<BipartiteRunTrace> {
    offline(&Shared::new(instance, realization, Rule::FirstItem)?, realization, order)
}

#[derive(Clone, Debug)]
pub struct TruthfulRunTrace {
    /// Weighted by true rewards.
    pub collected: Matching,
    /// Per buyer, edges in `F(b)` at its arrival.
    pub feasible: Vec<Vec<usize>>,
    pub charged: Vec<Option<f64>>,
    /// True utility `r - price` of each buyer (0 when nothing is assigned).
    pub utility: Vec<f64>,
    pub prices: PriceTable,
    pub sample_matching: Matching,
    pub events: Vec<ArrivalEvent>,
}

/// Online state of the truthful posted-price policy.
#[derive(Clone, Debug)]
pub struct TruthfulArrival {
    shared: Arc<Shared>,
    item_taken: Vec<bool>,
    arrived: Vec<bool>,
    collected: Matching,
    feasible: Vec<Vec<usize>>,
    charged: Vec<Option<f64>>,
    utility: Vec<f64>,
    events: Option<Vec<ArrivalEvent>>,
    step: usize,
}

impl TruthfulArrival {
    pub fn new(instance: &Instance, realization: &Realization) -> Result<Self> {
        let shared = Shared::new(instance, realization, Rule::BestReward)?;
        let n = shared.buyers;
        Ok(Self {
            item_taken: vec![false; shared.items],
            arrived: vec![false; n],
            collected: Matching::default(),
            feasible: vec![Vec::new(); n],
            charged: vec![None; n],
            utility: vec![0.0; n],
            events: None,
            step: 0,
            shared: Arc::new(shared),
        })
    }

    pub fn record_events(&mut self) {
        self.events.get_or_insert_with(Vec::new);
    }

    pub fn events(&self) -> &[ArrivalEvent] {
        self.events.as_deref().unwrap_or_default()
    }

    pub fn collected(&self) -> &Matching {
        &self.collected
    }

    /// Edges of `buyer` in the order reports are given.
    pub fn buyer_edges(&self, buyer: usize) -> &[usize] {
        &self.shared.buyer_edges[buyer]
    }

    pub fn prices(&self) -> &PriceTable {
        &self.shared.prices
    }

    pub fn utility(&self, buyer: usize) -> f64 {
        self.utility[buyer]
    }

    /// Offers every free item at `max(p_b, p_i)`; `report` lists the buyer's
    /// reported values in [`Self::buyer_edges`] order and defaults to the truth.
    pub fn arrive(&mut self, buyer: usize, report: Option<&[f64]>) -> Result<f64> {
        if buyer >= self.arrived.len() || std::mem::replace(&mut self.arrived[buyer], true) {
            return Err(Error::Input(format!("buyer {buyer} arrived twice or does not exist")));
        }
        let sh = &self.shared;
        let edges = &sh.buyer_edges[buyer];
        if let Some(rep) = report {
            if rep.len() != edges.len() {
                return Err(Error::Input(format!(
                    "buyer {buyer} has {} edges but reported {} values",
                    edges.len(),
                    rep.len()
                )));
            }
        }
        // reports keep the true draw's tie-break key
        let reported = |j: usize| -> Draw {
            let k = edges[j];
            report.map_or(sh.rewards[k], |rep| Draw::new(rep[j], sh.rewards[k].priority))
        };
        let mut best: Option<(f64, Draw, usize)> = None;
        let mut feasible = Vec::new();
        for (j, &k) in edges.iter().enumerate() {
            let rep = reported(j);
            if self.item_taken[sh.ends[k].1] || !sh.admits(k, rep) {
                continue;
            }
            feasible.push(k);
            let u = rep.value - sh.threshold(k);
            let better = best.is_none_or(|(bu, bd, _)| u.total_cmp(&bu).then(rep.cmp(&bd)).is_gt());
            if better {
                best = Some((u, rep, k));
            }
        }
        let mut gained = 0.0;
        if let Some((_, _, k)) = best {
            let r = sh.rewards[k].value;
            let price = sh.threshold(k);
            self.item_taken[sh.ends[k].1] = true;
            self.collected.edges.push((k, r));
            self.charged[buyer] = Some(price);
            self.utility[buyer] = r - price;
            gained = r;
        }
        if let Some(events) = &mut self.events {
            let mut ev = ArrivalEvent::new(self.step, buyer);
            for (j, &k) in edges.iter().enumerate() {
                let (decision, reason) = if best.is_some_and(|(_, _, c)| c == k) {
                    (Decision::Collected, "utility-max")
                } else if feasible.contains(&k) {
                    (Decision::Rejected, "lower-utility")
                } else if self.item_taken[sh.ends[k].1] {
                    (Decision::Rejected, "item-taken")
                } else {
                    (Decision::Rejected, "below-price")
                };
                ev.checks.push(ElementCheck {
                    element: k,
                    reward: reported(j).value,
                    threshold: sh.threshold(k),
                    capacity: None,
                    decision,
                    reason,
                });
            }
            ev.gained = gained;
            events.push(ev);
        }
        self.feasible[buyer] = feasible;
        self.step += 1;
        Ok(gained)
    }

    pub fn finish(self) -> TruthfulRunTrace {
        TruthfulRunTrace {
            collected: self.collected,
            feasible: self.feasible,
            charged: self.charged,
            utility: self.utility,
            prices: self.shared.prices.clone(),
            sample_matching: self.shared.sample_matching.clone(),
            events: self.events.unwrap_or_default(),
        }
    }
}

/// Truthful policy over a full order. `reports[b]` (if given) lists buyer
/// `b`'s reported values by increasing item index of its edges.
pub fn run_truthful(
    instance: &Instance,
    realization: &Realization,
    order: &[usize],
    reports: Option<&[Vec<f64>]>,
) -> Result<TruthfulRunTrace> {
    let mut state = TruthfulArrival::new(instance, realization)?;
    check_permutation(order, state.shared.buyers, "buyers")?;
    if let Some(r) = reports {
        if r.len() != state.shared.buyers {
            return Err(Error::Input(format!(
                "{} report vectors for {} buyers",
                r.len(),
                state.shared.buyers
            )));
        }
    }
    state.record_events();
    for &b in order {
        state.arrive(b, reports.map(|r| r[b].as_slice()))?;
    }
    Ok(state.finish())
}

/// Result of checking one buyer against a grid of misreports.
#[derive(Clone, Debug, PartialEq)]
pub struct MisreportTable {
    pub truthful_utility: f64,
    pub best_misreport_utility: f64,
    /// `best_misreport_utility - truthful_utility`; truthfulness means `<= 0`.
    pub max_violation: f64,
    pub reports_tested: usize,
    pub grid: Vec<Vec<f64>>,
}

/// Per-edge grid: 0, every price, the buyer's true values, midpoints of
/// consecutive points and one point above all of them; refined with evenly
/// spaced points until the product has at least `min_reports` vectors.
pub fn misreport_grid(prices: &[f64], truths: &[f64], min_reports: usize) -> Vec<Vec<f64>> {
    let d = truths.len();
    if d == 0 {
        return Vec::new();
    }
    let mut base: Vec<f64> = std::iter::once(0.0)
        .chain(prices.iter().copied())
        .chain(truths.iter().copied())
        .collect();
    base.sort_by(f64::total_cmp);
    base.dedup();
    let top = base.last().copied().unwrap_or(0.0) + 1.0;
    let mut points = base.clone();
    points.extend(base.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    points.push(top);
    let mut extra = 2usize;
    loop {
        points.sort_by(f64::total_cmp);
        points.dedup();
        if points.len().checked_pow(d as u32).is_none_or(|n| n >= min_reports) {
            break;
        }
        points.extend((1..extra).map(|j| top * j as f64 / extra as f64));
        extra *= 2;
    }
    vec![points; d]
}

/// Replays the truthful policy up to `buyer` under `order`, then compares the
/// buyer's truthful utility with its utility under every grid report vector.
pub fn enumerate_misreports(
    instance: &Instance,
    realization: &Realization,
    order: &[usize],
    buyer: usize,
    min_reports: usize,
) -> Result<MisreportTable> {
    let mut state = TruthfulArrival::new(instance, realization)?;
    check_permutation(order, state.shared.buyers, "buyers")?;
    for &b in order.iter().take_while(|&&b| b != buyer) {
        state.arrive(b, None)?;
    }
    let mut truthful = state.clone();
    truthful.arrive(buyer, None)?;
    let truthful_utility = truthful.utility(buyer);
    let truths: Vec<f64> = state.buyer_edges(buyer).iter().map(|&k| state.shared.rewards[k].value).collect();
    let grid = misreport_grid(&state.prices().values(), &truths, min_reports);
    let mut best = f64::NEG_INFINITY;
    let mut tested = 0usize;
    let mut report = vec![0.0; truths.len()];
    let mut digits = vec![0usize; truths.len()];
    loop {
        for (j, &g) in digits.iter().enumerate() {
            report[j] = grid[j][g];
        }
        let mut s = state.clone();
        s.arrive(buyer, Some(&report))?;
        best = best.max(s.utility(buyer));
        tested += 1;
        // mixed-radix increment; done after wrapping the last digit
        let mut j = 0;
        while j < digits.len() {
            digits[j] += 1;
            if digits[j] < grid[j].len() {
                break;
            }
            digits[j] = 0;
            j += 1;
        }
        if j == digits.len() {
            break;
        }
    }
    Ok(MisreportTable {
        truthful_utility,
        best_misreport_utility: best,
        max_violation: best - truthful_utility,
        reports_tested: tested,
        grid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{draw_realization, Distribution};
    use crate::rng::RandomSource;
    use proptest::prelude::*;

    fn d() -> Distribution {
        Distribution::uniform(0.0, 10.0)
    }

    #[test]
    fn point_mass_single_edge() {
        let inst = Instance::bipartite(1, 1, vec![(0, 0, Distribution::point(1.0))]).unwrap();
        let real = Realization::from_values(&[(1.0, 1.0)]);
        let t = run_vertex_arrival(&inst, &real, &[0]).unwrap();
        assert_eq!(t.prices.values(), vec![1.0, 1.0]);
        assert_eq!(t.collected.edges, vec![(0, 1.0)]);
        let t = run_vertex_arrival(&inst, &real.with_coin_flipped(0), &[0]).unwrap();
        assert!(t.collected.is_empty());
    }

    #[test]
    fn two_item_hand_example() {
        let inst = Instance::bipartite(1, 2, vec![(0, 0, d()), (0, 1, d())]).unwrap();
        let real = Realization::from_values(&[(5.0, 4.0), (2.0, 3.0)]);
        let t = run_vertex_arrival(&inst, &real, &[0]).unwrap();
        assert_eq!(t.sample_matching.edges, vec![(0, 5.0)]);
        assert_eq!(t.prices.values(), vec![5.0, 5.0, 0.0]);
        assert!(t.candidates.is_empty() && t.collected.is_empty());
        let off = run_vertex_arrival_offline_sim(&inst, &real, &[0]).unwrap();
        assert_eq!(off.coupled_sets(), t.coupled_sets());
    }

    #[test]
    fn shared_item_goes_to_first_feasible_buyer() {
        let inst = Instance::bipartite(2, 1, vec![(0, 0, d()), (1, 0, d())]).unwrap();
        let real = Realization::from_values(&[(1.0, 9.0), (1.0, 8.0)]);
        for order in [[0, 1], [1, 0]] {
            let t = run_vertex_arrival(&inst, &real, &order).unwrap();
            assert_eq!(t.collected.len(), 1);
            assert_eq!(t.collected.edges[0].0, order[0]);
        }
    }

    #[test]
    fn empty_instance() {
        let inst = Instance::bipartite(0, 0, vec![]).unwrap();
        let real = Realization::from_values(&[]);
        let t = run_vertex_arrival_offline_sim(&inst, &real, &[]).unwrap();
        assert!(t.collected.is_empty() && t.candidates.is_empty());
        let bad = Instance::bipartite(2, 1, vec![(0, 0, d())]).unwrap();
        let real = Realization::from_values(&[(1.0, 2.0)]);
        assert!(matches!(run_vertex_arrival(&bad, &real, &[0]), Err(Error::Input(_))));
    }

    #[test]
    fn truthful_single_item() {
        let inst = Instance::bipartite(1, 1, vec![(0, 0, d())]).unwrap();
        let real = Realization::from_values(&[(3.0, 5.0)]);
        let t = run_truthful(&inst, &real, &[0], None).unwrap();
        assert_eq!(t.charged, vec![Some(3.0)]);
        assert_eq!(t.utility, vec![2.0]);
        assert_eq!(t.collected.weight(), 5.0);
        let t = run_truthful(&inst, &real, &[0], Some(&[vec![2.0]])).unwrap();
        assert!(t.feasible[0].is_empty());
        assert_eq!(t.utility, vec![0.0]);
        let table = enumerate_misreports(&inst, &real, &[0], 0, 25).unwrap();
        assert_eq!(table.max_violation, 0.0);
        assert!(table.reports_tested >= 25);
        assert!(run_truthful(&inst, &real, &[0], Some(&[vec![1.0, 2.0]])).is_err());
    }

    /// Buyer 0 sees items at prices 9 and 1; buyers 1 and 2 only set prices.
    pub(crate) fn two_item_pricing() -> (Instance, Realization) {
        let inst = Instance::bipartite(3, 2, vec![(0, 0, d()), (0, 1, d()), (1, 0, d()), (2, 1, d())]).unwrap();
        let real = Realization::from_values(&[(0.5, 10.0), (0.5, 6.0), (9.0, 0.0), (1.0, 0.0)]);
        (inst, real)
    }

    #[test]
    fn truthful_prefers_utility_over_reward() {
        let (inst, real) = two_item_pricing();
        let t = run_truthful(&inst, &real, &[0, 1, 2], None).unwrap();
        assert_eq!(t.collected.edges[0], (1, 6.0));
        assert_eq!(t.charged[0], Some(1.0));
        assert_eq!(t.utility[0], 5.0);
        let table = enumerate_misreports(&inst, &real, &[0, 1, 2], 0, 25).unwrap();
        assert!(table.reports_tested >= 25);
        assert!(table.grid[0].len() >= 5);
        assert!(table.best_misreport_utility <= 5.0);
        assert!(table.max_violation <= 0.0);
    }

    #[test]
    fn buyer_without_feasible_item() {
        let (inst, real) = two_item_pricing();
        let table = enumerate_misreports(&inst, &real, &[0, 1, 2], 1, 25).unwrap();
        assert_eq!(table.truthful_utility, 0.0);
        assert!(table.max_violation <= 0.0);
    }

    #[test]
    fn transversal_examples() {
        let inst = Instance::transversal(2, vec![(0, 0), (0, 1)], vec![d()]).unwrap();
        let real = Realization::from_values(&[(2.0, 5.0)]);
        let t = run_transversal(&inst, &real, &[0]).unwrap();
        assert_eq!(t.sample_matching.edges, vec![(0, 2.0)]);
        assert_eq!(t.collected.edges, vec![(0, 5.0)]);
        let real = Realization::from_values(&[(5.0, 2.0)]);
        assert!(run_transversal(&inst, &real, &[0]).unwrap().collected.is_empty());

        let inst = Instance::transversal(1, vec![(0, 0), (1, 0)], vec![d(), d()]).unwrap();
        let real = Realization::from_values(&[(4.0, 3.0), (1.0, 6.0)]);
        for order in [[0, 1], [1, 0]] {
            let t = run_transversal(&inst, &real, &order).unwrap();
            assert_eq!(t.prices.values(), vec![4.0, 0.0, 4.0]);
            assert_eq!(t.collected.edges, vec![(1, 6.0)]);
            let off = run_transversal_offline_sim(&inst, &real, &order).unwrap();
            assert_eq!(off.coupled_sets(), t.coupled_sets());
        }
        let bip = Instance::bipartite(1, 1, vec![(0, 0, d())]).unwrap();
        assert!(run_transversal(&bip, &Realization::from_values(&[(1.0, 2.0)]), &[0]).is_err());
    }

    #[test]
    fn safe_edge_examples() {
        let trace = |cands: Vec<(usize, f64)>| BipartiteRunTrace {
            buyers: 2,
            items: 1,
            ends: Arc::new(vec![(0, 0), (1, 0)]),
            collected: Matching::default(),
            candidates: cands.into_iter().map(|(e, w)| (e, Draw::new(w, e as u64))).collect(),
            sample_matching: Matching::default(),
            prices: PriceTable::zeros(3),
            offline_sets: None,
            events: vec![],
        };
        assert_eq!(safe_edges_bipartite(&trace(vec![(0, 5.0)])), vec![Some(0), None]);
        assert_eq!(safe_edges_bipartite(&trace(vec![(0, 5.0), (1, 7.0)])), vec![Some(0), None]);
        assert_eq!(safe_edges_bipartite(&trace(vec![])), vec![None, None]);
    }

    fn random_bipartite(seed: u64, nb: usize, ni: usize) -> Instance {
        use rand::Rng;
        let mut rng = RandomSource::new(seed);
        let mut edges = Vec::new();
        for b in 0..nb {
            for i in 0..ni {
                if rng.random_bool(0.6) {
                    let lo = rng.random_range(0..4) as f64;
                    edges.push((b, i, Distribution::two_point(lo, lo + rng.random_range(0..3) as f64, 0.5)));
                }
            }
        }
        Instance::bipartite(nb, ni, edges).unwrap()
    }

    fn random_transversal(seed: u64, nb: usize, ni: usize) -> Instance {
        use rand::Rng;
        let mut rng = RandomSource::new(seed);
        let compat: Vec<(usize, usize)> = (0..nb)
            .flat_map(|b| (0..ni).map(move |i| (b, i)))
            .filter(|_| rng.random_bool(0.6))
            .collect();
        let mut rng = RandomSource::new(seed + 1);
        let dists = (0..nb)
            .map(|_| Distribution::two_point(rng.random_range(0..3) as f64, 3.0, 0.5))
            .collect();
        Instance::transversal(ni, compat, dists).unwrap()
    }

    proptest! {
        #[test]
        fn vertex_arrival_coupling(seed in 0u64..1_000_000, nb in 1usize..5, ni in 1usize..5, rot in 0usize..10) {
            let inst = random_bipartite(seed, nb, ni);
            let real = draw_realization(&inst, &mut RandomSource::new(seed + 7)).unwrap();
            let order: Vec<usize> = (0..nb).map(|k| (k + rot) % nb).collect();
            let on = run_vertex_arrival(&inst, &real, &order).unwrap();
            let off = run_vertex_arrival_offline_sim(&inst, &real, &order).unwrap();
            prop_assert_eq!(on.coupled_sets(), off.coupled_sets());
            prop_assert!(on.collected.is_matching_in(&Graph::of(&inst)));
            prop_assert!(on.collected.weight() >= on.safe_reward_sum());
            let t = run_truthful(&inst, &real, &order, None).unwrap();
            prop_assert!(t.collected.is_matching_in(&Graph::of(&inst)));
            for b in 0..nb {
                let table = enumerate_misreports(&inst, &real, &order, b, 25).unwrap();
                prop_assert!(table.max_violation <= 0.0);
            }
        }

        #[test]
        fn transversal_coupling(seed in 0u64..1_000_000, nb in 1usize..5, ni in 1usize..5, rot in 0usize..10) {
            let inst = random_transversal(seed, nb, ni);
            let real = draw_realization(&inst, &mut RandomSource::new(seed + 3)).unwrap();
            let order: Vec<usize> = (0..nb).map(|k| (k + rot) % nb).collect();
            let on = run_transversal(&inst, &real, &order).unwrap();
            let off = run_transversal_offline_sim(&inst, &real, &order).unwrap();
            prop_assert_eq!(on.coupled_sets(), off.coupled_sets());
            prop_assert!(on.collected.weight() >= on.safe_reward_sum());
        }
    }
}
