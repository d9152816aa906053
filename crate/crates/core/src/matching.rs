//! Edge-arrival matching on general graphs: the online threshold policy, its
//! offline greedy-ordered twin, and safe-edge diagnostics.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_permutation, Draw, Instance, InstanceKind, Realization};
use crate::oracles::{greedy_matching, Graph, Matching};
use crate::trace::{ArrivalEvent, Decision, ElementCheck};

/// Vertex prices set by a greedy matching on samples.
///
/// A price is stored as the sample key that set it; `None` is price 0 and
/// admits every reward.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PriceTable {
    keys: Vec<Option<Draw>>,
}

impl PriceTable {
    pub fn zeros(vertices: usize) -> Self {
        Self {
            keys: vec![None; vertices],
        }
    }

    /// Prices both endpoints of each matched edge at that edge's key.
    pub fn from_matching(vertices: usize, ends: &[(usize, usize)], matched: &[(usize, Draw)]) -> Self {
        let mut t = Self::zeros(vertices);
        for &(e, key) in matched {
            let (a, b) = ends[e];
            t.keys[a] = Some(key);
            t.keys[b] = Some(key);
        }
        t
    }

    pub fn set(&mut self, vertex: usize, key: Draw) {
        self.keys[vertex] = Some(key);
    }

    pub fn price(&self, vertex: usize) -> f64 {
        self.keys[vertex].map_or(0.0, |d| d.value)
    }

    pub fn key(&self, vertex: usize) -> Option<Draw> {
        self.keys[vertex]
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.keys.len()).map(|v| self.price(v)).collect()
    }

    /// `reward >= max(p_a, p_b)` in the strict key order.
    pub fn admits(&self, reward: Draw, a: usize, b: usize) -> bool {
        self.keys[a].is_none_or(|p| reward >= p) && self.keys[b].is_none_or(|p| reward >= p)
    }

    pub fn threshold(&self, a: usize, b: usize) -> f64 {
        self.price(a).max(self.price(b))
    }
}

/// Sorted `(edge, weight bits)` views of the sets compared by the coupling checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoupledSets {
    pub candidates: Vec<(usize, u64)>,
    pub sample: Vec<(usize, u64)>,
    pub collected: Vec<(usize, u64)>,
}

/// Full record of one edge-arrival run.
#[derive(Clone, Debug)]
pub struct EdgeRunTrace {
    pub vertices: usize,
    pub ends: Arc<Vec<(usize, usize)>>,
    /// `M`, weighted by rewards.
    pub collected: Matching,
    /// `E'` with reward keys, in the order edges entered it.
    pub candidates: Vec<(usize, Draw)>,
    /// `M_S`, weighted by samples.
    pub sample_matching: Matching,
    pub prices: PriceTable,
    /// Per edge: the larger draw is the reward.
    pub r_used: Vec<bool>,
    pub events: Vec<ArrivalEvent>,
}

impl EdgeRunTrace {
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

    /// `e_v`: the largest-reward `E'` edge at each vertex.
    pub fn best_candidates(&self) -> Vec<Option<(usize, Draw)>> {
        let mut best: Vec<Option<(usize, Draw)>> = vec![None; self.vertices];
        for &(e, r) in &self.candidates {
            let (a, b) = self.ends[e];
            for v in [a, b] {
                if best[v].is_none_or(|(_, cur)| r > cur) {
                    best[v] = Some((e, r));
                }
            }
        }
        best
    }

    /// `sum_v r_{e_v}`, with absent `e_v` counting 0.
    pub fn best_candidate_sum(&self) -> f64 {
        self.best_candidates().iter().flatten().map(|(_, r)| r.value).fold(0.0, |acc, x| acc + x)
    }

    /// `sum_v r_{e_v} 1{e_v safe for v}`.
    pub fn safe_reward_sum(&self) -> f64 {
        let best = self.best_candidates();
        safe_edges(self)
            .iter()
            .enumerate()
            .filter_map(|(v, s)| s.map(|_| best[v].map_or(0.0, |(_, r)| r.value)))
            .fold(0.0, |acc, x| acc + x)
    }
}

fn graph_parts(instance: &Instance, realization: &Realization) -> Result<(usize, Vec<(usize, usize)>)> {
    if !matches!(instance.kind(), InstanceKind::GeneralGraph | InstanceKind::Bipartite) {
        return Err(Error::Input(format!(
            "edge-arrival matching needs a graph instance, got {:?}",
            instance.kind()
        )));
    }
    if realization.len() != instance.edges().len() {
        return Err(Error::Input(format!(
            "realization has {} elements, instance has {} edges",
            realization.len(),
            instance.edges().len()
        )));
    }
    let ends = (0..instance.edges().len()).map(|k| instance.endpoints(k)).collect();
    Ok((instance.vertex_count(), ends))
}

#[derive(Debug)]
struct EdgeShared {
    vertices: usize,
    ends: Arc<Vec<(usize, usize)>>,
    rewards: Vec<Draw>,
    prices: PriceTable,
    sample_matching: Matching,
    r_used: Vec<bool>,
}

/// Online state of the edge-arrival policy.
#[derive(Clone, Debug)]
pub struct EdgeArrival {
    shared: Arc<EdgeShared>,
    matched: Vec<bool>,
    arrived: Vec<bool>,
    collected: Matching,
    candidates: Vec<(usize, Draw)>,
    events: Option<Vec<ArrivalEvent>>,
    step: usize,
}

impl EdgeArrival {
    /// Computes `M_S` on samples and the vertex prices.
    pub fn new(instance: &Instance, realization: &Realization) -> Result<Self> {
        let (vertices, ends) = graph_parts(instance, realization)?;
        let graph = Graph::new(vertices, ends);
        let samples: Vec<(usize, Draw)> = realization.samples().into_iter().enumerate().collect();
        let sample_matching = greedy_matching(&graph, &samples);
        let keyed: Vec<(usize, Draw)> = sample_matching
            .edges
            .iter()
            .map(|&(e, _)| (e, realization.sample(e)))
            .collect();
        let prices = PriceTable::from_matching(vertices, &graph.ends, &keyed);
        let m = graph.ends.len();
        Ok(Self {
            shared: Arc::new(EdgeShared {
                vertices,
                ends: Arc::new(graph.ends),
                rewards: realization.rewards(),
                prices,
                sample_matching,
                r_used: realization.elements().iter().map(|e| e.heads()).collect(),
            }),
            matched: vec![false; vertices],
            arrived: vec![false; m],
            collected: Matching::default(),
            candidates: Vec::new(),
            events: None,
            step: 0,
        })
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

    /// Processes one arriving edge and returns the reward collected.
    pub fn arrive(&mut self, edge: usize) -> Result<f64> {
        if edge >= self.arrived.len() || std::mem::replace(&mut self.arrived[edge], true) {
            return Err(Error::Input(format!("edge {edge} arrived twice or does not exist")));
        }
        let sh = &self.shared;
        let (a, b) = sh.ends[edge];
        let r = sh.rewards[edge];
        let mut gained = 0.0;
        let (decision, reason) = if !sh.prices.admits(r, a, b) {
            (Decision::Rejected, "below-price")
        } else {
            self.candidates.push((edge, r));
            if !self.matched[a] && !self.matched[b] {
                self.matched[a] = true;
                self.matched[b] = true;
                self.collected.edges.push((edge, r.value));
                gained = r.value;
                (Decision::Collected, "collected")
            } else {
                (Decision::Admitted, "endpoint-taken")
            }
        };
        if let Some(events) = &mut self.events {
            let mut ev = ArrivalEvent::new(self.step, edge);
            ev.checks.push(ElementCheck {
                element: edge,
                reward: r.value,
                threshold: sh.prices.threshold(a, b),
                capacity: None,
                decision,
                reason,
            });
            ev.gained = gained;
            events.push(ev);
        }
        self.step += 1;
        Ok(gained)
    }

    pub fn finish(self) -> EdgeRunTrace {
        let sh = Arc::try_unwrap(self.shared).unwrap_or_else(|arc| EdgeShared {
            vertices: arc.vertices,
            ends: arc.ends.clone(),
            rewards: arc.rewards.clone(),
            prices: arc.prices.clone(),
            sample_matching: arc.sample_matching.clone(),
            r_used: arc.r_used.clone(),
        });
        EdgeRunTrace {
            vertices: sh.vertices,
            ends: sh.ends,
            collected: self.collected,
            candidates: self.candidates,
            sample_matching: sh.sample_matching,
            prices: sh.prices,
            r_used: sh.r_used,
            events: self.events.unwrap_or_default(),
        }
    }
}

/// Runs the online edge-arrival policy over a full arrival order.
pub fn run_edge_arrival(instance: &Instance, realization: &Realization, order: &[usize]) -> Result<EdgeRunTrace> {
    check_permutation(order, instance.edges().len(), "edges")?;
    let mut state = EdgeArrival::new(instance, realization)?;
    state.record_events();
    for &e in order {
        state.arrive(e)?;
    }
    Ok(state.finish())
}

/// Offline twin: scans all `2|E|` draws in decreasing order, building `E'`
/// and `M_S` together, then extracts `M` from `E'` in the arrival order.
pub fn run_edge_arrival_offline_sim(
    instance: &Instance,
    realization: &Realization,
    order: &[usize],
) -> Result<EdgeRunTrace> {
    check_permutation(order, instance.edges().len(), "edges")?;
    let (vertices, ends) = graph_parts(instance, realization)?;
    let m = ends.len();
    let mut free = vec![true; vertices];
    let mut seen = vec![false; m];
    let mut r_used = vec![false; m];
    let mut candidates = Vec::new();
    let mut sample_matching = Matching::default();
    let mut keyed = Vec::new();
    for (e, a, is_reward) in realization.decreasing_draws() {
        let (u, v) = ends[e];
        if !seen[e] {
            seen[e] = true;
            // the first draw seen is the larger one; the coin is whether it is the reward
            if is_reward {
                r_used[e] = true;
                if free[u] && free[v] {
                    candidates.push((e, a));
                }
            } else if free[u] && free[v] {
                sample_matching.edges.push((e, a.value));
                keyed.push((e, a));
                free[u] = false;
                free[v] = false;
            }
        } else if r_used[e] && free[u] && free[v] {
            sample_matching.edges.push((e, a.value));
            keyed.push((e, a));
            free[u] = false;
            free[v] = false;
        }
    }
    let in_candidates: Vec<bool> = {
        let mut f = vec![false; m];
        for &(e, _) in &candidates {
            f[e] = true;
        }
        f
    };
    let mut matched = vec![false; vertices];
    let mut collected = Matching::default();
    for &e in order {
        let (u, v) = ends[e];
        if in_candidates[e] && !matched[u] && !matched[v] {
            matched[u] = true;
            matched[v] = true;
            collected.edges.push((e, realization.reward(e).value));
        }
    }
    let prices = PriceTable::from_matching(vertices, &ends, &keyed);
    Ok(EdgeRunTrace {
        vertices,
        ends: Arc::new(ends),
        collected,
        candidates,
        sample_matching,
        prices,
        r_used,
        events: Vec::new(),
    })
}

/// Per vertex `v`, the edge safe for `v` if any: the only `E'` edge at `v`,
/// with no `E'` edge of smaller reward at its other endpoint.
pub fn safe_edges(trace: &EdgeRunTrace) -> Vec<Option<usize>> {
    let mut incident: Vec<Vec<(usize, Draw)>> = vec![Vec::new(); trace.vertices];
    for &(e, r) in &trace.candidates {
        let (a, b) = trace.ends[e];
        incident[a].push((e, r));
        incident[b].push((e, r));
    }
    (0..trace.vertices)
        .map(|v| {
            let [(e, r)] = incident[v][..] else {
                return None;
            };
            let (a, b) = trace.ends[e];
            let other = if a == v { b } else { a };
            incident[other].iter().all(|&(_, r2)| r2 >= r).then_some(e)
        })
        .collect()
}
