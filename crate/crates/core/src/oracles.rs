//! Offline baselines: greedy and exact optima for matchings, budget-additive
//! assignments, transversal matroids and graphic matroids.
//!
//! Greedy routines take [`Draw`] keys so the scan order is the same strict
//! order the online policies use. Exact routines take plain values.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Draw, Instance, InstanceKind};

/// Caps for the exhaustive routines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct OracleLimits {
    /// Largest edge count for brute-force matching on non-bipartite graphs.
    pub matching_edges: usize,
    pub budget_items: usize,
    pub budget_buyers: usize,
    /// Largest edge count for the subset-enumeration forest oracle.
    pub forest_edges: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            matching_edges: 20,
            budget_items: 10,
            budget_buyers: 5,
            forest_edges: 20,
        }
    }
}

/// Endpoint structure of a (multi)graph in a flat vertex space.
#[derive(Clone, Debug)]
pub struct Graph {
    pub vertices: usize,
    pub ends: Vec<(usize, usize)>,
    /// `Some(left)` when vertices `0..left` and `left..` form a bipartition
    /// respected by every edge.
    pub left: Option<usize>,
}

impl Graph {
    pub fn new(vertices: usize, ends: Vec<(usize, usize)>) -> Self {
        Self {
            vertices,
            ends,
            left: None,
        }
    }

    pub fn bipartite(left: usize, right: usize, ends: Vec<(usize, usize)>) -> Self {
        Self {
            vertices: left + right,
            ends,
            left: Some(left),
        }
    }

    pub fn of(instance: &Instance) -> Self {
        let ends = (0..instance.edges().len()).map(|k| instance.endpoints(k)).collect();
        if instance.kind().is_bipartite() {
            Self {
                vertices: instance.vertex_count(),
                ends,
                left: Some(instance.buyers().len()),
            }
        } else {
            Self::new(instance.vertex_count(), ends)
        }
    }
}

/// A set of edges with the weight each was taken at.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Matching {
    pub edges: Vec<(usize, f64)>,
}

impl Matching {
    pub fn weight(&self) -> f64 {
        self.edges.iter().map(|&(_, w)| w).fold(0.0, |acc, x| acc + x)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, edge: usize) -> bool {
        self.edges.iter().any(|&(e, _)| e == edge)
    }

    /// No two edges share a vertex and no loops.
    pub fn is_matching_in(&self, graph: &Graph) -> bool {
        let mut used = vec![false; graph.vertices];
        for &(e, _) in &self.edges {
            let (a, b) = graph.ends[e];
            if a == b || used[a] || used[b] {
                return false;
            }
            used[a] = true;
            used[b] = true;
        }
        true
    }

    /// Edge indices in ascending order, for set comparisons.
    pub fn sorted(&self) -> Vec<(usize, u64)> {
        let mut v: Vec<(usize, u64)> = self.edges.iter().map(|&(e, w)| (e, w.to_bits())).collect();
        v.sort_unstable();
        v
    }
}

/// Scans edges by decreasing key and keeps an edge iff both endpoints are free.
pub fn greedy_matching(graph: &Graph, weighted: &[(usize, Draw)]) -> Matching {
    let mut order: Vec<(usize, Draw)> = weighted.to_vec();
    order.sort_unstable_by(|a, b| b.1.cmp(&a.1));
    let mut used = vec![false; graph.vertices];
    let mut out = Matching::default();
    for (e, w) in order {
        let (a, b) = graph.ends[e];
        if a != b && !used[a] && !used[b] {
            used[a] = true;
            used[b] = true;
            out.edges.push((e, w.value));
        }
    }
    out
}

/// Maximum-weight matching. Bipartite graphs use the Hungarian method; other
/// graphs are searched exhaustively up to `limits.matching_edges` edges.
pub fn optimal_matching(graph: &Graph, weighted: &[(usize, f64)], limits: &OracleLimits) -> Result<Matching> {
    match graph.left {
        Some(left) => Ok(hungarian_matching(graph, left, weighted)),
        None => {
            if weighted.len() > limits.matching_edges {
                return Err(Error::Size {
                    what: "brute-force matching edges",
                    actual: weighted.len(),
                    cap: limits.matching_edges,
                });
            }
            Ok(brute_force_matching(graph, weighted))
        }
    }
}

/// Exhaustive branch-and-bound over all matchings.
pub fn brute_force_matching(graph: &Graph, weighted: &[(usize, f64)]) -> Matching {
    let mut edges: Vec<(usize, f64)> = weighted
        .iter()
        .copied()
        .filter(|&(e, w)| w > 0.0 && graph.ends[e].0 != graph.ends[e].1)
        .collect();
    edges.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut suffix = vec![0.0; edges.len() + 1];
    for k in (0..edges.len()).rev() {
        suffix[k] = suffix[k + 1] + edges[k].1;
    }
    struct Search<'a> {
        graph: &'a Graph,
        edges: &'a [(usize, f64)],
        suffix: &'a [f64],
        used: Vec<bool>,
        current: Vec<usize>,
        current_weight: f64,
        best: Vec<usize>,
        best_weight: f64,
    }
    impl Search<'_> {
        fn go(&mut self, k: usize) {
            if self.current_weight > self.best_weight {
                self.best_weight = self.current_weight;
                self.best = self.current.clone();
            }
            if k == self.edges.len() || self.current_weight + self.suffix[k] <= self.best_weight {
                return;
            }
            let (e, w) = self.edges[k];
            let (a, b) = self.graph.ends[e];
            if !self.used[a] && !self.used[b] {
                self.used[a] = true;
                self.used[b] = true;
                self.current.push(k);
                self.current_weight += w;
                self.go(k + 1);
                self.current_weight -= w;
                self.current.pop();
                self.used[a] = false;
                self.used[b] = false;
            }
            self.go(k + 1);
        }
    }
    let mut s = Search {
        graph,
        edges: &edges,
        suffix: &suffix,
        used: vec![false; graph.vertices],
        current: vec![],
        current_weight: 0.0,
        best: vec![],
        best_weight: 0.0,
    };
    s.go(0);
    Matching {
        edges: s.best.iter().map(|&k| edges[k]).collect(),
    }
}

/// Hungarian method on the (max-over-parallel-edges) weight matrix.
fn hungarian_matching(graph: &Graph, left: usize, weighted: &[(usize, f64)]) -> Matching {
    let right = graph.vertices - left;
    let n = left.max(right);
    if n == 0 {
        return Matching::default();
    }
    let mut best: Vec<Vec<Option<(usize, f64)>>> = vec![vec![None; n]; n];
    for &(e, w) in weighted {
        let (a, b) = graph.ends[e];
        let (l, r) = if a < left { (a, b - left) } else { (b, a - left) };
        if best[l][r].is_none_or(|(_, cur)| w > cur) {
            best[l][r] = Some((e, w));
        }
    }
    let cost = |i: usize, j: usize| -> f64 { -best[i][j].map_or(0.0, |(_, w)| w) };
    // e-maxx formulation, 1-based potentials
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = Matching::default();
    for j in 1..=n {
        if p[j] != 0 {
            if let Some((e, w)) = best[p[j] - 1][j - 1] {
                if w > 0.0 {
                    out.edges.push((e, w));
                }
            }
        }
    }
    out.edges.sort_unstable_by_key(|&(e, _)| e);
    out
}

/// Buyer-side value of one budget-additive edge.
#[derive(Clone, Copy, Debug)]
pub struct BudgetValue {
    pub edge: usize,
    pub buyer: usize,
    pub item: usize,
    pub value: Draw,
}

impl BudgetValue {
    /// Values of every edge of a budget-additive instance under `draws`.
    pub fn of(instance: &Instance, draws: &[Draw]) -> Vec<BudgetValue> {
        instance
            .edges()
            .iter()
            .zip(draws)
            .enumerate()
            .map(|(k, (e, &d))| BudgetValue {
                edge: k,
                buyer: e.u,
                item: e.v,
                value: d,
            })
            .collect()
    }
}

/// Items per buyer, each with the edge it came through and its value.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Assignment {
    pub bundles: Vec<Vec<(usize, usize, f64)>>,
}

impl Assignment {
    pub fn with_buyers(n: usize) -> Self {
        Self {
            bundles: vec![Vec::new(); n],
        }
    }

    pub fn assign(&mut self, buyer: usize, item: usize, edge: usize, value: f64) {
        self.bundles[buyer].push((item, edge, value));
    }

    pub fn load(&self, buyer: usize) -> f64 {
        self.bundles[buyer].iter().map(|&(_, _, v)| v).fold(0.0, |acc, x| acc + x)
    }

    /// Sum of loads; equals the budget-additive welfare when every load fits.
    pub fn total(&self) -> f64 {
        (0..self.bundles.len()).map(|b| self.load(b)).fold(0.0, |acc, x| acc + x)
    }

    /// Budget-additive welfare `sum_b min(load_b, C_b)`.
    pub fn welfare(&self, budgets: &[f64]) -> f64 {
        (0..self.bundles.len())
            .map(|b| self.load(b).min(budgets[b]))
            .fold(0.0, |acc, x| acc + x)
    }

    pub fn edges(&self) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self
            .bundles
            .iter()
            .flat_map(|bundle| bundle.iter().map(|&(_, e, w)| (e, w)))
            .collect();
        v.sort_unstable_by_key(|&(e, _)| e);
        v
    }

    /// Each item at most once and every load within budget.
    pub fn is_feasible(&self, budgets: &[f64]) -> bool {
        let mut seen = std::collections::HashSet::new();
        for (b, bundle) in self.bundles.iter().enumerate() {
            for &(i, _, _) in bundle {
                if !seen.insert(i) {
                    return false;
                }
            }
            if self.load(b) > budgets[b] {
                return false;
            }
        }
        true
    }
}

/// One step of the budget greedy scan.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum GreedyStep {
    Assigned { buyer: usize, item: usize, edge: usize, value: f64 },
    /// First budget overflow of an unblocked buyer on an available item.
    Blocked { buyer: usize, item: usize, edge: usize, value: f64 },
    Skipped { edge: usize },
}

/// Output of [`greedy_budget_assignment`]: the assignment plus what the
/// online phase needs to evaluate prefix capacities.
#[derive(Clone, Debug)]
pub struct GreedyBudget {
    pub assignment: Assignment,
    pub history: Vec<GreedyStep>,
    /// Key at which each buyer became blocked.
    pub blocked_at: Vec<Option<Draw>>,
    /// Per item: `(buyer, key)` of the draw that won it.
    pub item_owner: Vec<Option<(usize, Draw)>>,
    /// Per buyer, keys and values of assigned draws in scan order.
    assigned_keys: Vec<Vec<Draw>>,
    budgets: Vec<f64>,
}

impl GreedyBudget {
    /// Total value assigned to `buyer` from draws strictly above `a`, or the
    /// full budget when the buyer was already blocked above `a`.
    pub fn capacity_above(&self, buyer: usize, a: Draw) -> f64 {
        if self.blocked_at[buyer].is_some_and(|x| x > a) {
            return self.budgets[buyer];
        }
        let mut load = 0.0;
        for d in &self.assigned_keys[buyer] {
            if *d > a {
                load += d.value;
            } else {
                break;
            }
        }
        load
    }

    pub fn budgets(&self) -> &[f64] {
        &self.budgets
    }
}

/// Greedy on decreasing keys: assign `(b, i, v)` iff `i` is free, `b` is not
/// blocked and `load(b) + v <= C_b`. The first failing budget test on a free
/// item blocks `b` for good.
pub fn greedy_budget_assignment(values: &[BudgetValue], budgets: &[f64], items: usize) -> GreedyBudget {
    let mut order: Vec<BudgetValue> = values.to_vec();
    order.sort_unstable_by(|a, b| b.value.cmp(&a.value));
    let n = budgets.len();
    let mut out = GreedyBudget {
        assignment: Assignment::with_buyers(n),
        history: Vec::with_capacity(order.len()),
        blocked_at: vec![None; n],
        item_owner: vec![None; items],
        assigned_keys: vec![Vec::new(); n],
        budgets: budgets.to_vec(),
    };
    let mut load = vec![0.0; n];
    for bv in order {
        let (b, i, v) = (bv.buyer, bv.item, bv.value.value);
        if out.item_owner[i].is_some() || out.blocked_at[b].is_some() {
            out.history.push(GreedyStep::Skipped { edge: bv.edge });
        } else if load[b] + v <= budgets[b] {
            load[b] += v;
            out.assignment.assign(b, i, bv.edge, v);
            out.item_owner[i] = Some((b, bv.value));
            out.assigned_keys[b].push(bv.value);
            out.history.push(GreedyStep::Assigned {
                buyer: b,
                item: i,
                edge: bv.edge,
                value: v,
            });
        } else {
            out.blocked_at[b] = Some(bv.value);
            out.history.push(GreedyStep::Blocked {
                buyer: b,
                item: i,
                edge: bv.edge,
                value: v,
            });
        }
    }
    out
}

/// Maximum of `sum_b min(sum_{i in S_b} v_b(i), C_b)` over disjoint bundles,
/// by dynamic programming over item subsets (`O(|B| 3^|I|)`).
pub fn optimal_budget_assignment(
    values: &[(usize, usize, usize, f64)],
    budgets: &[f64],
    items: usize,
    limits: &OracleLimits,
) -> Result<Assignment> {
    let buyers = budgets.len();
    if items > limits.budget_items {
        return Err(Error::Size {
            what: "budget oracle items",
            actual: items,
            cap: limits.budget_items,
        });
    }
    if buyers > limits.budget_buyers {
        return Err(Error::Size {
            what: "budget oracle buyers",
            actual: buyers,
            cap: limits.budget_buyers,
        });
    }
    // best edge per (buyer, item)
    let mut edge_of: Vec<Vec<Option<(usize, f64)>>> = vec![vec![None; items]; buyers];
    for &(edge, b, i, v) in values {
        if edge_of[b][i].is_none_or(|(_, w)| v > w) {
            edge_of[b][i] = Some((edge, v));
        }
    }
    let full = 1usize << items;
    let bundle_value = |b: usize| -> Vec<f64> {
        let mut sums = vec![0.0; full];
        for mask in 1..full {
            let low = mask.trailing_zeros() as usize;
            sums[mask] = sums[mask & (mask - 1)] + edge_of[b][low].map_or(0.0, |(_, v)| v);
        }
        sums.into_iter().map(|s| s.min(budgets[b])).collect()
    };
    let mut table = vec![vec![0.0; full]; buyers + 1];
    let mut choice = vec![vec![0usize; full]; buyers + 1];
    for b in 0..buyers {
        let val = bundle_value(b);
        for mask in 0..full {
            let mut best = table[b][mask];
            let mut pick = 0;
            let mut sub = mask;
            while sub > 0 {
                let cand = table[b][mask ^ sub] + val[sub];
                if cand > best {
                    best = cand;
                    pick = sub;
                }
                sub = (sub - 1) & mask;
            }
            table[b + 1][mask] = best;
            choice[b + 1][mask] = pick;
        }
    }
    let mut out = Assignment::with_buyers(buyers);
    let mut mask = full - 1;
    for b in (0..buyers).rev() {
        let sub = choice[b + 1][mask];
        for i in 0..items {
            if sub & (1 << i) != 0 {
                if let Some((edge, v)) = edge_of[b][i] {
                    out.assign(b, i, edge, v);
                }
            }
        }
        mask ^= sub;
    }
    Ok(out)
}

/// Max-weight set of buyers matchable into items, via the matroid greedy with
/// augmenting paths. Every edge of buyer `b` carries `weights[b]`.
pub fn optimal_transversal_independent_set(
    buyers: usize,
    items: usize,
    compatibility: &[(usize, usize)],
    weights: &[f64],
) -> Matching {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); buyers];
    for (k, &(b, i)) in compatibility.iter().enumerate() {
        adj[b].push((i, k));
    }
    let mut order: Vec<usize> = (0..buyers).filter(|&b| weights[b] > 0.0).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut owner: Vec<Option<(usize, usize)>> = vec![None; items];
    fn augment(
        b: usize,
        adj: &[Vec<(usize, usize)>],
        owner: &mut Vec<Option<(usize, usize)>>,
        seen: &mut Vec<bool>,
    ) -> bool {
        for &(i, k) in &adj[b] {
            if seen[i] {
                continue;
            }
            seen[i] = true;
            let free = match owner[i] {
                None => true,
                Some((other, _)) => augment(other, adj, owner, seen),
            };
            if free {
                owner[i] = Some((b, k));
                return true;
            }
        }
        false
    }
    for b in order {
        let mut seen = vec![false; items];
        augment(b, &adj, &mut owner, &mut seen);
    }
    let mut out = Matching {
        edges: owner
            .iter()
            .flatten()
            .map(|&(b, k)| (k, weights[b]))
            .collect(),
    };
    out.edges.sort_unstable_by_key(|&(e, _)| e);
    out
}

/// Disjoint-set forest used by the graphic-matroid routines.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Joins the classes of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra] = rb;
        true
    }
}

pub fn is_forest(graph: &Graph, edges: &[usize]) -> bool {
    let mut uf = UnionFind::new(graph.vertices);
    edges.iter().all(|&e| {
        let (a, b) = graph.ends[e];
        uf.union(a, b)
    })
}

/// Kruskal on decreasing weight; exact for the graphic matroid.
pub fn max_weight_forest(graph: &Graph, weights: &[f64]) -> Matching {
    let mut order: Vec<usize> = (0..graph.ends.len()).filter(|&e| weights[e] > 0.0).collect();
    order.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    let mut uf = UnionFind::new(graph.vertices);
    let mut out = Matching::default();
    for e in order {
        let (a, b) = graph.ends[e];
        if uf.union(a, b) {
            out.edges.push((e, weights[e]));
        }
    }
    out
}

/// Max-weight forest by enumerating every edge subset.
pub fn max_weight_forest_brute(graph: &Graph, weights: &[f64], limits: &OracleLimits) -> Result<f64> {
    let m = graph.ends.len();
    if m > limits.forest_edges {
        return Err(Error::Size {
            what: "brute-force forest edges",
            actual: m,
            cap: limits.forest_edges,
        });
    }
    let mut best = 0.0f64;
    for mask in 0u64..(1u64 << m) {
        let chosen: Vec<usize> = (0..m).filter(|&e| mask & (1 << e) != 0).collect();
        let w: f64 = chosen.iter().map(|&e| weights[e]).sum();
        if w > best && is_forest(graph, &chosen) {
            best = w;
        }
    }
    Ok(best)
}

/// Prophet benchmark of an instance under per-element weights.
pub fn instance_optimum(instance: &Instance, weights: &[f64], limits: &OracleLimits) -> Result<f64> {
    let graph = Graph::of(instance);
    match instance.kind() {
        InstanceKind::GeneralGraph | InstanceKind::Bipartite => {
            let weighted: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
            Ok(optimal_matching(&graph, &weighted, limits)?.weight())
        }
        InstanceKind::Transversal => {
            let compat: Vec<(usize, usize)> = instance.edges().iter().map(|e| (e.u, e.v)).collect();
            Ok(optimal_transversal_independent_set(
                instance.buyers().len(),
                instance.items().len(),
                &compat,
                weights,
            )
            .weight())
        }
        InstanceKind::BudgetAdditive => {
            let values: Vec<(usize, usize, usize, f64)> = instance
                .edges()
                .iter()
                .enumerate()
                .map(|(k, e)| (k, e.u, e.v, weights[k]))
                .collect();
            Ok(optimal_budget_assignment(&values, instance.budgets(), instance.items().len(), limits)?
                .welfare(instance.budgets()))
        }
        InstanceKind::SingleChoice => Ok(weights.iter().copied().fold(0.0, f64::max)),
        InstanceKind::PartitionMatroid => {
            let mut best = vec![0.0f64; instance.vertices().len()];
            for (e, &w) in instance.edges().iter().zip(weights) {
                best[e.u] = best[e.u].max(w);
            }
            Ok(best.iter().fold(0.0, |acc, x| acc + x))
        }
    }
}
