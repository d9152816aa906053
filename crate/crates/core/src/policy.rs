//! Uniform interface over every online policy, the name registry, and the
//! order-oblivious secretary wrapper built on top of it.

use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::bipartite::{TruthfulArrival, VertexArrival};
use crate::budget::BudgetArrival;
use crate::error::{Error, Result};
use crate::matching::EdgeArrival;
use crate::model::{check_permutation, Draw, ElementDraws, Instance, InstanceKind, Realization};
use crate::oracles::{instance_optimum, is_forest, max_weight_forest, Graph, OracleLimits};
use crate::reductions::{graphic_matroid_partition, PartitionArrival, PartitionMatroid};
use crate::rng::RandomSource;
use crate::trace::ArrivalEvent;

/// One run of a policy on one realization, driven one arrival unit at a time.
pub trait PolicyRun: Send {
    /// Reveals `unit` and returns the value collected at this step.
    fn arrive(&mut self, unit: usize) -> Result<f64>;
    /// Value of everything collected so far.
    fn value(&self) -> f64;
    /// Realization elements collected so far.
    fn accepted_elements(&self) -> Vec<usize>;
    /// Whether the collected set lies in the feasible family.
    fn is_feasible(&self) -> bool;
    fn boxed_clone(&self) -> Box<dyn PolicyRun>;
    fn record_events(&mut self);
    fn events(&self) -> &[ArrivalEvent];
}

pub trait Policy: Send + Sync {
    fn name(&self) -> String;
    fn check_instance(&self, instance: &Instance) -> Result<()>;
    /// Number of arriving units (edges, buyers or elements).
    fn arrival_units(&self, instance: &Instance) -> usize;
    /// Realization elements revealed when `unit` arrives.
    fn unit_elements(&self, instance: &Instance, unit: usize) -> Vec<usize>;
    fn start(
        &self,
        instance: &Arc<Instance>,
        realization: &Realization,
        rng: &mut RandomSource,
    ) -> Result<Box<dyn PolicyRun>>;
    /// Prophet benchmark for per-element weights.
    fn offline_optimum(&self, instance: &Instance, weights: &[f64], limits: &OracleLimits) -> Result<f64>;
    /// Proven competitive bound `E[OPT] / E[ALG]` on this instance.
    fn bound(&self, instance: &Instance) -> f64;
    /// Whether `start` consumes randomness beyond the realization.
    fn is_randomized(&self, _instance: &Instance) -> bool {
        false
    }
}

/// Names accepted by [`by_name`]; `oos-wrapped:<inner>` wraps any of them.
pub const POLICY_NAMES: [&str; 7] = [
    "single-choice",
    "edge-matching",
    "bipartite",
    "truthful",
    "transversal",
    "budget-additive",
    "alpha-partition",
];

pub fn by_name(name: &str) -> Result<Box<dyn Policy>> {
    if let Some(inner) = name.strip_prefix("oos-wrapped:") {
        return Ok(Box::new(OosWrapped::new(by_name(inner)?)));
    }
    Ok(match name {
        "single-choice" => Box::new(SingleChoice),
        "edge-matching" => Box::new(EdgeMatching),
        "bipartite" => Box::new(VertexMatching),
        "truthful" => Box::new(Truthful),
        "transversal" => Box::new(Transversal),
        "budget-additive" => Box::new(BudgetAdditive),
        "alpha-partition" => Box::new(AlphaPartition),
        _ => {
            return Err(Error::Config(format!(
                "unknown policy `{name}`; expected one of {} or oos-wrapped:<inner>",
                POLICY_NAMES.join(", ")
            )))
        }
    })
}

fn require(instance: &Instance, kinds: &[InstanceKind], policy: &str) -> Result<()> {
    if kinds.contains(&instance.kind()) {
        Ok(())
    } else {
        Err(Error::Input(format!(
            "policy `{policy}` does not run on {:?} instances",
            instance.kind()
        )))
    }
}

fn buyer_units(instance: &Instance) -> usize {
    instance.buyers().len()
}

macro_rules! run_common {
    () => {
        fn boxed_clone(&self) -> Box<dyn PolicyRun> {
            Box::new(self.clone())
        }
        fn record_events(&mut self) {
            self.state.record_events();
        }
        fn events(&self) -> &[ArrivalEvent] {
            self.state.events()
        }
    };
}

pub struct SingleChoice;
pub struct EdgeMatching;
pub struct VertexMatching;
pub struct Truthful;
pub struct Transversal;
pub struct BudgetAdditive;
pub struct AlphaPartition;

#[derive(Clone)]
struct PartitionRun {
    state: PartitionArrival,
    graph: Option<Arc<Graph>>,
}

impl PolicyRun for PartitionRun {
    fn arrive(&mut self, unit: usize) -> Result<f64> {
        self.state.arrive(unit)
    }
    fn value(&self) -> f64 {
        self.state.value()
    }
    fn accepted_elements(&self) -> Vec<usize> {
        self.state.accepted().iter().map(|&(e, _)| e).collect()
    }
    fn is_feasible(&self) -> bool {
        let set = self.accepted_elements();
        self.state.partition().is_independent(&set) && self.graph.as_ref().is_none_or(|g| is_forest(g, &set))
    }
    run_common!();
}

impl Policy for SingleChoice {
    fn name(&self) -> String {
        "single-choice".into()
    }
    fn check_instance(&self, instance: &Instance) -> Result<()> {
        require(instance, &[InstanceKind::SingleChoice], "single-choice")
    }
    fn arrival_units(&self, instance: &Instance) -> usize {
        instance.num_elements()
    }
    fn unit_elements(&self, _instance: &Instance, unit: usize) -> Vec<usize> {
        vec![unit]
    }
    fn start(&self, instance: &Arc<Instance>, realization: &Realization, _rng: &mut RandomSource) -> Result<Box<dyn PolicyRun>> {
        self.check_instance(instance)?;
        let partition = PartitionMatroid::single_group(instance.num_elements());
        let state = PartitionArrival::new(partition, &realization.samples(), &realization.rewards())?;
        Ok(Box::new(PartitionRun { state, graph: None }))
    }
    fn offline_optimum(&self, instance: &Instance, weights: &[f64], limits: &OracleLimits) -> Result<f64> {
        instance_optimum(instance, weights, limits)
    }
    fn bound(&self, _instance: &Instance) -> f64 {
        2.0
    }
}

impl AlphaPartition {
    /// The partition a run uses: graphic for graphs, the given groups for
    /// partition-matroid instances, one group otherwise. Never reads weights.
    pub fn partition_for(&self, instance: &Instance, rng: &mut RandomSource) -> Result<(PartitionMatroid, Option<Graph>)> {
        self.check_instance(instance)?;
        let n = instance.num_elements();
        Ok(match instance.kind() {
            InstanceKind::GeneralGraph => {
                let graph = Graph::of(instance);
                (graphic_matroid_partition(&graph, rng), Some(graph))
            }
            InstanceKind::PartitionMatroid => {
                let mut groups = vec![Vec::new(); instance.vertices().len()];
                for (k, e) in instance.edges().iter().enumerate() {
                    groups[e.u].push(k);
                }
                groups.retain(|g| !g.is_empty());
                (PartitionMatroid::new(groups, n)?, None)
            }
            _ => (PartitionMatroid::single_group(n), None),
        })
    }
}

impl Policy for AlphaPartition {
    fn name(&self) -> String {
        "alpha-partition".into()
    }
    fn check_instance(&self, instance: &Instance) -> Result<()> {
        require(
            instance,
            &[InstanceKind::GeneralGraph, InstanceKind::PartitionMatroid, InstanceKind::SingleChoice],
            "alpha-partition",
        )
    }
    fn arrival_units(&self, instance: &Instance) -> usize {
        instance.num_elements()
    }
    fn unit_elements(&self, _instance: &Instance, unit: usize) -> Vec<usize> {
        vec![unit]
    }
    fn start(&self, instance: &Arc<Instance>, realization: &Realization, rng: &mut RandomSource) -> Result<Box<dyn PolicyRun>> {
        let (partition, graph) = self.partition_for(instance, rng)?;
        let graph = graph.map(Arc::new);
        let state = PartitionArrival::new(partition, &realization.samples(), &realization.rewards())?;
        Ok(Box::new(PartitionRun { state, graph }))
    }
    /// Max-weight forest for graphs, the partition optimum otherwise.
    fn offline_optimum(&self, instance: &Instance, weights: &[f64], limits: &OracleLimits) -> Result<f64> {
        match instance.kind() {
            InstanceKind::GeneralGraph => Ok(max_weight_forest(&Graph::of(instance), weights).weight()),
            _ => instance_optimum(instance, weights, limits),
        }
    }
    fn bound(&self, instance: &Instance) -> f64 {
        if instance.kind() == InstanceKind::GeneralGraph {
            4.0
        } else {
            2.0
        }
    }
    fn is_randomized(&self, instance: &Instance) -> bool {
        instance.kind() == InstanceKind::GeneralGraph
    }
}

#[derive(Clone)]
struct EdgeRun {
    state: EdgeArrival,
    graph: Arc<Graph>,
}

impl PolicyRun for EdgeRun {
    fn arrive(&mut self, unit: usize) -> Result<f64> {
        self.state.arrive(unit)
    }
    fn value(&self) -> f64 {
        self.state.collected().weight()
    }
    fn accepted_elements(&self) -> Vec<usize> {
        self.state.collected().edges.iter().map(|&(e, _)| e).collect()
    }
    fn is_feasible(&self) -> bool {
        self.state.collected().is_matching_in(&self.graph)
    }
    run_common!();
}

impl Policy for EdgeMatching {
    fn name(&self) -> String {
        "edge-matching".into()
    }
    fn check_instance(&self, instance: &Instance) -> Result<()> {
        require(instance, &[InstanceKind::GeneralGraph, InstanceKind::Bipartite], "edge-matching")
    }
    fn arrival_units(&self, instance: &Instance) -> usize {
        instance.edges().len()
    }
    fn unit_elements(&self, _instance: &Instance, unit: usize) -> Vec<usize> {
        vec![unit]
    }
    fn start(&self, instance: &Arc<Instance>, realization: &Realization, _rng: &mut RandomSource) -> Result<Box<dyn PolicyRun>> {
        self.check_instance(instance)?;
        Ok(Box::new(EdgeRun {
            state: EdgeArrival::new(instance, realization)?,
            graph: Arc::new(Graph::of(instance)),
        }))
    }
    fn offline_optimum(&self, instance: &Instance, weights: &[f64], limits: &OracleLimits) -> Result<f64> {
        instance_optimum(instance, weights, limits)
    }
    fn bound(&self, _instance: &Instance) -> f64 {
        16.0
    }
}

#[derive(Clone)]
struct VertexRun {
    state: VertexArrival,
    graph: Arc<Graph>,
    instance: Arc<Instance>,
}

impl PolicyRun for VertexRun {
    fn arrive(&mut self, unit: usize) -> Result<f64> {
        self.state.arrive(unit)
    }
    fn value(&self) -> f64 {
        self.state.collected().weight()
    }
    fn accepted_elements(&self) -> Vec<usize> {
        let edges = self.state.collected().edges.iter().map(|&(e, _)| e);
        if self.instance.kind() == InstanceKind::Transversal {
            edges.map(|e| self.instance.edges()[e].u).collect()
        } else {
            edges.collect()
        }
    }
    fn is_feasible(&self) -> bool {
        self.state.collected().is_matching_in(&self.graph)
    }
    run_common!();
}

impl Policy for VertexMatching {
    fn name(&self) -> String {
        "bipartite".into()
    }
    fn check_instance(&self, instance: &Instance) -> Result<()> {
        require(instance, &[InstanceKind::Bipartite], "bipartite")
    }
    fn arrival_units(&self, instance: &Instance) -> usize {
        buyer_units(instance)
    }
    fn unit_elements(&self, instance: &Instance, unit: usize) -> Vec<usize> {
        instance.buyer_edges(unit).to_vec()
    }
    fn start(&self, instance: &Arc<Instance>, realization: &Realization, _rng: &mut RandomSource) -> Result<Box<dyn PolicyRun>> {
        self.check_instance(instance)?;
        Ok(Box::new(VertexRun {
            state: VertexArrival::new(instance, realization)?,
            graph: Arc::new(Graph::of(instance)),
            instance: instance.clone(),
        }))
    }
    fn offline_optimum(&self, instance: &Instance, weights: &[f64], limits: &OracleLimits) -> Result<f64> {
        instance_optimum(instance, weights, limits)
    }
    fn bound(&self, _instance: &Instance) -> f64 {
        8.0
    }
}

impl Policy for Transversal {
    fn name(&self) -> String {
        "transversal".into()
    }
    fn check_instance(&self, instance: &Instance) -> Result<()> {
        require(instance, &[InstanceKind::Transversal], "transversal")
    }
    fn arrival_units(&self, instance: &Instance) -> usize {
        buyer_units(instance)
    }
    fn unit_elements(&self, _instance: &Instance, unit: usize) -> Vec<usize> {
        vec![unit]
    }
    fn start(&self, instance: &Arc<Instance>, realization: &Realization, _rng: &mut RandomSource) -> Result<Box<dyn PolicyRun>> {
        self.check_instance(instance)?;
        Ok(Box::new(VertexRun {
            state: VertexArrival::transversal(instance, realization)?,
            graph: Arc::new(Graph::of(instance)),
            instance: instance.clone(),
        }))
    }
    fn offline_optimum(&self, instance: &Instance, weights: &[f64], limits: &OracleLimits) -> Result<f64> {
        instance_optimum(instance, weights, limits)
    }
    fn bound(&self, _instance: &Instance) -> f64 {
        8.0
    }
}

#[derive(Clone)]
struct TruthfulRun {
    state: TruthfulArrival,
    graph: Arc<Graph>,
}

impl PolicyRun for TruthfulRun {
    fn arrive(&mut self, unit: usize) -> Result<f64> {
        self.state.arrive(unit, None)
    }
    fn value(&self) -> f64 {
        self.state.collected().weight()
    }
    fn accepted_elements(&self) -> Vec<usize> {
        self.state.collected().edges.iter().map(|&(e, _)| e).collect()
    }
    fn is_feasible(&self) -> bool {
        self.state.collected().is_matching_in(&self.graph)
    }
    run_common!();
}

impl Policy for Truthful {
    fn name(&self) -> String {
        "truthful".into()
    }
    fn check_instance(&self, instance: &Instance) -> Result<()> {
        require(instance, &[InstanceKind::Bipartite], "truthful")
    }
    fn arrival_units(&self, instance: &Instance) -> usize {
        buyer_units(instance)
    }
    fn unit_elements(&self, instance: &Instance, unit: usize) -> Vec<usize> {
        instance.buyer_edges(unit).to_vec()
    }
    fn start(&self, instance: &Arc<Instance>, realization: &Realization, _rng: &mut RandomSource) -> Result<Box<dyn PolicyRun>> {
        self.check_instance(instance)?;
        Ok(Box::new(TruthfulRun {
            state: TruthfulArrival::new(instance, realization)?,
            graph: Arc::new(Graph::of(instance)),
        }))
    }
    fn offline_optimum(&self, instance: &Instance, weights: &[f64], limits: &OracleLimits) -> Result<f64> {
        instance_optimum(instance, weights, limits)
    }
    fn bound(&self, _instance: &Instance) -> f64 {
        16.0
    }
}

#[derive(Clone)]
struct BudgetRun {
    state: BudgetArrival,
    instance: Arc<Instance>,
}

impl PolicyRun for BudgetRun {
    fn arrive(&mut self, unit: usize) -> Result<f64> {
        self.state.arrive(unit)
    }
    fn value(&self) -> f64 {
        self.state.collected().welfare(self.instance.budgets())
    }
    fn accepted_elements(&self) -> Vec<usize> {
        self.state.collected().edges().iter().map(|&(e, _)| e).collect()
    }
    fn is_feasible(&self) -> bool {
        let a = self.state.collected();
        let edges = self.instance.edges();
        a.is_feasible(self.instance.budgets())
            && a.bundles
                .iter()
                .enumerate()
                .all(|(b, bundle)| bundle.iter().all(|&(i, e, _)| edges[e].u == b && edges[e].v == i))
    }
    run_common!();
}

impl Policy for BudgetAdditive {
    fn name(&self) -> String {
        "budget-additive".into()
    }
    fn check_instance(&self, instance: &Instance) -> Result<()> {
        require(instance, &[InstanceKind::BudgetAdditive], "budget-additive")
    }
    fn arrival_units(&self, instance: &Instance) -> usize {
        buyer_units(instance)
    }
    fn unit_elements(&self, instance: &Instance, unit: usize) -> Vec<usize> {
        instance.buyer_edges(unit).to_vec()
    }
    fn start(&self, instance: &Arc<Instance>, realization: &Realization, _rng: &mut RandomSource) -> Result<Box<dyn PolicyRun>> {
        self.check_instance(instance)?;
        Ok(Box::new(BudgetRun {
            state: BudgetArrival::new(instance, realization)?,
            instance: instance.clone(),
        }))
    }
    fn offline_optimum(&self, instance: &Instance, weights: &[f64], limits: &OracleLimits) -> Result<f64> {
        instance_optimum(instance, weights, limits)
    }
    fn bound(&self, _instance: &Instance) -> f64 {
        24.0
    }
}

/// Runs an inner policy as an order-oblivious secretary algorithm: a
/// Binomial(n, 1/2) prefix of a random unit order is observed, its weights
/// become samples, and only the remaining units can be collected.
pub struct OosWrapped {
    inner: Box<dyn Policy>,
}

impl OosWrapped {
    pub fn new(inner: Box<dyn Policy>) -> Self {
        Self { inner }
    }

    pub fn inner(&self) -> &dyn Policy {
        self.inner.as_ref()
    }
}

/// Phase-1 membership of each arrival unit.
pub fn draw_observation_split(units: usize, rng: &mut RandomSource) -> Vec<bool> {
    let k = (0..units).filter(|_| rng.random_bool(0.5)).count();
    let mut order: Vec<usize> = (0..units).collect();
    order.shuffle(rng);
    let mut observed = vec![false; units];
    for &u in &order[..k] {
        observed[u] = true;
    }
    observed
}

#[derive(Clone)]
struct OosRun {
    inner: Box<dyn PolicyRun>,
    observed: Arc<Vec<bool>>,
    observed_elements: Arc<Vec<bool>>,
    arrived: Vec<bool>,
}

impl Clone for Box<dyn PolicyRun> {
    fn clone(&self) -> Self {
        self.boxed_clone()
    }
}

impl PolicyRun for OosRun {
    fn arrive(&mut self, unit: usize) -> Result<f64> {
        if unit >= self.arrived.len() || std::mem::replace(&mut self.arrived[unit], true) {
            return Err(Error::Input(format!("unit {unit} arrived twice or does not exist")));
        }
        if self.observed[unit] {
            return Ok(0.0);
        }
        let gained = self.inner.arrive(unit)?;
        if let Some(e) = self.inner.accepted_elements().into_iter().find(|&e| self.observed_elements[e]) {
            return Err(Error::Contract(format!("observed element {e} was collected")));
        }
        if !self.inner.is_feasible() {
            return Err(Error::Contract(format!("collected set infeasible after unit {unit}")));
        }
        Ok(gained)
    }
    fn value(&self) -> f64 {
        self.inner.value()
    }
    fn accepted_elements(&self) -> Vec<usize> {
        self.inner.accepted_elements()
    }
    fn is_feasible(&self) -> bool {
        self.inner.is_feasible()
    }
    fn boxed_clone(&self) -> Box<dyn PolicyRun> {
        Box::new(self.clone())
    }
    fn record_events(&mut self) {
        self.inner.record_events();
    }
    fn events(&self) -> &[ArrivalEvent] {
        self.inner.events()
    }
}

/// Starts `inner` on the observation split: observed elements get sample =
/// weight and reward 0, the others sample 0 and reward = weight. Tie keys are
/// a uniformly random permutation.
fn start_split(
    inner: &dyn Policy,
    instance: &Arc<Instance>,
    weights: &[f64],
    observed: Vec<bool>,
    rng: &mut RandomSource,
) -> Result<OosRun> {
    let n = instance.num_elements();
    if weights.len() != n {
        return Err(Error::Input(format!("{} weights for {n} elements", weights.len())));
    }
    let mut observed_elements = vec![false; n];
    for (u, _) in observed.iter().enumerate().filter(|(_, &o)| o) {
        for e in inner.unit_elements(instance, u) {
            observed_elements[e] = true;
        }
    }
    let mut keys: Vec<u64> = (0..2 * n as u64).collect();
    keys.shuffle(rng);
    let elements = (0..n)
        .map(|k| {
            let (s, r) = if observed_elements[k] { (weights[k], 0.0) } else { (0.0, weights[k]) };
            ElementDraws {
                sample: Draw::new(s, keys[2 * k]),
                reward: Draw::new(r, keys[2 * k + 1]),
            }
        })
        .collect();
    let synthetic = Realization::new(elements)?;
    let units = observed.len();
    Ok(OosRun {
        inner: inner.start(instance, &synthetic, rng)?,
        observed: Arc::new(observed),
        observed_elements: Arc::new(observed_elements),
        arrived: vec![false; units],
    })
}

impl Policy for OosWrapped {
    fn name(&self) -> String {
        format!("oos-wrapped:{}", self.inner.name())
    }
    fn check_instance(&self, instance: &Instance) -> Result<()> {
        self.inner.check_instance(instance)
    }
    fn arrival_units(&self, instance: &Instance) -> usize {
        self.inner.arrival_units(instance)
    }
    fn unit_elements(&self, instance: &Instance, unit: usize) -> Vec<usize> {
        self.inner.unit_elements(instance, unit)
    }
    /// Only the rewards of `realization` are used, as the true weights.
    fn start(&self, instance: &Arc<Instance>, realization: &Realization, rng: &mut RandomSource) -> Result<Box<dyn PolicyRun>> {
        self.check_instance(instance)?;
        let observed = draw_observation_split(self.arrival_units(instance), rng);
        let run = start_split(self.inner.as_ref(), instance, &realization.reward_values(), observed, rng)?;
        Ok(Box::new(run))
    }
    fn offline_optimum(&self, instance: &Instance, weights: &[f64], limits: &OracleLimits) -> Result<f64> {
        self.inner.offline_optimum(instance, weights, limits)
    }
    fn bound(&self, instance: &Instance) -> f64 {
        2.0 * self.inner.bound(instance)
    }
    fn is_randomized(&self, _instance: &Instance) -> bool {
        true
    }
}

/// Outcome of one wrapped run.
#[derive(Clone, Debug, PartialEq)]
pub struct OosOutcome {
    pub observed_units: Vec<usize>,
    pub accepted: Vec<usize>,
    pub value: f64,
}

/// Runs `inner` as an order-oblivious secretary algorithm on fixed weights.
/// `order` is a permutation of all units; observed units are skipped.
pub fn psspi_to_oos(
    inner: &dyn Policy,
    instance: &Arc<Instance>,
    weights: &[f64],
    rng: &mut RandomSource,
    order: &[usize],
) -> Result<OosOutcome> {
    let observed = draw_observation_split(inner.arrival_units(instance), rng);
    oos_with_split(inner, instance, weights, observed, rng, order)
}

/// [`psspi_to_oos`] with the observation split given.
pub fn oos_with_split(
    inner: &dyn Policy,
    instance: &Arc<Instance>,
    weights: &[f64],
    observed: Vec<bool>,
    rng: &mut RandomSource,
    order: &[usize],
) -> Result<OosOutcome> {
    inner.check_instance(instance)?;
    check_permutation(order, inner.arrival_units(instance), "arrival units")?;
    if observed.len() != order.len() {
        return Err(Error::Input("observation split does not cover every unit".into()));
    }
    let mut run = start_split(inner, instance, weights, observed, rng)?;
    for &u in order {
        run.arrive(u)?;
    }
    Ok(OosOutcome {
        observed_units: (0..order.len()).filter(|&u| run.observed[u]).collect(),
        accepted: run.accepted_elements(),
        value: run.value(),
    })
}
