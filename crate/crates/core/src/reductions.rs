//! Rank-one and partition-matroid threshold policies, and the random
//! vertex-order partition of a graphic matroid.

use std::sync::Arc;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::model::{check_permutation, Draw};
use crate::oracles::Graph;
use crate::rng::RandomSource;
use crate::trace::{ArrivalEvent, Decision, ElementCheck};

/// Disjoint element groups; a set is independent iff it meets each group at
/// most once. Elements in no group are outside the ground set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartitionMatroid {
    groups: Vec<Vec<usize>>,
    group_of: Vec<Option<usize>>,
}

impl PartitionMatroid {
    /// `elements` is the size of the surrounding element space.
    pub fn new(groups: Vec<Vec<usize>>, elements: usize) -> Result<Self> {
        let mut group_of = vec![None; elements];
        for (g, members) in groups.iter().enumerate() {
            for &e in members {
                if e >= elements {
                    return Err(Error::Input(format!("group {g} names element {e} outside 0..{elements}")));
                }
                if let Some(other) = group_of[e].replace(g) {
                    return Err(Error::Input(format!("element {e} lies in groups {other} and {g}")));
                }
            }
        }
        Ok(Self { groups, group_of })
    }

    /// Every element in one group.
    pub fn single_group(elements: usize) -> Self {
        let groups = if elements == 0 { vec![] } else { vec![(0..elements).collect()] };
        Self {
            groups,
            group_of: vec![Some(0); elements],
        }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn group_of(&self, element: usize) -> Option<usize> {
        self.group_of[element]
    }

    pub fn elements(&self) -> usize {
        self.group_of.len()
    }

    pub fn ground_set(&self) -> Vec<usize> {
        (0..self.elements()).filter(|&e| self.group_of[e].is_some()).collect()
    }

    pub fn is_independent(&self, set: &[usize]) -> bool {
        let mut used = vec![false; self.groups.len()];
        set.iter().all(|&e| {
            self.group_of
                .get(e)
                .copied()
                .flatten()
                .is_some_and(|g| !std::mem::replace(&mut used[g], true))
        })
    }

    /// Heaviest independent set weight: the sum of per-group maxima.
    pub fn max_independent_weight(&self, weights: &[f64]) -> f64 {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&e| weights[e]).fold(0.0, f64::max))
            .fold(0.0, |acc, x| acc + x)
    }
}

#[derive(Debug)]
struct Shared {
    partition: PartitionMatroid,
    thresholds: Vec<Draw>,
    rewards: Vec<Draw>,
}

/// Online state of the per-group threshold policy.
#[derive(Clone, Debug)]
pub struct PartitionArrival {
    shared: Arc<Shared>,
    taken: Vec<bool>,
    arrived: Vec<bool>,
    accepted: Vec<(usize, f64)>,
    events: Option<Vec<ArrivalEvent>>,
    step: usize,
}

impl PartitionArrival {
    /// Group thresholds are the largest sample key in each group.
    pub fn new(partition: PartitionMatroid, samples: &[Draw], rewards: &[Draw]) -> Result<Self> {
        let n = partition.elements();
        if samples.len() != n || rewards.len() != n {
            return Err(Error::Input(format!(
                "{} samples and {} rewards for {n} elements",
                samples.len(),
                rewards.len()
            )));
        }
        let thresholds = partition
            .groups
            .iter()
            .map(|g| g.iter().map(|&e| samples[e]).max())
            .collect::<Option<Vec<Draw>>>()
            .ok_or_else(|| Error::Input("partition has an empty group".into()))?;
        Ok(Self {
            taken: vec![false; partition.groups.len()],
            arrived: vec![false; n],
            accepted: Vec::new(),
            events: None,
            step: 0,
            shared: Arc::new(Shared {
                partition,
                thresholds,
                rewards: rewards.to_vec(),
            }),
        })
    }

    pub fn record_events(&mut self) {
        self.events.get_or_insert_with(Vec::new);
    }

    pub fn events(&self) -> &[ArrivalEvent] {
        self.events.as_deref().unwrap_or_default()
    }

    pub fn partition(&self) -> &PartitionMatroid {
        &self.shared.partition
    }

    pub fn thresholds(&self) -> &[Draw] {
        &self.shared.thresholds
    }

    /// `(element, reward)` in acceptance order.
    pub fn accepted(&self) -> &[(usize, f64)] {
        &self.accepted
    }

    pub fn value(&self) -> f64 {
        self.accepted.iter().map(|&(_, r)| r).fold(0.0, |acc, x| acc + x)
    }

    pub fn arrive(&mut self, element: usize) -> Result<f64> {
        if element >= self.arrived.len() || std::mem::replace(&mut self.arrived[element], true) {
            return Err(Error::Input(format!("element {element} arrived twice or does not exist")));
        }
        let sh = &self.shared;
        let r = sh.rewards[element];
        let mut gained = 0.0;
        let (threshold, decision, reason) = match sh.partition.group_of(element) {
            None => (0.0, Decision::Rejected, "outside-ground-set"),
            Some(g) => {
                let tau = sh.thresholds[g];
                if r <= tau {
                    (tau.value, Decision::Rejected, "below-threshold")
                } else if self.taken[g] {
                    (tau.value, Decision::Admitted, "group-taken")
                } else {
                    self.taken[g] = true;
                    self.accepted.push((element, r.value));
                    gained = r.value;
                    (tau.value, Decision::Collected, "collected")
                }
            }
        };
        if let Some(events) = &mut self.events {
            let mut ev = ArrivalEvent::new(self.step, element);
            ev.checks.push(ElementCheck {
                element,
                reward: r.value,
                threshold,
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
}

/// Per-group threshold policy over a full arrival order.
pub fn alpha_partition_sspi(
    partition: &PartitionMatroid,
    samples: &[Draw],
    rewards: &[Draw],
    order: &[usize],
) -> Result<Vec<(usize, f64)>> {
    check_permutation(order, partition.elements(), "elements")?;
    let mut state = PartitionArrival::new(partition.clone(), samples, rewards)?;
    for &e in order {
        state.arrive(e)?;
    }
    Ok(state.accepted)
}

/// Threshold at the largest sample; the first reward above it is taken.
pub fn single_choice_sspi(samples: &[Draw], rewards: &[Draw], order: &[usize]) -> Result<Option<(usize, f64)>> {
    let picked = alpha_partition_sspi(&PartitionMatroid::single_group(samples.len()), samples, rewards, order)?;
    Ok(picked.first().copied())
}

/// Draws a uniformly random vertex order and puts each edge in the group of
/// its later endpoint. Loops belong to no group. Uses no weights.
pub fn graphic_matroid_partition(graph: &Graph, rng: &mut RandomSource) -> PartitionMatroid {
    let mut order: Vec<usize> = (0..graph.vertices).collect();
    order.shuffle(rng);
    let mut rank = vec![0usize; graph.vertices];
    for (pos, &v) in order.iter().enumerate() {
        rank[v] = pos;
    }
    let mut by_vertex: Vec<Vec<usize>> = vec![Vec::new(); graph.vertices];
    for (e, &(a, b)) in graph.ends.iter().enumerate() {
        if a != b {
            let later = if rank[a] > rank[b] { a } else { b };
            by_vertex[later].push(e);
        }
    }
    let groups = by_vertex.into_iter().filter(|g| !g.is_empty()).collect();
    PartitionMatroid::new(groups, graph.ends.len()).expect("each edge lands in exactly one group")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Realization;
    use crate::oracles::{is_forest, max_weight_forest};
    use itertools::Itertools;
    use proptest::prelude::*;

    fn split(pairs: &[(f64, f64)]) -> (Vec<Draw>, Vec<Draw>) {
        let r = Realization::from_values(pairs);
        (r.samples(), r.rewards())
    }

    #[test]
    fn first_reward_above_the_largest_sample() {
        let (s, r) = split(&[(3.0, 6.0), (5.0, 2.0)]);
        assert_eq!(single_choice_sspi(&s, &r, &[0, 1]).unwrap(), Some((0, 6.0)));
    }

    #[test]
    fn nothing_above_threshold() {
        let (s, r) = split(&[(7.0, 6.0), (5.0, 2.0), (1.0, 6.5)]);
        for order in (0..3).permutations(3) {
            assert_eq!(single_choice_sspi(&s, &r, &order).unwrap(), None);
        }
    }

    #[test]
    fn empty_element_set() {
        assert_eq!(single_choice_sspi(&[], &[], &[]).unwrap(), None);
    }

    #[test]
    fn two_group_hand_run() {
        let p = PartitionMatroid::new(vec![vec![0, 1], vec![2]], 3).unwrap();
        let (s, r) = split(&[(1.0, 5.0), (4.0, 3.0), (2.0, 6.0)]);
        let mut st = PartitionArrival::new(p.clone(), &s, &r).unwrap();
        assert_eq!(st.thresholds().iter().map(|d| d.value).collect_vec(), vec![4.0, 2.0]);
        for e in [2, 0, 1] {
            st.arrive(e).unwrap();
        }
        assert_eq!(st.accepted(), &[(2, 6.0), (0, 5.0)]);
        assert_eq!(alpha_partition_sspi(&p, &s, &r, &[2, 0, 1]).unwrap(), vec![(2, 6.0), (0, 5.0)]);
    }

    #[test]
    fn one_group_matches_single_choice() {
        let (s, r) = split(&[(3.0, 6.0), (5.0, 2.0), (4.0, 9.0)]);
        for order in (0..3).permutations(3) {
            let a = alpha_partition_sspi(&PartitionMatroid::single_group(3), &s, &r, &order).unwrap();
            let b = single_choice_sspi(&s, &r, &order).unwrap();
            assert_eq!(a.first().copied(), b);
            assert!(a.len() <= 1);
        }
    }

    #[test]
    fn element_outside_ground_set_is_never_taken() {
        let p = PartitionMatroid::new(vec![vec![0]], 2).unwrap();
        let (s, r) = split(&[(1.0, 2.0), (0.0, 100.0)]);
        assert_eq!(alpha_partition_sspi(&p, &s, &r, &[1, 0]).unwrap(), vec![(0, 2.0)]);
    }

    #[test]
    fn overlapping_groups_rejected() {
        assert!(matches!(PartitionMatroid::new(vec![vec![0, 1], vec![1]], 2), Err(Error::Input(_))));
        assert!(matches!(PartitionMatroid::new(vec![vec![3]], 2), Err(Error::Input(_))));
    }

    #[test]
    fn single_edge_partition() {
        let g = Graph::new(2, vec![(0, 1)]);
        let p = graphic_matroid_partition(&g, &mut RandomSource::new(1));
        assert_eq!(p.groups(), &[vec![0]]);
    }

    #[test]
    fn triangle_picks_are_always_acyclic() {
        let g = Graph::new(3, vec![(0, 1), (1, 2), (0, 2)]);
        for seed in 0..64 {
            let p = graphic_matroid_partition(&g, &mut RandomSource::new(seed));
            // the first vertex in the order owns nothing, so two groups
            assert_eq!(p.groups().len(), 2);
            assert_eq!(p.ground_set(), vec![0, 1, 2]);
            for picks in p.groups().iter().map(|g| g.iter()).multi_cartesian_product() {
                let set: Vec<usize> = picks.into_iter().copied().collect();
                assert!(p.is_independent(&set));
                assert!(is_forest(&g, &set));
            }
        }
    }

    fn graph_strategy() -> impl Strategy<Value = (Graph, Vec<f64>)> {
        (2usize..=7).prop_flat_map(|n| {
            let pairs: Vec<(usize, usize)> = (0..n).tuple_combinations().collect();
            let m = pairs.len();
            (proptest::collection::vec(any::<bool>(), m), proptest::collection::vec(0.0f64..10.0, m)).prop_map(
                move |(keep, w)| {
                    let mut ends = Vec::new();
                    let mut ws = Vec::new();
                    for ((p, k), x) in pairs.iter().zip(keep).zip(w) {
                        if k {
                            ends.push(*p);
                            ws.push(x);
                        }
                    }
                    (Graph::new(n, ends), ws)
                },
            )
        })
    }

    proptest! {
        #[test]
        fn graphic_partition_independent_sets_are_forests((g, w) in graph_strategy(), seed in any::<u64>()) {
            let p = graphic_matroid_partition(&g, &mut RandomSource::new(seed));
            prop_assert_eq!(p.ground_set().len(), g.ends.len());
            for picks in p.groups().iter().map(|g| g.iter()).multi_cartesian_product() {
                let set: Vec<usize> = picks.into_iter().copied().collect();
                prop_assert!(is_forest(&g, &set));
            }
            prop_assert!(p.max_independent_weight(&w) <= max_weight_forest(&g, &w).weight() + 1e-9);
        }

        #[test]
        fn partition_ignores_weights((g, _w) in graph_strategy(), seed in any::<u64>()) {
            let a = graphic_matroid_partition(&g, &mut RandomSource::new(seed));
            let b = graphic_matroid_partition(&g, &mut RandomSource::new(seed));
            prop_assert_eq!(a, b);
        }

        #[test]
        fn outputs_meet_each_group_once(
            (g, w) in graph_strategy(),
            seed in any::<u64>(),
            coins in proptest::collection::vec(0.0f64..10.0, 21),
        ) {
            let p = graphic_matroid_partition(&g, &mut RandomSource::new(seed));
            let pairs: Vec<(f64, f64)> = w.iter().zip(&coins).map(|(&a, &b)| (b, a)).collect();
            let (s, r) = split(&pairs);
            let order: Vec<usize> = (0..w.len()).rev().collect();
            let out: Vec<usize> = alpha_partition_sspi(&p, &s, &r, &order).unwrap().iter().map(|x| x.0).collect();
            prop_assert!(p.is_independent(&out));
            prop_assert!(is_forest(&g, &out));
        }
    }
}
