use std::cmp::Ordering;
use std::collections::BTreeMap;

use itertools::Itertools;
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::instance::Instance;
use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// One drawn value together with its tie-break key.
///
/// Draws compare by `(value, priority)`; priorities are distinct within a
/// realization, so the order over all drawn values is strict. Equal values are
/// thereby ordered by a uniformly random permutation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Draw {
    pub value: f64,
    pub priority: u64,
}

impl Draw {
    pub fn new(value: f64, priority: u64) -> Self {
        Self { value, priority }
    }
}

impl PartialEq for Draw {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Draw {}

impl PartialOrd for Draw {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Draw {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.priority.cmp(&other.priority))
    }
}

/// The two draws of one element, already split into sample and reward.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElementDraws {
    pub sample: Draw,
    pub reward: Draw,
}

impl ElementDraws {
    /// Builds the pair from the ordered draws `a1 > a2` and a coin:
    /// heads puts the larger draw on the reward side.
    pub fn from_coin(a1: Draw, a2: Draw, heads: bool) -> Self {
        debug_assert!(a1 > a2);
        if heads {
            Self { sample: a2, reward: a1 }
        } else {
            Self { sample: a1, reward: a2 }
        }
    }

    /// The larger of the two draws.
    pub fn a1(&self) -> Draw {
        self.sample.max(self.reward)
    }

    /// The smaller of the two draws.
    pub fn a2(&self) -> Draw {
        self.sample.min(self.reward)
    }

    /// Heads: the larger draw became the reward (the element is R-used).
    pub fn heads(&self) -> bool {
        self.reward > self.sample
    }

    /// Same draws with the coin flipped.
    pub fn swapped(&self) -> Self {
        Self {
            sample: self.reward,
            reward: self.sample,
        }
    }
}

/// Samples and rewards of every element of an instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Realization {
    elements: Vec<ElementDraws>,
}

impl Realization {
    pub fn new(elements: Vec<ElementDraws>) -> Result<Self> {
        let mut keys: Vec<u64> = elements
            .iter()
            .flat_map(|e| [e.sample.priority, e.reward.priority])
            .collect();
        keys.sort_unstable();
        if keys.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Input("tie-break priorities must be distinct".into()));
        }
        Ok(Self { elements })
    }

    /// Hand-built realization from `(sample, reward)` values. Priorities are
    /// assigned by position: on equal values a reward beats its own sample and
    /// later elements beat earlier ones.
    pub fn from_values(pairs: &[(f64, f64)]) -> Self {
        let elements = pairs
            .iter()
            .enumerate()
            .map(|(k, &(s, r))| ElementDraws {
                sample: Draw::new(s, 2 * k as u64),
                reward: Draw::new(r, 2 * k as u64 + 1),
            })
            .collect();
        Self { elements }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn elements(&self) -> &[ElementDraws] {
        &self.elements
    }

    pub fn element(&self, k: usize) -> &ElementDraws {
        &self.elements[k]
    }

    pub fn sample(&self, k: usize) -> Draw {
        self.elements[k].sample
    }

    pub fn reward(&self, k: usize) -> Draw {
        self.elements[k].reward
    }

    pub fn samples(&self) -> Vec<Draw> {
        self.elements.iter().map(|e| e.sample).collect()
    }

    pub fn rewards(&self) -> Vec<Draw> {
        self.elements.iter().map(|e| e.reward).collect()
    }

    pub fn reward_values(&self) -> Vec<f64> {
        self.elements.iter().map(|e| e.reward.value).collect()
    }

    /// Copy with the coin of element `k` flipped.
    pub fn with_coin_flipped(&self, k: usize) -> Self {
        let mut out = self.clone();
        out.elements[k] = out.elements[k].swapped();
        out
    }

    /// All `2n` draws in decreasing strict order, as `(element, draw, is_reward)`.
    pub fn decreasing_draws(&self) -> Vec<(usize, Draw, bool)> {
        let mut all: Vec<(usize, Draw, bool)> = self
            .elements
            .iter()
            .enumerate()
            .flat_map(|(k, e)| [(k, e.sample, false), (k, e.reward, true)])
            .collect();
        all.sort_unstable_by(|a, b| b.1.cmp(&a.1));
        all
    }
}

/// Two independent draws per element, a fresh random priority per draw and a
/// fair coin deciding which draw becomes the reward.
pub fn draw_realization(instance: &Instance, rng: &mut RandomSource) -> Result<Realization> {
    let mut elements = Vec::with_capacity(instance.num_elements());
    for dist in instance.dists() {
        let d1 = Draw::new(dist.sample(rng), rng.next_u64());
        let d2 = Draw::new(dist.sample(rng), rng.next_u64());
        let heads = rng.random_bool(0.5);
        let (a1, a2) = if d1 > d2 { (d1, d2) } else { (d2, d1) };
        elements.push(ElementDraws::from_coin(a1, a2, heads));
    }
    loop {
        match Realization::new(elements.clone()) {
            Ok(r) => return Ok(r),
            // 64-bit collision: redraw every priority
            Err(_) => {
                for e in &mut elements {
                    e.sample.priority = rng.next_u64();
                    e.reward.priority = rng.next_u64();
                }
            }
        }
    }
}

/// One atom of the exact realization law.
#[derive(Clone, Debug)]
pub struct RealizationPattern {
    pub realization: Realization,
    pub probability: f64,
    /// Per element, indices into `Distribution::atoms()` of the sample and reward.
    pub atoms: Vec<(usize, usize)>,
    /// Number of equally likely tie orders sharing these values (product of
    /// factorials of the equal-value group sizes).
    pub tie_orders: u64,
}

/// Default cap on the number of enumerated patterns.
pub const DEFAULT_ENUMERATION_CAP: usize = 2_000_000;

/// Every (sample values, reward values, tie order) configuration with its
/// probability.
///
/// The sample and reward of an element are i.i.d. from its law, and equal
/// values across all `2n` draws are ordered by a uniform permutation; this is
/// the same law as two draws plus a fair coin. Ties are never merged: the tie
/// order decides which draw wins a comparison.
pub fn enumerate_realizations(instance: &Instance, cap: usize) -> Result<Vec<RealizationPattern>> {
    let atoms: Vec<Vec<(f64, f64)>> = instance
        .dists()
        .iter()
        .map(|d| {
            d.atoms()
                .ok_or_else(|| Error::Unsupported("exact enumeration needs discrete finite laws".into()))
        })
        .collect::<Result<_>>()?;
    let slots = 2 * atoms.len();
    let radix: Vec<usize> = (0..slots).map(|s| atoms[s / 2].len()).collect();
    let assignments = radix
        .iter()
        .try_fold(1usize, |acc, &r| acc.checked_mul(r))
        .filter(|&n| n <= cap)
        .ok_or(Error::Size {
            what: "value assignments",
            actual: radix.iter().fold(1usize, |a, &r| a.saturating_mul(r)),
            cap,
        })?;

    let groups_of = |digits: &[usize]| -> BTreeMap<u64, Vec<usize>> {
        let mut groups: BTreeMap<u64, Vec<usize>> = BTreeMap::new();
        for (s, &d) in digits.iter().enumerate() {
            groups.entry(atoms[s / 2][d].0.to_bits()).or_default().push(s);
        }
        groups
    };
    let factorial = |k: usize| (1..=k as u64).product::<u64>();

    // First pass: count patterns so oversize requests fail before allocating.
    let mut digits = vec![0usize; slots];
    let mut total = 0usize;
    for _ in 0..assignments {
        let orders: u64 = groups_of(&digits).values().map(|g| factorial(g.len())).product();
        total = total.saturating_add(orders as usize);
        if total > cap {
            return Err(Error::Size {
                what: "realization patterns",
                actual: total,
                cap,
            });
        }
        advance(&mut digits, &radix);
    }

    let mut out = Vec::with_capacity(total);
    let mut digits = vec![0usize; slots];
    for _ in 0..assignments {
        let groups: Vec<Vec<usize>> = groups_of(&digits).into_values().collect();
        let tie_orders: u64 = groups.iter().map(|g| factorial(g.len())).product();
        let mass: f64 = digits
            .iter()
            .enumerate()
            .map(|(s, &d)| atoms[s / 2][d].1)
            .product();
        let probability = mass / tie_orders as f64;
        let per_group: Vec<Vec<Vec<usize>>> = groups
            .iter()
            .map(|g| (0..g.len()).permutations(g.len()).collect())
            .collect();
        for combo in per_group.iter().map(|p| p.iter()).multi_cartesian_product() {
            let mut priority = vec![0u64; slots];
            for (group, ranks) in groups.iter().zip(combo) {
                for (&slot, &rank) in group.iter().zip(ranks) {
                    priority[slot] = rank as u64;
                }
            }
            let elements = (0..atoms.len())
                .map(|k| ElementDraws {
                    sample: Draw::new(atoms[k][digits[2 * k]].0, priority[2 * k]),
                    reward: Draw::new(atoms[k][digits[2 * k + 1]].0, priority[2 * k + 1]),
                })
                .collect();
            out.push(RealizationPattern {
                realization: Realization { elements },
                probability,
                atoms: (0..atoms.len()).map(|k| (digits[2 * k], digits[2 * k + 1])).collect(),
                tie_orders,
            });
        }
        advance(&mut digits, &radix);
    }
    Ok(out)
}

fn advance(digits: &mut [usize], radix: &[usize]) {
    for (d, &r) in digits.iter_mut().zip(radix) {
        *d += 1;
        if *d < r {
            return;
        }
        *d = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Distribution;

    #[test]
    fn point_mass_forces_both_draws() {
        let inst = Instance::single_choice(vec![Distribution::point(1.0)]).unwrap();
        let r = draw_realization(&inst, &mut RandomSource::new(5)).unwrap();
        assert_eq!(r.sample(0).value, 1.0);
        assert_eq!(r.reward(0).value, 1.0);
        assert_ne!(r.sample(0), r.reward(0));
    }

    #[test]
    fn empty_instance_gives_empty_realization() {
        let inst = Instance::general_graph(2, vec![]).unwrap();
        assert!(draw_realization(&inst, &mut RandomSource::new(1)).unwrap().is_empty());
        let pats = enumerate_realizations(&inst, 10).unwrap();
        assert_eq!(pats.len(), 1);
        assert_eq!(pats[0].probability, 1.0);
    }

    #[test]
    fn coin_swap_only_exchanges_sample_and_reward() {
        let r = Realization::from_values(&[(1.0, 5.0), (3.0, 2.0)]);
        let f = r.with_coin_flipped(0);
        assert_eq!(f.sample(0), r.reward(0));
        assert_eq!(f.reward(0), r.sample(0));
        assert_eq!(f.element(1), r.element(1));
        assert_eq!(f.element(0).a1(), r.element(0).a1());
        assert_ne!(f.element(0).heads(), r.element(0).heads());
    }

    #[test]
    fn determinism() {
        let inst = Instance::single_choice(vec![Distribution::uniform(0.0, 1.0); 4]).unwrap();
        let a = draw_realization(&inst, &mut RandomSource::new(9)).unwrap();
        let b = draw_realization(&inst, &mut RandomSource::new(9)).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn enumeration_of_point_mass_keeps_both_tie_orders() {
        let inst = Instance::single_choice(vec![Distribution::point(3.0)]).unwrap();
        let pats = enumerate_realizations(&inst, 100).unwrap();
        assert_eq!(pats.len(), 2);
        assert!(pats.iter().all(|p| p.probability == 0.5));
        assert_eq!(pats.iter().filter(|p| p.realization.element(0).heads()).count(), 1);
    }

    #[test]
    fn enumeration_of_two_point_law() {
        let inst = Instance::single_choice(vec![Distribution::two_point(1.0, 2.0, 0.5)]).unwrap();
        let pats = enumerate_realizations(&inst, 100).unwrap();
        // (1,2), (2,1), and two tie orders each for (1,1) and (2,2)
        assert_eq!(pats.len(), 6);
        let total: f64 = pats.iter().map(|p| p.probability).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let p_reward_two: f64 = pats
            .iter()
            .filter(|p| p.realization.reward(0).value == 2.0)
            .map(|p| p.probability)
            .sum();
        assert!((p_reward_two - 0.5).abs() < 1e-12);
        let p_heads: f64 = pats
            .iter()
            .filter(|p| p.realization.element(0).heads())
            .map(|p| p.probability)
            .sum();
        assert!((p_heads - 0.5).abs() < 1e-12);
    }

    #[test]
    fn enumeration_of_two_edges_has_unit_mass() {
        let inst = Instance::general_graph(
            3,
            vec![
                (0, 1, Distribution::two_point(1.0, 2.0, 0.3)),
                (1, 2, Distribution::two_point(2.0, 5.0, 0.6)),
            ],
        )
        .unwrap();
        let pats = enumerate_realizations(&inst, 10_000).unwrap();
        let total: f64 = pats.iter().map(|p| p.probability).sum();
        assert!((total - 1.0).abs() < 1e-9);
        // 4^2 value patterns; value 2 is shared across the edges so ties multiply
        assert!(pats.len() > 16);
        for p in &pats {
            let mut keys: Vec<Draw> = p.realization.decreasing_draws().iter().map(|d| d.1).collect();
            keys.dedup();
            assert_eq!(keys.len(), 4, "strict order");
        }
    }

    #[test]
    fn enumeration_rejects_continuous_and_oversize() {
        let inst = Instance::single_choice(vec![Distribution::uniform(0.0, 1.0)]).unwrap();
        assert!(matches!(enumerate_realizations(&inst, 10), Err(Error::Unsupported(_))));
        let inst = Instance::single_choice(vec![Distribution::two_point(1.0, 2.0, 0.5); 6]).unwrap();
        assert!(matches!(enumerate_realizations(&inst, 1000), Err(Error::Size { .. })));
    }
}
