//! Seeded random instance families.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use itertools::Itertools;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Distribution, Instance};
use crate::rng::RandomSource;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Family {
    /// `n` vertices, each pair joined with probability `p`.
    RandomGraph { n: usize, p: f64 },
    Bipartite { buyers: usize, items: usize, p: f64 },
    Transversal { buyers: usize, items: usize, p: f64 },
    /// Budgets are uniform integers in `lo..=hi`; every buyer-item pair is an edge.
    BudgetAdditive { buyers: usize, items: usize, lo: u32, hi: u32 },
    SingleChoice { n: usize },
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Family::RandomGraph { n, p } => write!(f, "random-graph({n},{p})"),
            Family::Bipartite { buyers, items, p } => write!(f, "bipartite({buyers},{items},{p})"),
            Family::Transversal { buyers, items, p } => write!(f, "transversal({buyers},{items},{p})"),
            Family::BudgetAdditive { buyers, items, lo, hi } => {
                write!(f, "budget-additive({buyers},{items},{lo},{hi})")
            }
            Family::SingleChoice { n } => write!(f, "single-choice({n})"),
        }
    }
}

fn parse_args(s: &str) -> Option<(&str, Vec<&str>)> {
    let (name, rest) = s.trim().split_once('(')?;
    let inner = rest.strip_suffix(')')?;
    Some((name.trim(), inner.split(',').map(str::trim).collect()))
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse instance family `{s}`"));
        let (name, args) = parse_args(s).ok_or_else(bad)?;
        let int = |k: usize| args.get(k).and_then(|a| a.parse::<usize>().ok()).ok_or_else(bad);
        let prob = |k: usize| {
            args.get(k)
                .and_then(|a| a.parse::<f64>().ok())
                .filter(|p| (0.0..=1.0).contains(p))
                .ok_or_else(bad)
        };
        let arity = |n: usize| if args.len() == n { Ok(()) } else { Err(bad()) };
        match name {
            "random-graph" => {
                arity(2)?;
                Ok(Family::RandomGraph { n: int(0)?, p: prob(1)? })
            }
            "bipartite" => {
                arity(3)?;
                Ok(Family::Bipartite { buyers: int(0)?, items: int(1)?, p: prob(2)? })
            }
            "transversal" => {
                arity(3)?;
                Ok(Family::Transversal { buyers: int(0)?, items: int(1)?, p: prob(2)? })
            }
            "budget-additive" => {
                arity(4)?;
                let (lo, hi) = (int(2)? as u32, int(3)? as u32);
                if lo > hi {
                    return Err(bad());
                }
                Ok(Family::BudgetAdditive { buyers: int(0)?, items: int(1)?, lo, hi })
            }
            "single-choice" => {
                arity(1)?;
                Ok(Family::SingleChoice { n: int(0)? })
            }
            _ => Err(Error::Config(format!("unknown instance family `{name}`"))),
        }
    }
}

/// How per-element value laws are drawn.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueFamily {
    /// `U[0, u]`, `u` a uniform integer in `1..=10`.
    Uniform,
    /// Rate drawn from `{1/2, 1, 2}`.
    Exponential,
    /// Two dyadic atoms with a dyadic probability, so exact sums are exact.
    TwoPoint,
    /// Any of the above or a point mass, uniformly.
    Mixed,
}

impl ValueFamily {
    pub fn name(self) -> &'static str {
        match self {
            ValueFamily::Uniform => "uniform",
            ValueFamily::Exponential => "exponential",
            ValueFamily::TwoPoint => "two-point",
            ValueFamily::Mixed => "mixed",
        }
    }
}

impl FromStr for ValueFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [ValueFamily::Uniform, ValueFamily::Exponential, ValueFamily::TwoPoint, ValueFamily::Mixed]
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown value family `{s}`")))
    }
}

pub fn random_law(values: ValueFamily, rng: &mut RandomSource) -> Distribution {
    match values {
        ValueFamily::Uniform => Distribution::uniform(0.0, rng.random_range(1..=10) as f64),
        ValueFamily::Exponential => Distribution::exponential([0.5, 1.0, 2.0][rng.random_range(0..3)]),
        ValueFamily::TwoPoint => {
            let lo = rng.random_range(0..=8) as f64 / 4.0;
            let hi = lo + rng.random_range(1..=16) as f64 / 4.0;
            Distribution::two_point(lo, hi, [0.25, 0.5, 0.75][rng.random_range(0..3)])
        }
        ValueFamily::Mixed => match rng.random_range(0..4) {
            0 => random_law(ValueFamily::Uniform, rng),
            1 => random_law(ValueFamily::Exponential, rng),
            2 => random_law(ValueFamily::TwoPoint, rng),
            _ => Distribution::point(rng.random_range(0..=8) as f64 / 2.0),
        },
    }
}

pub fn generate_instance(family: Family, values: ValueFamily, rng: &mut RandomSource) -> Result<Instance> {
    match family {
        Family::RandomGraph { n, p } => {
            let edges = (0..n)
                .tuple_combinations()
                .filter(|_| rng.random_bool(p))
                .collect_vec()
                .into_iter()
                .map(|(u, v)| (u, v, random_law(values, rng)))
                .collect();
            Instance::general_graph(n, edges)
        }
        Family::Bipartite { buyers, items, p } => {
            let pairs = (0..buyers).cartesian_product(0..items).filter(|_| rng.random_bool(p)).collect_vec();
            let edges = pairs.into_iter().map(|(b, i)| (b, i, random_law(values, rng))).collect();
            Instance::bipartite(buyers, items, edges)
        }
        Family::Transversal { buyers, items, p } => {
            let pairs = (0..buyers).cartesian_product(0..items).filter(|_| rng.random_bool(p)).collect_vec();
            let laws = (0..buyers).map(|_| random_law(values, rng)).collect();
            Instance::transversal(items, pairs, laws)
        }
        Family::BudgetAdditive { buyers, items, lo, hi } => {
            let budgets = (0..buyers).map(|_| rng.random_range(lo..=hi) as f64).collect();
            let edges = (0..buyers)
                .cartesian_product(0..items)
                .map(|(b, i)| (b, i, random_law(values, rng)))
                .collect();
            Instance::budget_additive(items, edges, budgets)
        }
        Family::SingleChoice { n } => Instance::single_choice((0..n).map(|_| random_law(values, rng)).collect()),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub family: Family,
    pub values: ValueFamily,
    pub seed: u64,
    pub count: usize,
}

/// `count` instances; instance `k` depends only on `(seed, k)`.
pub fn generate_instances(spec: &GeneratorSpec) -> Result<Vec<Instance>> {
    let root = RandomSource::new(spec.seed).fork("generate");
    (0..spec.count)
        .map(|k| generate_instance(spec.family, spec.values, &mut root.fork_indexed("instance", k as u64)))
        .collect()
}

/// Writes `instance-<k>.json` files into `dir` and returns their paths.
pub fn write_instances(spec: &GeneratorSpec, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    generate_instances(spec)?
        .iter()
        .enumerate()
        .map(|(k, inst)| {
            let path = dir.join(format!("instance-{k}.json"));
            inst.save(&path)?;
            Ok(path)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InstanceKind;

    #[test]
    fn complete_graph_on_four_vertices() {
        let spec = GeneratorSpec {
            family: "random-graph(4, 1.0)".parse().unwrap(),
            values: ValueFamily::Uniform,
            seed: 1,
            count: 1,
        };
        let inst = &generate_instances(&spec).unwrap()[0];
        assert_eq!(inst.kind(), InstanceKind::GeneralGraph);
        assert_eq!(inst.edges().len(), 6);
    }

    #[test]
    fn complete_bipartite_two_by_two() {
        let spec = GeneratorSpec {
            family: "bipartite(2,2,1.0)".parse().unwrap(),
            values: ValueFamily::TwoPoint,
            seed: 9,
            count: 1,
        };
        assert_eq!(generate_instances(&spec).unwrap()[0].edges().len(), 4);
    }

    #[test]
    fn same_seed_same_files() {
        let spec = GeneratorSpec {
            family: "budget-additive(2,3,1,5)".parse().unwrap(),
            values: ValueFamily::Mixed,
            seed: 33,
            count: 4,
        };
        let a: Vec<String> = generate_instances(&spec).unwrap().iter().map(|i| i.to_json().unwrap()).collect();
        let b: Vec<String> = generate_instances(&spec).unwrap().iter().map(|i| i.to_json().unwrap()).collect();
        assert_eq!(a, b);
        let other = GeneratorSpec { seed: 34, ..spec };
        let c: Vec<String> = generate_instances(&other).unwrap().iter().map(|i| i.to_json().unwrap()).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn family_strings_round_trip() {
        for s in [
            "random-graph(5,0.5)",
            "bipartite(2,3,0.25)",
            "transversal(3,3,1)",
            "budget-additive(2,4,1,10)",
            "single-choice(5)",
        ] {
            let f: Family = s.parse().unwrap();
            assert_eq!(f.to_string().parse::<Family>().unwrap(), f);
        }
    }

    #[test]
    fn invalid_families_are_config_errors() {
        for s in ["clique(4)", "random-graph(4)", "bipartite(2,2,1.5)", "budget-additive(1,1,5,2)", "single-choice"] {
            assert!(matches!(s.parse::<Family>(), Err(Error::Config(_))), "{s}");
        }
        assert!("gaussian".parse::<ValueFamily>().is_err());
    }

    #[test]
    fn two_point_laws_are_dyadic() {
        let mut rng = RandomSource::new(2);
        for _ in 0..100 {
            let Distribution::Discrete { support } = random_law(ValueFamily::TwoPoint, &mut rng) else {
                panic!("two-point law expected");
            };
            for (v, p) in support {
                assert_eq!((v * 4.0).fract(), 0.0);
                assert_eq!((p * 4.0).fract(), 0.0);
            }
        }
    }
}
