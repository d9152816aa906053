use rand::Rng;
use rand_distr::{Distribution as _, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RandomSource;

/// Tolerance on the total mass of a discrete law.
pub const MASS_TOLERANCE: f64 = 1e-12;

/// Value law of one element.
///
/// Continuous families carry an optional `cap`; a capped draw is `min(x, cap)`.
/// Caps are introduced by budget truncation on budget-additive instances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Distribution {
    Discrete {
        support: Vec<(f64, f64)>,
    },
    UniformInterval {
        lower: f64,
        upper: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
    },
    Exponential {
        rate: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        cap: Option<f64>,
    },
    PointMass {
        value: f64,
    },
}

fn nonnegative(x: f64, what: &str) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::Config(format!("{what} must be a finite nonnegative real, got {x}")));
    }
    Ok(())
}

impl Distribution {
    pub fn discrete(support: Vec<(f64, f64)>) -> Self {
        Distribution::Discrete { support }
    }

    /// `lo` with probability `p`, `hi` otherwise.
    pub fn two_point(lo: f64, hi: f64, p: f64) -> Self {
        Distribution::Discrete {
            support: vec![(lo, p), (hi, 1.0 - p)],
        }
    }

    pub fn point(value: f64) -> Self {
        Distribution::PointMass { value }
    }

    pub fn uniform(lower: f64, upper: f64) -> Self {
        Distribution::UniformInterval {
            lower,
            upper,
            cap: None,
        }
    }

    pub fn exponential(rate: f64) -> Self {
        Distribution::Exponential { rate, cap: None }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Distribution::Discrete { support } => {
                if support.is_empty() {
                    return Err(Error::Config("discrete distribution with empty support".into()));
                }
                let mut mass = 0.0;
                for &(v, p) in support {
                    nonnegative(v, "support value")?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(Error::Config(format!("probability {p} outside [0, 1]")));
                    }
                    mass += p;
                }
                if (mass - 1.0).abs() > MASS_TOLERANCE {
                    return Err(Error::Config(format!(
                        "discrete probabilities sum to {mass}, expected 1"
                    )));
                }
            }
            Distribution::UniformInterval { lower, upper, cap } => {
                nonnegative(*lower, "uniform lower bound")?;
                nonnegative(*upper, "uniform upper bound")?;
                if upper < lower {
                    return Err(Error::Config(format!("uniform interval [{lower}, {upper}] is empty")));
                }
                if let Some(c) = cap {
                    nonnegative(*c, "cap")?;
                }
            }
            Distribution::Exponential { rate, cap } => {
                if !rate.is_finite() || *rate <= 0.0 {
                    return Err(Error::Config(format!("exponential rate must be positive, got {rate}")));
                }
                if let Some(c) = cap {
                    nonnegative(*c, "cap")?;
                }
            }
            Distribution::PointMass { value } => nonnegative(*value, "point mass")?,
        }
        Ok(())
    }

    /// Discrete with finite support (point masses included).
    pub fn is_enumerable(&self) -> bool {
        matches!(self, Distribution::Discrete { .. } | Distribution::PointMass { .. })
    }

    /// Atoms with positive probability, for enumerable laws.
    pub fn atoms(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            Distribution::Discrete { support } => {
                Some(support.iter().copied().filter(|&(_, p)| p > 0.0).collect())
            }
            Distribution::PointMass { value } => Some(vec![(*value, 1.0)]),
            _ => None,
        }
    }

    /// Largest value the law can produce, if bounded.
    pub fn upper_bound(&self) -> Option<f64> {
        match self {
            Distribution::Discrete { support } => support
                .iter()
                .filter(|&&(_, p)| p > 0.0)
                .map(|&(v, _)| v)
                .fold(None, |m, v| Some(m.map_or(v, |m: f64| m.max(v)))),
            Distribution::UniformInterval { upper, cap, .. } => {
                Some(cap.map_or(*upper, |c| c.min(*upper)))
            }
            Distribution::Exponential { cap, .. } => *cap,
            Distribution::PointMass { value } => Some(*value),
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match self {
            Distribution::Discrete { support } => Some(support.iter().map(|&(v, p)| v * p).sum()),
            Distribution::UniformInterval { lower, upper, cap: None } => Some(0.5 * (lower + upper)),
            Distribution::Exponential { rate, cap: None } => Some(1.0 / rate),
            Distribution::PointMass { value } => Some(*value),
            _ => None,
        }
    }

    /// The law of `min(X, cap)`. Equal atoms are merged.
    pub fn truncated(&self, cap: f64) -> Distribution {
        match self {
            Distribution::Discrete { support } => {
                let mut merged: Vec<(f64, f64)> = Vec::with_capacity(support.len());
                for &(v, p) in support {
                    let v = v.min(cap);
                    match merged.iter_mut().find(|(w, _)| *w == v) {
                        Some(slot) => slot.1 += p,
                        None => merged.push((v, p)),
                    }
                }
                Distribution::Discrete { support: merged }
            }
            Distribution::PointMass { value } => Distribution::PointMass {
                value: value.min(cap),
            },
            Distribution::UniformInterval { lower, upper, cap: old } => {
                let new_cap = old.map_or(cap, |c| c.min(cap));
                Distribution::UniformInterval {
                    lower: *lower,
                    upper: *upper,
                    cap: (new_cap < *upper).then_some(new_cap),
                }
            }
            Distribution::Exponential { rate, cap: old } => Distribution::Exponential {
                rate: *rate,
                cap: Some(old.map_or(cap, |c| c.min(cap))),
            },
        }
    }

    pub fn sample(&self, rng: &mut RandomSource) -> f64 {
        match self {
            Distribution::Discrete { support } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut last = support[0].0;
                for &(v, p) in support {
                    if p <= 0.0 {
                        continue;
                    }
                    acc += p;
                    last = v;
                    if u < acc {
                        return v;
                    }
                }
                last
            }
            Distribution::UniformInterval { lower, upper, cap } => {
                let u: f64 = rng.random();
                let x = lower + (upper - lower) * u;
                cap.map_or(x, |c| x.min(c))
            }
            Distribution::Exponential { rate, cap } => {
                // rate was validated positive
                let x = Exp::new(*rate).expect("validated rate").sample(rng);
                cap.map_or(x, |c| x.min(c))
            }
            Distribution::PointMass { value } => *value,
        }
    }
}
