//! Single-sample prophet inequality policies with offline oracles,
//! adversarial arrival orders and an experiment harness.

pub mod adversary;
pub mod bipartite;
pub mod budget;
pub mod error;
pub mod generate;
pub mod harness;
pub mod matching;
pub mod model;
pub mod oracles;
pub mod policy;
pub mod reductions;
pub mod rng;
pub mod stats;
pub mod suites;
pub mod trace;

pub use error::{Error, Result};
pub use model::{Distribution, Draw, Instance, InstanceKind, Realization};
pub use rng::RandomSource;
