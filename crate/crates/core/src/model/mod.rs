//! Instances, value laws and the two-draw realization process.

mod distribution;
mod instance;
mod realization;

pub use distribution::{Distribution, MASS_TOLERANCE};
pub use instance::{Edge, EdgeDoc, Instance, InstanceDoc, InstanceKind};
pub use realization::{
    draw_realization, enumerate_realizations, Draw, ElementDraws, Realization, RealizationPattern,
    DEFAULT_ENUMERATION_CAP,
};

use crate::error::{Error, Result};

/// Checks that `order` lists each of `0..n` exactly once.
pub fn check_permutation(order: &[usize], n: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; n];
    for &k in order {
        if k >= n || std::mem::replace(&mut seen[k], true) {
            return Err(Error::Input(format!("arrival order is not a permutation of the {what}")));
        }
    }
    if order.len() != n {
        return Err(Error::Input(format!("arrival order is not a permutation of the {what}")));
    }
    Ok(())
}
