//! Any sample-based policy as an order-oblivious secretary algorithm.

use std::sync::Arc;

use sspi_lab::model::{Distribution, Instance};
use sspi_lab::policy::{by_name, psspi_to_oos};
use sspi_lab::rng::RandomSource;

fn main() -> sspi_lab::error::Result<()> {
    let inst = Arc::new(Instance::single_choice(vec![Distribution::uniform(0.0, 1.0); 5])?);
    let inner = by_name("single-choice")?;
    // fixed weights, no distributional knowledge
    let weights = [0.3, 0.9, 0.1, 0.7, 0.5];
    let rng = RandomSource::new(1);
    let mut total = 0.0;
    let runs = 10_000;
    for k in 0..runs {
        let out = psspi_to_oos(inner.as_ref(), &inst, &weights, &mut rng.fork_indexed("run", k), &[0, 1, 2, 3, 4])?;
        if k < 3 {
            println!("observed {:?}, accepted {:?}", out.observed_units, out.accepted);
        }
        total += out.value;
    }
    println!("mean value {:.4} against max 0.9", total / runs as f64);
    Ok(())
}
