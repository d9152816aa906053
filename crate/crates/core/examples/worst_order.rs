//! Static worst order against an ensemble, per-realization adaptive orders,
//! and the named heuristics.

use std::sync::Arc;

use sspi_lab::adversary::{fixed_orders, worst_order_adaptive, worst_order_exhaustive, EnsembleMember};
use sspi_lab::model::{enumerate_realizations, Distribution, Instance, DEFAULT_ENUMERATION_CAP};
use sspi_lab::policy::by_name;
use sspi_lab::rng::RandomSource;

fn main() -> sspi_lab::error::Result<()> {
    let inst = Arc::new(Instance::single_choice(vec![
        Distribution::two_point(1.0, 4.0, 0.5),
        Distribution::two_point(0.0, 3.0, 0.25),
        Distribution::point(2.0),
    ])?);
    let policy = by_name("single-choice")?;
    let rng = RandomSource::new(0);
    let ensemble: Vec<EnsembleMember> = enumerate_realizations(&inst, DEFAULT_ENUMERATION_CAP)?
        .into_iter()
        .map(|p| EnsembleMember {
            realization: p.realization,
            weight: p.probability,
            policy_rng: rng.clone(),
        })
        .collect();
    let worst = worst_order_exhaustive(policy.as_ref(), &inst, &ensemble)?;
    println!("static worst order {:?}: E[ALG] = {:.4} over {} orders", worst.order, worst.value, worst.orders_searched);

    let adaptive: f64 = ensemble
        .iter()
        .map(|m| Ok(m.weight * worst_order_adaptive(policy.as_ref(), &inst, &m.realization, &rng)?.value))
        .sum::<sspi_lab::error::Result<f64>>()?;
    println!("adaptive adversary: E[ALG] = {adaptive:.4}");

    let first = &ensemble[0].realization;
    for named in fixed_orders(policy.as_ref(), &inst, first, &mut rng.fork("orders")) {
        println!("{:>18}: {:?}", named.name, named.order);
    }
    Ok(())
}
