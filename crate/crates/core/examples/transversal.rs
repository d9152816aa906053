//! Buyers carry one weight each and are matched into compatible items.

use sspi_lab::bipartite::run_transversal;
use sspi_lab::model::{draw_realization, Distribution, Instance};
use sspi_lab::oracles::optimal_transversal_independent_set;
use sspi_lab::rng::RandomSource;

fn main() -> sspi_lab::error::Result<()> {
    let compat = vec![(0, 0), (0, 1), (1, 1), (2, 1), (2, 2)];
    let laws = vec![
        Distribution::uniform(0.0, 4.0),
        Distribution::exponential(0.5),
        Distribution::two_point(1.0, 3.0, 0.5),
    ];
    let inst = Instance::transversal(3, compat.clone(), laws)?;
    let mut rng = RandomSource::new(11);
    let real = draw_realization(&inst, &mut rng)?;
    let trace = run_transversal(&inst, &real, &[1, 0, 2])?;
    let best = optimal_transversal_independent_set(3, 3, &compat, &real.reward_values());
    println!("buyer weights: {:?}", real.reward_values());
    println!("collected {:?} = {:.3}", trace.collected.edges, trace.collected.weight());
    println!("offline optimum {:?} = {:.3}", best.edges, best.weight());
    Ok(())
}
