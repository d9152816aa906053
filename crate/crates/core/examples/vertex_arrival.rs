//! Buyers arrive one at a time and take their best edge above both prices.

use sspi_lab::bipartite::{run_vertex_arrival, run_vertex_arrival_offline_sim, safe_edges_bipartite};
use sspi_lab::model::{draw_realization, Distribution, Instance};
use sspi_lab::rng::RandomSource;

fn main() -> sspi_lab::error::Result<()> {
    let inst = Instance::bipartite(
        3,
        2,
        vec![
            (0, 0, Distribution::uniform(0.0, 10.0)),
            (0, 1, Distribution::uniform(0.0, 6.0)),
            (1, 0, Distribution::exponential(0.2)),
            (2, 1, Distribution::two_point(1.0, 8.0, 0.5)),
        ],
    )?;
    let mut rng = RandomSource::new(7);
    for round in 0..3 {
        let real = draw_realization(&inst, &mut rng)?;
        let trace = run_vertex_arrival(&inst, &real, &[2, 0, 1])?;
        let twin = run_vertex_arrival_offline_sim(&inst, &real, &[2, 0, 1])?;
        println!(
            "round {round}: collected {:?} worth {:.3}; safe {:?}; twin agrees {}",
            trace.collected.edges,
            trace.collected.weight(),
            safe_edges_bipartite(&trace),
            twin.coupled_sets() == trace.coupled_sets()
        );
    }
    Ok(())
}
