//! Graphic matroid through a random partition and one pick per group.

use sspi_lab::model::{draw_realization, Distribution, Instance};
use sspi_lab::oracles::{is_forest, max_weight_forest, Graph};
use sspi_lab::reductions::{alpha_partition_sspi, graphic_matroid_partition};
use sspi_lab::rng::RandomSource;

fn main() -> sspi_lab::error::Result<()> {
    let d = || Distribution::uniform(0.0, 1.0);
    let inst = Instance::general_graph(4, vec![(0, 1, d()), (1, 2, d()), (2, 0, d()), (2, 3, d()), (0, 3, d())])?;
    let graph = Graph::of(&inst);
    let mut rng = RandomSource::new(3);
    let partition = graphic_matroid_partition(&graph, &mut rng.fork("partition"));
    println!("groups: {:?}", partition.groups());

    let real = draw_realization(&inst, &mut rng)?;
    let picked = alpha_partition_sspi(&partition, &real.samples(), &real.rewards(), &[4, 3, 2, 1, 0])?;
    let ids: Vec<usize> = picked.iter().map(|&(e, _)| e).collect();
    let w = real.reward_values();
    println!("picked {picked:?}, forest: {}", is_forest(&graph, &ids));
    println!(
        "best over partition {:.3}, max forest {:.3}",
        partition.max_independent_weight(&w),
        max_weight_forest(&graph, &w).weight()
    );
    Ok(())
}
