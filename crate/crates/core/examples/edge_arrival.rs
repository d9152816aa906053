//! Posted prices on a triangle under edge arrivals, with the offline twin.

use sspi_lab::matching::{run_edge_arrival, run_edge_arrival_offline_sim, safe_edges};
use sspi_lab::model::{Distribution, Instance, Realization};

fn main() -> sspi_lab::error::Result<()> {
    let d = || Distribution::uniform(0.0, 10.0);
    let triangle = Instance::general_graph(3, vec![(0, 1, d()), (1, 2, d()), (0, 2, d())])?;
    // (sample, reward) per edge
    let real = Realization::from_values(&[(5.0, 4.0), (3.0, 6.0), (1.0, 2.0)]);
    let order = [0, 1, 2];

    let trace = run_edge_arrival(&triangle, &real, &order)?;
    println!("vertex prices:   {:?}", trace.prices.values());
    println!("sample matching: {:?}", trace.sample_matching.edges);
    println!("candidates:      {:?}", trace.candidate_set().edges);
    println!("collected:       {:?}", trace.collected.edges);
    println!("safe edge per vertex: {:?}", safe_edges(&trace));
    for event in &trace.events {
        println!("{}", serde_json::to_string(event).expect("events serialize"));
    }

    let twin = run_edge_arrival_offline_sim(&triangle, &real, &order)?;
    println!("offline twin agrees: {}", twin.coupled_sets() == trace.coupled_sets());
    Ok(())
}
