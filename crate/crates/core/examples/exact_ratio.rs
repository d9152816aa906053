//! Exact expectations by enumerating every realization pattern.

use sspi_lab::harness::{exact_ratio, AdversaryMode, ExperimentConfig};
use sspi_lab::model::{Distribution, Instance};

fn main() -> sspi_lab::error::Result<()> {
    let single = Instance::single_choice(vec![Distribution::two_point(1.0, 2.0, 0.5); 2])?;
    let path = Instance::general_graph(
        4,
        vec![
            (0, 1, Distribution::two_point(0.0, 4.0, 0.5)),
            (1, 2, Distribution::two_point(1.0, 2.0, 0.5)),
            (2, 3, Distribution::point(1.0)),
        ],
    )?;
    for (policy, inst, label) in [("single-choice", single, "two-coins"), ("edge-matching", path, "path")] {
        for adversary in [AdversaryMode::Exhaustive, AdversaryMode::Adaptive] {
            let cfg = ExperimentConfig::new(policy, inst.clone(), label).with_adversary(adversary);
            let report = exact_ratio(&cfg)?;
            println!("{}", report.summary());
        }
    }
    Ok(())
}
