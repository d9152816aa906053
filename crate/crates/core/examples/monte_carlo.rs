//! Monte Carlo ratio estimates written as CSV rows.

use sspi_lab::harness::{estimate_ratio, write_csv, AdversaryMode, ExperimentConfig};
use sspi_lab::model::{Distribution, Instance};

fn main() -> sspi_lab::error::Result<()> {
    let inst = Instance::bipartite(
        2,
        2,
        vec![
            (0, 0, Distribution::uniform(0.0, 1.0)),
            (0, 1, Distribution::exponential(1.0)),
            (1, 0, Distribution::uniform(0.0, 2.0)),
            (1, 1, Distribution::two_point(0.0, 1.0, 0.5)),
        ],
    )?;
    let mut reports = Vec::new();
    for policy in ["bipartite", "truthful", "edge-matching", "oos-wrapped:bipartite"] {
        for adversary in [AdversaryMode::Random, AdversaryMode::Exhaustive] {
            let cfg = ExperimentConfig::new(policy, inst.clone(), "2x2")
                .with_trials(20_000)
                .with_seed(42)
                .with_adversary(adversary);
            reports.push(estimate_ratio(&cfg)?);
        }
    }
    write_csv(std::io::stdout().lock(), &reports)
}
