//! Budget-additive buyers: item thresholds from the greedy on samples.

use sspi_lab::budget::{diagnostics_budget, run_budget_additive};
use sspi_lab::model::{draw_realization, Distribution, Instance};
use sspi_lab::oracles::{instance_optimum, OracleLimits};
use sspi_lab::rng::RandomSource;

fn main() -> sspi_lab::error::Result<()> {
    let laws = [
        Distribution::uniform(0.0, 5.0),
        Distribution::uniform(0.0, 8.0),
        Distribution::exponential(0.5),
        Distribution::uniform(1.0, 6.0),
    ];
    let pairs = [(0, 0), (0, 1), (1, 1), (1, 2)];
    let edges = pairs.into_iter().zip(laws).map(|((b, i), d)| (b, i, d)).collect();
    let inst = Instance::budget_additive(3, edges, vec![6.0, 4.0])?;
    let mut rng = RandomSource::new(5);
    for _ in 0..3 {
        let real = draw_realization(&inst, &mut rng)?;
        let trace = run_budget_additive(&inst, &real, &[0, 1])?;
        let diag = diagnostics_budget(&trace);
        let opt = instance_optimum(&inst, &real.reward_values(), &OracleLimits::default())?;
        println!(
            "thresholds {:?}; collected {:.3} (safe mass {:.3}); optimum {:.3}",
            trace.thresholds.iter().map(|t| t.map_or(0.0, |d| d.value)).collect::<Vec<_>>(),
            trace.collected.total(),
            diag.safe_plus_weight,
            opt
        );
    }
    Ok(())
}
