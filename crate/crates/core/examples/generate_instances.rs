//! Seeded instance families, printed as JSON.

use sspi_lab::generate::{generate_instances, GeneratorSpec, ValueFamily};

fn main() -> sspi_lab::error::Result<()> {
    for family in ["random-graph(4,0.5)", "bipartite(2,3,0.75)", "budget-additive(2,2,3,8)", "single-choice(3)"] {
        let spec = GeneratorSpec {
            family: family.parse()?,
            values: ValueFamily::Mixed,
            seed: 2,
            count: 1,
        };
        for inst in generate_instances(&spec)? {
            println!("{family}:\n{}", inst.to_json()?);
        }
    }
    Ok(())
}
