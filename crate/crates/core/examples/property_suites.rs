//! Every property suite at a small scale.

use sspi_lab::suites::{run_property_suite, Suite, SuiteConfig};

fn main() -> sspi_lab::error::Result<()> {
    let cfg = SuiteConfig::new(2_000, 9);
    for suite in Suite::ALL {
        let report = run_property_suite(suite, &cfg)?;
        println!("{suite}");
        for check in &report.checks {
            println!("  {check}");
        }
    }
    Ok(())
}
