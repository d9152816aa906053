//! Item prices fixed from samples; a buyer picks the utility-maximizing item
//! and gains nothing by misreporting.

use sspi_lab::bipartite::{enumerate_misreports, run_truthful};
use sspi_lab::suites::truthful_fixture;

fn main() -> sspi_lab::error::Result<()> {
    let (inst, real, order) = truthful_fixture();
    let trace = run_truthful(&inst, &real, &order, None)?;
    println!("collected: {:?}", trace.collected.edges);
    println!("charged:   {:?}", trace.charged);

    // buyer 0 pretends to value item 0 most; the others tell the truth
    let lie = vec![vec![9.5, 1.0], vec![real.reward(2).value], vec![real.reward(3).value]];
    let lied = run_truthful(&inst, &real, &order, Some(&lie))?;
    println!("with a misreport from buyer 0: {:?}", lied.collected.edges);

    for buyer in 0..inst.buyers().len() {
        let table = enumerate_misreports(&inst, &real, &order, buyer, 25)?;
        println!(
            "buyer {buyer}: truthful utility {:.2}, best misreport {:.2} over {} reports",
            table.truthful_utility, table.best_misreport_utility, table.reports_tested
        );
    }
    Ok(())
}
