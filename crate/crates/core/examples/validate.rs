//! Runs every property suite on the default grids and prints a summary.

use truncdp::oracle::properties::ClosedForms;
use truncdp::oracle::suites::{run_suite, Suite, DEFAULT_GRID_SEED};

fn main() -> truncdp::Result<()> {
    let report = run_suite(Suite::All, DEFAULT_GRID_SEED, &ClosedForms::SHIPPED)?;
    for r in &report.reports {
        let status = if r.holds() { "holds" } else if r.asserted { "FAILS" } else { "recorded" };
        println!(
            "{:<40} grid={:<6} violations={:<5} failures={:<3} max_slack={:+.3e} {status}",
            r.theorem,
            r.grid_size,
            r.violations.len(),
            r.failures.len(),
            r.max_slack
        );
        for v in r.worst(3) {
            println!("    lhs={:.6e} rhs={:.6e} {:?}", v.lhs, v.rhs, v.params);
        }
        for f in r.failures.iter().take(3) {
            println!("    error: {} {:?}", f.message, f.params);
        }
    }
    println!("suite passed: {}", report.passed);
    Ok(())
}
