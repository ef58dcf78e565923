//! Invariance check on the bundled network and on a broken copy.

use vibrokit::bundled::bundled_config;
use vibrokit::network::{validate_invariance, InvarianceViolation};

fn main() -> vibrokit::Result<()> {
    let cfg = bundled_config();
    let exp = cfg.build()?;
    let report = validate_invariance(&exp.network, &exp.partition)?;
    println!("bundled: passes = {}", report.passes());

    let mut broken = cfg.clone();
    broken.network.frequencies[4] += 0.5;
    broken.network.edges.push((0, 7, 0.1));
    let exp = broken.build()?;
    let report = validate_invariance(&exp.network, &exp.partition)?;
    println!("broken: passes = {}", report.passes());
    for v in &report.violations {
        match v {
            InvarianceViolation::FrequencyMismatch { cluster, i, j, .. } => {
                println!("  cluster {cluster}: omega_{i} != omega_{j}")
            }
            InvarianceViolation::RowSumMismatch { cluster, other, i, j, difference } => {
                println!("  cluster {cluster} -> {other}: rows {i}, {j} differ by {difference}")
            }
        }
    }
    Ok(())
}
