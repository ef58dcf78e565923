//! Averaging error against the dither scale, and the empirical `eps*` of
//! the bundled network.

use vibrokit::averaging::{order_study, synthetic_benchmark, DEFAULT_S0};
use vibrokit::bundled::bundled_config;
use vibrokit::certify::{estimate_eps_star, EpsSearch};

fn main() -> vibrokit::Result<()> {
    let (j, p, x0) = synthetic_benchmark();
    let study = order_study(&j, &p, &x0, 0.04, 2, 5.0, DEFAULT_S0)?;
    for row in &study.rows {
        println!("eps = {:<6} deviation = {:.4e}", row.epsilon, row.deviation);
    }
    println!("ratios {:.3?}", study.ratios);

    let exp = bundled_config().build()?;
    let search = EpsSearch { horizon: 200.0, ..EpsSearch::default() };
    let est = estimate_eps_star(&exp.network, &exp.partition, &exp.schedule, &[0.01, 0.02, 0.04, 0.08, 0.16, 0.32], &search)?;
    println!("eps* >= {} (next unstable {:?}); evaluated {:?}", est.eps_star, est.next_unstable, est.evaluated);
    Ok(())
}
