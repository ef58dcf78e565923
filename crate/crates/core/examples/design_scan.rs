//! Amplitude scan on the bundled triangle cluster and the averaged
//! spectrum along the amplitude grid.

use vibrokit::averaging::{DEFAULT_QUADRATURE, DEFAULT_S0};
use vibrokit::bundled::bundled_config;
use vibrokit::config::default_u_grid;
use vibrokit::design::{amplitude_scan, hurwitz_frontier};
use vibrokit::network::build_reduction;
use vibrokit::reduction::compute_r;
use vibrokit::vibration::{assemble_j, assemble_p_hat, design_lower_triangular, VibrationSchedule};

fn main() -> vibrokit::Result<()> {
    let exp = bundled_config().build()?;
    let d = amplitude_scan(&exp.network, &exp.partition, &[0], &default_u_grid(), DEFAULT_S0, 0.02, DEFAULT_QUADRATURE)?;
    println!("selected u = {}, robustness {:?} -> {:?}", d.selected_u, d.robustness_before[0], d.robustness_after[0]);

    let red = build_reduction(&exp.network, &exp.partition)?;
    let r = compute_r(&red)?;
    let mut unit = VibrationSchedule::new(0.02)?;
    unit.extend(&design_lower_triangular(&red, 0, 1.0)?.amplitudes);
    let pattern = assemble_p_hat(&red, &r, &unit)?.remove(0);
    let j = assemble_j(&red, &r).remove(0);
    for p in hurwitz_frontier(&j, &pattern, &[0.0, 0.5, 1.0, 2f64.sqrt(), 1.7, 2.5], DEFAULT_S0, DEFAULT_QUADRATURE)? {
        println!("u = {:.3}: det {:.5}, trace {:.3}, spectrum {:.4?}", p.u, p.determinant, p.trace, p.spectrum);
    }
    Ok(())
}
