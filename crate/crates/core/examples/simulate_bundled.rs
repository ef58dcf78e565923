//! Uncontrolled and controlled runs of the bundled network.

use vibrokit::bundled::bundled_config;
use vibrokit::experiment::simulate_config;

fn main() -> vibrokit::Result<()> {
    let cfg = bundled_config();
    for controlled in [false, true] {
        let (traj, v, sched) = simulate_config(&cfg, controlled)?;
        println!(
            "controlled = {controlled}: eps {}, {} samples, terminal errors {:?}, converged {}",
            sched.epsilon(),
            traj.len(),
            v.terminal_errors,
            v.converged
        );
    }
    Ok(())
}
