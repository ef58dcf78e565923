//! The bundled three-cluster case study.
//!
//! Cluster 0 is a weighted triangle (weights 0.02, 0.08, 0.02) with
//! `J = [[-0.06, 0.06], [0, -0.18]]`; cluster 1 is `K4` with weight 0.75
//! (`J = -3 I`); cluster 2 is `K7` with weight 6/7 (`J = -6 I`).
//! Frequencies are 1, 10 and 6 rad/s. Clusters 0 and 1 are joined by a
//! patterned block of strength 1.4 (nodes 0 and 1 each couple to one half
//! of cluster 1, node 2 to all of it at half strength), clusters 1 and 2
//! by a uniform block of weight 0.05. Without vibrations the triangle
//! desynchronizes; the designed schedule on edge (0, 1) restores it.

use crate::config::ExperimentConfig;

pub const BUNDLED_JSON: &str = include_str!("../data/bundled.json");

pub fn bundled_config() -> ExperimentConfig {
    ExperimentConfig::parse(BUNDLED_JSON).expect("bundled config parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_reduction, validate_invariance};
    use crate::reduction::compute_r;
    use crate::vibration::assemble_j;

    #[test]
    fn bundled_blocks() {
        let e = bundled_config().build().unwrap();
        assert!(validate_invariance(&e.network, &e.partition).unwrap().passes());
        let red = build_reduction(&e.network, &e.partition).unwrap();
        let j = assemble_j(&red, &compute_r(&red).unwrap());
        let j1 = nalgebra::DMatrix::from_row_slice(2, 2, &[-0.06, 0.06, 0.0, -0.18]);
        assert!(crate::linalg::max_abs(&(&j[0] - j1)) < 1e-12);
        assert!(crate::linalg::max_abs(&(&j[1] + nalgebra::DMatrix::identity(3, 3) * 3.0)) < 1e-12);
        assert!(crate::linalg::max_abs(&(&j[2] + nalgebra::DMatrix::identity(6, 6) * 6.0)) < 1e-12);
    }
}
