//! Sinusoidal vibration schedules and the linearized blocks `J^(k)`, `P_hat^(k)`.
//!
//! A schedule entry `(i, j) -> u_ij` modulates the coupling `a_ij` in the
//! equation of node `i`:
//!
//! ```text
//! theta_i' = omega_i + sum_j (a_ij + q(a_ij) (u_ij / eps) sin(t / eps)) sin(theta_j - theta_i)
//! ```
//!
//! The linearized dither generator of cluster `k` is `P^(k)(s) = P_hat^(k) sin(s)`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{is_strictly_lower_triangular as strictly_lower, positive_part};
use crate::network::{ClusterPartition, IncidenceReduction, OscillatorNetwork};
use crate::reduction::ReductionMatrices;

/// Entry tolerance for the triangularity check.
pub const TOL_TRIANGULAR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct VibrationSchedule {
    epsilon: f64,
    amplitudes: BTreeMap<(usize, usize), f64>,
}

/// Wire form: `{"epsilon": .., "amplitudes": [[i, j, u_ij], ..]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRepr {
    pub epsilon: f64,
    #[serde(default)]
    pub amplitudes: Vec<(usize, usize, f64)>,
}

impl From<VibrationSchedule> for ScheduleRepr {
    fn from(s: VibrationSchedule) -> Self {
        Self {
            epsilon: s.epsilon,
            amplitudes: s.amplitudes.iter().map(|(&(i, j), &u)| (i, j, u)).collect(),
        }
    }
}

impl TryFrom<ScheduleRepr> for VibrationSchedule {
    type Error = Error;

    fn try_from(r: ScheduleRepr) -> Result<Self> {
        let mut s = VibrationSchedule::new(r.epsilon)?;
        for (i, j, u) in r.amplitudes {
            if s.amplitudes.contains_key(&(i, j)) {
                return Err(Error::InvalidSchedule(format!("duplicate entry ({i},{j})")));
            }
            s.set(i, j, u);
        }
        Ok(s)
    }
}

impl VibrationSchedule {
    pub fn new(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidSchedule(format!("epsilon = {epsilon} must be positive")));
        }
        Ok(Self {
            epsilon,
            amplitudes: BTreeMap::new(),
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Dither period `2 pi eps` in seconds.
    pub fn period(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        let mut s = Self::new(epsilon)?;
        s.amplitudes = self.amplitudes.clone();
        Ok(s)
    }

    pub fn set(&mut self, i: usize, j: usize, u: f64) -> &mut Self {
        if u == 0.0 {
            self.amplitudes.remove(&(i, j));
        } else {
            self.amplitudes.insert((i, j), u);
        }
        self
    }

    pub fn extend(&mut self, fragment: &BTreeMap<(usize, usize), f64>) -> &mut Self {
        for (&(i, j), &u) in fragment {
            self.set(i, j, u);
        }
        self
    }

    /// Amplitude `u_ij`; absent entries are zero.
    pub fn amplitude(&self, i: usize, j: usize) -> f64 {
        self.amplitudes.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn amplitudes(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.amplitudes
    }

    pub fn is_zero(&self) -> bool {
        self.amplitudes.values().all(|&u| u == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut s = self.clone();
        for u in s.amplitudes.values_mut() {
            *u *= c;
        }
        s
    }

    /// Instantaneous input `u_ij(t) = (u_ij / eps) sin(t / eps)`.
    pub fn input(&self, i: usize, j: usize, t: f64) -> f64 {
        self.amplitude(i, j) / self.epsilon * (t / self.epsilon).sin()
    }

    /// Every entry must sit on an existing intra-cluster edge.
    pub fn validate(&self, net: &OscillatorNetwork, part: &ClusterPartition) -> Result<()> {
        for (&(i, j), &u) in &self.amplitudes {
            if i >= net.len() || j >= net.len() {
                return Err(Error::InvalidSchedule(format!("entry ({i},{j}) out of range")));
            }
            if !u.is_finite() {
                return Err(Error::InvalidSchedule(format!("entry ({i},{j}) is not finite")));
            }
            if net.weight(i, j) <= 0.0 {
                return Err(Error::InvalidSchedule(format!("({i},{j}) is not an edge")));
            }
            if part.cluster_of(i) != part.cluster_of(j) {
                return Err(Error::InvalidSchedule(format!(
                    "({i},{j}) is an inter-cluster edge"
                )));
            }
        }
        Ok(())
    }

    /// Amplitudes of `U_1` and `U_2` in intra-edge column order.
    pub fn dither_vectors(&self, red: &IncidenceReduction) -> Result<(DVector<f64>, DVector<f64>)> {
        let (dir1, dir2) = red.dither_keys();
        let known: std::collections::BTreeSet<_> = dir1.iter().chain(&dir2).copied().collect();
        if let Some(key) = self.amplitudes.keys().find(|k| !known.contains(k)) {
            return Err(Error::InvalidSchedule(format!(
                "({},{}) is not an intra-cluster edge",
                key.0, key.1
            )));
        }
        let pick = |keys: &[(usize, usize)]| {
            DVector::from_iterator(keys.len(), keys.iter().map(|&(i, j)| self.amplitude(i, j)))
        };
        Ok((pick(&dir1), pick(&dir2)))
    }

    /// Short stable fingerprint of the schedule.
    pub fn digest(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.epsilon.to_le_bytes());
        for (&(i, j), &u) in &self.amplitudes {
            h.update((i as u64).to_le_bytes());
            h.update((j as u64).to_le_bytes());
            h.update(u.to_le_bytes());
        }
        hex::encode(&h.finalize()[..8])
    }
}

/// `J^(k) = -(B_hat^(k))^T B^(k) W^(k) R1^(k)`.
pub fn assemble_j(red: &IncidenceReduction, r: &ReductionMatrices) -> Vec<DMatrix<f64>> {
    (0..red.cluster_count())
        .map(|k| {
            let w = DMatrix::from_diagonal(&DVector::from_iterator(
                red.cluster_edges(k).len(),
                red.cluster_edges(k).iter().map(|e| e.weight),
            ));
            -(red.local_bh_intra(k).transpose() * red.local_b_intra(k) * w * r.r1_block(k))
        })
        .collect()
}

/// `P_hat^(k) = -(B_hat^(k))^T ([B^(k)]^+ U_1^(k) - [-B^(k)]^+ U_2^(k)) R1^(k)`
/// with the dither amplitudes in place of `U(t)`.
pub fn assemble_p_hat(
    red: &IncidenceReduction,
    r: &ReductionMatrices,
    sched: &VibrationSchedule,
) -> Result<Vec<DMatrix<f64>>> {
    let (u1, u2) = sched.dither_vectors(red)?;
    Ok((0..red.cluster_count())
        .map(|k| {
            let off = red.edge_offset(k);
            let m = red.cluster_edges(k).len();
            let b = red.local_b_intra(k);
            let d1 = DMatrix::from_diagonal(&u1.rows(off, m).into_owned());
            let d2 = DMatrix::from_diagonal(&u2.rows(off, m).into_owned());
            let mix = positive_part(&b) * d1 - positive_part(&(-&b)) * d2;
            -(red.local_bh_intra(k).transpose() * mix * r.r1_block(k))
        })
        .collect())
}

/// Blocks of the linearization at the cluster synchronization manifold.
#[derive(Clone, Debug)]
pub struct LinearizedBlocks {
    pub j_blocks: Vec<DMatrix<f64>>,
    pub p_hat_blocks: Vec<DMatrix<f64>>,
}

impl LinearizedBlocks {
    pub fn assemble(red: &IncidenceReduction, r: &ReductionMatrices, sched: &VibrationSchedule) -> Result<Self> {
        Ok(Self {
            j_blocks: assemble_j(red, r),
            p_hat_blocks: assemble_p_hat(red, r, sched)?,
        })
    }
}

/// Single-column dither pattern for one cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct LowerTriangularDesign {
    pub cluster: usize,
    pub amplitudes: BTreeMap<(usize, usize), f64>,
    /// Two-node clusters have a 1x1 generator, which is always zero.
    pub inert: bool,
}

/// Dither on the first tree edge `p -> q` of cluster `k` with
/// `U_1 = u e1 e1^T`, `U_2 = -u e1 e1^T`, i.e. `u_qp = u`, `u_pq = -u`.
///
/// The generator is then `-u B_hat^T (e_p + e_q) e1'^T`: only its first
/// column is nonzero and its first entry vanishes, so it is strictly lower
/// triangular. It is nonzero whenever the second tree edge touches the
/// first one, which the breadth-first tree guarantees.
pub fn design_lower_triangular(red: &IncidenceReduction, k: usize, u: f64) -> Result<LowerTriangularDesign> {
    if k >= red.cluster_count() {
        return Err(Error::InvalidArgument(format!("cluster {k} does not exist")));
    }
    let size = red.clusters()[k].len();
    if size < 2 {
        return Err(Error::ClusterTooSmall { cluster: k, size });
    }
    let tree = red.cluster_tree(k);
    let first = tree[0];
    if size >= 3 {
        let second = tree[1];
        let touches = [second.tail, second.head]
            .iter()
            .any(|v| *v == first.tail || *v == first.head);
        if !touches {
            return Err(Error::InvalidArgument(format!(
                "first two tree edges of cluster {k} are not adjacent"
            )));
        }
    }
    let mut amplitudes = BTreeMap::new();
    if u != 0.0 {
        amplitudes.insert((first.head, first.tail), u);
        amplitudes.insert((first.tail, first.head), -u);
    }
    Ok(LowerTriangularDesign {
        cluster: k,
        amplitudes,
        inert: size == 2,
    })
}

pub fn is_strictly_lower_triangular(blocks: &[DMatrix<f64>]) -> Vec<bool> {
    blocks.iter().map(|b| strictly_lower(b, TOL_TRIANGULAR)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use crate::network::build_reduction;
    use crate::reduction::compute_r;

    fn weighted_triangle() -> (OscillatorNetwork, ClusterPartition) {
        let net = OscillatorNetwork::from_edges(3, &[(0, 1, 0.02), (1, 2, 0.08), (0, 2, 0.02)], &[1.0; 3]).unwrap();
        (net, ClusterPartition::new(vec![vec![0, 1, 2]], 3).unwrap())
    }

    fn complete(n: usize, w: f64) -> OscillatorNetwork {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                edges.push((i, j, w));
            }
        }
        OscillatorNetwork::from_edges(n, &edges, &vec![0.0; n]).unwrap()
    }

    #[test]
    fn complete_unit_k3_gives_minus_three_identity() {
        let net = complete(3, 1.0);
        let part = ClusterPartition::new(vec![vec![0, 1, 2]], 3).unwrap();
        let red = build_reduction(&net, &part).unwrap();
        let j = assemble_j(&red, &compute_r(&red).unwrap());
        assert!(max_abs(&(&j[0] + DMatrix::identity(2, 2) * 3.0)) < 1e-12);
    }

    #[test]
    fn weighted_triangle_block() {
        let (net, part) = weighted_triangle();
        let red = build_reduction(&net, &part).unwrap();
        let j = assemble_j(&red, &compute_r(&red).unwrap());
        let expected = DMatrix::from_row_slice(2, 2, &[-0.06, 0.06, 0.0, -0.18]);
        assert!(max_abs(&(&j[0] - expected)) < 1e-12);
    }

    #[test]
    fn two_clusters_give_separate_blocks() {
        let edges = [(0, 1, 1.0), (2, 3, 2.0), (0, 2, 0.5), (1, 3, 0.5)];
        let net = OscillatorNetwork::from_edges(4, &edges, &[0.0; 4]).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        let red = build_reduction(&net, &part).unwrap();
        let j = assemble_j(&red, &compute_r(&red).unwrap());
        assert_eq!(j.len(), 2);
        assert!((j[0][(0, 0)] + 2.0).abs() < 1e-12);
        assert!((j[1][(0, 0)] + 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_schedule_zero_generator() {
        let (net, part) = weighted_triangle();
        let red = build_reduction(&net, &part).unwrap();
        let p = assemble_p_hat(&red, &compute_r(&red).unwrap(), &VibrationSchedule::new(0.1).unwrap()).unwrap();
        assert_eq!(max_abs(&p[0]), 0.0);
    }

    #[test]
    fn lower_triangular_design_on_triangle() {
        let (net, part) = weighted_triangle();
        let red = build_reduction(&net, &part).unwrap();
        let r = compute_r(&red).unwrap();
        let d = design_lower_triangular(&red, 0, 1.0).unwrap();
        let mut s = VibrationSchedule::new(0.02).unwrap();
        s.extend(&d.amplitudes);
        let p = assemble_p_hat(&red, &r, &s).unwrap();
        assert!(is_strictly_lower_triangular(&p)[0]);
        assert!(p[0].row(0).iter().all(|v| *v == 0.0));
        assert!((p[0][(1, 0)] - 1.0).abs() < 1e-12);

        let d0 = design_lower_triangular(&red, 0, 0.0).unwrap();
        assert!(d0.amplitudes.is_empty());
    }

    #[test]
    fn two_node_cluster_is_inert() {
        let net = OscillatorNetwork::from_edges(2, &[(0, 1, 1.0)], &[0.0; 2]).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1]], 2).unwrap();
        let red = build_reduction(&net, &part).unwrap();
        let d = design_lower_triangular(&red, 0, 2.0).unwrap();
        assert!(d.inert);
        let mut s = VibrationSchedule::new(0.1).unwrap();
        s.extend(&d.amplitudes);
        let p = assemble_p_hat(&red, &compute_r(&red).unwrap(), &s).unwrap();
        assert_eq!(p[0][(0, 0)], 0.0);
    }

    #[test]
    fn schedule_on_non_edge_rejected() {
        let net = OscillatorNetwork::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)], &[0.0; 3]).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1, 2]], 3).unwrap();
        let red = build_reduction(&net, &part).unwrap();
        let mut s = VibrationSchedule::new(0.1).unwrap();
        s.set(0, 2, 1.0);
        assert!(s.validate(&net, &part).is_err());
        assert!(assemble_p_hat(&red, &compute_r(&red).unwrap(), &s).is_err());
    }

    #[test]
    fn symmetric_generator_is_not_lower_triangular() {
        let p = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(is_strictly_lower_triangular(&[p, DMatrix::zeros(2, 2)]), vec![false, true]);
    }

    #[test]
    fn input_has_period_two_pi_eps() {
        let mut s = VibrationSchedule::new(0.05).unwrap();
        s.set(0, 1, 1.5);
        let t = 0.0123;
        assert!((s.input(0, 1, t) - s.input(0, 1, t + s.period())).abs() < 1e-9);
        assert_eq!(s.input(1, 0, t), 0.0);
        assert!(VibrationSchedule::new(0.0).is_err());
    }
}
