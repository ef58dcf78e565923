//! Edge-difference matrices `R` with `B^T = R B_hat^T`, and the compact
//! phase-difference vector fields in `x = B_hat_intra^T theta`,
//! `y = B_hat_inter^T theta`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{block_diag, max_abs, pinv, positive_part};
use crate::network::{ClusterPartition, IncidenceReduction, OscillatorNetwork};

/// Tolerance on `||B^T - R B_hat^T||_max`.
pub const TOL_IDENTITY: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct ReductionMatrices {
    /// Intra edges from intra tree edges, block-diagonal by cluster.
    pub r1: DMatrix<f64>,
    /// Inter edges from intra tree edges.
    pub r2: DMatrix<f64>,
    /// Inter edges from inter tree edges.
    pub r3: DMatrix<f64>,
    r1_blocks: Vec<DMatrix<f64>>,
    col_offsets: Vec<usize>,
}

impl ReductionMatrices {
    /// `R = [[R1, 0], [R2, R3]]`.
    pub fn full(&self) -> DMatrix<f64> {
        let (m1, d1) = self.r1.shape();
        let (m2, d2) = self.r3.shape();
        let mut r = DMatrix::zeros(m1 + m2, d1 + d2);
        r.view_mut((0, 0), (m1, d1)).copy_from(&self.r1);
        r.view_mut((m1, 0), (m2, d1)).copy_from(&self.r2);
        r.view_mut((m1, d1), (m2, d2)).copy_from(&self.r3);
        r
    }

    /// `R1^(k)`: rows are the edges of cluster `k`, columns its tree edges.
    pub fn r1_block(&self, k: usize) -> &DMatrix<f64> {
        &self.r1_blocks[k]
    }

    /// Columns of `R2` acting on cluster `k`'s block of `x`.
    pub fn r2_block(&self, k: usize) -> DMatrix<f64> {
        let c0 = self.col_offsets[k];
        let w = self.r1_blocks[k].ncols();
        self.r2.columns(c0, w).into_owned()
    }

    pub fn cluster_count(&self) -> usize {
        self.r1_blocks.len()
    }

    /// `||B^T - R B_hat^T||_max`.
    pub fn residual(&self, red: &IncidenceReduction) -> f64 {
        let lhs = red.b().transpose();
        let rhs = self.full() * red.bh().transpose();
        max_abs(&(lhs - rhs))
    }
}

/// Computes `R1` blockwise from the per-cluster pseudoinverses and
/// `R2 = B_inter^T (B_hat_intra^T P_inter)^+`,
/// `R3 = B_inter^T (B_hat_inter^T P_intra)^+` with the tree projectors
/// `P_intra = I - B_hat_intra B_hat_intra^+`, `P_inter = I - B_hat_inter B_hat_inter^+`.
pub fn compute_r(red: &IncidenceReduction) -> Result<ReductionMatrices> {
    let r = red.cluster_count();
    let n = red.node_count();
    let mut blocks = Vec::with_capacity(r);
    let mut col_offsets = Vec::with_capacity(r);
    for k in 0..r {
        col_offsets.push(red.tree_offset(k));
        let b = red.local_b_intra(k);
        let bh = red.local_bh_intra(k);
        blocks.push(b.transpose() * pinv(&bh.transpose()));
    }
    let r1 = block_diag(&blocks);

    let id = DMatrix::<f64>::identity(n, n);
    let bh_intra = red.bh_intra();
    let bh_inter = red.bh_inter();
    let p_intra = &id - bh_intra * pinv(bh_intra);
    let p_inter = &id - bh_inter * pinv(bh_inter);
    let b_inter_t = red.b_inter().transpose();
    let r2 = &b_inter_t * pinv(&(bh_intra.transpose() * &p_inter));
    let r3 = &b_inter_t * pinv(&(bh_inter.transpose() * &p_intra));

    let out = ReductionMatrices {
        r1,
        r2,
        r3,
        r1_blocks: blocks,
        col_offsets,
    };
    let residual = out.residual(red);
    if !(residual <= TOL_IDENTITY) {
        return Err(Error::PseudoinverseResidual {
            what: "B^T = R B_hat^T",
            residual,
        });
    }
    Ok(out)
}

/// Intra- and inter-cluster phase differences.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReducedState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl ReducedState {
    pub fn wrapped(&self) -> ReducedState {
        ReducedState {
            x: self.x.iter().map(|&v| wrap_phase(v)).collect(),
            y: self.y.iter().map(|&v| wrap_phase(v)).collect(),
        }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(v: f64) -> f64 {
    let w = v.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

pub fn reduce_state(red: &IncidenceReduction, theta: &[f64]) -> Result<ReducedState> {
    if theta.len() != red.node_count() {
        return Err(Error::Dimension {
            what: "theta",
            expected: red.node_count(),
            got: theta.len(),
        });
    }
    let th = DVector::from_column_slice(theta);
    let x = red.bh_intra().tr_mul(&th);
    let y = red.bh_inter().tr_mul(&th);
    Ok(ReducedState {
        x: x.as_slice().to_vec(),
        y: y.as_slice().to_vec(),
    })
}

/// Per-cluster synchronization error: largest wrapped pairwise phase gap.
pub fn lift_error(theta: &[f64], part: &ClusterPartition) -> Vec<f64> {
    part.clusters()
        .iter()
        .map(|c| {
            let mut e = 0.0_f64;
            for (a, &i) in c.iter().enumerate() {
                for &j in &c[a + 1..] {
                    e = e.max(wrap_phase(theta[i] - theta[j]).abs());
                }
            }
            e
        })
        .collect()
}

/// Precomputed factors of the compact dynamics
///
/// ```text
/// x' = f_intra(x) + f_inter(x, y) + (1/eps) f_ctr(U(t/eps), x)
/// y' = g(x, y) + (1/eps) g_ctr(U(t/eps), x)
/// ```
///
/// `f_intra` and `f_inter` omit `B_hat_intra^T omega`, which vanishes when
/// frequencies are equal inside clusters.
#[derive(Clone, Debug)]
pub struct CompactDynamics {
    r: ReductionMatrices,
    f_intra: DMatrix<f64>,
    f_inter: DMatrix<f64>,
    f_ctr_pos: DMatrix<f64>,
    f_ctr_neg: DMatrix<f64>,
    g_omega: DVector<f64>,
    g_intra: DMatrix<f64>,
    g_inter: DMatrix<f64>,
    g_ctr_pos: DMatrix<f64>,
    g_ctr_neg: DMatrix<f64>,
}

impl CompactDynamics {
    pub fn new(net: &OscillatorNetwork, red: &IncidenceReduction, r: ReductionMatrices) -> Self {
        let w_intra = DMatrix::from_diagonal(&red.w_intra());
        let w_inter = DMatrix::from_diagonal(&red.w_inter());
        let bh_intra_t = red.bh_intra().transpose();
        let bh_inter_t = red.bh_inter().transpose();
        let b_intra = red.b_intra();
        let b_inter = red.b_inter();
        let pos = positive_part(b_intra);
        let neg = positive_part(&(-b_intra));
        Self {
            f_intra: &bh_intra_t * b_intra * &w_intra,
            f_inter: &bh_intra_t * b_inter * &w_inter,
            f_ctr_pos: &bh_intra_t * &pos,
            f_ctr_neg: &bh_intra_t * &neg,
            g_omega: &bh_inter_t * net.frequencies(),
            g_intra: &bh_inter_t * b_intra * &w_intra,
            g_inter: &bh_inter_t * b_inter * &w_inter,
            g_ctr_pos: &bh_inter_t * &pos,
            g_ctr_neg: &bh_inter_t * &neg,
            r,
        }
    }

    pub fn matrices(&self) -> &ReductionMatrices {
        &self.r
    }

    pub fn x_dim(&self) -> usize {
        self.f_intra.nrows()
    }

    pub fn y_dim(&self) -> usize {
        self.g_omega.len()
    }

    /// Number of intra edges; a dither sample has twice this length.
    pub fn intra_edge_count(&self) -> usize {
        self.f_intra.ncols()
    }

    fn check(&self, what: &'static str, expected: usize, got: usize) -> Result<()> {
        if expected != got {
            return Err(Error::Dimension { what, expected, got });
        }
        Ok(())
    }

    fn sin_intra(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check("x", self.x_dim(), x.len())?;
        Ok((&self.r.r1 * x).map(f64::sin))
    }

    fn sin_inter(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        self.check("x", self.x_dim(), x.len())?;
        self.check("y", self.y_dim(), y.len())?;
        Ok((&self.r.r2 * x + &self.r.r3 * y).map(f64::sin))
    }

    pub fn f_intra(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(-(&self.f_intra * self.sin_intra(x)?))
    }

    pub fn f_inter(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(-(&self.f_inter * self.sin_inter(x, y)?))
    }

    fn split<'a>(&self, sample: &'a DVector<f64>) -> Result<(nalgebra::DVectorView<'a, f64>, nalgebra::DVectorView<'a, f64>)> {
        let m = self.intra_edge_count();
        self.check("dither sample", 2 * m, sample.len())?;
        Ok((sample.rows(0, m), sample.rows(m, m)))
    }

    /// `sample` holds the instantaneous `U_1` diagonal followed by `U_2`.
    pub fn f_ctr(&self, sample: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
        let (u1, u2) = self.split(sample)?;
        let s = self.sin_intra(x)?;
        Ok(-(&self.f_ctr_pos * u1.component_mul(&s) - &self.f_ctr_neg * u2.component_mul(&s)))
    }

    pub fn g(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        let si = self.sin_intra(x)?;
        let se = self.sin_inter(x, y)?;
        Ok(&self.g_omega - &self.g_intra * si - &self.g_inter * se)
    }

    pub fn g_ctr(&self, sample: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
        let (u1, u2) = self.split(sample)?;
        let s = self.sin_intra(x)?;
        Ok(-(&self.g_ctr_pos * u1.component_mul(&s) - &self.g_ctr_neg * u2.component_mul(&s)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::build_reduction;

    fn triangle() -> (OscillatorNetwork, ClusterPartition) {
        let net = OscillatorNetwork::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], &[0.0; 3]).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1, 2]], 3).unwrap();
        (net, part)
    }

    #[test]
    fn tree_network_gives_identity() {
        let net = OscillatorNetwork::from_edges(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 2.0)], &[0.0; 4]).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        let red = build_reduction(&net, &part).unwrap();
        let r = compute_r(&red).unwrap();
        assert!(max_abs(&(r.full() - DMatrix::identity(3, 3))) < 1e-12);
    }

    #[test]
    fn triangle_chord_is_sum_of_tree_edges() {
        let (net, part) = triangle();
        let red = build_reduction(&net, &part).unwrap();
        let r = compute_r(&red).unwrap();
        let expected = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        assert!(max_abs(&(&r.r1 - expected)) < 1e-12);
    }

    #[test]
    fn manifold_maps_to_zero() {
        let (net, part) = triangle();
        let red = build_reduction(&net, &part).unwrap();
        let s = reduce_state(&red, &[0.7, 0.7, 0.7]).unwrap();
        assert!(s.x.iter().all(|v| v.abs() < 1e-15));
        let z = reduce_state(&red, &[0.0; 3]).unwrap();
        assert_eq!(z.x, vec![0.0, 0.0]);
        assert!(z.y.is_empty());
    }

    #[test]
    fn reduce_state_matches_edge_differences() {
        let (net, part) = triangle();
        let red = build_reduction(&net, &part).unwrap();
        let th = [0.3, -1.2, 2.9];
        let s = reduce_state(&red, &th).unwrap();
        for (e, v) in red.tree_edges().iter().zip(&s.x) {
            assert!((th[e.head] - th[e.tail] - v).abs() < 1e-15);
        }
    }

    #[test]
    fn wrap_phase_range() {
        assert!((wrap_phase(PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-15);
        assert!((wrap_phase(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_phase(0.25), 0.25);
    }

    #[test]
    fn lift_error_spread_cluster() {
        let part = ClusterPartition::new(vec![vec![0, 1, 2, 3]], 4).unwrap();
        let th = [0.0, PI / 2.0, PI, 3.0 * PI / 2.0];
        let e = lift_error(&th, &part);
        assert!((e[0] - PI).abs() < 1e-12);
        assert_eq!(lift_error(&[1.0; 4], &part), vec![0.0]);
    }

    #[test]
    fn control_field_vanishes_without_dither_or_offset() {
        let (net, part) = triangle();
        let red = build_reduction(&net, &part).unwrap();
        let dynamics = CompactDynamics::new(&net, &red, compute_r(&red).unwrap());
        let x = DVector::from_vec(vec![0.3, -0.4]);
        let zero_u = DVector::zeros(6);
        assert!(dynamics.f_ctr(&zero_u, &x).unwrap().norm() == 0.0);
        let u = DVector::from_vec(vec![1.0, -2.0, 0.5, 0.3, 0.1, -0.7]);
        assert!(dynamics.f_ctr(&u, &DVector::zeros(2)).unwrap().norm() == 0.0);
        assert!(dynamics.f_intra(&DVector::zeros(2)).unwrap().norm() == 0.0);
        assert!(dynamics.f_intra(&DVector::zeros(3)).is_err());
    }
}
