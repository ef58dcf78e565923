//! Oscillator networks, cluster partitions and their incidence structures.
//!
//! Nodes are 0-based. Every undirected edge `(i, j)` with `i < j` is oriented
//! `i -> j`, so its incidence column is `e_j - e_i`.
//!
//! Column layout of the incidence matrices:
//!
//! ```text
//! B      = [B_intra, B_inter]      B_intra = blkdiag(B_intra^(1), ..., B_intra^(r))
//! B_hat  = [B_hat_intra, B_hat_inter]
//! ```
//!
//! Inside each cluster block the spanning-tree edges come first, in tree
//! order, followed by the chords in lexicographic order. The inter block
//! lists the `r - 1` inter-cluster tree edges first.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::max_abs;

/// Absolute tolerance of the invariance checks.
pub const TOL_INVARIANCE: f64 = 1e-9;

/// Tolerance of [`laplacian_consistency_check`].
pub const TOL_LAPLACIAN: f64 = 1e-10;

/// An oriented undirected edge, `tail < head`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Edge {
    pub tail: usize,
    pub head: usize,
    pub weight: f64,
}

impl Edge {
    /// Incidence column `e_head - e_tail`.
    pub fn column(&self, n: usize) -> DVector<f64> {
        let mut c = DVector::zeros(n);
        c[self.tail] = -1.0;
        c[self.head] = 1.0;
        c
    }

    pub fn key(&self) -> (usize, usize) {
        (self.tail, self.head)
    }
}

/// Weighted undirected Kuramoto network with natural frequencies.
#[derive(Clone, Debug, PartialEq)]
pub struct OscillatorNetwork {
    weights: DMatrix<f64>,
    frequencies: DVector<f64>,
}

impl OscillatorNetwork {
    pub fn new(weights: DMatrix<f64>, frequencies: DVector<f64>) -> Result<Self> {
        let n = frequencies.len();
        if weights.shape() != (n, n) {
            return Err(Error::InvalidNetwork(format!(
                "weight matrix is {}x{}, expected {n}x{n}",
                weights.nrows(),
                weights.ncols()
            )));
        }
        if let Some(i) = frequencies.iter().position(|w| !w.is_finite()) {
            return Err(Error::InvalidNetwork(format!("frequency {i} is not finite")));
        }
        for i in 0..n {
            if weights[(i, i)] != 0.0 {
                return Err(Error::InvalidNetwork(format!("self-loop at node {i}")));
            }
            for j in 0..n {
                let a = weights[(i, j)];
                if !a.is_finite() || a < 0.0 {
                    return Err(Error::InvalidNetwork(format!(
                        "weight ({i},{j}) = {a} must be finite and nonnegative"
                    )));
                }
                if a != weights[(j, i)] {
                    return Err(Error::InvalidNetwork(format!(
                        "weights not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self {
            weights,
            frequencies,
        })
    }

    /// Builds a network from an undirected edge list. Repeated edges are an error.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)], frequencies: &[f64]) -> Result<Self> {
        if frequencies.len() != n {
            return Err(Error::InvalidNetwork(format!(
                "{} frequencies for {n} nodes",
                frequencies.len()
            )));
        }
        let mut w = DMatrix::zeros(n, n);
        let mut seen = BTreeSet::new();
        for &(i, j, a) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidNetwork(format!("edge ({i},{j}) out of range")));
            }
            if i == j {
                return Err(Error::InvalidNetwork(format!("self-loop at node {i}")));
            }
            if !seen.insert((i.min(j), i.max(j))) {
                return Err(Error::InvalidNetwork(format!("duplicate edge ({i},{j})")));
            }
            w[(i, j)] = a;
            w[(j, i)] = a;
        }
        Self::new(w, DVector::from_column_slice(frequencies))
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn frequencies(&self) -> &DVector<f64> {
        &self.frequencies
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    /// All edges with positive weight, lexicographically ordered.
    pub fn edges(&self) -> Vec<Edge> {
        let n = self.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let w = self.weights[(i, j)];
                if w > 0.0 {
                    out.push(Edge {
                        tail: i,
                        head: j,
                        weight: w,
                    });
                }
            }
        }
        out
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&j| self.weights[(i, j)] > 0.0)
    }

    /// Weighted graph Laplacian `D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut l = -self.weights.clone();
        for i in 0..n {
            l[(i, i)] = self.weights.row(i).sum();
        }
        l
    }

    /// Same network with every intra-cluster weight multiplied by `factor`.
    pub fn scale_intra(&self, part: &ClusterPartition, factor: f64) -> Result<Self> {
        let mut w = self.weights.clone();
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                if part.cluster_of(i) == part.cluster_of(j) {
                    w[(i, j)] *= factor;
                }
            }
        }
        Self::new(w, self.frequencies.clone())
    }
}

/// Ordered partition of the nodes into clusters. Each cluster is kept sorted,
/// which defines its local node ordering.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterPartition {
    clusters: Vec<Vec<usize>>,
    membership: Vec<usize>,
}

impl ClusterPartition {
    pub fn new(clusters: Vec<Vec<usize>>, n: usize) -> Result<Self> {
        let mut membership = vec![usize::MAX; n];
        let mut sorted = Vec::with_capacity(clusters.len());
        for (k, mut c) in clusters.into_iter().enumerate() {
            if c.is_empty() {
                return Err(Error::InvalidPartition(format!("cluster {k} is empty")));
            }
            c.sort_unstable();
            for &i in &c {
                if i >= n {
                    return Err(Error::InvalidPartition(format!(
                        "node {i} in cluster {k} out of range"
                    )));
                }
                if membership[i] != usize::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "node {i} appears in clusters {} and {k}",
                        membership[i]
                    )));
                }
                membership[i] = k;
            }
            if c.len() < 2 {
                return Err(Error::InvalidPartition(format!(
                    "cluster {k} is a singleton"
                )));
            }
            sorted.push(c);
        }
        if let Some(i) = membership.iter().position(|&m| m == usize::MAX) {
            return Err(Error::InvalidPartition(format!("node {i} is in no cluster")));
        }
        Ok(Self {
            clusters: sorted,
            membership,
        })
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn cluster(&self, k: usize) -> &[usize] {
        &self.clusters[k]
    }

    /// Number of clusters `r`.
    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.membership.len()
    }

    pub fn cluster_of(&self, node: usize) -> usize {
        self.membership[node]
    }

    pub fn local_index(&self, node: usize) -> usize {
        let c = &self.clusters[self.membership[node]];
        c.binary_search(&node).expect("node in its cluster")
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.clusters.iter().map(Vec::len).collect()
    }
}

/// Checks that `part` fits `net` and every intra-cluster subgraph is connected.
pub fn check_structure(net: &OscillatorNetwork, part: &ClusterPartition) -> Result<()> {
    if part.node_count() != net.len() {
        return Err(Error::Dimension {
            what: "partition node count",
            expected: net.len(),
            got: part.node_count(),
        });
    }
    for (k, c) in part.clusters().iter().enumerate() {
        let mut seen = BTreeSet::from([c[0]]);
        let mut queue = VecDeque::from([c[0]]);
        while let Some(v) = queue.pop_front() {
            for w in net.neighbors(v) {
                if part.cluster_of(w) == k && seen.insert(w) {
                    queue.push_back(w);
                }
            }
        }
        if seen.len() != c.len() {
            return Err(Error::DisconnectedCluster { cluster: k });
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InvarianceViolation {
    /// Unequal natural frequencies inside a cluster.
    FrequencyMismatch {
        cluster: usize,
        i: usize,
        j: usize,
        difference: f64,
    },
    /// Unequal weighted row sums from cluster `cluster` into cluster `other`.
    RowSumMismatch {
        cluster: usize,
        other: usize,
        i: usize,
        j: usize,
        difference: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceReport {
    pub violations: Vec<InvarianceViolation>,
    pub tolerance: f64,
}

impl InvarianceReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that the cluster synchronization manifold is flow-invariant:
/// equal frequencies inside every cluster and equal weighted row sums
/// into every other cluster. Structural problems are returned as errors.
pub fn validate_invariance(
    net: &OscillatorNetwork,
    part: &ClusterPartition,
) -> Result<InvarianceReport> {
    check_structure(net, part)?;
    let mut violations = Vec::new();
    let omega = net.frequencies();
    for (k, c) in part.clusters().iter().enumerate() {
        let first = c[0];
        for &i in &c[1..] {
            let d = omega[i] - omega[first];
            if d.abs() > TOL_INVARIANCE {
                violations.push(InvarianceViolation::FrequencyMismatch {
                    cluster: k,
                    i: first,
                    j: i,
                    difference: d,
                });
            }
        }
        for (l, other) in part.clusters().iter().enumerate() {
            if l == k {
                continue;
            }
            let row_sum = |i: usize| other.iter().map(|&p| net.weight(i, p)).sum::<f64>();
            let reference = row_sum(first);
            for &i in &c[1..] {
                let d = row_sum(i) - reference;
                if d.abs() > TOL_INVARIANCE {
                    violations.push(InvarianceViolation::RowSumMismatch {
                        cluster: k,
                        other: l,
                        i: first,
                        j: i,
                        difference: d,
                    });
                }
            }
        }
    }
    Ok(InvarianceReport {
        violations,
        tolerance: TOL_INVARIANCE,
    })
}

/// Spanning tree and ordered incidence matrices of a clustered network.
#[derive(Clone, Debug)]
pub struct IncidenceReduction {
    n: usize,
    clusters: Vec<Vec<usize>>,
    intra_edges: Vec<Vec<Edge>>,
    inter_edges: Vec<Edge>,
    b_intra: DMatrix<f64>,
    b_inter: DMatrix<f64>,
    bh_intra: DMatrix<f64>,
    bh_inter: DMatrix<f64>,
}

fn incidence(n: usize, edges: &[Edge]) -> DMatrix<f64> {
    let mut b = DMatrix::zeros(n, edges.len());
    for (c, e) in edges.iter().enumerate() {
        b[(e.tail, c)] = -1.0;
        b[(e.head, c)] = 1.0;
    }
    b
}

fn ordered(net: &OscillatorNetwork, a: usize, b: usize) -> Edge {
    let (tail, head) = (a.min(b), a.max(b));
    Edge {
        tail,
        head,
        weight: net.weight(tail, head),
    }
}

/// Canonical reduction: see [`build_reduction_seeded`] with seed 0.
pub fn build_reduction(net: &OscillatorNetwork, part: &ClusterPartition) -> Result<IncidenceReduction> {
    build_reduction_seeded(net, part, 0)
}

/// Builds the spanning tree and incidence blocks.
///
/// Seed 0 is the canonical tree: when the three lowest-index nodes of a
/// cluster form a path `c0 - c1 - c2` the tree starts with those two edges
/// (columns `e2 - e1`, `e3 - e2` in local coordinates), then grows
/// breadth-first visiting neighbors in ascending order; otherwise it is
/// the breadth-first tree from `c0`. Inter-cluster tree edges are the
/// lexicographically first edges joining distinct components. A nonzero
/// seed shuffles neighbor and candidate order deterministically.
pub fn build_reduction_seeded(
    net: &OscillatorNetwork,
    part: &ClusterPartition,
    seed: u64,
) -> Result<IncidenceReduction> {
    check_structure(net, part)?;
    let n = net.len();
    let r = part.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut intra_edges = Vec::with_capacity(r);
    for (k, c) in part.clusters().iter().enumerate() {
        let in_cluster = |v: usize| part.cluster_of(v) == k;
        let mut tree: Vec<Edge> = Vec::with_capacity(c.len() - 1);
        let mut visited = BTreeSet::new();
        let mut queue = VecDeque::new();
        let path_seed = seed == 0
            && c.len() >= 3
            && net.weight(c[0], c[1]) > 0.0
            && net.weight(c[1], c[2]) > 0.0;
        if path_seed {
            tree.push(ordered(net, c[0], c[1]));
            tree.push(ordered(net, c[1], c[2]));
            for &v in &c[..3] {
                visited.insert(v);
                queue.push_back(v);
            }
        } else {
            visited.insert(c[0]);
            queue.push_back(c[0]);
        }
        while let Some(v) = queue.pop_front() {
            let mut nbrs: Vec<usize> = net.neighbors(v).filter(|&w| in_cluster(w)).collect();
            if seed != 0 {
                nbrs.shuffle(&mut rng);
            }
            for w in nbrs {
                if visited.insert(w) {
                    tree.push(ordered(net, v, w));
                    queue.push_back(w);
                }
            }
        }
        if visited.len() != c.len() {
            return Err(Error::DisconnectedCluster { cluster: k });
        }
        let tree_keys: BTreeSet<_> = tree.iter().map(Edge::key).collect();
        let chords = net
            .edges()
            .into_iter()
            .filter(|e| in_cluster(e.tail) && in_cluster(e.head) && !tree_keys.contains(&e.key()));
        tree.extend(chords);
        intra_edges.push(tree);
    }

    // Kruskal over clusters.
    let mut candidates: Vec<Edge> = net
        .edges()
        .into_iter()
        .filter(|e| part.cluster_of(e.tail) != part.cluster_of(e.head))
        .collect();
    if seed != 0 {
        candidates.shuffle(&mut rng);
    }
    let mut component: Vec<usize> = (0..r).collect();
    fn find(c: &mut [usize], mut k: usize) -> usize {
        while c[k] != k {
            c[k] = c[c[k]];
            k = c[k];
        }
        k
    }
    let mut tree_inter = Vec::with_capacity(r.saturating_sub(1));
    for e in &candidates {
        let a = find(&mut component, part.cluster_of(e.tail));
        let b = find(&mut component, part.cluster_of(e.head));
        if a != b {
            component[a] = b;
            tree_inter.push(*e);
        }
    }
    if tree_inter.len() + 1 != r {
        return Err(Error::DisconnectedQuotient);
    }
    let tree_keys: BTreeSet<_> = tree_inter.iter().map(Edge::key).collect();
    let mut inter_edges = tree_inter.clone();
    let mut rest: Vec<Edge> = candidates
        .into_iter()
        .filter(|e| !tree_keys.contains(&e.key()))
        .collect();
    rest.sort_by_key(Edge::key);
    inter_edges.extend(rest);

    let all_intra: Vec<Edge> = intra_edges.iter().flatten().copied().collect();
    let tree_intra: Vec<Edge> = intra_edges
        .iter()
        .zip(part.clusters())
        .flat_map(|(es, c)| es[..c.len() - 1].iter().copied())
        .collect();
    Ok(IncidenceReduction {
        n,
        clusters: part.clusters().to_vec(),
        b_intra: incidence(n, &all_intra),
        b_inter: incidence(n, &inter_edges),
        bh_intra: incidence(n, &tree_intra),
        bh_inter: incidence(n, &tree_inter),
        intra_edges,
        inter_edges,
    })
}

impl IncidenceReduction {
    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn cluster_count(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    /// Dimension of `x`, `n - r`.
    pub fn intra_dim(&self) -> usize {
        self.n - self.clusters.len()
    }

    /// Dimension of `y`, `r - 1`.
    pub fn inter_dim(&self) -> usize {
        self.clusters.len() - 1
    }

    /// Edges of cluster `k`: tree edges first, then chords.
    pub fn cluster_edges(&self, k: usize) -> &[Edge] {
        &self.intra_edges[k]
    }

    pub fn cluster_tree(&self, k: usize) -> &[Edge] {
        &self.intra_edges[k][..self.clusters[k].len() - 1]
    }

    pub fn intra_edges(&self) -> Vec<Edge> {
        self.intra_edges.iter().flatten().copied().collect()
    }

    pub fn inter_edges(&self) -> &[Edge] {
        &self.inter_edges
    }

    pub fn inter_tree(&self) -> &[Edge] {
        &self.inter_edges[..self.inter_dim()]
    }

    pub fn tree_edges(&self) -> Vec<Edge> {
        let mut t: Vec<Edge> = (0..self.cluster_count())
            .flat_map(|k| self.cluster_tree(k).iter().copied())
            .collect();
        t.extend_from_slice(self.inter_tree());
        t
    }

    pub fn b_intra(&self) -> &DMatrix<f64> {
        &self.b_intra
    }

    pub fn b_inter(&self) -> &DMatrix<f64> {
        &self.b_inter
    }

    pub fn bh_intra(&self) -> &DMatrix<f64> {
        &self.bh_intra
    }

    pub fn bh_inter(&self) -> &DMatrix<f64> {
        &self.bh_inter
    }

    pub fn b(&self) -> DMatrix<f64> {
        hcat(&self.b_intra, &self.b_inter)
    }

    pub fn bh(&self) -> DMatrix<f64> {
        hcat(&self.bh_intra, &self.bh_inter)
    }

    pub fn w_intra(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.b_intra.ncols(),
            self.intra_edges.iter().flatten().map(|e| e.weight),
        )
    }

    pub fn w_inter(&self) -> DVector<f64> {
        DVector::from_iterator(self.inter_edges.len(), self.inter_edges.iter().map(|e| e.weight))
    }

    /// Offset of cluster `k` inside `x` (rows of `B_hat_intra^T`).
    pub fn tree_offset(&self, k: usize) -> usize {
        self.clusters[..k].iter().map(|c| c.len() - 1).sum()
    }

    /// Offset of cluster `k` inside the intra-edge column list.
    pub fn edge_offset(&self, k: usize) -> usize {
        self.intra_edges[..k].iter().map(Vec::len).sum()
    }

    fn local(&self, k: usize, edges: &[Edge]) -> DMatrix<f64> {
        let c = &self.clusters[k];
        let idx = |v: usize| c.binary_search(&v).expect("edge inside cluster");
        let mut b = DMatrix::zeros(c.len(), edges.len());
        for (col, e) in edges.iter().enumerate() {
            b[(idx(e.tail), col)] = -1.0;
            b[(idx(e.head), col)] = 1.0;
        }
        b
    }

    /// `B_intra^(k)` in the cluster's local node ordering.
    pub fn local_b_intra(&self, k: usize) -> DMatrix<f64> {
        self.local(k, &self.intra_edges[k])
    }

    /// `B_hat_intra^(k)` in the cluster's local node ordering.
    pub fn local_bh_intra(&self, k: usize) -> DMatrix<f64> {
        self.local(k, self.cluster_tree(k))
    }

    /// Amplitude keys `(i, j)` feeding `U_1` and `U_2`, in column order.
    ///
    /// A key `(i, j)` names the dither on `a_ij` in the equation of node `i`.
    /// For the column `tail -> head`, `U_1` carries `u_{head,tail}` and `U_2`
    /// carries `u_{tail,head}`.
    pub fn dither_keys(&self) -> (Vec<(usize, usize)>, Vec<(usize, usize)>) {
        let edges = self.intra_edges();
        let dir1 = edges.iter().map(|e| (e.head, e.tail)).collect();
        let dir2 = edges.iter().map(|e| (e.tail, e.head)).collect();
        (dir1, dir2)
    }
}

fn hcat(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows(), a.ncols() + b.ncols());
    out.columns_mut(0, a.ncols()).copy_from(a);
    out.columns_mut(a.ncols(), b.ncols()).copy_from(b);
    out
}

/// True iff `B W B^T` reproduces the weighted Laplacian of `net`.
pub fn laplacian_consistency_check(red: &IncidenceReduction, net: &OscillatorNetwork) -> bool {
    if red.node_count() != net.len() {
        return false;
    }
    let b = red.b();
    let mut w = red.w_intra().as_slice().to_vec();
    w.extend_from_slice(red.w_inter().as_slice());
    let bw = &b * DMatrix::from_diagonal(&DVector::from_vec(w));
    let l = bw * b.transpose();
    max_abs(&(l - net.laplacian())) <= TOL_LAPLACIAN
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_pairs(freqs: [f64; 4]) -> (OscillatorNetwork, ClusterPartition) {
        let edges = [
            (0, 1, 1.0),
            (2, 3, 1.0),
            (0, 2, 1.0),
            (0, 3, 1.0),
            (1, 2, 1.0),
            (1, 3, 1.0),
        ];
        let net = OscillatorNetwork::from_edges(4, &edges, &freqs).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        (net, part)
    }

    #[test]
    fn all_ones_inter_block_passes() {
        let (net, part) = two_pairs([1.0, 1.0, 2.0, 2.0]);
        assert!(validate_invariance(&net, &part).unwrap().passes());
    }

    #[test]
    fn unequal_frequencies_reported_with_pair() {
        let net = OscillatorNetwork::from_edges(2, &[(0, 1, 1.0)], &[1.0, 2.0]).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1]], 2).unwrap();
        let report = validate_invariance(&net, &part).unwrap();
        assert_eq!(
            report.violations,
            vec![InvarianceViolation::FrequencyMismatch {
                cluster: 0,
                i: 0,
                j: 1,
                difference: 1.0
            }]
        );
    }

    #[test]
    fn row_sum_violation_detected() {
        let edges = [(0, 1, 1.0), (2, 3, 1.0), (0, 2, 1.0)];
        let net = OscillatorNetwork::from_edges(4, &edges, &[0.0; 4]).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        let report = validate_invariance(&net, &part).unwrap();
        assert!(!report.passes());
        assert!(report
            .violations
            .iter()
            .all(|v| matches!(v, InvarianceViolation::RowSumMismatch { .. })));
    }

    #[test]
    fn structural_errors_are_distinct() {
        assert!(matches!(
            ClusterPartition::new(vec![vec![0], vec![1, 2]], 3),
            Err(Error::InvalidPartition(_))
        ));
        assert!(matches!(
            ClusterPartition::new(vec![vec![], vec![0, 1]], 2),
            Err(Error::InvalidPartition(_))
        ));
        let net = OscillatorNetwork::from_edges(4, &[(0, 2, 1.0), (1, 3, 1.0)], &[0.0; 4]).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        assert!(matches!(
            validate_invariance(&net, &part),
            Err(Error::DisconnectedCluster { cluster: 0 })
        ));
    }

    #[test]
    fn invalid_weights_rejected() {
        let w = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, 0.0]);
        assert!(OscillatorNetwork::new(w, DVector::zeros(2)).is_err());
        assert!(OscillatorNetwork::from_edges(2, &[(0, 1, -1.0)], &[0.0, 0.0]).is_err());
        assert!(OscillatorNetwork::from_edges(2, &[(0, 1, 1.0), (1, 0, 1.0)], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn path_tree_is_the_graph() {
        let net = OscillatorNetwork::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)], &[0.0; 3]).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1, 2]], 3).unwrap();
        let red = build_reduction(&net, &part).unwrap();
        assert_eq!(red.bh(), red.b());
        assert_eq!(red.bh().ncols(), 2);
    }

    #[test]
    fn triangle_tree_follows_local_path() {
        let edges = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)];
        let net = OscillatorNetwork::from_edges(3, &edges, &[0.0; 3]).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1, 2]], 3).unwrap();
        let red = build_reduction(&net, &part).unwrap();
        let keys: Vec<_> = red.cluster_edges(0).iter().map(Edge::key).collect();
        assert_eq!(keys, vec![(0, 1), (1, 2), (0, 2)]);
        let bh = red.local_bh_intra(0);
        assert_eq!(bh.column(0).as_slice(), &[-1.0, 1.0, 0.0]);
        assert_eq!(bh.column(1).as_slice(), &[0.0, -1.0, 1.0]);
    }

    #[test]
    fn k4_k3_edge_counts() {
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                edges.push((i, j, 1.0));
            }
        }
        edges.extend([(4, 5, 1.0), (5, 6, 1.0), (4, 6, 1.0), (0, 4, 0.5), (1, 5, 0.5)]);
        let net = OscillatorNetwork::from_edges(7, &edges, &[0.0; 7]).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1, 2, 3], vec![4, 5, 6]], 7).unwrap();
        let red = build_reduction(&net, &part).unwrap();
        assert_eq!(red.bh_intra().ncols(), 5);
        assert_eq!(red.bh_inter().ncols(), 1);
        assert_eq!(red.bh().ncols(), 6);
        assert_eq!(red.b_intra().ncols(), 9);
        assert_eq!(red.b_inter().ncols(), 2);
    }

    #[test]
    fn disconnected_quotient_rejected() {
        let net = OscillatorNetwork::from_edges(4, &[(0, 1, 1.0), (2, 3, 1.0)], &[0.0; 4]).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        assert!(matches!(build_reduction(&net, &part), Err(Error::DisconnectedQuotient)));
    }

    #[test]
    fn laplacian_single_edge_and_triangle() {
        let net = OscillatorNetwork::from_edges(2, &[(0, 1, 2.5)], &[0.0; 2]).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1]], 2).unwrap();
        let red = build_reduction(&net, &part).unwrap();
        assert!(laplacian_consistency_check(&red, &net));
        assert_eq!(net.laplacian(), DMatrix::from_row_slice(2, 2, &[2.5, -2.5, -2.5, 2.5]));

        let tri = OscillatorNetwork::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], &[0.0; 3]).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1, 2]], 3).unwrap();
        let red = build_reduction(&tri, &part).unwrap();
        assert!(laplacian_consistency_check(&red, &tri));
        let expected = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, -1.0, -1.0, 2.0, -1.0, -1.0, -1.0, 2.0]);
        assert_eq!(tri.laplacian(), expected);
    }

    #[test]
    fn seeded_trees_stay_valid() {
        let edges = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (2, 3, 1.0), (0, 3, 1.0)];
        let net = OscillatorNetwork::from_edges(4, &edges, &[0.0; 4]).unwrap();
        let part = ClusterPartition::new(vec![vec![0, 1, 2, 3]], 4).unwrap();
        for seed in 0..10 {
            let red = build_reduction_seeded(&net, &part, seed).unwrap();
            assert_eq!(red.bh().ncols(), 3);
            assert_eq!(red.bh().rank(1e-9), 3);
        }
    }
}
