//! Seeded random instances satisfying the invariance conditions.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::Result;
use crate::network::{ClusterPartition, OscillatorNetwork};
use crate::vibration::VibrationSchedule;

#[derive(Clone, Debug)]
pub struct RandomNetworkSpec {
    pub max_nodes: usize,
    pub min_clusters: usize,
    pub max_clusters: usize,
    /// Probability of each non-tree intra-cluster edge.
    pub intra_density: f64,
    pub intra_weight: (f64, f64),
    pub inter_weight: (f64, f64),
    pub frequency_range: (f64, f64),
}

impl Default for RandomNetworkSpec {
    fn default() -> Self {
        Self {
            max_nodes: 30,
            min_clusters: 2,
            max_clusters: 5,
            intra_density: 0.4,
            intra_weight: (0.2, 1.5),
            inter_weight: (0.02, 0.4),
            frequency_range: (-2.0, 2.0),
        }
    }
}

/// Random clustered network: connected random intra graphs, equal
/// frequencies per cluster, and inter-cluster blocks that are either
/// uniform or (for equal-size clusters) a weighted perfect matching, so
/// inter-cluster row sums are equal by construction. Node labels are
/// shuffled so clusters are not contiguous.
pub fn random_clustered_network<R: Rng>(rng: &mut R, spec: &RandomNetworkSpec) -> Result<(OscillatorNetwork, ClusterPartition)> {
    let max_r = spec.max_clusters.min(spec.max_nodes / 2).max(1);
    let r = rng.gen_range(spec.min_clusters.min(max_r)..=max_r);
    let mut sizes = vec![2usize; r];
    let extra = rng.gen_range(0..=spec.max_nodes - 2 * r);
    for _ in 0..extra {
        let k = rng.gen_range(0..r);
        sizes[k] += 1;
    }
    let n: usize = sizes.iter().sum();
    let mut labels: Vec<usize> = (0..n).collect();
    labels.shuffle(rng);
    let mut clusters = Vec::with_capacity(r);
    let mut next = 0;
    for &s in &sizes {
        clusters.push(labels[next..next + s].to_vec());
        next += s;
    }

    let mut edges = Vec::new();
    let weight = |rng: &mut R, range: (f64, f64)| rng.gen_range(range.0..range.1);
    for c in &clusters {
        for i in 1..c.len() {
            let j = rng.gen_range(0..i);
            edges.push((c[i], c[j], weight(rng, spec.intra_weight)));
        }
        for i in 0..c.len() {
            for j in 0..i {
                let in_tree = edges.iter().any(|&(a, b, _)| (a, b) == (c[i], c[j]) || (a, b) == (c[j], c[i]));
                if !in_tree && rng.gen_bool(spec.intra_density) {
                    edges.push((c[i], c[j], weight(rng, spec.intra_weight)));
                }
            }
        }
    }

    let mut linked = vec![false; r * r];
    for k in 1..r {
        let l = rng.gen_range(0..k);
        linked[k * r + l] = true;
    }
    for k in 0..r {
        for l in 0..k {
            if !linked[k * r + l] && !rng.gen_bool(0.5) {
                continue;
            }
            let c = weight(rng, spec.inter_weight);
            let (a, b) = (&clusters[k], &clusters[l]);
            if a.len() == b.len() && rng.gen_bool(0.5) {
                let mut perm = b.clone();
                perm.shuffle(rng);
                for (&i, &j) in a.iter().zip(&perm) {
                    edges.push((i, j, c));
                }
            } else {
                let w = c / (a.len() * b.len()) as f64;
                for &i in a {
                    for &j in b {
                        edges.push((i, j, w));
                    }
                }
            }
        }
    }

    let mut freqs = vec![0.0; n];
    for c in &clusters {
        let w = weight(rng, spec.frequency_range);
        for &i in c {
            freqs[i] = w;
        }
    }
    let net = OscillatorNetwork::from_edges(n, &edges, &freqs)?;
    let part = ClusterPartition::new(clusters, n)?;
    Ok((net, part))
}

/// Random amplitudes in `[-max_amplitude, max_amplitude]` on a random
/// subset of directed intra-cluster edges.
pub fn random_schedule<R: Rng>(
    rng: &mut R,
    net: &OscillatorNetwork,
    part: &ClusterPartition,
    epsilon: f64,
    max_amplitude: f64,
    density: f64,
) -> Result<VibrationSchedule> {
    let mut s = VibrationSchedule::new(epsilon)?;
    for e in net.edges() {
        if part.cluster_of(e.tail) != part.cluster_of(e.head) {
            continue;
        }
        for (i, j) in [(e.tail, e.head), (e.head, e.tail)] {
            if rng.gen_bool(density) {
                s.set(i, j, rng.gen_range(-max_amplitude..=max_amplitude));
            }
        }
    }
    Ok(s)
}

/// Clusters given by `sizes`, each a complete graph with uniform weight,
/// joined by uniform all-to-all blocks of total weight `inter`.
pub fn complete_uniform_network(sizes: &[usize], intra: f64, inter: f64, freqs: &[f64]) -> Result<(OscillatorNetwork, ClusterPartition)> {
    let n: usize = sizes.iter().sum();
    let mut clusters = Vec::new();
    let mut start = 0;
    for &s in sizes {
        clusters.push((start..start + s).collect::<Vec<_>>());
        start += s;
    }
    let mut edges = Vec::new();
    for (k, c) in clusters.iter().enumerate() {
        for (a, &i) in c.iter().enumerate() {
            for &j in &c[a + 1..] {
                edges.push((i, j, intra));
            }
        }
        for d in &clusters[k + 1..] {
            let w = inter / (c.len() * d.len()) as f64;
            if w > 0.0 {
                for &i in c {
                    for &j in d {
                        edges.push((i, j, w));
                    }
                }
            }
        }
    }
    let mut omega = vec![0.0; n];
    for (k, c) in clusters.iter().enumerate() {
        for &i in c {
            omega[i] = freqs[k % freqs.len().max(1)];
        }
    }
    let net = OscillatorNetwork::from_edges(n, &edges, &omega)?;
    let part = ClusterPartition::new(clusters, n)?;
    Ok((net, part))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_reduction, validate_invariance};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_instances_are_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (net, part) = random_clustered_network(&mut rng, &RandomNetworkSpec::default()).unwrap();
            assert!(net.len() <= 30);
            assert!(validate_invariance(&net, &part).unwrap().passes());
            assert!(build_reduction(&net, &part).is_ok());
        }
    }

    #[test]
    fn schedules_stay_on_intra_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (net, part) = random_clustered_network(&mut rng, &RandomNetworkSpec::default()).unwrap();
        let s = random_schedule(&mut rng, &net, &part, 0.1, 2.0, 0.5).unwrap();
        assert!(s.validate(&net, &part).is_ok());
    }
}
