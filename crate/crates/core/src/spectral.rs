//! Spectral clustering of the binarized interaction graph: degree trimming,
//! dominant eigenvectors of the adjacency matrix, then k-means on the
//! embedding rows.

use crate::kmeans::{kmeans, KMeansConfig};
use crate::linalg::{top_eigenpairs, EigenConfig, EigenError, SparseSym};
use crate::sbm::{derive_seed, Labelling, SnapshotArray};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    pub k: usize,
    /// Nodes with degree above `trim_factor · K · d̄` are zeroed out.
    pub trim_factor: f64,
    pub kmeans_restarts: usize,
    pub kmeans_iters: usize,
    pub seed: u64,
    pub eigen_tol: f64,
    pub eigen_max_iter: usize,
}

impl SpectralConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { k, trim_factor: 40.0, kmeans_restarts: 10, kmeans_iters: 100, seed, eigen_tol: 1e-8, eigen_max_iter: 1000 }
    }
}

/// 0/1 adjacency with an edge wherever the pair's pattern is not all zero.
pub fn binarize(array: &SnapshotArray) -> SparseSym {
    let entries: Vec<(usize, usize, f64)> =
        array.pairs().filter(|(_, _, p)| p.iter().any(|&x| x != 0)).map(|(i, j, _)| (i, j, 1.0)).collect();
    SparseSym::from_entries(array.n(), &entries)
}

/// Weighted graph counting the snapshots in which each pair interacts.
pub fn aggregate_graph(array: &SnapshotArray) -> SparseSym {
    let entries: Vec<(usize, usize, f64)> = array
        .pairs()
        .filter_map(|(i, j, p)| {
            let c = p.iter().filter(|&&x| x != 0).count();
            (c > 0).then_some((i, j, c as f64))
        })
        .collect();
    SparseSym::from_entries(array.n(), &entries)
}

/// `Σ_t (A_t² − D_t)`: off-diagonal common-neighbour counts summed over
/// snapshots. The diagonal of each term vanishes.
pub fn squared_adjacency_graph(array: &SnapshotArray) -> SparseSym {
    let n = array.n();
    let mut acc = vec![0.0; n * n];
    let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..array.t() {
        neighbours.iter_mut().for_each(Vec::clear);
        for (i, j, p) in array.pairs() {
            if p[s] != 0 {
                neighbours[i].push(j);
                neighbours[j].push(i);
            }
        }
        for list in &neighbours {
            for (a, &i) in list.iter().enumerate() {
                for &j in &list[a + 1..] {
                    let (lo, hi) = (i.min(j), i.max(j));
                    acc[lo * n + hi] += 1.0;
                }
            }
        }
    }
    let mut entries = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if acc[i * n + j] != 0.0 {
                entries.push((i, j, acc[i * n + j]));
            }
        }
    }
    SparseSym::from_entries(n, &entries)
}

/// Nodes whose degree exceeds `trim_factor · K · d̄`.
pub fn trimmed_nodes(adj: &SparseSym, k: usize, trim_factor: f64) -> Vec<bool> {
    let n = adj.n();
    if n == 0 {
        return vec![];
    }
    let degrees: Vec<f64> = (0..n).map(|i| adj.degree(i)).collect();
    let mean = degrees.iter().sum::<f64>() / n as f64;
    let cut = trim_factor * k as f64 * mean;
    degrees.iter().map(|&d| d > cut).collect()
}

pub fn spectral_cluster(adj: &SparseSym, config: &SpectralConfig) -> Result<Labelling, EigenError> {
    let n = adj.n();
    let k = config.k.max(1);
    if k == 1 || n == 0 || adj.nnz() == 0 {
        return Ok(Labelling::constant(n, k));
    }
    let drop = trimmed_nodes(adj, k, config.trim_factor);
    let trimmed = if drop.iter().any(|&d| d) { adj.zero_out(&drop) } else { adj.clone() };
    let eig_cfg = EigenConfig { tol: config.eigen_tol, max_iter: config.eigen_max_iter, seed: derive_seed(config.seed, 1) };
    let pairs = top_eigenpairs(&trimmed, k, &eig_cfg)?;
    // rows of U·|Λ|, so weak directions carry less weight
    let points: Vec<Vec<f64>> = (0..n).map(|i| pairs.values.iter().zip(&pairs.vectors).map(|(l, v)| l.abs() * v[i]).collect()).collect();
    let km = kmeans(
        &points,
        &KMeansConfig { k, restarts: config.kmeans_restarts, max_iter: config.kmeans_iters, seed: derive_seed(config.seed, 2) },
    );
    Ok(Labelling::new(km.assignment, k).expect("k-means labels lie in 0..k"))
}

/// Spectral clustering of the graph without node `skip`. The result is
/// indexed by the remaining nodes in increasing order.
pub fn leave_one_out_cluster(adj: &SparseSym, skip: usize, config: &SpectralConfig) -> Result<Labelling, EigenError> {
    let minor = adj.without_node(skip);
    let cfg = SpectralConfig { seed: derive_seed(config.seed, 0x1000 + skip as u64), ..*config };
    spectral_cluster(&minor, &cfg)
}
