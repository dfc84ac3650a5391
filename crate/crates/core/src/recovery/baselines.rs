//! Combinatorial baselines that estimate the number of blocks as a
//! by-product: empirical transition rates, persistent links, and the
//! enemies-of-my-enemy rule.

use petgraph::unionfind::UnionFind;

use super::{RecoveryError, Result};
use crate::markov::BinaryMarkovChainSpec;
use crate::sbm::{Labelling, SnapshotArray};

/// Output of the component-based baselines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentLabelling {
    pub labelling: Labelling,
    /// Estimated number of blocks; 0 when no component qualified.
    pub k_hat: usize,
}

/// Per pair transition counts `n_ab`, indexed `[a][b]`, nonzero symbols read as 1.
pub fn transition_counts(array: &SnapshotArray) -> Vec<[[u32; 2]; 2]> {
    (0..array.num_pairs())
        .map(|p| {
            let mut c = [[0u32; 2]; 2];
            for w in array.pattern_by_index(p).windows(2) {
                c[usize::from(w[0] != 0)][usize::from(w[1] != 0)] += 1;
            }
            c
        })
        .collect()
}

/// Labels components in order of their smallest member. Components with at
/// most `min_exclusive` members get block 0 and do not count toward `K̂`.
fn components(uf: &UnionFind<usize>, n: usize, min_exclusive: usize) -> ComponentLabelling {
    let mut size = vec![0usize; n];
    for i in 0..n {
        size[uf.find(i)] += 1;
    }
    let mut block = vec![usize::MAX; n];
    let mut k_hat = 0;
    let mut labels = vec![0; n];
    for i in 0..n {
        let root = uf.find(i);
        if size[root] <= min_exclusive {
            continue;
        }
        if block[root] == usize::MAX {
            block[root] = k_hat;
            k_hat += 1;
        }
        labels[i] = block[root];
    }
    let labelling = Labelling::new(labels, k_hat.max(1)).expect("component ids lie in 0..k_hat");
    ComponentLabelling { labelling, k_hat }
}

/// Links `i` and `j` when some empirical transition rate of their pattern is
/// within half the intra/inter gap of the intra value, and returns the
/// connected components. Transitions with `P_ab = Q_ab` carry no evidence and
/// are ignored, as are start states never visited by the pair.
pub fn alg4_transition_rates(array: &SnapshotArray, p: &BinaryMarkovChainSpec, q: &BinaryMarkovChainSpec) -> Result<ComponentLabelling> {
    if array.t() < 2 {
        return Err(RecoveryError::TooFewSnapshots { need: 2, got: array.t() });
    }
    let informative: Vec<(usize, usize, f64, f64)> = (0..2)
        .flat_map(|a| (0..2).map(move |b| (a, b)))
        .map(|(a, b)| (a, b, p.transition(a, b), q.transition(a, b)))
        .filter(|&(_, _, pab, qab)| pab != qab)
        .collect();
    if informative.is_empty() {
        return Err(RecoveryError::IdenticalKernels);
    }
    let n = array.n();
    let mut uf = UnionFind::new(n);
    let counts = transition_counts(array);
    let mut idx = 0;
    for i in 0..n {
        for j in i + 1..n {
            let c = &counts[idx];
            idx += 1;
            let close = informative.iter().any(|&(a, b, pab, qab)| {
                let na = c[a][0] + c[a][1];
                na > 0 && (c[a][b] as f64 / na as f64 - pab).abs() <= 0.5 * (pab - qab).abs()
            });
            if close {
                uf.union(i, j);
            }
        }
    }
    Ok(components(&uf, n, 0))
}

/// Links pairs that interact in every snapshot and keeps components larger
/// than `√N` as blocks; every other node goes to block 0.
pub fn alg5_best_friends(array: &SnapshotArray) -> ComponentLabelling {
    let n = array.n();
    let mut uf = UnionFind::new(n);
    for (i, j, pattern) in array.pairs() {
        if pattern.iter().all(|&x| x != 0) {
            uf.union(i, j);
        }
    }
    components(&uf, n, (n as f64).sqrt().floor() as usize)
}

/// Pairs whose pattern changes over time are enemies; two nodes are friends
/// when they share an enemy. Returns the components of the friendship graph.
pub fn alg6_enemy(array: &SnapshotArray) -> ComponentLabelling {
    let n = array.n();
    let mut enemies: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, j, pattern) in array.pairs() {
        // in the union of the snapshot graphs but not in their intersection
        let any = pattern.iter().any(|&x| x != 0);
        let all = pattern.iter().all(|&x| x != 0);
        if any && !all {
            enemies[i].push(j);
            enemies[j].push(i);
        }
    }
    let mut uf = UnionFind::new(n);
    for list in &enemies {
        for w in list.windows(2) {
            uf.union(w[0], w[1]);
        }
    }
    components(&uf, n, 0)
}
