//! Likelihood refinement of a spectral initializer and the exhaustive
//! maximum likelihood oracle.

use rayon::prelude::*;

use super::{argmax_with_tie, saturate, RecoveryError, Result};
use crate::sbm::{InteractionKernel, InteractionLaw, Labelling, SnapshotArray};
use crate::spectral::{binarize, leave_one_out_cluster, spectral_cluster, SpectralConfig};

/// Largest number of labellings `mle_brute_force` will enumerate.
pub const MLE_BUDGET: f64 = 1e6;

/// Dense symmetric matrix of pairwise `log f(X_ij) / g(X_ij)`, zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LlrMatrix {
    n: usize,
    data: Vec<f64>,
}

impl LlrMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    /// `h_i(k) = Σ_{j ≠ i, σ(j) = k} M_ij` for every `k`.
    pub fn block_scores(&self, i: usize, labels: &[usize], k: usize) -> Vec<f64> {
        let mut h = vec![0.0; k];
        for (j, (&m, &l)) in self.row(i).iter().zip(labels).enumerate() {
            if j != i {
                h[l] += m;
            }
        }
        h
    }
}

/// Pairwise log-likelihood ratios of the full patterns, saturated at ±700.
pub fn llr_matrix<L: InteractionLaw>(array: &SnapshotArray, kernel: &InteractionKernel<L>) -> LlrMatrix {
    let n = array.n();
    let mut data = vec![0.0; n * n];
    data.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
        for (j, slot) in row.iter_mut().enumerate() {
            if j != i {
                *slot = saturate(kernel.log_ratio(array.pattern(i, j)));
            }
        }
    });
    LlrMatrix { n, data }
}

/// One sweep of node-wise likelihood maximization against `init`; ties go to
/// the lowest block index.
pub fn refine(llr: &LlrMatrix, init: &Labelling) -> Labelling {
    let k = init.k();
    let labels: Vec<usize> = (0..llr.n()).into_par_iter().map(|i| argmax_with_tie(&llr.block_scores(i, init.labels(), k), None)).collect();
    Labelling::new(labels, k).expect("argmax lies in 0..k")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Alg1Mode {
    /// `N` leave-one-out spectral runs followed by a consensus step.
    Faithful,
    /// One spectral run and one refinement sweep.
    #[default]
    Fast,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Alg1Config {
    pub mode: Alg1Mode,
    pub spectral: SpectralConfig,
}

impl Alg1Config {
    pub fn new(k: usize, seed: u64) -> Self {
        Self { mode: Alg1Mode::Fast, spectral: SpectralConfig::new(k, seed) }
    }
}

/// Spectral clustering of the binarized data refined by the full-pattern
/// likelihood ratio of `kernel`.
pub fn alg1_recover<L: InteractionLaw>(
    array: &SnapshotArray,
    kernel: &InteractionKernel<L>,
    k: usize,
    config: &Alg1Config,
) -> Result<Labelling> {
    let n = array.n();
    if k == 0 || k > n.max(1) {
        return Err(crate::sbm::SbmError::InvalidBlockCount { k, n }.into());
    }
    if k == 1 {
        return Ok(Labelling::constant(n, 1));
    }
    let adj = binarize(array);
    let llr = llr_matrix(array, kernel);
    let spectral = SpectralConfig { k, ..config.spectral };
    match config.mode {
        Alg1Mode::Fast => {
            let init = spectral_cluster(&adj, &spectral)?;
            Ok(refine(&llr, &init))
        }
        Alg1Mode::Faithful => {
            let per_node: Vec<Vec<usize>> = (0..n)
                .into_par_iter()
                .map(|i| -> Result<Vec<usize>> {
                    let partial = leave_one_out_cluster(&adj, i, &spectral)?;
                    let mut full = Vec::with_capacity(n);
                    full.extend_from_slice(&partial.labels()[..i]);
                    full.push(0);
                    full.extend_from_slice(&partial.labels()[i..]);
                    full[i] = argmax_with_tie(&llr.block_scores(i, &full, k), None);
                    Ok(full)
                })
                .collect::<Result<_>>()?;
            Ok(consensus(&per_node, k))
        }
    }
}

/// Aligns node `i`'s own label in labelling `i` to the baseline labelling of
/// node 0 by maximal overlap of the corresponding blocks.
fn consensus(per_node: &[Vec<usize>], k: usize) -> Labelling {
    let n = per_node.len();
    let base = &per_node[0];
    let mut labels = vec![0; n];
    if n > 0 {
        labels[0] = base[0];
    }
    for i in 1..n {
        let own = per_node[i][i];
        let mut overlap = vec![0.0; k];
        for (j, &l) in per_node[i].iter().enumerate() {
            if l == own {
                overlap[base[j]] += 1.0;
            }
        }
        labels[i] = argmax_with_tie(&overlap, None);
    }
    Labelling::new(labels, k).expect("labels lie in 0..k")
}

/// `Σ_{i<j} log P_σ(X_ij)` under the homogeneous kernel.
pub fn log_likelihood<L: InteractionLaw>(array: &SnapshotArray, kernel: &InteractionKernel<L>, sigma: &Labelling) -> Result<f64> {
    if sigma.n() != array.n() {
        return Err(RecoveryError::SizeMismatch { labelling: sigma.n(), data: array.n() });
    }
    Ok(array.pairs().map(|(i, j, p)| kernel.law(sigma.get(i) == sigma.get(j)).log_prob(p)).sum())
}

/// Exhaustive maximizer of the likelihood over all `K^N` labellings, scanned
/// in lexicographic order so ties resolve to the smallest labelling.
pub fn mle_brute_force<L: InteractionLaw>(array: &SnapshotArray, kernel: &InteractionKernel<L>, k: usize) -> Result<Labelling> {
    let n = array.n();
    if k == 0 {
        return Err(crate::sbm::SbmError::InvalidBlockCount { k, n }.into());
    }
    let states = (k as f64).powi(n as i32);
    if states > MLE_BUDGET {
        return Err(RecoveryError::BudgetExceeded { states, budget: MLE_BUDGET });
    }
    // log P_σ = Σ log g + Σ_{same block} log f/g, so only the second sum matters
    let pairs: Vec<(usize, usize, f64)> = array.pairs().map(|(i, j, p)| (i, j, saturate(kernel.log_ratio(p)))).collect();
    let mut sigma = vec![0usize; n];
    let mut best = (f64::NEG_INFINITY, sigma.clone());
    loop {
        let score: f64 = pairs.iter().filter(|(i, j, _)| sigma[*i] == sigma[*j]).map(|p| p.2).sum();
        if score > best.0 {
            best = (score, sigma.clone());
        }
        // odometer with the last node as the fastest digit
        let Some(pos) = (0..n).rev().find(|&p| sigma[p] + 1 < k) else { break };
        sigma[pos] += 1;
        sigma[pos + 1..].iter_mut().for_each(|s| *s = 0);
    }
    Ok(Labelling::new(best.1, k)?)
}
