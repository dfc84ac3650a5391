//! Labellings, interaction laws and synthetic snapshot generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::divergence::FiniteDistribution;
use crate::markov::BinaryMarkovChainSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SbmError {
    #[error("label {label} at node {node} outside 0..{k}")]
    LabelOutOfRange { node: usize, label: usize, k: usize },
    #[error("need 1 <= K <= N, got K = {k}, N = {n}")]
    InvalidBlockCount { k: usize, n: usize },
    #[error("block weights must be finite, non-negative and not all zero")]
    DegenerateWeights,
    #[error("intra and inter laws use different interaction spaces")]
    KernelMismatch,
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("arrays have different shapes")]
    ShapeMismatch,
}

pub type Result<T> = std::result::Result<T, SbmError>;

/// SplitMix64 finalizer; derives independent seeds from a master seed and a tag.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Generator for one keyed substream of a master seed.
pub fn keyed_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Block assignment of `N` nodes into `K` blocks, stored 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Labelling {
    labels: Vec<usize>,
    k: usize,
}

impl Labelling {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(SbmError::InvalidBlockCount { k, n: labels.len() });
        }
        if let Some((node, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
            return Err(SbmError::LabelOutOfRange { node, label, k });
        }
        Ok(Self { labels, k })
    }

    /// Labelling with `K` equal to one more than the largest label.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(1, |m| m + 1);
        Self { labels, k }
    }

    pub fn constant(n: usize, k: usize) -> Self {
        Self { labels: vec![0; n], k: k.max(1) }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn get(&self, node: usize) -> usize {
        self.labels[node]
    }

    pub fn set(&mut self, node: usize, label: usize) {
        assert!(label < self.k, "label {label} outside 0..{}", self.k);
        self.labels[node] = label;
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &l in &self.labels {
            sizes[l] += 1;
        }
        sizes
    }

    /// Relabels through `perm`, i.e. node `i` gets `perm[σ(i)]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let k = self.k.max(perm.iter().max().map_or(0, |m| m + 1));
        Self { labels: self.labels.iter().map(|&l| perm[l]).collect(), k }
    }

    /// Same labelling with a larger label range.
    pub fn with_k(&self, k: usize) -> Result<Self> {
        Self::new(self.labels.clone(), k)
    }
}

/// Prior on block labels.
#[derive(Debug, Clone, PartialEq)]
pub enum LabelPrior {
    Uniform,
    Weights(Vec<f64>),
}

/// Draws labels i.i.d. from `prior`.
pub fn sample_labelling(n: usize, k: usize, prior: &LabelPrior, seed: u64) -> Result<Labelling> {
    if k == 0 || k > n.max(1) {
        return Err(SbmError::InvalidBlockCount { k, n });
    }
    let mut rng = keyed_rng(derive_seed(seed, 0x6c61_6265_6c73), 0);
    let labels = match prior {
        LabelPrior::Uniform => (0..n).map(|_| rng.random_range(0..k)).collect(),
        LabelPrior::Weights(w) => {
            if w.len() != k || w.iter().any(|x| !x.is_finite() || *x < 0.0) {
                return Err(SbmError::DegenerateWeights);
            }
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                return Err(SbmError::DegenerateWeights);
            }
            let dist = FiniteDistribution::new(w.iter().map(|x| x / total).collect()).map_err(|_| SbmError::DegenerateWeights)?;
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        }
    };
    Labelling::new(labels, k)
}

/// Law of one pair's interaction pattern over `T` snapshots.
pub trait InteractionLaw: Sync {
    fn horizon(&self) -> usize;
    /// Number of symbols per snapshot.
    fn alphabet(&self) -> usize;
    fn log_prob(&self, pattern: &[u8]) -> f64;
    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [u8]);
}

/// Binary Markov pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovLaw {
    pub chain: BinaryMarkovChainSpec,
    pub t: usize,
}

impl InteractionLaw for MarkovLaw {
    fn horizon(&self) -> usize {
        self.t
    }

    fn alphabet(&self) -> usize {
        2
    }

    fn log_prob(&self, pattern: &[u8]) -> f64 {
        self.chain.log_path_prob(pattern)
    }

    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [u8]) {
        let mut state = u8::from(rng.random::<f64>() < self.chain.mu1);
        for (s, slot) in out.iter_mut().enumerate() {
            if s > 0 {
                let up = if state == 1 { self.chain.p11 } else { self.chain.p01 };
                state = u8::from(rng.random::<f64>() < up);
            }
            *slot = state;
        }
    }
}

/// Symbols drawn i.i.d. across snapshots.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalLaw {
    pub dist: FiniteDistribution,
    pub t: usize,
}

impl InteractionLaw for CategoricalLaw {
    fn horizon(&self) -> usize {
        self.t
    }

    fn alphabet(&self) -> usize {
        self.dist.len()
    }

    fn log_prob(&self, pattern: &[u8]) -> f64 {
        pattern.iter().map(|&s| self.dist.log_prob(s as usize)).sum()
    }

    fn sample_into(&self, rng: &mut ChaCha8Rng, out: &mut [u8]) {
        for slot in out.iter_mut() {
            *slot = self.dist.sample(rng) as u8;
        }
    }
}

/// Homogeneous kernel: `intra` between nodes of one block, `inter` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionKernel<L> {
    pub intra: L,
    pub inter: L,
}

impl<L: InteractionLaw> InteractionKernel<L> {
    pub fn new(intra: L, inter: L) -> Result<Self> {
        if intra.horizon() != inter.horizon() || intra.alphabet() != inter.alphabet() {
            return Err(SbmError::KernelMismatch);
        }
        Ok(Self { intra, inter })
    }

    pub fn law(&self, same_block: bool) -> &L {
        if same_block {
            &self.intra
        } else {
            &self.inter
        }
    }

    /// `log f(x) − log g(x)`.
    pub fn log_ratio(&self, pattern: &[u8]) -> f64 {
        self.intra.log_prob(pattern) - self.inter.log_prob(pattern)
    }
}

/// Index of the unordered pair `i < j` among the `N(N−1)/2` pairs.
#[inline]
pub fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * (2 * n - i - 1) / 2 + (j - i - 1)
}

/// Symmetric interaction tensor with zero diagonal. Each unordered pair
/// stores its `T` symbols contiguously.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotArray {
    n: usize,
    t: usize,
    alphabet: usize,
    data: Vec<u8>,
}

impl SnapshotArray {
    pub fn zeros(n: usize, t: usize, alphabet: usize) -> Self {
        let pairs = n * n.saturating_sub(1) / 2;
        Self { n, t, alphabet: alphabet.max(2), data: vec![0; pairs * t] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn num_pairs(&self) -> usize {
        self.n * self.n.saturating_sub(1) / 2
    }

    /// Pattern of pair `{i, j}`; the all-zero pattern when `i == j`.
    pub fn pattern(&self, i: usize, j: usize) -> &[u8] {
        if i == j {
            return &ZEROS[..self.t.min(ZEROS.len())];
        }
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let p = pair_index(self.n, a, b);
        &self.data[p * self.t..(p + 1) * self.t]
    }

    pub fn pattern_by_index(&self, p: usize) -> &[u8] {
        &self.data[p * self.t..(p + 1) * self.t]
    }

    /// Symbol at snapshot `s` (0-based) for nodes `i`, `j`.
    pub fn get(&self, s: usize, i: usize, j: usize) -> u8 {
        if i == j {
            return 0;
        }
        self.pattern(i, j)[s]
    }

    /// Sets both `(i, j)` and `(j, i)`. Panics on the diagonal.
    pub fn set(&mut self, s: usize, i: usize, j: usize, value: u8) {
        assert!(i != j, "diagonal entries are fixed at zero");
        assert!((value as usize) < self.alphabet, "symbol {value} outside the alphabet");
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        let p = pair_index(self.n, a, b);
        self.data[p * self.t + s] = value;
    }

    /// Iterates `(i, j, pattern)` over pairs `i < j`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, &[u8])> + '_ {
        let n = self.n;
        (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j, self.pattern(i, j))))
    }

    /// Number of nonzero entries above the diagonal, over all snapshots.
    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&x| x != 0).count()
    }

    /// First `t` snapshots.
    pub fn truncated(&self, t: usize) -> Self {
        let t = t.min(self.t);
        let mut out = Self::zeros(self.n, t, self.alphabet);
        for p in 0..self.num_pairs() {
            out.data[p * t..(p + 1) * t].copy_from_slice(&self.pattern_by_index(p)[..t]);
        }
        out
    }

    /// Array whose node `perm[i]` plays the role of node `i` here.
    pub fn relabel_nodes(&self, perm: &[usize]) -> Self {
        let mut out = Self::zeros(self.n, self.t, self.alphabet);
        for (i, j, pattern) in self.pairs() {
            let (a, b) = (perm[i].min(perm[j]), perm[i].max(perm[j]));
            let p = pair_index(self.n, a, b);
            out.data[p * self.t..(p + 1) * self.t].copy_from_slice(pattern);
        }
        out
    }

    /// Mutable per-row views: row `i` holds the patterns of pairs `(i, j)`, `j > i`.
    fn rows_mut(&mut self) -> Vec<(usize, &mut [u8])> {
        let mut rows = Vec::with_capacity(self.n);
        let mut rest: &mut [u8] = &mut self.data;
        for i in 0..self.n {
            let len = (self.n - i - 1) * self.t;
            let (row, tail) = rest.split_at_mut(len);
            rows.push((i, row));
            rest = tail;
        }
        rows
    }
}

static ZEROS: [u8; 4096] = [0; 4096];

/// Samples every pair independently from `kernel`, using substream
/// `pair_index` of `seed` for each pair so the result does not depend on
/// thread scheduling.
pub fn sample_snapshots<L: InteractionLaw>(labelling: &Labelling, kernel: &InteractionKernel<L>, seed: u64) -> Result<SnapshotArray> {
    let t = kernel.intra.horizon();
    if t == 0 {
        return Err(SbmError::EmptyHorizon);
    }
    let n = labelling.n();
    let mut array = SnapshotArray::zeros(n, t, kernel.intra.alphabet());
    let labels = labelling.labels();
    let master = derive_seed(seed, 0x0070_6169_7273);
    array.rows_mut().into_par_iter().for_each(|(i, row)| {
        for (offset, out) in row.chunks_mut(t).enumerate() {
            let j = i + 1 + offset;
            let mut rng = keyed_rng(master, pair_index(n, i, j) as u64);
            kernel.law(labels[i] == labels[j]).sample_into(&mut rng, out);
        }
    });
    Ok(array)
}

/// Markov patterns: `intra` chain within blocks, `inter` across.
pub fn sample_markov_snapshots(
    labelling: &Labelling,
    intra: BinaryMarkovChainSpec,
    inter: BinaryMarkovChainSpec,
    t: usize,
    seed: u64,
) -> Result<SnapshotArray> {
    let kernel = InteractionKernel::new(MarkovLaw { chain: intra, t }, MarkovLaw { chain: inter, t })?;
    sample_snapshots(labelling, &kernel, seed)
}

/// One snapshot of categorical symbols, `f` within blocks and `g` across.
pub fn sample_categorical_snapshots(
    labelling: &Labelling,
    f: &FiniteDistribution,
    g: &FiniteDistribution,
    seed: u64,
) -> Result<SnapshotArray> {
    let kernel = InteractionKernel::new(CategoricalLaw { dist: f.clone(), t: 1 }, CategoricalLaw { dist: g.clone(), t: 1 })?;
    sample_snapshots(labelling, &kernel, seed)
}
