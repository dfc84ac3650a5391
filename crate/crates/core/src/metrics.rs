//! Partition comparison: Hamming errors up to relabelling, pair-counting
//! distances and optimal label alignment.

use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use thiserror::Error;

use crate::sbm::Labelling;

/// Largest `K` for which [`ham_star`] enumerates all permutations.
pub const EXHAUSTIVE_MAX_K: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("labellings have different lengths: {0} vs {1}")]
    LengthMismatch(usize, usize),
}

pub type Result<T> = std::result::Result<T, MetricsError>;

fn check_len(s1: &Labelling, s2: &Labelling) -> Result<()> {
    if s1.n() != s2.n() {
        return Err(MetricsError::LengthMismatch(s1.n(), s2.n()));
    }
    Ok(())
}

/// `counts[k][l] = |{i : σ₁(i) = k, σ₂(i) = l}|`, square of side `max(K₁, K₂)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(s1: &Labelling, s2: &Labelling) -> Result<Self> {
        check_len(s1, s2)?;
        let k = s1.k().max(s2.k());
        let mut counts = vec![vec![0; k]; k];
        for (&a, &b) in s1.labels().iter().zip(s2.labels()) {
            counts[a][b] += 1;
        }
        Ok(Self { counts })
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn row_sums(&self) -> Vec<usize> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<usize> {
        (0..self.k()).map(|l| self.counts.iter().map(|r| r[l]).sum()).collect()
    }

    pub fn total(&self) -> usize {
        self.row_sums().iter().sum()
    }

    /// Nodes kept in place by `perm` applied to the first labelling.
    fn agreement(&self, perm: &[usize]) -> usize {
        perm.iter().enumerate().map(|(k, &l)| self.counts[k][l]).sum()
    }
}

/// Number of nodes with different labels.
pub fn ham(s1: &Labelling, s2: &Labelling) -> Result<usize> {
    check_len(s1, s2)?;
    Ok(s1.labels().iter().zip(s2.labels()).filter(|(a, b)| a != b).count())
}

/// Advances `perm` to the next permutation in lexicographic order.
fn next_permutation(perm: &mut [usize]) -> bool {
    let n = perm.len();
    if n < 2 {
        return false;
    }
    let mut i = n - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = n - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Minimum of `Ham(ρ∘σ₁, σ₂)` over label permutations `ρ`, and a minimizer
/// (`ρ[k]` is the label given to block `k` of `σ₁`). Among ties the
/// lexicographically smallest permutation wins when `K ≤ 8`.
pub fn ham_star(s1: &Labelling, s2: &Labelling) -> Result<(usize, Vec<usize>)> {
    let conf = ConfusionMatrix::new(s1, s2)?;
    let k = conf.k();
    let (agree, perm) = if k <= EXHAUSTIVE_MAX_K { best_permutation_exhaustive(&conf) } else { best_permutation_assignment(&conf) };
    Ok((s1.n() - agree, perm))
}

fn best_permutation_exhaustive(conf: &ConfusionMatrix) -> (usize, Vec<usize>) {
    let mut perm: Vec<usize> = (0..conf.k()).collect();
    let mut best = (conf.agreement(&perm), perm.clone());
    while next_permutation(&mut perm) {
        let a = conf.agreement(&perm);
        if a > best.0 {
            best = (a, perm.clone());
        }
    }
    best
}

fn best_permutation_assignment(conf: &ConfusionMatrix) -> (usize, Vec<usize>) {
    let weights = Matrix::from_rows(conf.counts.iter().map(|r| r.iter().map(|&c| c as i64).collect::<Vec<_>>()))
        .expect("confusion matrix rows have equal length");
    let (total, perm) = kuhn_munkres(&weights);
    (total as usize, perm)
}

/// [`ham_star`] always through the assignment solver, for cross-checking.
pub fn ham_star_assignment(s1: &Labelling, s2: &Labelling) -> Result<usize> {
    let conf = ConfusionMatrix::new(s1, s2)?;
    Ok(s1.n() - best_permutation_assignment(&conf).0)
}

/// [`ham_star`] always by enumerating permutations.
pub fn ham_star_exhaustive(s1: &Labelling, s2: &Labelling) -> Result<usize> {
    let conf = ConfusionMatrix::new(s1, s2)?;
    Ok(s1.n() - best_permutation_exhaustive(&conf).0)
}

fn pairs(x: usize) -> u64 {
    let x = x as u64;
    x * x.saturating_sub(1) / 2
}

/// `(|E(σ₁)|, |E(σ₂)|, |E(σ₁) ∩ E(σ₂)|)` where `E(σ)` is the set of
/// unordered pairs placed in one block.
pub fn within_block_pairs(s1: &Labelling, s2: &Labelling) -> Result<(u64, u64, u64)> {
    let conf = ConfusionMatrix::new(s1, s2)?;
    let e1 = conf.row_sums().into_iter().map(pairs).sum();
    let e2 = conf.col_sums().into_iter().map(pairs).sum();
    let both = conf.counts.iter().flatten().map(|&c| pairs(c)).sum();
    Ok((e1, e2, both))
}

/// `2(|E(σ₁) \ E(σ₂)| + |E(σ₂) \ E(σ₁)|)`, in `O(N + K²)`.
pub fn mirkin(s1: &Labelling, s2: &Labelling) -> Result<u64> {
    let (e1, e2, both) = within_block_pairs(s1, s2)?;
    Ok(2 * (e1 - both + e2 - both))
}

/// Fraction of node pairs on which the two labellings agree about
/// co-membership, counted pair by pair in `O(N²)`.
pub fn rand_index(s1: &Labelling, s2: &Labelling) -> Result<f64> {
    check_len(s1, s2)?;
    let n = s1.n();
    if n < 2 {
        return Ok(1.0);
    }
    let (a, b) = (s1.labels(), s2.labels());
    let mut agree = 0u64;
    for i in 0..n {
        for j in i + 1..n {
            agree += u64::from((a[i] == a[j]) == (b[i] == b[j]));
        }
    }
    Ok(agree as f64 / pairs(n) as f64)
}

/// The permutation `τ` (`τ[l]` relabels block `l` of `σ₂`) with
/// `Ham(σ₁, τ∘σ₂) < ½·min_k |σ₁⁻¹(k)|`, if one exists; it is then unique and
/// given by `τ(l) = argmax_k N_{kl}`.
pub fn unique_alignment(s1: &Labelling, s2: &Labelling) -> Result<Option<Vec<usize>>> {
    let conf = ConfusionMatrix::new(s1, s2)?;
    let k = conf.k();
    let n_min = conf.row_sums().into_iter().min().unwrap_or(0);
    let mut tau = vec![0; k];
    let mut used = vec![false; k];
    for (l, slot) in tau.iter_mut().enumerate() {
        let best = (0..k).max_by_key(|&row| (conf.counts[row][l], std::cmp::Reverse(row))).unwrap_or(0);
        if used[best] {
            return Ok(None);
        }
        used[best] = true;
        *slot = best;
    }
    let agree: usize = (0..k).map(|l| conf.counts[tau[l]][l]).sum();
    let errors = s1.n() - agree;
    Ok((2 * errors < n_min).then_some(tau))
}

/// `1 − Ham*/N`.
pub fn accuracy(truth: &Labelling, estimate: &Labelling) -> Result<f64> {
    let (d, _) = ham_star(truth, estimate)?;
    if truth.n() == 0 {
        return Ok(1.0);
    }
    Ok(1.0 - d as f64 / truth.n() as f64)
}

/// Checks `|E(σ)\E(σ')| ≥ max{N_min(σ) − d, ⅓N_min(σ) − ⅙N_max(σ')}·d`
/// with `d = Ham*(σ, σ')`.
pub fn pair_difference_lower_bound_holds(s: &Labelling, s_prime: &Labelling) -> Result<bool> {
    let (e1, _, both) = within_block_pairs(s, s_prime)?;
    let (d, _) = ham_star(s, s_prime)?;
    let sizes = s.block_sizes();
    let n_min = *sizes.iter().min().unwrap_or(&0) as f64;
    let n_max_prime = *s_prime.block_sizes().iter().max().unwrap_or(&0) as f64;
    let d = d as f64;
    let bound = (n_min - d).max(n_min / 3.0 - n_max_prime / 6.0) * d;
    Ok((e1 - both) as f64 >= bound - 1e-9)
}
