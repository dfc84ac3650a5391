//! Sparse symmetric matrices and a Lanczos solver for their dominant
//! eigenpairs.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use thiserror::Error;

use crate::sbm::keyed_rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EigenError {
    #[error("Lanczos did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },
}

/// Symmetric matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    /// Builds the matrix from upper or lower triangle entries `(i, j, w)`;
    /// each off-diagonal entry is mirrored. Duplicates are summed.
    pub fn from_entries(n: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, w) in entries {
            rows[i].push((j, w));
            if i != j {
                rows[j].push((i, w));
            }
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (j, w) in row {
                if last == Some(j) {
                    *vals.last_mut().unwrap() += w;
                } else {
                    col_idx.push(j);
                    vals.push(w);
                    last = Some(j);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { n, row_ptr, col_idx, vals }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.vals[range].iter().copied())
    }

    /// Weighted degree (row sum).
    pub fn degree(&self, i: usize) -> f64 {
        self.row(i).map(|(_, w)| w).sum()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(pos) => self.vals[range.start + pos],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(j, w)| w * x[j]).sum();
        }
    }

    /// Max absolute row sum, an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        (0..self.n).map(|i| self.row(i).map(|(_, w)| w.abs()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// Same matrix with the rows and columns of `drop` set to zero.
    pub fn zero_out(&self, drop: &[bool]) -> Self {
        let mut entries = Vec::with_capacity(self.nnz() / 2);
        for i in 0..self.n {
            if drop[i] {
                continue;
            }
            for (j, w) in self.row(i) {
                if j >= i && !drop[j] {
                    entries.push((i, j, w));
                }
            }
        }
        Self::from_entries(self.n, &entries)
    }

    /// Principal submatrix without row and column `skip`; node `j > skip`
    /// moves to index `j − 1`.
    pub fn without_node(&self, skip: usize) -> Self {
        let shift = |j: usize| if j > skip { j - 1 } else { j };
        let mut entries = Vec::with_capacity(self.nnz() / 2);
        for i in 0..self.n {
            if i == skip {
                continue;
            }
            for (j, w) in self.row(i) {
                if j >= i && j != skip {
                    entries.push((shift(i), shift(j), w));
                }
            }
        }
        Self::from_entries(self.n.saturating_sub(1), &entries)
    }

    /// `P A Pᵀ` where node `i` moves to `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let mut entries = Vec::with_capacity(self.nnz() / 2);
        for i in 0..self.n {
            for (j, w) in self.row(i) {
                if j >= i {
                    entries.push((perm[i], perm[j], w));
                }
            }
        }
        Self::from_entries(self.n, &entries)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenConfig {
    /// Relative residual tolerance `‖Av − λv‖ ≤ tol·‖A‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for EigenConfig {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 1000, seed: 0 }
    }
}

/// Eigenpairs ordered by decreasing `|λ|`; `vectors[c]` is the `c`-th
/// unit eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Removes the components of `w` along the orthonormal `basis`, twice.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for v in basis {
            let c = dot(w, v);
            for (x, y) in w.iter_mut().zip(v) {
                *x -= c * y;
            }
        }
    }
}

/// Fresh unit vector orthogonal to `basis`, or `None` if none was found.
fn restart_vector(n: usize, basis: &[Vec<f64>], rng: &mut impl Rng) -> Option<Vec<f64>> {
    for _ in 0..8 {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        orthogonalize(&mut v, basis);
        let nv = norm(&v);
        if nv > 1e-10 {
            v.iter_mut().for_each(|x| *x /= nv);
            return Some(v);
        }
    }
    None
}

/// Ritz pairs of the tridiagonal matrix, sorted by decreasing `|θ|`, with
/// residual estimates `|β_last · s_last|`.
fn ritz(alpha: &[f64], beta: &[f64], beta_last: f64) -> Vec<(f64, f64, Vec<f64>)> {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut out: Vec<(f64, f64, Vec<f64>)> = (0..m)
        .map(|c| {
            let s: Vec<f64> = eig.eigenvectors.column(c).iter().copied().collect();
            (eig.eigenvalues[c], (beta_last * s[m - 1]).abs(), s)
        })
        .collect();
    out.sort_by(|a, b| b.0.abs().total_cmp(&a.0.abs()).then(b.0.total_cmp(&a.0)));
    out
}

/// The `k` eigenpairs of largest magnitude, by Lanczos with full
/// reorthogonalization. After a breakdown the iteration restarts from a
/// random vector orthogonal to the current basis, which also exposes
/// repeated eigenvalues.
pub fn top_eigenpairs(a: &SparseSym, k: usize, config: &EigenConfig) -> Result<EigenPairs, EigenError> {
    let n = a.n();
    let k = k.min(n);
    let mut rng = keyed_rng(config.seed, 0x6c61_6e63);
    let scale = a.norm_bound();
    if k == 0 {
        return Ok(EigenPairs { values: vec![], vectors: vec![], iterations: 0 });
    }
    if scale == 0.0 {
        // zero matrix: any orthonormal set is an eigenbasis
        let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(k);
        for _ in 0..k {
            let v = restart_vector(n, &vectors, &mut rng).unwrap_or_else(|| vec![0.0; n]);
            vectors.push(v);
        }
        return Ok(EigenPairs { values: vec![0.0; k], vectors, iterations: 0 });
    }
    let tol = config.tol * scale;
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut v = restart_vector(n, &basis, &mut rng).expect("n >= 1");
    let mut w = vec![0.0; n];
    let mut block_len = 0;
    let limit = config.max_iter.min(n);
    for iter in 1..=limit {
        a.matvec(&v, &mut w);
        let a_j = dot(&w, &v);
        basis.push(v.clone());
        alpha.push(a_j);
        orthogonalize(&mut w, &basis);
        let b_j = norm(&w);
        block_len += 1;
        let breakdown = b_j <= 1e-10 * scale;
        let full = basis.len() == n;
        let check = full || iter == limit || (alpha.len() >= k && (iter % 5 == 0 || breakdown));
        if check {
            let last = if breakdown { 0.0 } else { b_j };
            let pairs = ritz(&alpha, &beta, last);
            let converged = pairs.iter().take(k).all(|p| p.1 <= tol);
            // right after a breakdown the Krylov space may miss a direction
            // orthogonal to the start vector, so keep going unless the basis is complete
            let trustworthy = full || (!breakdown && block_len >= 2);
            if converged && (trustworthy || iter == limit) {
                return Ok(assemble(&basis, pairs, k, iter));
            }
            if iter == limit && !converged {
                return Err(EigenError::NoConvergence { iterations: iter });
            }
        }
        if full {
            break;
        }
        if breakdown {
            match restart_vector(n, &basis, &mut rng) {
                Some(next) => v = next,
                None => {
                    let pairs = ritz(&alpha, &beta, 0.0);
                    return Ok(assemble(&basis, pairs, k, iter));
                }
            }
            beta.push(0.0);
            block_len = 0;
        } else {
            v = w.iter().map(|x| x / b_j).collect();
            beta.push(b_j);
        }
    }
    Err(EigenError::NoConvergence { iterations: limit })
}

fn assemble(basis: &[Vec<f64>], pairs: Vec<(f64, f64, Vec<f64>)>, k: usize, iterations: usize) -> EigenPairs {
    let n = basis[0].len();
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    for (theta, _, s) in pairs.into_iter().take(k) {
        let mut y = vec![0.0; n];
        for (coef, v) in s.iter().zip(basis) {
            for (yi, vi) in y.iter_mut().zip(v) {
                *yi += coef * vi;
            }
        }
        let ny = norm(&y);
        if ny > 0.0 {
            y.iter_mut().for_each(|x| *x /= ny);
        }
        values.push(theta);
        vectors.push(y);
    }
    EigenPairs { values, vectors, iterations }
}

/// `‖Av − λv‖` for one pair.
pub fn residual(a: &SparseSym, value: f64, vector: &[f64]) -> f64 {
    let mut av = vec![0.0; a.n()];
    a.matvec(vector, &mut av);
    av.iter().zip(vector).map(|(x, v)| (x - value * v).powi(2)).sum::<f64>().sqrt()
}
