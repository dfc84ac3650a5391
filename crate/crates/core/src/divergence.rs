//! Divergences between distributions on a finite alphabet and the
//! error-rate bounds assembled from them.

use rand::Rng;
use thiserror::Error;

/// Construction tolerance on the total mass of a probability vector.
pub const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DivergenceError {
    #[error("empty alphabet")]
    EmptyAlphabet,
    #[error("probability at symbol {index} is {value}, expected a finite non-negative value")]
    InvalidProbability { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
    #[error("alphabet sizes differ: {left} vs {right}")]
    AlphabetMismatch { left: usize, right: usize },
    #[error("order {0} must be positive and different from 1")]
    InvalidOrder(f64),
    #[error("support of the first distribution is not contained in the support of the second")]
    SupportMismatch,
    #[error("distributions are mutually singular")]
    Singular,
    #[error("symmetric divergence of order {0} vanishes, ratio undefined")]
    ZeroDenominator(f64),
    #[error("{name} = {value} outside {range}")]
    OutOfRange { name: &'static str, value: f64, range: &'static str },
}

pub type Result<T> = std::result::Result<T, DivergenceError>;

pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64, range: &'static str) -> Result<()> {
    if value.is_nan() || value < lo || value > hi {
        return Err(DivergenceError::OutOfRange { name, value, range });
    }
    Ok(())
}

/// Probability vector over symbols `0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution {
    probs: Vec<f64>,
}

impl FiniteDistribution {
    /// Validates and, when the mass is off by at most [`NORMALIZATION_TOL`],
    /// renormalizes.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(DivergenceError::EmptyAlphabet);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(DivergenceError::InvalidProbability { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(DivergenceError::NotNormalized { sum });
        }
        let probs = if sum == 1.0 { probs } else { probs.into_iter().map(|p| p / sum).collect() };
        Ok(Self { probs })
    }

    pub fn bernoulli(p: f64) -> Result<Self> {
        check_range("p", p, 0.0, 1.0, "[0, 1]")?;
        Ok(Self { probs: vec![1.0 - p, p] })
    }

    pub fn uniform(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(DivergenceError::EmptyAlphabet);
        }
        Ok(Self { probs: vec![1.0 / size as f64; size] })
    }

    pub fn point_mass(size: usize, symbol: usize) -> Result<Self> {
        if symbol >= size {
            return Err(DivergenceError::EmptyAlphabet);
        }
        let mut probs = vec![0.0; size];
        probs[symbol] = 1.0;
        Ok(Self { probs })
    }

    /// `(1-p)·δ₀ + p·conditional` where `conditional` lives on symbols `1..=L`.
    pub fn zero_inflated(p: f64, conditional: &FiniteDistribution) -> Result<Self> {
        check_range("p", p, 0.0, 1.0, "[0, 1]")?;
        let mut probs = Vec::with_capacity(conditional.len() + 1);
        probs.push(1.0 - p);
        probs.extend(conditional.probs.iter().map(|c| p * c));
        Ok(Self { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Joint law of two independent coordinates; symbol `(a, b)` maps to
    /// `a * other.len() + b`.
    pub fn product(&self, other: &FiniteDistribution) -> FiniteDistribution {
        let mut probs = Vec::with_capacity(self.len() * other.len());
        for &p in &self.probs {
            for &q in &other.probs {
                probs.push(p * q);
            }
        }
        FiniteDistribution { probs }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (symbol, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return symbol;
            }
        }
        // rounding left u above the accumulated mass: fall back to the last supported symbol
        self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn log_prob(&self, symbol: usize) -> f64 {
        self.probs.get(symbol).map_or(f64::NEG_INFINITY, |p| p.ln())
    }
}

fn check_alphabets(f: &FiniteDistribution, g: &FiniteDistribution) -> Result<()> {
    if f.len() != g.len() {
        return Err(DivergenceError::AlphabetMismatch { left: f.len(), right: g.len() });
    }
    Ok(())
}

fn check_order(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || alpha == 1.0 || !alpha.is_finite() {
        return Err(DivergenceError::InvalidOrder(alpha));
    }
    Ok(())
}

/// `log Σ exp(x)` with the maximum factored out. Empty input gives `-∞`.
pub fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max.is_infinite() {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `log Σ f^α g^{1-α}` under the conventions `0/0 = 0`, `x/0 = ∞`.
pub fn log_renyi_integral(alpha: f64, f: &FiniteDistribution, g: &FiniteDistribution) -> Result<f64> {
    check_alphabets(f, g)?;
    check_order(alpha)?;
    let mut terms = Vec::with_capacity(f.len());
    for (&p, &q) in f.probs.iter().zip(&g.probs) {
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            if alpha > 1.0 {
                return Ok(f64::INFINITY);
            }
            continue;
        }
        terms.push(alpha * p.ln() + (1.0 - alpha) * q.ln());
    }
    Ok(log_sum_exp(&terms))
}

/// Rényi divergence of order `alpha`, possibly `+∞`.
pub fn renyi(alpha: f64, f: &FiniteDistribution, g: &FiniteDistribution) -> Result<f64> {
    let log_z = log_renyi_integral(alpha, f, g)?;
    if f == g {
        return Ok(0.0);
    }
    Ok(renyi_from_log_integral(alpha, log_z))
}

pub(crate) fn renyi_from_log_integral(alpha: f64, log_z: f64) -> f64 {
    if log_z == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    (log_z / (alpha - 1.0)).max(0.0)
}

pub fn hellinger_sq(f: &FiniteDistribution, g: &FiniteDistribution) -> Result<f64> {
    check_alphabets(f, g)?;
    let s: f64 = f.probs.iter().zip(&g.probs).map(|(p, q)| (p.sqrt() - q.sqrt()).powi(2)).sum();
    Ok((0.5 * s).clamp(0.0, 1.0))
}

/// Kullback-Leibler divergence; `+∞` when `f` puts mass where `g` does not.
pub fn kl(f: &FiniteDistribution, g: &FiniteDistribution) -> Result<f64> {
    check_alphabets(f, g)?;
    let mut s = 0.0;
    for (&p, &q) in f.probs.iter().zip(&g.probs) {
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Ok(f64::INFINITY);
        }
        s += p * (p / q).ln();
    }
    Ok(s.max(0.0))
}

/// Variance of the log-likelihood ratio under `f`.
pub fn v_kl(f: &FiniteDistribution, g: &FiniteDistribution) -> Result<f64> {
    check_alphabets(f, g)?;
    let mut first = 0.0;
    let mut second = 0.0;
    for (&p, &q) in f.probs.iter().zip(&g.probs) {
        if p == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Err(DivergenceError::SupportMismatch);
        }
        let l = (p / q).ln();
        first += p * l;
        second += p * l * l;
    }
    Ok((second - first * first).max(0.0))
}

/// KL at order 1, Rényi otherwise.
fn renyi_or_kl(alpha: f64, f: &FiniteDistribution, g: &FiniteDistribution) -> Result<f64> {
    if alpha == 1.0 {
        kl(f, g)
    } else {
        renyi(alpha, f, g)
    }
}

/// `½(D_α(f‖g) + D_α(g‖f))`. Order 1 is the symmetrized KL divergence.
pub fn renyi_symmetric(alpha: f64, f: &FiniteDistribution, g: &FiniteDistribution) -> Result<f64> {
    Ok(0.5 * (renyi_or_kl(alpha, f, g)? + renyi_or_kl(alpha, g, f)?))
}

/// `D^s_{1+r} / D^s_r` for `r ∈ (0, 1]`.
pub fn beta_ratio(r: f64, f: &FiniteDistribution, g: &FiniteDistribution) -> Result<f64> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(DivergenceError::OutOfRange { name: "r", value: r, range: "(0, 1]" });
    }
    let numerator = renyi_symmetric(1.0 + r, f, g)?;
    let denominator = renyi_symmetric(r, f, g)?;
    if denominator == 0.0 {
        return Err(DivergenceError::ZeroDenominator(r));
    }
    if numerator.is_infinite() {
        return Ok(f64::INFINITY);
    }
    Ok(numerator / denominator)
}

/// Leading term of `D_{1/2}` between two zero-inflated laws with presence
/// probabilities `p`, `q` and conditional laws at squared Hellinger distance
/// `hel_sq_tilde`. Accurate to `O(ρ²)` with `ρ = max(p, q)`, so only
/// meaningful for `ρ ≪ 1`.
pub fn zero_inflated_renyi_half(p: f64, q: f64, hel_sq_tilde: f64) -> Result<f64> {
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    check_range("q", q, 0.0, 1.0, "[0, 1]")?;
    check_range("hel_sq_tilde", hel_sq_tilde, 0.0, 1.0, "[0, 1]")?;
    Ok((p.sqrt() - q.sqrt()).powi(2) + 2.0 * (p * q).sqrt() * hel_sq_tilde)
}

/// `Z⁻¹ Σ √(fg) log²(f/g)` with `Z = Σ √(fg)`.
pub fn j_quantity(f: &FiniteDistribution, g: &FiniteDistribution) -> Result<f64> {
    check_alphabets(f, g)?;
    let mut z = 0.0;
    let mut s = 0.0;
    for (&p, &q) in f.probs.iter().zip(&g.probs) {
        if p > 0.0 && q > 0.0 {
            let w = (p * q).sqrt();
            let l = (p / q).ln();
            z += w;
            s += w * l * l;
        }
    }
    if z == 0.0 {
        return Err(DivergenceError::Singular);
    }
    Ok(s / z)
}

/// Which form of the second-order quantity `I21` enters the lower bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum I21Convention {
    /// `(½ − 1/K)(1/K)·I + ½(1/K)·J`
    MainText,
    /// `(½ − 1/K)(1/K)·I² + ½(1/K)·J`
    #[default]
    Appendix,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub n: usize,
    pub k: usize,
    pub i: f64,
    pub j: f64,
    pub eps: f64,
    pub zeta: f64,
}

impl BoundInputs {
    pub fn new(n: usize, k: usize, i: f64, j: f64, eps: f64, zeta: f64) -> Result<Self> {
        if n < 1 {
            return Err(DivergenceError::OutOfRange { name: "N", value: n as f64, range: ">= 1" });
        }
        if k < 1 {
            return Err(DivergenceError::OutOfRange { name: "K", value: k as f64, range: ">= 1" });
        }
        if i.is_nan() || i < 0.0 {
            return Err(DivergenceError::OutOfRange { name: "I", value: i, range: ">= 0" });
        }
        if j.is_nan() || j < 0.0 {
            return Err(DivergenceError::OutOfRange { name: "J", value: j, range: ">= 0" });
        }
        check_range("zeta", zeta, 0.0, 1.0 / 21.0, "[0, 1/21]")?;
        check_range("eps", eps, 0.0, zeta, "[0, zeta]")?;
        Ok(Self { n, k, i, j, eps, zeta })
    }

    /// Fills `I = D_{1/2}(f, g)` and `J` from a homogeneous kernel.
    pub fn homogeneous(n: usize, k: usize, f: &FiniteDistribution, g: &FiniteDistribution, eps: f64, zeta: f64) -> Result<Self> {
        Self::new(n, k, renyi(0.5, f, g)?, j_quantity(f, g)?, eps, zeta)
    }

    fn require_pair(&self) -> Result<()> {
        if self.n < 2 {
            return Err(DivergenceError::OutOfRange { name: "N", value: self.n as f64, range: ">= 2" });
        }
        if self.k < 2 {
            return Err(DivergenceError::OutOfRange { name: "K", value: self.k as f64, range: ">= 2" });
        }
        Ok(())
    }
}

pub fn i21(inputs: &BoundInputs, convention: I21Convention) -> f64 {
    let kinv = 1.0 / inputs.k as f64;
    let first = match convention {
        I21Convention::MainText => inputs.i,
        I21Convention::Appendix => inputs.i * inputs.i,
    };
    (0.5 - kinv) * kinv * first + 0.5 * kinv * inputs.j
}

/// Minimax lower bound on the expected fraction of misclassified nodes.
/// Not clamped; negative values mean the bound is vacuous.
pub fn lower_bound_error_rate(inputs: &BoundInputs, convention: I21Convention) -> Result<f64> {
    inputs.require_pair()?;
    let n = inputs.n as f64;
    let k = inputs.k as f64;
    let i21 = i21(inputs, convention);
    let main = (-n * inputs.i / k - (8.0 * n * i21).sqrt()).exp() / (84.0 * k.powi(3));
    Ok(main - (-n / (8.0 * k)).exp() / 6.0)
}

/// `56 · max{K² e^{−NI/(8K)}, K/N}`.
pub fn kappa(n: usize, k: usize, i: f64) -> f64 {
    let n = n as f64;
    let k = k as f64;
    56.0 * (k * k * (-n * i / (8.0 * k)).exp()).max(k / n)
}

/// The three summands of the upper bound, in order.
pub fn upper_bound_terms(inputs: &BoundInputs, kappa: f64) -> Result<[f64; 3]> {
    inputs.require_pair()?;
    let n = inputs.n as f64;
    let k = inputs.k as f64;
    let BoundInputs { i, eps, zeta, .. } = *inputs;
    let first = 8.0 * std::f64::consts::E * (k - 1.0) * (-(1.0 - zeta - kappa) * n * i / k).exp();
    // K^N overflows long before the exponent does, so combine in log space
    let log_second = n * k.ln() - 0.25 * (zeta / (k - 1.0) - eps) * (n / k).powi(2) * i;
    let second = log_second.exp();
    let third = 2.0 * k * (-eps * eps * n / (3.0 * k)).exp();
    Ok([first, second, third])
}

pub fn upper_bound_error_rate(inputs: &BoundInputs, kappa: f64) -> Result<f64> {
    Ok(upper_bound_terms(inputs, kappa)?.iter().sum())
}

/// `(I1, I21, I22)` for block prior `alpha`, candidate blocks `subset`,
/// reference laws `references[ℓ]` and kernel `kernel[k][ℓ]`.
pub fn appendix_c_quantities(
    alpha: &FiniteDistribution,
    subset: &[usize],
    references: &[FiniteDistribution],
    kernel: &[Vec<FiniteDistribution>],
) -> Result<(f64, f64, f64)> {
    let k_count = alpha.len();
    if references.len() != k_count || kernel.len() != k_count || kernel.iter().any(|row| row.len() != k_count) {
        return Err(DivergenceError::AlphabetMismatch { left: k_count, right: references.len() });
    }
    let mut weight_in = vec![0.0; k_count];
    for &k in subset {
        if k >= k_count {
            return Err(DivergenceError::OutOfRange { name: "block", value: k as f64, range: "< K" });
        }
        weight_in[k] = alpha.probs[k];
    }
    let total: f64 = weight_in.iter().sum();
    if total == 0.0 {
        return Err(DivergenceError::OutOfRange { name: "subset mass", value: 0.0, range: "> 0" });
    }
    let a = &alpha.probs;
    let mut i1 = 0.0;
    let mut i21 = 0.0;
    let mut mean_a = 0.0;
    let mut mean_a_sq = 0.0;
    for k in 0..k_count {
        let star = weight_in[k] / total;
        if star == 0.0 {
            continue;
        }
        let mut a_k = 0.0;
        let mut kl_sq = 0.0;
        let mut v_sum = 0.0;
        for l in 0..k_count {
            let d = kl(&references[l], &kernel[k][l])?;
            a_k += a[l] * d;
            kl_sq += a[l] * d * d;
            v_sum += a[l] * v_kl(&references[l], &kernel[k][l])?;
        }
        let b_k = kl_sq - a_k * a_k;
        i1 += star * a_k;
        i21 += star * (v_sum + b_k);
        mean_a += star * a_k;
        mean_a_sq += star * a_k * a_k;
    }
    let i22 = (mean_a_sq - mean_a * mean_a).max(0.0);
    Ok((i1, i21, i22))
}

/// Reference laws for a homogeneous kernel with the first two blocks as the
/// candidate set: the normalized geometric mean of `f` and `g` for those two
/// blocks, `g` for the others.
pub fn homogeneous_references(k: usize, f: &FiniteDistribution, g: &FiniteDistribution) -> Result<Vec<FiniteDistribution>> {
    check_alphabets(f, g)?;
    let root: Vec<f64> = f.probs.iter().zip(&g.probs).map(|(p, q)| (p * q).sqrt()).collect();
    let z: f64 = root.iter().sum();
    if z == 0.0 {
        return Err(DivergenceError::Singular);
    }
    let h = FiniteDistribution { probs: root.into_iter().map(|x| x / z).collect() };
    Ok((0..k).map(|l| if l < 2 { h.clone() } else { g.clone() }).collect())
}

/// Homogeneous kernel matrix: `f` on the diagonal, `g` elsewhere.
pub fn homogeneous_kernel(k: usize, f: &FiniteDistribution, g: &FiniteDistribution) -> Vec<Vec<FiniteDistribution>> {
    (0..k).map(|a| (0..k).map(|b| if a == b { f.clone() } else { g.clone() }).collect()).collect()
}

/// Closed form of `(I1, I21, I22)` for a homogeneous kernel under the
/// uniform prior: `(I/K, (½−1/K)(1/K)I² + ½(1/K)J, 0)` with `I = D_{1/2}`.
pub fn homogeneous_appendix_c(k: usize, f: &FiniteDistribution, g: &FiniteDistribution) -> Result<(f64, f64, f64)> {
    let i = renyi(0.5, f, g)?;
    let j = j_quantity(f, g)?;
    let kinv = 1.0 / k as f64;
    Ok((kinv * i, (0.5 - kinv) * kinv * i * i + 0.5 * kinv * j, 0.0))
}
