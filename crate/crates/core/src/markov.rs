//! Binary Markov interaction chains and the divergence calculus of their
//! path laws.

use thiserror::Error;

use crate::divergence::{self, log_sum_exp, renyi_from_log_integral, BoundInputs, DivergenceError, FiniteDistribution, I21Convention};

/// Largest horizon accepted by [`markov_renyi_brute`].
pub const BRUTE_FORCE_MAX_T: usize = 20;
/// Default search cap for [`t_star`].
pub const T_STAR_CAP: usize = 1_000_000;
const LINEAR_SCAN_LIMIT: usize = 1000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarkovError {
    #[error("{name} = {value} outside [0, 1]")]
    InvalidProbability { name: &'static str, value: f64 },
    #[error("stationary law pi1 = {pi1} with p11 = {p11} needs p01 = {p01} > 1")]
    InfeasibleStationary { pi1: f64, p11: f64, p01: f64 },
    #[error("horizon must be at least 1")]
    EmptyHorizon,
    #[error("horizon {t} exceeds the enumeration limit {max}")]
    HorizonTooLong { t: usize, max: usize },
    #[error("order {0} outside the admissible range")]
    InvalidOrder(f64),
    #[error("bound inapplicable: Lambda = {0} >= 1")]
    BoundInapplicable(f64),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Divergence(#[from] DivergenceError),
}

pub type Result<T> = std::result::Result<T, MarkovError>;

fn check_prob(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) {
        return Err(MarkovError::InvalidProbability { name, value });
    }
    Ok(())
}

/// Two-state chain: initial law `(1-mu1, mu1)`, transitions
/// `P = [[1-p01, p01], [1-p11, p11]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryMarkovChainSpec {
    pub mu1: f64,
    pub p01: f64,
    pub p11: f64,
}

impl BinaryMarkovChainSpec {
    pub fn new(mu1: f64, p01: f64, p11: f64) -> Result<Self> {
        check_prob("mu1", mu1)?;
        check_prob("p01", p01)?;
        check_prob("p11", p11)?;
        Ok(Self { mu1, p01, p11 })
    }

    /// Snapshots drawn i.i.d. from `Ber(p)`.
    pub fn iid(p: f64) -> Result<Self> {
        Self::new(p, p, p)
    }

    pub fn initial(&self, a: usize) -> f64 {
        if a == 1 {
            self.mu1
        } else {
            1.0 - self.mu1
        }
    }

    pub fn transition(&self, a: usize, b: usize) -> f64 {
        let up = if a == 1 { self.p11 } else { self.p01 };
        if b == 1 {
            up
        } else {
            1.0 - up
        }
    }

    pub fn p10(&self) -> f64 {
        1.0 - self.p11
    }

    /// Probability of a path, computed directly.
    pub fn path_prob(&self, path: &[u8]) -> f64 {
        let Some((&first, rest)) = path.split_first() else {
            return 1.0;
        };
        let mut p = self.initial(first as usize);
        let mut prev = first as usize;
        for &x in rest {
            p *= self.transition(prev, x as usize);
            prev = x as usize;
        }
        p
    }

    pub fn log_path_prob(&self, path: &[u8]) -> f64 {
        let Some((&first, rest)) = path.split_first() else {
            return 0.0;
        };
        let mut lp = self.initial(first as usize).ln();
        let mut prev = first as usize;
        for &x in rest {
            lp += self.transition(prev, x as usize).ln();
            prev = x as usize;
        }
        lp
    }
}

/// Stationary chain with `P(X=1) = pi1` and persistence `p11`.
pub fn chain_from_stationary(pi1: f64, p11: f64) -> Result<BinaryMarkovChainSpec> {
    if !(pi1 > 0.0 && pi1 < 1.0) {
        return Err(MarkovError::InvalidProbability { name: "pi1", value: pi1 });
    }
    check_prob("p11", p11)?;
    let p01 = pi1 * (1.0 - p11) / (1.0 - pi1);
    if p01 > 1.0 {
        return Err(MarkovError::InfeasibleStationary { pi1, p11, p01 });
    }
    BinaryMarkovChainSpec::new(pi1, p01, p11)
}

/// `p^α q^{1−α}` with the support conventions; `None` stands for `+∞`.
fn geometric_mean(alpha: f64, p: f64, q: f64) -> Option<f64> {
    if p == 0.0 {
        return Some(0.0);
    }
    if q == 0.0 {
        return if alpha > 1.0 { None } else { Some(0.0) };
    }
    Some(p.powf(alpha) * q.powf(1.0 - alpha))
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || alpha == 1.0 || !alpha.is_finite() {
        return Err(MarkovError::InvalidOrder(alpha));
    }
    Ok(())
}

/// Transfer-matrix recursion for `log Z_α` at every horizon `1..=t_max`.
/// Each step is rescaled so the running vector stays of order one.
struct TransferScan {
    r: [Option<f64>; 2],
    rr: [[Option<f64>; 2]; 2],
    z: [f64; 2],
    log_scale: f64,
    t: usize,
    infinite: bool,
}

impl TransferScan {
    fn new(alpha: f64, f: &BinaryMarkovChainSpec, g: &BinaryMarkovChainSpec) -> Self {
        let r = [0, 1].map(|a| geometric_mean(alpha, f.initial(a), g.initial(a)));
        let rr = [0, 1].map(|a| [0, 1].map(|b| geometric_mean(alpha, f.transition(a, b), g.transition(a, b))));
        Self { r, rr, z: [0.0; 2], log_scale: 0.0, t: 0, infinite: false }
    }

    /// Advances one snapshot and returns `log Z` for the new horizon.
    fn step(&mut self) -> f64 {
        if self.infinite {
            return f64::INFINITY;
        }
        let next = if self.t == 0 {
            match self.r {
                [Some(a), Some(b)] => [a, b],
                _ => {
                    self.infinite = true;
                    return f64::INFINITY;
                }
            }
        } else {
            let mut next = [0.0; 2];
            for (b, slot) in next.iter_mut().enumerate() {
                for a in 0..2 {
                    if self.z[a] == 0.0 {
                        continue;
                    }
                    match self.rr[a][b] {
                        Some(w) => *slot += self.z[a] * w,
                        None => {
                            self.infinite = true;
                            return f64::INFINITY;
                        }
                    }
                }
            }
            next
        };
        self.t += 1;
        let total = next[0] + next[1];
        if total == 0.0 {
            self.z = next;
            return f64::NEG_INFINITY;
        }
        self.z = [next[0] / total, next[1] / total];
        self.log_scale += total.ln();
        self.log_scale
    }
}

/// `log Σ_x f(x)^α g(x)^{1−α}` over paths of length `t`.
pub fn markov_log_integral(alpha: f64, f: &BinaryMarkovChainSpec, g: &BinaryMarkovChainSpec, t: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if t == 0 {
        return Err(MarkovError::EmptyHorizon);
    }
    let mut scan = TransferScan::new(alpha, f, g);
    let mut log_z = 0.0;
    for _ in 0..t {
        log_z = scan.step();
        if log_z.is_infinite() {
            break;
        }
    }
    Ok(log_z)
}

/// Rényi divergence between the path laws of two chains over `t` snapshots,
/// in `O(t)` time.
pub fn markov_renyi_exact(alpha: f64, f: &BinaryMarkovChainSpec, g: &BinaryMarkovChainSpec, t: usize) -> Result<f64> {
    let log_z = markov_log_integral(alpha, f, g, t)?;
    if f == g {
        return Ok(0.0);
    }
    Ok(renyi_from_log_integral(alpha, log_z))
}

/// Calls `visit` on every path in `{0,1}^t`.
pub fn for_each_path(t: usize, mut visit: impl FnMut(&[u8])) {
    let mut path = vec![0u8; t];
    for code in 0u64..(1u64 << t) {
        for (s, x) in path.iter_mut().enumerate() {
            *x = ((code >> s) & 1) as u8;
        }
        visit(&path);
    }
}

/// Same quantity as [`markov_renyi_exact`] by enumerating all `2^t` paths.
pub fn markov_renyi_brute(alpha: f64, f: &BinaryMarkovChainSpec, g: &BinaryMarkovChainSpec, t: usize) -> Result<f64> {
    check_alpha(alpha)?;
    if t == 0 {
        return Err(MarkovError::EmptyHorizon);
    }
    if t > BRUTE_FORCE_MAX_T {
        return Err(MarkovError::HorizonTooLong { t, max: BRUTE_FORCE_MAX_T });
    }
    let mut terms = Vec::with_capacity(1 << t);
    let mut infinite = false;
    for_each_path(t, |path| {
        let pf = f.path_prob(path);
        if pf == 0.0 {
            return;
        }
        let pg = g.path_prob(path);
        if pg == 0.0 {
            infinite |= alpha > 1.0;
            return;
        }
        terms.push(alpha * f.log_path_prob(path) + (1.0 - alpha) * g.log_path_prob(path));
    });
    if infinite {
        return Ok(f64::INFINITY);
    }
    if f == g {
        return Ok(0.0);
    }
    Ok(renyi_from_log_integral(alpha, log_sum_exp(&terms)))
}

/// `Z⁻¹ Σ √(fg) log²(f/g)` for the path laws, by a transfer recursion that
/// carries the zeroth, first and second moments of the log-ratio.
pub fn markov_j_quantity(f: &BinaryMarkovChainSpec, g: &BinaryMarkovChainSpec, t: usize) -> Result<f64> {
    if t == 0 {
        return Err(MarkovError::EmptyHorizon);
    }
    let weight = |p: f64, q: f64| if p > 0.0 && q > 0.0 { ((p * q).sqrt(), (p / q).ln()) } else { (0.0, 0.0) };
    // moments[b] = (Σw, Σw·L, Σw·L²) over paths ending in b
    let mut moments = [[0.0f64; 3]; 2];
    for (a, m) in moments.iter_mut().enumerate() {
        let (w, l) = weight(f.initial(a), g.initial(a));
        *m = [w, w * l, w * l * l];
    }
    for _ in 1..t {
        let mut next = [[0.0f64; 3]; 2];
        for (b, nb) in next.iter_mut().enumerate() {
            for (a, m) in moments.iter().enumerate() {
                let (w, l) = weight(f.transition(a, b), g.transition(a, b));
                if w == 0.0 {
                    continue;
                }
                nb[0] += w * m[0];
                nb[1] += w * (m[1] + l * m[0]);
                nb[2] += w * (m[2] + 2.0 * l * m[1] + l * l * m[0]);
            }
        }
        let scale = next[0][0] + next[1][0];
        if scale == 0.0 {
            return Err(DivergenceError::Singular.into());
        }
        for nb in next.iter_mut() {
            for x in nb.iter_mut() {
                *x /= scale;
            }
        }
        moments = next;
    }
    let z = moments[0][0] + moments[1][0];
    if z == 0.0 {
        return Err(DivergenceError::Singular.into());
    }
    Ok((moments[0][2] + moments[1][2]) / z)
}

/// `max(μ₁, ν₁, P₀₁, Q₀₁)`, the density scale of a sparse pair of chains.
pub fn sparsity(f: &BinaryMarkovChainSpec, g: &BinaryMarkovChainSpec) -> f64 {
    f.mu1.max(g.mu1).max(f.p01).max(g.p01)
}

/// Approximation of a path-law divergence with its guaranteed error radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparseApprox {
    pub value: f64,
    pub error_radius: f64,
    /// `false` when `ρT > 0.01`, where the radius is not guaranteed.
    pub in_regime: bool,
}

/// First-order expansion of `D_α`, `α ∈ (0,1)`, for chains that rarely
/// switch on. The error radius is `46(ρT)²/(1−α)`.
pub fn sparse_renyi_approx(alpha: f64, f: &BinaryMarkovChainSpec, g: &BinaryMarkovChainSpec, t: usize) -> Result<SparseApprox> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(MarkovError::InvalidOrder(alpha));
    }
    if t == 0 {
        return Err(MarkovError::EmptyHorizon);
    }
    let gm = |p: f64, q: f64| p.powf(alpha) * q.powf(1.0 - alpha);
    let am = |p: f64, q: f64| alpha * p + (1.0 - alpha) * q;
    let r1 = gm(f.mu1, g.mu1);
    let r1_hat = am(f.mu1, g.mu1);
    let r01 = gm(f.p01, g.p01);
    let r01_hat = am(f.p01, g.p01);
    let r10 = gm(f.p10(), g.p10());
    let r11 = gm(f.p11, g.p11);
    let mut sum = r1_hat - r1;
    if r11 < 1.0 {
        let w = 1.0 - r10 / (1.0 - r11);
        let c = r1 * (1.0 - r11) - r01;
        let mut power = 1.0;
        for _ in 2..=t {
            sum += r01_hat - r01 + w * (r01 + c * power);
            power *= r11;
        }
    } else {
        sum += (t as f64 - 1.0) * (r01_hat - r01);
    }
    let rho_t = sparsity(f, g) * t as f64;
    Ok(SparseApprox { value: sum / (1.0 - alpha), error_radius: 46.0 * rho_t * rho_t / (1.0 - alpha), in_regime: rho_t <= 0.01 })
}

/// Squared Hellinger distance between the geometric on-period lengths
/// implied by persistence probabilities `p11`, `q11`.
pub fn h11_sq(p11: f64, q11: f64) -> f64 {
    let denom = 1.0 - (p11 * q11).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    (1.0 - (1.0 - p11).sqrt() * (1.0 - q11).sqrt() / denom).clamp(0.0, 1.0)
}

/// Order-½ specialization of [`sparse_renyi_approx`] written through the
/// on-period Hellinger distance and the spectral gap `Γ = 1 − √(P₁₁Q₁₁)`.
/// The error radius is `92(ρT)²`.
pub fn sparse_renyi_half(f: &BinaryMarkovChainSpec, g: &BinaryMarkovChainSpec, t: usize) -> Result<SparseApprox> {
    if t == 0 {
        return Err(MarkovError::EmptyHorizon);
    }
    let h = h11_sq(f.p11, g.p11);
    let gamma = 1.0 - (f.p11 * g.p11).sqrt();
    let steps = t as f64 - 1.0;
    let mut value =
        (f.mu1.sqrt() - g.mu1.sqrt()).powi(2) + ((f.p01.sqrt() - g.p01.sqrt()).powi(2) + 2.0 * h * (f.p01 * g.p01).sqrt()) * steps;
    let mut geometric = 0.0;
    let mut power = 1.0;
    for _ in 0..t.saturating_sub(1) {
        geometric += power;
        power *= 1.0 - gamma;
    }
    value += 2.0 * (gamma * (f.mu1 * g.mu1).sqrt() - (f.p01 * g.p01).sqrt()) * h * geometric;
    let rho_t = sparsity(f, g) * t as f64;
    Ok(SparseApprox { value, error_radius: 92.0 * rho_t * rho_t, in_regime: rho_t <= 0.01 })
}

/// Smallest `M ≥ 1` dominating `μ₁/ν₁`, `P₀₁/Q₀₁` and `P₁₀/Q₁₀`.
pub fn ratio_bound(f: &BinaryMarkovChainSpec, g: &BinaryMarkovChainSpec) -> f64 {
    let ratio = |p: f64, q: f64| {
        if p == 0.0 {
            0.0
        } else if q == 0.0 {
            f64::INFINITY
        } else {
            p / q
        }
    };
    1f64.max(ratio(f.mu1, g.mu1)).max(ratio(f.p01, g.p01)).max(ratio(f.p10(), g.p10()))
}

/// Upper bound `(2α+1)/(α−1) · CρT · e^{5CρT}` on `D_α(f‖g)` for `α > 1`,
/// with `C = M^{2α}/(1−Λ)` and `Λ = P₁₁^α Q₁₁^{1−α}`.
pub fn high_order_bound(alpha: f64, f: &BinaryMarkovChainSpec, g: &BinaryMarkovChainSpec, t: usize, m: f64, rho: f64) -> Result<f64> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(MarkovError::InvalidOrder(alpha));
    }
    if t == 0 {
        return Err(MarkovError::EmptyHorizon);
    }
    if !(m >= 1.0) {
        return Err(MarkovError::Precondition(format!("M = {m} must be at least 1")));
    }
    if ratio_bound(f, g) > m {
        return Err(MarkovError::Precondition(format!("likelihood ratios exceed M = {m}")));
    }
    if !(g.p11 > 0.0) {
        return Err(MarkovError::Precondition("Q11 must be positive".into()));
    }
    if !(rho <= 0.5) || g.mu1 > rho || g.p01 > rho {
        return Err(MarkovError::Precondition(format!("nu1, Q01 <= rho <= 1/2 fails for rho = {rho}")));
    }
    let lambda = f.p11.powf(alpha) * g.p11.powf(1.0 - alpha);
    if lambda >= 1.0 {
        return Err(MarkovError::BoundInapplicable(lambda));
    }
    let c_rho_t = m.powf(2.0 * alpha) / (1.0 - lambda) * rho * t as f64;
    Ok((2.0 * alpha + 1.0) / (alpha - 1.0) * c_rho_t * (5.0 * c_rho_t).exp())
}

/// Rescaled divergence constant over a fixed horizon `t`: `u, v` are the
/// initial densities and `p01, q01` the switch-on rates in units of `ρ`.
pub fn i_tilde_short(u: f64, v: f64, p01: f64, q01: f64, h11_sq: f64, gamma: f64, t: usize) -> Result<f64> {
    for (name, x) in [("u", u), ("v", v), ("p01", p01), ("q01", q01), ("h11_sq", h11_sq)] {
        if !(x >= 0.0) {
            return Err(MarkovError::Precondition(format!("{name} = {x} must be non-negative")));
        }
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(MarkovError::Precondition(format!("gamma = {gamma} outside (0, 1]")));
    }
    if t == 0 {
        return Err(MarkovError::EmptyHorizon);
    }
    let per_step = (p01.sqrt() - q01.sqrt()).powi(2) + 2.0 * h11_sq * (p01 * q01).sqrt();
    let mut geometric = 0.0;
    let mut power = 1.0;
    for _ in 0..t - 1 {
        geometric += power;
        power *= 1.0 - gamma;
    }
    Ok((u.sqrt() - v.sqrt()).powi(2)
        + per_step * (t as f64 - 1.0)
        + 2.0 * h11_sq * (gamma * (u * v).sqrt() - (p01 * q01).sqrt()) * geometric)
}

/// Long-horizon divergence constant per snapshot.
pub fn i_tilde_long(p01: f64, q01: f64, h11_sq: f64) -> Result<f64> {
    for (name, x) in [("p01", p01), ("q01", q01), ("h11_sq", h11_sq)] {
        if !(x >= 0.0) {
            return Err(MarkovError::Precondition(format!("{name} = {x} must be non-negative")));
        }
    }
    Ok((p01.sqrt() - q01.sqrt()).powi(2) + 2.0 * h11_sq * (p01 * q01).sqrt())
}

/// The constants `(u, v, p01, q01, h11², γ)` of a chain pair at density `rho`.
pub fn i_tilde_constants(f: &BinaryMarkovChainSpec, g: &BinaryMarkovChainSpec, rho: f64) -> [f64; 6] {
    [f.mu1 / rho, g.mu1 / rho, f.p01 / rho, g.p01 / rho, h11_sq(f.p11, g.p11), 1.0 - (f.p11 * g.p11).sqrt()]
}

/// `ρ = log N / N`.
pub fn critical_density(n: usize) -> f64 {
    let n = n as f64;
    n.ln() / n
}

/// Quantity compared against the threshold when searching for `T*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ThresholdConvention {
    /// Exact path-law `D_{1/2}` against `K log N / N`.
    #[default]
    Exact,
    /// Rescaled constant `Ĩ(T)` against `K`.
    ITilde,
}

/// Scale on which the divergence is compared with the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DivergenceScale {
    /// `D_{1/2} = −2 log Σ√(fg)` as is.
    #[default]
    Renyi,
    /// `−log Σ√(fg) = D_{1/2}/2`, which doubles the effective level.
    Bhattacharyya,
}

impl DivergenceScale {
    pub fn level_factor(self) -> f64 {
        match self {
            DivergenceScale::Renyi => 1.0,
            DivergenceScale::Bhattacharyya => 2.0,
        }
    }
}

/// Threshold inputs for a chain pair on `n` nodes and `k` blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdProblem {
    pub f: BinaryMarkovChainSpec,
    pub g: BinaryMarkovChainSpec,
    pub n: usize,
    pub k: usize,
    pub convention: ThresholdConvention,
    pub scale: DivergenceScale,
}

impl ThresholdProblem {
    /// Divergence in the units of the convention.
    pub fn statistic(&self, t: usize) -> Result<f64> {
        match self.convention {
            ThresholdConvention::Exact => markov_renyi_exact(0.5, &self.f, &self.g, t),
            ThresholdConvention::ITilde => {
                let [u, v, p, q, h, gamma] = i_tilde_constants(&self.f, &self.g, critical_density(self.n));
                i_tilde_short(u, v, p, q, h, gamma, t)
            }
        }
    }

    pub fn level(&self) -> f64 {
        let k = self.k as f64 * self.scale.level_factor();
        match self.convention {
            ThresholdConvention::Exact => k * critical_density(self.n),
            ThresholdConvention::ITilde => k,
        }
    }

    fn crosses(&self, value: f64) -> bool {
        match self.convention {
            ThresholdConvention::Exact => value >= self.level(),
            ThresholdConvention::ITilde => value > self.level(),
        }
    }
}

/// Smallest horizon at which the divergence reaches the strong-consistency
/// level, or `None` if that does not happen by `cap`.
pub fn t_star(problem: &ThresholdProblem, cap: usize) -> Result<Option<usize>> {
    if problem.k < 2 {
        return Err(MarkovError::Precondition("t_star needs K >= 2".into()));
    }
    if problem.convention == ThresholdConvention::ITilde && problem.f.p11 * problem.g.p11 >= 1.0 {
        return Err(MarkovError::Precondition("gamma = 0 for absorbing chains".into()));
    }
    let linear = cap.min(LINEAR_SCAN_LIMIT);
    match problem.convention {
        ThresholdConvention::Exact => {
            let mut scan = TransferScan::new(0.5, &problem.f, &problem.g);
            for t in 1..=linear {
                let d = if problem.f == problem.g { 0.0 } else { renyi_from_log_integral(0.5, scan.step()) };
                if problem.crosses(d) {
                    return Ok(Some(t));
                }
            }
        }
        ThresholdConvention::ITilde => {
            for t in 1..=linear {
                if problem.crosses(problem.statistic(t)?) {
                    return Ok(Some(t));
                }
            }
        }
    }
    if linear == cap {
        return Ok(None);
    }
    // doubling, then bisection on (lo, hi]
    let mut lo = linear;
    let mut hi = linear;
    loop {
        hi = (hi * 2).min(cap);
        if problem.crosses(problem.statistic(hi)?) {
            break;
        }
        if hi == cap {
            return Ok(None);
        }
        lo = hi;
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if problem.crosses(problem.statistic(mid)?) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Summary statistics of a binary interaction pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PathStats {
    /// Number of ones.
    pub ones: usize,
    /// Number of maximal runs of ones.
    pub on_periods: usize,
    pub first: u8,
    pub last: u8,
    /// Transition counts indexed `[from][to]`.
    pub transitions: [[usize; 2]; 2],
}

pub fn path_stats(path: &[u8]) -> PathStats {
    let mut stats = PathStats::default();
    let (Some(&first), Some(&last)) = (path.first(), path.last()) else {
        return stats;
    };
    stats.first = first;
    stats.last = last;
    stats.ones = path.iter().filter(|&&x| x != 0).count();
    for w in path.windows(2) {
        stats.transitions[w[0] as usize][w[1] as usize] += 1;
    }
    stats.on_periods = first as usize + stats.transitions[0][1];
    stats
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// Number of length-`t_len` paths with `j` on-periods, `t` ones, first bit
/// `a` and last bit `b`.
pub fn count_paths(j: usize, t: usize, a: u8, b: u8, t_len: usize) -> u128 {
    let (a, b) = (a as usize, b as usize);
    if a > 1 || b > 1 || t > t_len {
        return 0;
    }
    if j == 0 {
        return u128::from(t == 0 && a == 0 && b == 0);
    }
    if j == 1 {
        return match (a, b) {
            (0, 0) if t >= 1 && t + 2 <= t_len => (t_len - t - 1) as u128,
            (0, 1) | (1, 0) if t >= 1 && t < t_len => 1,
            (1, 1) if t == t_len => 1,
            _ => 0,
        };
    }
    if t < j || t + j > t_len + a + b - 1 {
        return 0;
    }
    binomial(t - 1, j - 1) * binomial(t_len - t - 1, j - a - b)
}

/// `w₀^{1−a} w₁^a W₀₀^{T−1−(t+j−a−b)} W₀₁^{j−a} W₁₀^{j−b} W₁₁^{t−j}`, the
/// common weight of every path in a `(j, t, a, b)` class.
pub fn path_class_weight(j: usize, t: usize, a: u8, b: u8, t_len: usize, init: [f64; 2], trans: [[f64; 2]; 2]) -> f64 {
    let (a, b) = (a as i64, b as i64);
    let (j, t, t_len) = (j as i64, t as i64, t_len as i64);
    let pow = |x: f64, e: i64| if e == 0 { 1.0 } else { x.powi(e as i32) };
    let start = if a == 1 { init[1] } else { init[0] };
    if j == 0 {
        return start * pow(trans[0][0], t_len - 1);
    }
    start * pow(trans[0][0], t_len - 1 - (t + j - a - b)) * pow(trans[0][1], j - a) * pow(trans[1][0], j - b) * pow(trans[1][1], t - j)
}

/// Everything computed for one chain pair, with the conventions used.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub n: usize,
    pub k: usize,
    pub t: usize,
    pub exact: f64,
    pub sparse: SparseApprox,
    pub i_tilde: Option<f64>,
    pub j: f64,
    pub beta_half: Option<f64>,
    pub lower_bound_main_text: f64,
    pub lower_bound_appendix: f64,
    pub upper_bound: f64,
    pub kappa: f64,
    pub eps: f64,
    pub zeta: f64,
    pub scale: DivergenceScale,
    pub t_star_exact: Option<usize>,
    pub t_star_i_tilde: Option<usize>,
}

/// Builds a [`DivergenceReport`] for `t` snapshots. Bounds are clamped to
/// `[0, 1]` for reporting.
#[allow(clippy::too_many_arguments)]
pub fn divergence_report(
    f: &BinaryMarkovChainSpec,
    g: &BinaryMarkovChainSpec,
    n: usize,
    k: usize,
    t: usize,
    eps: f64,
    zeta: f64,
    scale: DivergenceScale,
) -> Result<DivergenceReport> {
    let exact = markov_renyi_exact(0.5, f, g, t)?;
    let sparse = sparse_renyi_half(f, g, t)?;
    let rho = critical_density(n);
    let [u, v, p, q, h, gamma] = i_tilde_constants(f, g, rho);
    let i_tilde = i_tilde_short(u, v, p, q, h, gamma, t).ok();
    let j = markov_j_quantity(f, g, t)?;
    let beta_half = path_beta_ratio(f, g, t).ok();
    let inputs = BoundInputs::new(n, k, exact, j, eps, zeta)?;
    let lower = |c| divergence::lower_bound_error_rate(&inputs, c).map(|x| x.clamp(0.0, 1.0));
    let kappa = divergence::kappa(n, k, exact);
    let upper_bound = divergence::upper_bound_error_rate(&inputs, kappa)?.clamp(0.0, 1.0);
    let problem = |convention| ThresholdProblem { f: *f, g: *g, n, k, convention, scale };
    let t_star_exact = t_star(&problem(ThresholdConvention::Exact), T_STAR_CAP)?;
    let t_star_i_tilde = t_star(&problem(ThresholdConvention::ITilde), T_STAR_CAP).ok().flatten();
    Ok(DivergenceReport {
        n,
        k,
        t,
        exact,
        sparse,
        i_tilde,
        j,
        beta_half,
        lower_bound_main_text: lower(I21Convention::MainText)?,
        lower_bound_appendix: lower(I21Convention::Appendix)?,
        upper_bound,
        kappa,
        eps,
        zeta,
        scale,
        t_star_exact,
        t_star_i_tilde,
    })
}

/// `D^s_{3/2} / D^s_{1/2}` between path laws.
pub fn path_beta_ratio(f: &BinaryMarkovChainSpec, g: &BinaryMarkovChainSpec, t: usize) -> Result<f64> {
    let sym = |alpha| -> Result<f64> { Ok(0.5 * (markov_renyi_exact(alpha, f, g, t)? + markov_renyi_exact(alpha, g, f, t)?)) };
    let denominator = sym(0.5)?;
    if denominator == 0.0 {
        return Err(DivergenceError::ZeroDenominator(0.5).into());
    }
    Ok(sym(1.5)? / denominator)
}

/// Path law of a chain over `t` snapshots as a distribution on `2^t`
/// symbols (bit `s` of the symbol is snapshot `s`).
pub fn path_distribution(chain: &BinaryMarkovChainSpec, t: usize) -> Result<FiniteDistribution> {
    if t > BRUTE_FORCE_MAX_T {
        return Err(MarkovError::HorizonTooLong { t, max: BRUTE_FORCE_MAX_T });
    }
    let mut probs = Vec::with_capacity(1 << t);
    for_each_path(t, |path| probs.push(chain.path_prob(path)));
    Ok(FiniteDistribution::new(probs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn chain(mu1: f64, p01: f64, p11: f64) -> BinaryMarkovChainSpec {
        BinaryMarkovChainSpec::new(mu1, p01, p11).unwrap()
    }

    #[test]
    fn stationary_construction() {
        let c = chain_from_stationary(0.05, 0.6).unwrap();
        assert_abs_diff_eq!(c.p01, 0.05 * 0.4 / 0.95, epsilon = 1e-16);
        assert_abs_diff_eq!(c.p01, 0.0210526315789473684, epsilon = 1e-15);
        let c = chain_from_stationary(0.3, 0.3).unwrap();
        assert_abs_diff_eq!(c.p01, 0.3, epsilon = 1e-16);
        let c = chain_from_stationary(0.5, 0.99).unwrap();
        assert_abs_diff_eq!(c.p01, 0.01, epsilon = 1e-15);
        for (pi1, p11) in [(0.05, 0.6), (0.5, 0.99), (0.2, 0.0), (0.01, 0.9)] {
            let c = chain_from_stationary(pi1, p11).unwrap();
            let next1 = (1.0 - pi1) * c.p01 + pi1 * c.p11;
            assert_abs_diff_eq!(next1, pi1, epsilon = 1e-14);
        }
        assert!(matches!(chain_from_stationary(0.8, 0.0), Err(MarkovError::InfeasibleStationary { .. })));
        assert!(chain_from_stationary(1.0, 0.5).is_err());
    }

    #[test]
    fn single_snapshot_reduces_to_initial_laws() {
        let (f, g) = (chain(0.3, 0.2, 0.6), chain(0.1, 0.4, 0.2));
        for alpha in [0.3, 0.5, 1.5] {
            let expect =
                divergence::renyi(alpha, &FiniteDistribution::bernoulli(0.3).unwrap(), &FiniteDistribution::bernoulli(0.1).unwrap())
                    .unwrap();
            assert_abs_diff_eq!(markov_renyi_exact(alpha, &f, &g, 1).unwrap(), expect, epsilon = 1e-14);
            assert_abs_diff_eq!(markov_renyi_brute(alpha, &f, &g, 1).unwrap(), expect, epsilon = 1e-14);
        }
    }

    #[test]
    fn identical_chains_have_zero_divergence() {
        let f = chain(0.9, 0.1, 0.5);
        for t in 1..30 {
            assert_eq!(markov_renyi_exact(0.5, &f, &f, t).unwrap(), 0.0);
        }
        assert_eq!(markov_renyi_brute(0.5, &f, &f, 3).unwrap(), 0.0);
    }

    #[test]
    fn exact_matches_enumeration() {
        let pairs = [
            (chain(0.3, 0.2, 0.6), chain(0.1, 0.4, 0.2)),
            (chain(0.0, 0.05, 1.0), chain(0.02, 0.03, 0.5)),
            (chain(0.5, 0.5, 0.5), chain(0.9, 0.1, 0.99)),
        ];
        for (f, g) in pairs {
            for t in 1..=10 {
                for alpha in [0.3, 0.5, 1.5] {
                    let a = markov_renyi_exact(alpha, &f, &g, t).unwrap();
                    let b = markov_renyi_brute(alpha, &f, &g, t).unwrap();
                    if a.is_infinite() || b.is_infinite() {
                        assert_eq!(a, b);
                    } else {
                        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn exact_matches_path_distribution_renyi() {
        let (f, g) = (chain(0.2, 0.3, 0.7), chain(0.4, 0.1, 0.3));
        let pf = path_distribution(&f, 6).unwrap();
        let pg = path_distribution(&g, 6).unwrap();
        assert_abs_diff_eq!(markov_renyi_exact(0.5, &f, &g, 6).unwrap(), divergence::renyi(0.5, &pf, &pg).unwrap(), epsilon = 1e-12);
        assert_abs_diff_eq!(markov_j_quantity(&f, &g, 6).unwrap(), divergence::j_quantity(&pf, &pg).unwrap(), epsilon = 1e-11);
    }

    #[test]
    fn infinite_divergence_support() {
        // f can switch on while g never does
        let (f, g) = (chain(0.2, 0.1, 0.5), chain(0.0, 0.0, 0.5));
        assert_eq!(markov_renyi_exact(1.5, &f, &g, 4).unwrap(), f64::INFINITY);
        assert_eq!(markov_renyi_brute(1.5, &f, &g, 4).unwrap(), f64::INFINITY);
        assert!(markov_renyi_exact(0.5, &f, &g, 4).unwrap().is_finite());
        assert!(matches!(markov_renyi_brute(0.5, &f, &g, 21), Err(MarkovError::HorizonTooLong { .. })));
        assert!(matches!(markov_renyi_exact(0.5, &f, &g, 0), Err(MarkovError::EmptyHorizon)));
    }

    #[test]
    fn long_horizon_does_not_underflow() {
        let (f, g) = (chain(0.4, 0.3, 0.7), chain(0.1, 0.6, 0.2));
        let d = markov_renyi_exact(0.5, &f, &g, 100_000).unwrap();
        assert!(d.is_finite() && d > 100.0);
    }

    #[test]
    fn sparse_approx_identical_and_iid() {
        let f = chain(0.001, 0.001, 0.3);
        let a = sparse_renyi_approx(0.5, &f, &f, 5).unwrap();
        assert_abs_diff_eq!(a.value, 0.0, epsilon = 1e-15);
        // i.i.d. chains: h11 = 0 since P11 = Q11 after matching switch-on rates
        let rho = 1e-4;
        let (u, v) = (3.0, 1.0);
        let f = BinaryMarkovChainSpec::iid(u * rho).unwrap();
        let g = BinaryMarkovChainSpec::iid(v * rho).unwrap();
        let t = 10;
        let approx = sparse_renyi_half(&f, &g, t).unwrap();
        let expect = t as f64 * ((u * rho).sqrt() - (v * rho).sqrt()).powi(2);
        assert!((approx.value - expect).abs() <= 1e-3 * expect + approx.error_radius);
        assert!((approx.value - markov_renyi_exact(0.5, &f, &g, t).unwrap()).abs() <= approx.error_radius);
    }

    #[test]
    fn half_form_agrees_with_general_form() {
        let cases = [
            (chain(3e-4, 2e-4, 0.7), chain(1e-4, 4e-4, 0.3)),
            (chain(1e-3, 1e-4, 0.99), chain(2e-4, 1e-3, 0.0)),
            (chain(5e-4, 5e-4, 1.0), chain(1e-4, 1e-4, 1.0)),
        ];
        for (f, g) in cases {
            for t in [1, 2, 5, 10] {
                let general = sparse_renyi_approx(0.5, &f, &g, t).unwrap();
                let half = sparse_renyi_half(&f, &g, t).unwrap();
                assert_abs_diff_eq!(general.value, half.value, epsilon = 1e-14);
                assert_abs_diff_eq!(general.error_radius, half.error_radius, epsilon = 1e-18);
            }
        }
    }

    #[test]
    fn sparse_error_radius_holds() {
        for rho in [1e-4, 1e-3] {
            for t in [5, 10] {
                let f = chain(rho, 0.7 * rho, 0.8);
                let g = chain(0.4 * rho, rho, 0.2);
                let a = sparse_renyi_half(&f, &g, t).unwrap();
                assert!(a.in_regime);
                let exact = markov_renyi_exact(0.5, &f, &g, t).unwrap();
                assert!((exact - a.value).abs() <= a.error_radius);
            }
        }
        let wide = sparse_renyi_approx(0.5, &chain(0.01, 0.01, 0.5), &chain(0.02, 0.01, 0.5), 10).unwrap();
        assert!(!wide.in_regime);
    }

    #[test]
    fn high_order_bound_dominates() {
        let f = chain(0.02, 0.03, 0.6);
        let g = chain(0.01, 0.02, 0.4);
        let m = ratio_bound(&f, &g);
        let rho = 0.02;
        for t in [1, 3, 8] {
            let bound = high_order_bound(1.5, &f, &g, t, m, rho).unwrap();
            assert!(markov_renyi_exact(1.5, &f, &g, t).unwrap() <= bound);
        }
        assert_eq!(high_order_bound(1.5, &f, &f, 4, 1.0, 0.05).map(|b| b >= 0.0), Ok(true));
        let near = chain(0.01, 0.02, 0.9999);
        let far = high_order_bound(1.5, &near, &near, 5, 1.0, rho);
        assert!(far.unwrap() > high_order_bound(1.5, &f, &g, 5, m, rho).unwrap());
        let absorbing = chain(0.01, 0.02, 1.0);
        assert!(matches!(high_order_bound(1.5, &absorbing, &absorbing, 5, 1.0, rho), Err(MarkovError::BoundInapplicable(_))));
        assert!(high_order_bound(1.5, &f, &g, 5, 1.0, rho).is_err());
    }

    #[test]
    fn i_tilde_forms() {
        assert_abs_diff_eq!(i_tilde_short(4.0, 1.0, 2.0, 3.0, 0.3, 0.5, 1).unwrap(), 1.0, epsilon = 1e-15);
        let (u, v) = (2.5, 1.5);
        for t in 1..8 {
            let i = i_tilde_short(u, v, u, v, 0.0, 1.0, t).unwrap();
            assert_abs_diff_eq!(i, t as f64 * (u.sqrt() - v.sqrt()).powi(2), epsilon = 1e-13);
        }
        assert!(i_tilde_short(1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 3).is_err());
        let (xi, a) = (0.3f64, 0.4f64);
        let long = i_tilde_long((1.0 - xi) * (1.0 + a), (1.0 - xi) * (1.0 - a), 0.0).unwrap();
        assert_abs_diff_eq!(long, 2.0 * (1.0 - xi) * (1.0 - ((1.0 - a) * (1.0 + a)).sqrt()), epsilon = 1e-14);
    }

    #[test]
    fn h11_limits() {
        assert_abs_diff_eq!(h11_sq(0.4, 0.4), 0.0, epsilon = 1e-15);
        assert_eq!(h11_sq(1.0, 1.0), 0.0);
        assert_abs_diff_eq!(h11_sq(1.0, 0.5), 1.0, epsilon = 1e-15);
        // Hellinger distance between geometric laws, by direct summation
        let (p, q) = (0.7f64, 0.3f64);
        let bc: f64 = (1..2000).map(|k| ((1.0 - p) * p.powi(k - 1) * (1.0 - q) * q.powi(k - 1)).sqrt()).sum();
        assert_abs_diff_eq!(h11_sq(p, q), 1.0 - bc, epsilon = 1e-12);
    }

    #[test]
    fn path_stats_identities() {
        let s = path_stats(&[0, 1, 1, 0, 1]);
        assert_eq!(s.ones, 3);
        assert_eq!(s.on_periods, 2);
        assert_eq!((s.first, s.last), (0, 1));
        assert_eq!(s.transitions, [[0, 2], [1, 1]]);
        for t in 1..=8 {
            for_each_path(t, |p| {
                let s = path_stats(p);
                let tr = s.transitions;
                assert_eq!(s.on_periods, s.first as usize + tr[0][1]);
                assert_eq!(s.on_periods, tr[1][0] + s.last as usize);
                assert_eq!(s.ones, s.on_periods + tr[1][1]);
                assert_eq!(tr[0][0] + tr[0][1] + tr[1][0] + tr[1][1], t - 1);
            });
        }
    }

    #[test]
    fn count_paths_special_cases() {
        for t_len in 1..10 {
            assert_eq!(count_paths(0, 0, 0, 0, t_len), 1);
        }
        assert_eq!(count_paths(1, 2, 0, 0, 5), 2);
        assert_eq!(count_paths(1, 5, 1, 1, 5), 1);
        assert_eq!(count_paths(1, 4, 1, 1, 5), 0);
        assert_eq!(count_paths(2, 3, 0, 0, 7), binomial(2, 1) * binomial(3, 2));
    }

    #[test]
    fn count_paths_reconstruct_integral() {
        let (f, g) = (chain(0.3, 0.2, 0.6), chain(0.1, 0.4, 0.2));
        let gm = |p: f64, q: f64| (p * q).sqrt();
        let init = [gm(1.0 - f.mu1, 1.0 - g.mu1), gm(f.mu1, g.mu1)];
        let trans = [0, 1].map(|a| [0, 1].map(|b| gm(f.transition(a, b), g.transition(a, b))));
        for t_len in 1usize..=10 {
            let mut z = 0.0;
            for j in 0..=t_len.div_ceil(2) {
                for t in 0..=t_len {
                    for a in 0..2u8 {
                        for b in 0..2u8 {
                            let c = count_paths(j, t, a, b, t_len);
                            if c > 0 {
                                z += c as f64 * path_class_weight(j, t, a, b, t_len, init, trans);
                            }
                        }
                    }
                }
            }
            let log_z = markov_log_integral(0.5, &f, &g, t_len).unwrap();
            assert_abs_diff_eq!(z.ln(), log_z, epsilon = 1e-12);
        }
    }

    #[test]
    fn t_star_conventions_on_small_problem() {
        let n = 500;
        let rho = critical_density(n);
        let f = chain_from_stationary(2.5 * rho, 0.7).unwrap();
        let g = chain_from_stationary(1.5 * rho, 0.3).unwrap();
        let base = ThresholdProblem { f, g, n, k: 2, convention: ThresholdConvention::Exact, scale: DivergenceScale::Renyi };
        let t1 = t_star(&base, T_STAR_CAP).unwrap().unwrap();
        let level = base.level();
        assert!(markov_renyi_exact(0.5, &f, &g, t1).unwrap() >= level);
        assert!(t1 == 1 || markov_renyi_exact(0.5, &f, &g, t1 - 1).unwrap() < level);
        let doubled = ThresholdProblem { scale: DivergenceScale::Bhattacharyya, ..base };
        assert!(t_star(&doubled, T_STAR_CAP).unwrap().unwrap() > t1);
        let same = ThresholdProblem { g: f, ..base };
        assert_eq!(t_star(&same, 5000).unwrap(), None);
    }

    #[test]
    fn t_star_beyond_linear_scan() {
        // a weak signal that needs a few thousand snapshots
        let n = 1000;
        let rho = critical_density(n);
        let f = chain_from_stationary(rho, 0.31).unwrap();
        let g = chain_from_stationary(rho, 0.3).unwrap();
        let problem = ThresholdProblem { f, g, n, k: 2, convention: ThresholdConvention::Exact, scale: DivergenceScale::Renyi };
        let t = t_star(&problem, T_STAR_CAP).unwrap().unwrap();
        assert!(t > LINEAR_SCAN_LIMIT);
        let level = problem.level();
        assert!(problem.statistic(t).unwrap() >= level);
        assert!(problem.statistic(t - 1).unwrap() < level);
        assert_eq!(t_star(&problem, t - 1).unwrap(), None);
    }

    #[test]
    fn report_fields_are_consistent() {
        let n = 500;
        let rho = critical_density(n);
        let f = chain_from_stationary(1.5 * rho, 0.7).unwrap();
        let g = chain_from_stationary(1.5 * rho, 0.3).unwrap();
        let r = divergence_report(&f, &g, n, 2, 13, 0.01, 0.02, DivergenceScale::Bhattacharyya).unwrap();
        assert_eq!(r.t_star_exact, Some(13));
        assert!(r.lower_bound_appendix >= 0.0 && r.upper_bound <= 1.0);
        assert!(r.j > 0.0 && r.beta_half.unwrap() > 0.0);
        let same = divergence_report(&f, &f, n, 2, 5, 0.0, 0.0, DivergenceScale::Renyi).unwrap();
        assert_eq!(same.exact, 0.0);
        assert_eq!(same.sparse.value, 0.0);
        assert_eq!(same.t_star_exact, None);
    }
}
