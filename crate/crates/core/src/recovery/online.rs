//! Online likelihood clustering for Markov interaction patterns, one
//! snapshot at a time, with known or learned chain parameters.

use rayon::prelude::*;

use super::{argmax_with_tie, log_ratio, RecoveryError, Result};
use crate::markov::BinaryMarkovChainSpec;
use crate::sbm::{sample_labelling, LabelPrior, Labelling, SnapshotArray};

/// Intra-block chain `(μ, P)` and inter-block chain `(ν, Q)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkovEstimates {
    pub intra: BinaryMarkovChainSpec,
    pub inter: BinaryMarkovChainSpec,
}

impl MarkovEstimates {
    /// `log P_ab / Q_ab` for the four transitions, indexed `2a + b`.
    fn deltas(&self) -> [f64; 4] {
        let mut d = [0.0; 4];
        for a in 0..2 {
            for b in 0..2 {
                d[2 * a + b] = log_ratio(self.intra.transition(a, b), self.inter.transition(a, b));
            }
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateOrder {
    /// Every node is relabelled against the labelling frozen at the start of the sweep.
    #[default]
    Synchronous,
    /// Nodes are relabelled in index order, each seeing the earlier updates.
    Asynchronous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OnlineMode {
    Known(MarkovEstimates),
    /// Parameters re-estimated from the current labelling every `refresh_every` steps.
    Learned {
        refresh_every: usize,
    },
}

/// Snapshot `s` of every pair, in pair order.
pub fn snapshot(array: &SnapshotArray, s: usize) -> Vec<u8> {
    (0..array.num_pairs()).map(|p| array.pattern_by_index(p)[s]).collect()
}

/// Uniformly random labelling.
pub fn random_guess(n: usize, k: usize, seed: u64) -> Result<Labelling> {
    Ok(sample_labelling(n, k, &LabelPrior::Uniform, seed)?)
}

/// Running state of the online algorithms: cumulative log-likelihood ratios,
/// the current labelling and, when learning, per-pair transition counts.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodState {
    n: usize,
    m: Vec<f64>,
    sigma: Labelling,
    t: usize,
    prev: Vec<u8>,
    counts: Vec<[u32; 4]>,
    estimates: MarkovEstimates,
    mode: OnlineMode,
    order: UpdateOrder,
}

impl LikelihoodState {
    /// Consumes the first snapshot: `M_ij = log μ(X¹_ij) / ν(X¹_ij)`. In
    /// learned mode `μ̂, ν̂` are averaged over the pairs `init` puts in one
    /// block and across blocks, and the first transition step treats both
    /// chains as i.i.d. with those rates.
    pub fn new(first: &[u8], init: Labelling, mode: OnlineMode, order: UpdateOrder) -> Result<Self> {
        let n = init.n();
        let expected = n * n.saturating_sub(1) / 2;
        if first.len() != expected {
            return Err(RecoveryError::SnapshotShape { got: first.len(), expected });
        }
        let (estimates, counts) = match mode {
            OnlineMode::Known(p) => (p, Vec::new()),
            OnlineMode::Learned { .. } => {
                let (mu, nu) = class_means(first, &init, [0.5, 0.5]);
                let iid = |p: f64| BinaryMarkovChainSpec::iid(p).expect("mean of 0/1 values");
                (MarkovEstimates { intra: iid(mu), inter: iid(nu) }, vec![[0u32; 4]; expected])
            }
        };
        let mut m = vec![0.0; n * n];
        let init_ratio = [0, 1].map(|a| log_ratio(estimates.intra.initial(a), estimates.inter.initial(a)));
        for_each_pair(n, |p, i, j| {
            let v = init_ratio[usize::from(first[p] != 0)];
            m[i * n + j] = v;
            m[j * n + i] = v;
        });
        Ok(Self { n, m, sigma: init, t: 1, prev: first.to_vec(), counts, estimates, mode, order })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Snapshots consumed so far.
    pub fn t(&self) -> usize {
        self.t
    }

    pub fn labelling(&self) -> &Labelling {
        &self.sigma
    }

    pub fn m(&self, i: usize, j: usize) -> f64 {
        self.m[i * self.n + j]
    }

    pub fn estimates(&self) -> &MarkovEstimates {
        &self.estimates
    }

    pub fn mode(&self) -> OnlineMode {
        self.mode
    }

    /// Transition counts `n_ab(i, j)` of pair `i < j`, indexed `[a][b]`; `None`
    /// unless parameters are learned.
    pub fn transition_counts(&self, i: usize, j: usize) -> Option<[[u32; 2]; 2]> {
        let c = self.counts.get(crate::sbm::pair_index(self.n, i, j))?;
        Some([[c[0], c[1]], [c[2], c[3]]])
    }

    /// Advances by one snapshot using the state's own mode.
    pub fn step(&mut self, snap: &[u8]) -> Result<()> {
        match self.mode {
            OnlineMode::Known(p) => alg2_online_step(self, snap, &p),
            OnlineMode::Learned { .. } => alg3_online_step(self, snap),
        }
    }

    fn check_snapshot(&self, snap: &[u8]) -> Result<()> {
        if snap.len() != self.prev.len() {
            return Err(RecoveryError::SnapshotShape { got: snap.len(), expected: self.prev.len() });
        }
        Ok(())
    }

    fn accumulate(&mut self, snap: &[u8], deltas: &[f64; 4]) {
        let (n, prev, m) = (self.n, &self.prev, &mut self.m);
        for_each_pair(n, |p, i, j| {
            let d = deltas[2 * usize::from(prev[p] != 0) + usize::from(snap[p] != 0)];
            m[i * n + j] += d;
            m[j * n + i] += d;
        });
    }

    fn relabel(&mut self) {
        let n = self.n;
        let k = self.sigma.k();
        let scores = |i: usize, labels: &[usize]| {
            let mut l = vec![0.0; k];
            for (j, (&m, &s)) in self.m[i * n..(i + 1) * n].iter().zip(labels).enumerate() {
                if j != i {
                    l[s] += m;
                }
            }
            l
        };
        match self.order {
            UpdateOrder::Synchronous => {
                let frozen = self.sigma.labels();
                let next: Vec<usize> = (0..n).into_par_iter().map(|i| argmax_with_tie(&scores(i, frozen), Some(frozen[i]))).collect();
                self.sigma = Labelling::new(next, k).expect("argmax lies in 0..k");
            }
            UpdateOrder::Asynchronous => {
                let mut labels = self.sigma.labels().to_vec();
                for i in 0..n {
                    labels[i] = argmax_with_tie(&scores(i, &labels), Some(labels[i]));
                }
                self.sigma = Labelling::new(labels, k).expect("argmax lies in 0..k");
            }
        }
    }

    fn reestimate(&mut self, snap: &[u8]) {
        let labels = self.sigma.labels();
        // sums of n_a1 / n_a and number of contributing pairs, per class and start state
        let mut acc = [[(0.0f64, 0usize); 2]; 2];
        for_each_pair(self.n, |p, i, j| {
            let class = usize::from(labels[i] != labels[j]);
            let c = &self.counts[p];
            for a in 0..2 {
                let na = c[2 * a] + c[2 * a + 1];
                if na > 0 {
                    acc[class][a].0 += c[2 * a + 1] as f64 / na as f64;
                    acc[class][a].1 += 1;
                }
            }
        });
        let (mu, nu) = class_means(snap, &self.sigma, [self.estimates.intra.mu1, self.estimates.inter.mu1]);
        let update = |old: BinaryMarkovChainSpec, rows: [(f64, usize); 2], init: f64| {
            let rate = |a: usize, fallback: f64| if rows[a].1 > 0 { rows[a].0 / rows[a].1 as f64 } else { fallback };
            BinaryMarkovChainSpec::new(init, rate(0, old.p01), rate(1, old.p11)).expect("averages of frequencies")
        };
        self.estimates =
            MarkovEstimates { intra: update(self.estimates.intra, acc[0], mu), inter: update(self.estimates.inter, acc[1], nu) };
    }
}

/// Mean of the snapshot over within-block and across-block pairs; an empty
/// class keeps its fallback.
fn class_means(snap: &[u8], sigma: &Labelling, fallback: [f64; 2]) -> (f64, f64) {
    let labels = sigma.labels();
    let mut sums = [(0usize, 0usize); 2];
    for_each_pair(sigma.n(), |p, i, j| {
        let class = usize::from(labels[i] != labels[j]);
        sums[class].0 += usize::from(snap[p] != 0);
        sums[class].1 += 1;
    });
    let mean = |c: usize| if sums[c].1 > 0 { sums[c].0 as f64 / sums[c].1 as f64 } else { fallback[c] };
    (mean(0), mean(1))
}

fn for_each_pair(n: usize, mut f: impl FnMut(usize, usize, usize)) {
    let mut p = 0;
    for i in 0..n {
        for j in i + 1..n {
            f(p, i, j);
            p += 1;
        }
    }
}

/// One update with known parameters: `M ← M + Δ`, then every node moves to
/// the block with the largest summed `M` against the current labelling.
pub fn alg2_online_step(state: &mut LikelihoodState, snap: &[u8], params: &MarkovEstimates) -> Result<()> {
    state.check_snapshot(snap)?;
    state.accumulate(snap, &params.deltas());
    state.relabel();
    state.prev.copy_from_slice(snap);
    state.t += 1;
    Ok(())
}

/// One update with learned parameters: the same step as `alg2_online_step`
/// using the current estimates, followed by the count update and, on
/// refresh steps, re-estimation of `μ̂, ν̂, P̂, Q̂` under the new labelling.
pub fn alg3_online_step(state: &mut LikelihoodState, snap: &[u8]) -> Result<()> {
    let OnlineMode::Learned { refresh_every } = state.mode else {
        return Err(RecoveryError::WrongMode { expected: "known-parameter" });
    };
    state.check_snapshot(snap)?;
    let deltas = state.estimates.deltas();
    state.accumulate(snap, &deltas);
    state.relabel();
    for ((c, &a), &b) in state.counts.iter_mut().zip(&state.prev).zip(snap) {
        c[2 * usize::from(a != 0) + usize::from(b != 0)] += 1;
    }
    state.t += 1;
    if (state.t - 1).is_multiple_of(refresh_every.max(1)) {
        state.reestimate(snap);
    }
    state.prev.copy_from_slice(snap);
    Ok(())
}

/// Runs an online algorithm over every snapshot of `array`, calling
/// `observe(t, σ̂)` after each of the `T` snapshots (1-based `t`).
pub fn run_online(
    array: &SnapshotArray,
    init: Labelling,
    mode: OnlineMode,
    order: UpdateOrder,
    mut observe: impl FnMut(usize, &Labelling),
) -> Result<LikelihoodState> {
    if init.n() != array.n() {
        return Err(RecoveryError::SizeMismatch { labelling: init.n(), data: array.n() });
    }
    if array.t() == 0 {
        return Err(RecoveryError::TooFewSnapshots { need: 1, got: 0 });
    }
    let mut state = LikelihoodState::new(&snapshot(array, 0), init, mode, order)?;
    observe(1, state.labelling());
    for s in 1..array.t() {
        state.step(&snapshot(array, s))?;
        observe(s + 1, state.labelling());
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::chain_from_stationary;
    use crate::metrics::accuracy;
    use crate::sbm::{sample_markov_snapshots, InteractionKernel, MarkovLaw};

    fn params(mu: f64, p11: f64, nu: f64, q11: f64) -> MarkovEstimates {
        MarkovEstimates { intra: chain_from_stationary(mu, p11).unwrap(), inter: chain_from_stationary(nu, q11).unwrap() }
    }

    fn planted(n: usize, pm: &MarkovEstimates, t: usize, seed: u64) -> (Labelling, SnapshotArray) {
        let truth = Labelling::new((0..n).map(|i| i % 2).collect(), 2).unwrap();
        let x = sample_markov_snapshots(&truth, pm.intra, pm.inter, t, seed).unwrap();
        (truth, x)
    }

    #[test]
    fn zero_information_keeps_init() {
        let pm = params(0.2, 0.5, 0.2, 0.5);
        let (_, x) = planted(30, &pm, 6, 1);
        let init = random_guess(30, 2, 2).unwrap();
        let state = run_online(&x, init.clone(), OnlineMode::Known(pm), UpdateOrder::Synchronous, |_, _| {}).unwrap();
        assert_eq!(state.labelling(), &init);
        for i in 0..30 {
            for j in 0..30 {
                assert_eq!(state.m(i, j), 0.0);
            }
        }
    }

    #[test]
    fn cumulative_ratio_matches_pattern_likelihood() {
        let pm = params(0.2, 0.7, 0.1, 0.3);
        let (truth, x) = planted(40, &pm, 8, 3);
        let kernel = InteractionKernel::new(MarkovLaw { chain: pm.intra, t: 8 }, MarkovLaw { chain: pm.inter, t: 8 }).unwrap();
        let state = run_online(&x, truth, OnlineMode::Known(pm), UpdateOrder::Synchronous, |_, _| {}).unwrap();
        for (i, j, p) in x.pairs() {
            assert!((state.m(i, j) - kernel.log_ratio(p)).abs() < 1e-9);
            assert_eq!(state.m(i, j), state.m(j, i));
        }
        assert_eq!(state.m(5, 5), 0.0);
        assert_eq!(state.t(), 8);
    }

    #[test]
    fn replay_is_identical() {
        let pm = params(0.1, 0.7, 0.06, 0.3);
        let (_, x) = planted(60, &pm, 6, 9);
        let mut a = Vec::new();
        let mut b = Vec::new();
        for out in [&mut a, &mut b] {
            let init = random_guess(60, 2, 5).unwrap();
            run_online(&x, init, OnlineMode::Known(pm), UpdateOrder::Synchronous, |_, s| out.push(s.clone())).unwrap();
        }
        assert_eq!(a, b);
        assert_eq!(a.len(), 6);
    }

    #[test]
    fn strong_signal_truth_is_stable() {
        let pm = params(0.3, 0.8, 0.05, 0.2);
        for seed in 0..5 {
            let (truth, x) = planted(80, &pm, 6, seed);
            run_online(&x, truth.clone(), OnlineMode::Known(pm), UpdateOrder::Synchronous, |_, s| assert_eq!(s, &truth)).unwrap();
        }
    }

    #[test]
    fn asynchronous_order_also_recovers() {
        let pm = params(0.2, 0.7, 0.1, 0.3);
        let (truth, x) = planted(100, &pm, 10, 4);
        let init = random_guess(100, 2, 4).unwrap();
        let state = run_online(&x, init, OnlineMode::Known(pm), UpdateOrder::Asynchronous, |_, _| {}).unwrap();
        assert!(accuracy(&truth, state.labelling()).unwrap() > 0.9);
    }

    #[test]
    fn hand_counted_transitions() {
        let mut x = SnapshotArray::zeros(2, 5, 2);
        for (s, v) in [0u8, 0, 1, 1, 0].into_iter().enumerate() {
            x.set(s, 0, 1, v);
        }
        let init = Labelling::new(vec![0, 0], 2).unwrap();
        let state = run_online(&x, init, OnlineMode::Learned { refresh_every: 1 }, UpdateOrder::Synchronous, |_, _| {}).unwrap();
        assert_eq!(state.transition_counts(0, 1), Some([[1, 1], [1, 1]]));
        // the single pair is within one block, so P̂ is its own frequencies
        assert_eq!(state.estimates().intra.p01, 0.5);
        assert_eq!(state.estimates().intra.p10(), 0.5);
    }

    #[test]
    fn counts_sum_to_elapsed_transitions() {
        let pm = params(0.2, 0.6, 0.1, 0.3);
        let (truth, x) = planted(20, &pm, 7, 2);
        let mut state =
            LikelihoodState::new(&snapshot(&x, 0), truth, OnlineMode::Learned { refresh_every: 2 }, UpdateOrder::Synchronous).unwrap();
        for s in 1..7 {
            state.step(&snapshot(&x, s)).unwrap();
            for i in 0..20 {
                for j in i + 1..20 {
                    let c = state.transition_counts(i, j).unwrap();
                    assert_eq!(c.iter().flatten().sum::<u32>() as usize, state.t() - 1);
                }
            }
        }
    }

    #[test]
    fn known_state_rejects_learned_step() {
        let pm = params(0.2, 0.6, 0.1, 0.3);
        let (truth, x) = planted(6, &pm, 2, 2);
        let mut state = LikelihoodState::new(&snapshot(&x, 0), truth, OnlineMode::Known(pm), UpdateOrder::Synchronous).unwrap();
        assert!(matches!(alg3_online_step(&mut state, &snapshot(&x, 1)), Err(RecoveryError::WrongMode { .. })));
        assert!(matches!(state.step(&[0, 1]), Err(RecoveryError::SnapshotShape { .. })));
    }

    #[test]
    fn learned_estimates_converge_under_oracle_labels() {
        let pm = params(0.2, 0.6, 0.1, 0.3);
        let (truth, x) = planted(100, &pm, 200, 11);
        let state = run_online(&x, truth.clone(), OnlineMode::Learned { refresh_every: 1 }, UpdateOrder::Synchronous, |_, _| {}).unwrap();
        assert_eq!(state.labelling(), &truth);
        let e = state.estimates();
        for (est, true_) in [(e.intra, pm.intra), (e.inter, pm.inter)] {
            assert!((est.p01 - true_.p01).abs() <= 0.02, "{est:?} vs {true_:?}");
            assert!((est.p11 - true_.p11).abs() <= 0.02, "{est:?} vs {true_:?}");
        }
    }
}
