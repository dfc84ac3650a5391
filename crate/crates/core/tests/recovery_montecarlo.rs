//! Seeded Monte-Carlo checks of the recovery algorithms at the parameter
//! points they are documented for.

use dynsbm_core::divergence::FiniteDistribution;
use dynsbm_core::markov::{chain_from_stationary, BinaryMarkovChainSpec};
use dynsbm_core::metrics::{accuracy, ham_star};
use dynsbm_core::recovery::{
    alg1_recover, alg2_online_step, alg3_online_step, alg4_transition_rates, alg5_best_friends, alg6_enemy, llr_matrix, mle_brute_force,
    random_guess, refine, run_online, snapshot, Alg1Config, Alg1Mode, LikelihoodState, MarkovEstimates, OnlineMode, UpdateOrder,
};
use dynsbm_core::sbm::{
    derive_seed, sample_categorical_snapshots, sample_labelling, sample_markov_snapshots, CategoricalLaw, InteractionKernel, LabelPrior,
    Labelling, MarkovLaw,
};
use dynsbm_core::spectral::{binarize, spectral_cluster, SpectralConfig};

fn log_scale(n: usize) -> f64 {
    (n as f64).ln() / n as f64
}

fn markov_kernel(pm: &MarkovEstimates, t: usize) -> InteractionKernel<MarkovLaw> {
    InteractionKernel::new(MarkovLaw { chain: pm.intra, t }, MarkovLaw { chain: pm.inter, t }).unwrap()
}

#[test]
fn likelihood_refinement_above_threshold() {
    let n = 500;
    let l = log_scale(n);
    let pm = MarkovEstimates { intra: chain_from_stationary(4.0 * l, 0.7).unwrap(), inter: chain_from_stationary(1.5 * l, 0.3).unwrap() };
    let kernel = markov_kernel(&pm, 15);
    let (mut refined, mut initial) = (0.0, 0.0);
    for seed in 0..20 {
        let truth = sample_labelling(n, 2, &LabelPrior::Uniform, derive_seed(seed, 1)).unwrap();
        let x = sample_markov_snapshots(&truth, pm.intra, pm.inter, 15, derive_seed(seed, 2)).unwrap();
        refined += accuracy(&truth, &alg1_recover(&x, &kernel, 2, &Alg1Config::new(2, seed)).unwrap()).unwrap() / 20.0;
        initial += accuracy(&truth, &spectral_cluster(&binarize(&x), &SpectralConfig::new(2, seed)).unwrap()).unwrap() / 20.0;
    }
    assert!(refined >= 0.99, "mean accuracy {refined}");
    assert!(refined >= initial, "refinement {refined} below its initializer {initial}");
}

#[test]
fn refinement_does_not_hurt_planted_categorical() {
    let f = FiniteDistribution::new(vec![0.85, 0.1, 0.05]).unwrap();
    let g = FiniteDistribution::new(vec![0.95, 0.04, 0.01]).unwrap();
    let kernel = InteractionKernel::new(CategoricalLaw { dist: f.clone(), t: 1 }, CategoricalLaw { dist: g.clone(), t: 1 }).unwrap();
    let (mut refined, mut initial) = (0.0, 0.0);
    for seed in 0..20 {
        let truth = sample_labelling(300, 2, &LabelPrior::Uniform, derive_seed(seed, 5)).unwrap();
        let x = sample_categorical_snapshots(&truth, &f, &g, derive_seed(seed, 6)).unwrap();
        let init = spectral_cluster(&binarize(&x), &SpectralConfig::new(2, seed)).unwrap();
        let llr = llr_matrix(&x, &kernel);
        refined += accuracy(&truth, &refine(&llr, &init)).unwrap();
        initial += accuracy(&truth, &init).unwrap();
    }
    assert!(refined >= initial, "refined {refined} < initial {initial}");
}

#[test]
fn faithful_mode_matches_fast_mode_on_easy_data() {
    let f = FiniteDistribution::new(vec![0.5, 0.3, 0.2]).unwrap();
    let g = FiniteDistribution::new(vec![0.9, 0.08, 0.02]).unwrap();
    let kernel = InteractionKernel::new(CategoricalLaw { dist: f.clone(), t: 1 }, CategoricalLaw { dist: g.clone(), t: 1 }).unwrap();
    let truth = sample_labelling(60, 2, &LabelPrior::Uniform, 8).unwrap();
    let x = sample_categorical_snapshots(&truth, &f, &g, 9).unwrap();
    let faithful = alg1_recover(&x, &kernel, 2, &Alg1Config { mode: Alg1Mode::Faithful, ..Alg1Config::new(2, 1) }).unwrap();
    let fast = alg1_recover(&x, &kernel, 2, &Alg1Config::new(2, 1)).unwrap();
    assert!(accuracy(&truth, &faithful).unwrap() >= 0.95);
    assert_eq!(ham_star(&faithful, &fast).unwrap().0, 0);
}

#[test]
fn online_known_parameters_end_on_single_node_estimator() {
    let n = 200;
    let pm = MarkovEstimates { intra: chain_from_stationary(0.08, 0.7).unwrap(), inter: chain_from_stationary(0.05, 0.3).unwrap() };
    let t = 8;
    let truth = sample_labelling(n, 2, &LabelPrior::Uniform, 4).unwrap();
    let x = sample_markov_snapshots(&truth, pm.intra, pm.inter, t, 5).unwrap();
    let mut history = Vec::new();
    let state = run_online(&x, truth.clone(), OnlineMode::Known(pm), UpdateOrder::Synchronous, |_, s| history.push(s.clone())).unwrap();
    let llr = llr_matrix(&x, &markov_kernel(&pm, t));
    for i in 0..n {
        for j in 0..n {
            assert!((state.m(i, j) - llr.get(i, j)).abs() < 1e-9);
        }
    }
    // the last sweep is the node-wise likelihood maximizer against the previous labelling
    assert_eq!(state.labelling(), &refine(&llr, &history[t - 2]));
}

#[test]
fn known_parameters_from_random_guess_improve() {
    let n = 500;
    let l = log_scale(n);
    let pm = MarkovEstimates { intra: chain_from_stationary(2.5 * l, 0.7).unwrap(), inter: chain_from_stationary(1.5 * l, 0.3).unwrap() };
    let mut at = [0.0; 10];
    for seed in 0..20 {
        let truth = sample_labelling(n, 2, &LabelPrior::Uniform, derive_seed(seed, 41)).unwrap();
        let x = sample_markov_snapshots(&truth, pm.intra, pm.inter, 10, derive_seed(seed, 42)).unwrap();
        let init = random_guess(n, 2, derive_seed(seed, 43)).unwrap();
        run_online(&x, init, OnlineMode::Known(pm), UpdateOrder::Asynchronous, |t, s| at[t - 1] += accuracy(&truth, s).unwrap() / 20.0)
            .unwrap();
    }
    assert!(at[9] >= at[1]);
    assert!(at[9] >= 0.95, "{at:?}");
}

#[test]
fn truth_is_a_fixed_point_under_strong_signal() {
    let pm = MarkovEstimates { intra: chain_from_stationary(0.4, 0.8).unwrap(), inter: chain_from_stationary(0.05, 0.3).unwrap() };
    for seed in 0..20 {
        let truth = sample_labelling(300, 2, &LabelPrior::Uniform, derive_seed(seed, 51)).unwrap();
        let x = sample_markov_snapshots(&truth, pm.intra, pm.inter, 8, derive_seed(seed, 52)).unwrap();
        let mut state = LikelihoodState::new(&snapshot(&x, 0), truth.clone(), OnlineMode::Known(pm), UpdateOrder::Synchronous).unwrap();
        for s in 1..8 {
            alg2_online_step(&mut state, &snapshot(&x, s), &pm).unwrap();
            assert_eq!(state.labelling(), &truth, "seed {seed} step {s}");
        }
    }
}

#[test]
fn learned_parameters_converge_with_oracle_labels() {
    let pm = MarkovEstimates { intra: chain_from_stationary(0.3, 0.6).unwrap(), inter: chain_from_stationary(0.2, 0.3).unwrap() };
    let truth = sample_labelling(100, 2, &LabelPrior::Uniform, 61).unwrap();
    let x = sample_markov_snapshots(&truth, pm.intra, pm.inter, 200, 62).unwrap();
    let mut state =
        LikelihoodState::new(&snapshot(&x, 0), truth.clone(), OnlineMode::Learned { refresh_every: 1 }, UpdateOrder::Synchronous).unwrap();
    for s in 1..200 {
        alg3_online_step(&mut state, &snapshot(&x, s)).unwrap();
    }
    assert_eq!(state.labelling(), &truth);
    let e = state.estimates();
    for (est, truth_chain) in [(e.intra, pm.intra), (e.inter, pm.inter)] {
        for (a, b) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let err = (est.transition(a, b) - truth_chain.transition(a, b)).abs();
            assert!(err <= 0.02, "P({a}->{b}) error {err}");
        }
    }
}

#[test]
fn transition_rates_long_horizon_all_seeds() {
    let p = BinaryMarkovChainSpec::new(0.5, 0.7, 0.8).unwrap();
    let q = BinaryMarkovChainSpec::new(0.5, 0.2, 0.3).unwrap();
    for seed in 0..20 {
        let truth = Labelling::new(vec![0, 0, 0, 0, 1, 1, 1, 1], 2).unwrap();
        let x = sample_markov_snapshots(&truth, p, q, 2000, derive_seed(seed, 71)).unwrap();
        let out = alg4_transition_rates(&x, &p, &q).unwrap();
        assert_eq!(out.k_hat, 2, "seed {seed}");
        assert_eq!(ham_star(&truth, &out.labelling).unwrap().0, 0, "seed {seed}");
    }
}

#[test]
fn mle_dominates_every_algorithm_on_tiny_markov_instances() {
    let pm = MarkovEstimates { intra: chain_from_stationary(0.4, 0.7).unwrap(), inter: chain_from_stationary(0.25, 0.4).unwrap() };
    let t = 4;
    let kernel = markov_kernel(&pm, t);
    let seeds = 200;
    let names =
        ["mle", "alg1-fast", "alg1-faithful", "spectral", "online-known", "online-learned", "transition-rates", "best-friends", "enemies"];
    let mut totals = [0.0f64; 9];
    for seed in 0..seeds {
        let truth = sample_labelling(10, 2, &LabelPrior::Uniform, derive_seed(seed, 81)).unwrap();
        let x = sample_markov_snapshots(&truth, pm.intra, pm.inter, t, derive_seed(seed, 82)).unwrap();
        let spectral = spectral_cluster(&binarize(&x.truncated(1)), &SpectralConfig::new(2, seed)).unwrap();
        let online = |mode| run_online(&x, spectral.clone(), mode, UpdateOrder::Synchronous, |_, _| {}).unwrap().labelling().clone();
        let estimates = [
            mle_brute_force(&x, &kernel, 2).unwrap(),
            alg1_recover(&x, &kernel, 2, &Alg1Config::new(2, seed)).unwrap(),
            alg1_recover(&x, &kernel, 2, &Alg1Config { mode: Alg1Mode::Faithful, ..Alg1Config::new(2, seed) }).unwrap(),
            spectral_cluster(&binarize(&x), &SpectralConfig::new(2, seed)).unwrap(),
            online(OnlineMode::Known(pm)),
            online(OnlineMode::Learned { refresh_every: 1 }),
            alg4_transition_rates(&x, &pm.intra, &pm.inter).unwrap().labelling,
            alg5_best_friends(&x).labelling,
            alg6_enemy(&x).labelling,
        ];
        for (total, est) in totals.iter_mut().zip(&estimates) {
            *total += ham_star(&truth, est).unwrap().0 as f64 / seeds as f64;
        }
    }
    for (name, total) in names.iter().zip(&totals).skip(1) {
        assert!(totals[0] <= *total, "MLE {} vs {name} {total}", totals[0]);
    }
}
