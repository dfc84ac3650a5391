//! Uniform entry point to every recovery algorithm and the spectral
//! competitors used in comparisons.

use std::fmt;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use dynsbm_core::recovery::{
    alg1_recover, alg4_transition_rates, alg5_best_friends, alg6_enemy, mle_brute_force, random_guess, run_online, Alg1Config, Alg1Mode,
    MarkovEstimates, OnlineMode, UpdateOrder,
};
use dynsbm_core::sbm::{InteractionKernel, Labelling, MarkovLaw, SnapshotArray};
use dynsbm_core::spectral::{aggregate_graph, binarize, spectral_cluster, squared_adjacency_graph, SpectralConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmId {
    /// Spectral initialization refined by the full-pattern likelihood.
    #[value(alias = "alg1")]
    #[serde(alias = "alg1")]
    Likelihood,
    /// Online likelihood with known chain parameters.
    #[value(alias = "alg2")]
    #[serde(alias = "alg2")]
    OnlineKnown,
    /// Online likelihood with parameters learned along the way.
    #[value(alias = "alg3")]
    #[serde(alias = "alg3")]
    OnlineLearned,
    #[value(alias = "alg4")]
    #[serde(alias = "alg4")]
    TransitionRates,
    #[value(alias = "alg5")]
    #[serde(alias = "alg5")]
    BestFriends,
    #[value(alias = "alg6")]
    #[serde(alias = "alg6")]
    Enemies,
    /// Exhaustive maximum likelihood, tiny instances only.
    Mle,
    /// Spectral clustering of the union graph.
    SpectralUnion,
    /// Spectral clustering of the snapshot-count weighted graph.
    SpectralAggregate,
    /// Spectral clustering of `Σ_t (A_t² − D_t)`.
    SpectralSquared,
}

impl AlgorithmId {
    pub fn name(self) -> &'static str {
        match self {
            AlgorithmId::Likelihood => "likelihood",
            AlgorithmId::OnlineKnown => "online-known",
            AlgorithmId::OnlineLearned => "online-learned",
            AlgorithmId::TransitionRates => "transition-rates",
            AlgorithmId::BestFriends => "best-friends",
            AlgorithmId::Enemies => "enemies",
            AlgorithmId::Mle => "mle",
            AlgorithmId::SpectralUnion => "spectral-union",
            AlgorithmId::SpectralAggregate => "spectral-aggregate",
            AlgorithmId::SpectralSquared => "spectral-squared",
        }
    }

    /// Whether the chain parameters must be supplied.
    pub fn needs_parameters(self) -> bool {
        matches!(self, AlgorithmId::Likelihood | AlgorithmId::OnlineKnown | AlgorithmId::TransitionRates | AlgorithmId::Mle)
    }

    pub fn needs_two_snapshots(self) -> bool {
        self == AlgorithmId::TransitionRates
    }

    /// Online algorithms report a labelling after every snapshot.
    pub fn is_online(self) -> bool {
        matches!(self, AlgorithmId::OnlineKnown | AlgorithmId::OnlineLearned)
    }
}

impl fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Initial labelling of the online algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum InitMethod {
    /// Spectral clustering of the first snapshot.
    #[default]
    Spectral,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    #[default]
    Synchronous,
    Asynchronous,
}

impl From<Order> for UpdateOrder {
    fn from(o: Order) -> Self {
        match o {
            Order::Synchronous => UpdateOrder::Synchronous,
            Order::Asynchronous => UpdateOrder::Asynchronous,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LikelihoodMode {
    #[default]
    Fast,
    Faithful,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgorithmOptions {
    #[serde(default)]
    pub init: InitMethod,
    #[serde(default)]
    pub update_order: Order,
    #[serde(default = "default_refresh")]
    pub refresh_every: usize,
    #[serde(default)]
    pub likelihood_mode: LikelihoodMode,
}

fn default_refresh() -> usize {
    1
}

impl Default for AlgorithmOptions {
    fn default() -> Self {
        Self { init: InitMethod::default(), update_order: Order::default(), refresh_every: 1, likelihood_mode: LikelihoodMode::default() }
    }
}

/// Inputs shared by one algorithm run.
#[derive(Debug, Clone, Copy)]
pub struct RunInputs<'a> {
    pub array: &'a SnapshotArray,
    pub k: usize,
    pub params: Option<&'a MarkovEstimates>,
    pub options: &'a AlgorithmOptions,
    pub init_seed: u64,
    pub algorithm_seed: u64,
}

/// Initial labelling for the online algorithms.
pub fn initial_labelling(array: &SnapshotArray, k: usize, init: InitMethod, seed: u64) -> Result<Labelling> {
    Ok(match init {
        InitMethod::Random => random_guess(array.n(), k, seed)?,
        InitMethod::Spectral => spectral_cluster(&binarize(&array.truncated(1)), &SpectralConfig::new(k, seed))?,
    })
}

/// Runs `id`, returning `(t, labelling)` after every snapshot for online
/// algorithms and once at `t = T` otherwise.
pub fn run_algorithm(id: AlgorithmId, inputs: &RunInputs<'_>) -> Result<Vec<(usize, Labelling)>> {
    let RunInputs { array, k, params, options, init_seed, algorithm_seed } = *inputs;
    let t = array.t();
    let params = || params.with_context(|| format!("{id} needs the intra and inter chain parameters"));
    let kernel = |pm: &MarkovEstimates| -> Result<InteractionKernel<MarkovLaw>> {
        if array.alphabet() > 2 {
            bail!("{id} expects binary snapshots, the data has {} symbols", array.alphabet());
        }
        Ok(InteractionKernel::new(MarkovLaw { chain: pm.intra, t }, MarkovLaw { chain: pm.inter, t })?)
    };
    let spectral =
        |graph| -> Result<Vec<(usize, Labelling)>> { Ok(vec![(t, spectral_cluster(&graph, &SpectralConfig::new(k, algorithm_seed))?)]) };
    match id {
        AlgorithmId::OnlineKnown | AlgorithmId::OnlineLearned => {
            let mode = match id {
                AlgorithmId::OnlineKnown => OnlineMode::Known(*params()?),
                _ => OnlineMode::Learned { refresh_every: options.refresh_every },
            };
            let init = initial_labelling(array, k, options.init, init_seed)?;
            let mut out = Vec::with_capacity(t);
            run_online(array, init, mode, options.update_order.into(), |s, lab| out.push((s, lab.clone())))?;
            Ok(out)
        }
        AlgorithmId::Likelihood => {
            let mode = match options.likelihood_mode {
                LikelihoodMode::Fast => Alg1Mode::Fast,
                LikelihoodMode::Faithful => Alg1Mode::Faithful,
            };
            let config = Alg1Config { mode, ..Alg1Config::new(k, algorithm_seed) };
            Ok(vec![(t, alg1_recover(array, &kernel(params()?)?, k, &config)?)])
        }
        AlgorithmId::Mle => Ok(vec![(t, mle_brute_force(array, &kernel(params()?)?, k)?)]),
        AlgorithmId::TransitionRates => {
            let pm = params()?;
            Ok(vec![(t, alg4_transition_rates(array, &pm.intra, &pm.inter)?.labelling)])
        }
        AlgorithmId::BestFriends => Ok(vec![(t, alg5_best_friends(array).labelling)]),
        AlgorithmId::Enemies => Ok(vec![(t, alg6_enemy(array).labelling)]),
        AlgorithmId::SpectralUnion => spectral(binarize(array)),
        AlgorithmId::SpectralAggregate => spectral(aggregate_graph(array)),
        AlgorithmId::SpectralSquared => spectral(squared_adjacency_graph(array)),
    }
}
