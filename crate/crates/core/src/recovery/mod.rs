//! Community recovery: likelihood refinement over a spectral initializer,
//! online likelihood clustering for Markov dynamics (known or learned
//! parameters), three combinatorial baselines and a brute-force maximum
//! likelihood oracle.

mod baselines;
mod likelihood;
mod online;

pub use baselines::{alg4_transition_rates, alg5_best_friends, alg6_enemy, transition_counts, ComponentLabelling};
pub use likelihood::{alg1_recover, llr_matrix, log_likelihood, mle_brute_force, refine, Alg1Config, Alg1Mode, LlrMatrix, MLE_BUDGET};
pub use online::{
    alg2_online_step, alg3_online_step, random_guess, run_online, snapshot, LikelihoodState, MarkovEstimates, OnlineMode, UpdateOrder,
};

use thiserror::Error;

use crate::linalg::EigenError;
use crate::sbm::SbmError;

/// Log-ratios are clamped to `±SATURATION` so boundary parameters stay finite.
pub const SATURATION: f64 = 700.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RecoveryError {
    #[error("spectral initialization failed: {0}")]
    Spectral(#[from] EigenError),
    #[error(transparent)]
    Labelling(#[from] SbmError),
    #[error("intra and inter transition matrices coincide; blocks are not identifiable")]
    IdenticalKernels,
    #[error("need at least {need} snapshots, got {got}")]
    TooFewSnapshots { need: usize, got: usize },
    #[error("labelling has {labelling} nodes but the data has {data}")]
    SizeMismatch { labelling: usize, data: usize },
    #[error("exhaustive search over {states} labellings exceeds the budget of {budget}")]
    BudgetExceeded { states: f64, budget: f64 },
    #[error("snapshot has {got} pairs, expected {expected}")]
    SnapshotShape { got: usize, expected: usize },
    #[error("state was initialized for {expected} updates")]
    WrongMode { expected: &'static str },
}

pub type Result<T> = std::result::Result<T, RecoveryError>;

/// Clamps to `±SATURATION`; `NaN` (both laws give probability zero) maps to 0.
#[inline]
pub fn saturate(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-SATURATION, SATURATION)
    }
}

/// `log(a / b)` for probabilities, saturated.
#[inline]
pub(crate) fn log_ratio(a: f64, b: f64) -> f64 {
    saturate(a.ln() - b.ln())
}

/// Index of the largest score. Ties go to `current` when it is among the
/// maximizers, otherwise to the lowest index.
pub(crate) fn argmax_with_tie(scores: &[f64], current: Option<usize>) -> usize {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if let Some(c) = current {
        if c < scores.len() && scores[c] == best {
            return c;
        }
    }
    scores.iter().position(|&s| s == best).unwrap_or(0)
}
