//! Seeded trial execution and CSV output.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use anyhow::Result;
use dynsbm_core::metrics::{accuracy, ham_star};
use dynsbm_core::recovery::MarkovEstimates;
use dynsbm_core::sbm::{derive_seed, keyed_rng, sample_labelling, sample_markov_snapshots, LabelPrior, Labelling, SnapshotArray};
use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::algorithms::{run_algorithm, AlgorithmId, RunInputs};
use crate::config::{ExperimentConfig, ModelConfig};

/// Per-trial seeds, all derived from the master seed and the trial index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub trial: u64,
    pub labels: u64,
    pub data: u64,
    pub init: u64,
    pub algorithm: u64,
}

impl TrialSeeds {
    pub fn new(master: u64, trial: usize) -> Self {
        let seed = derive_seed(master, trial as u64);
        Self {
            trial: seed,
            labels: derive_seed(seed, 1),
            data: derive_seed(seed, 2),
            init: derive_seed(seed, 3),
            algorithm: derive_seed(seed, 4),
        }
    }
}

/// Labels of `n` nodes split as evenly as possible into `k` blocks, placed at random.
pub fn balanced_labelling(n: usize, k: usize, seed: u64) -> Result<Labelling> {
    let mut labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    labels.shuffle(&mut keyed_rng(seed, 0));
    Ok(Labelling::new(labels, k)?)
}

/// Ground truth and snapshots for one trial.
pub fn sample_instance(model: &ModelConfig, chains: &MarkovEstimates, seeds: &TrialSeeds) -> Result<(Labelling, SnapshotArray)> {
    let truth = if model.balanced {
        balanced_labelling(model.n, model.k, seeds.labels)?
    } else {
        sample_labelling(model.n, model.k, &LabelPrior::Uniform, seeds.labels)?
    };
    let array = sample_markov_snapshots(&truth, chains.intra, chains.inter, model.t, seeds.data)?;
    Ok((truth, array))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialPoint {
    pub t: usize,
    pub accuracy: f64,
    pub ham_star: usize,
}

/// Outcome of one algorithm on one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub algorithm: AlgorithmId,
    /// One point per snapshot for online algorithms, one at `t = T` otherwise.
    pub points: Vec<TrialPoint>,
    pub seconds: f64,
}

impl TrialRecord {
    pub fn final_point(&self) -> TrialPoint {
        *self.points.last().expect("records hold at least one point")
    }
}

/// Scores each estimate against the truth.
pub fn score(truth: &Labelling, estimates: &[(usize, Labelling)]) -> Result<Vec<TrialPoint>> {
    estimates.iter().map(|(t, est)| Ok(TrialPoint { t: *t, accuracy: accuracy(truth, est)?, ham_star: ham_star(truth, est)?.0 })).collect()
}

/// Runs every configured algorithm on trial `trial`.
pub fn run_trial(cfg: &ExperimentConfig, chains: &MarkovEstimates, trial: usize) -> Result<Vec<TrialRecord>> {
    let seeds = TrialSeeds::new(cfg.run.seed, trial);
    let (truth, array) = sample_instance(&cfg.model, chains, &seeds)?;
    let inputs = RunInputs {
        array: &array,
        k: cfg.model.k,
        params: Some(chains),
        options: &cfg.algorithm.options,
        init_seed: seeds.init,
        algorithm_seed: seeds.algorithm,
    };
    cfg.algorithm
        .names
        .iter()
        .map(|&algorithm| {
            let start = Instant::now();
            let estimates = run_algorithm(algorithm, &inputs)?;
            let seconds = start.elapsed().as_secs_f64();
            Ok(TrialRecord { trial, seed: seeds.trial, algorithm, points: score(&truth, &estimates)?, seconds })
        })
        .collect()
}

/// Runs all trials, in parallel when `parallel` is set. Records come back
/// ordered by trial, then by algorithm as configured.
pub fn run_experiment_with(cfg: &ExperimentConfig, parallel: bool) -> Result<Vec<TrialRecord>> {
    cfg.validate()?;
    let chains = cfg.model.chains()?;
    let per_trial: Vec<Vec<TrialRecord>> = if parallel {
        (0..cfg.run.trials).into_par_iter().map(|trial| run_trial(cfg, &chains, trial)).collect::<Result<_>>()?
    } else {
        (0..cfg.run.trials).map(|trial| run_trial(cfg, &chains, trial)).collect::<Result<_>>()?
    };
    Ok(per_trial.into_iter().flatten().collect())
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialRecord>> {
    run_experiment_with(cfg, true)
}

/// `#`-prefixed header lines echoing `echo` (TOML) and, unless
/// `deterministic`, the generation time.
pub fn write_header<W: Write>(out: &mut W, title: &str, echo: &str, deterministic: bool) -> std::io::Result<()> {
    writeln!(out, "# {title}")?;
    if !deterministic {
        let secs = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        writeln!(out, "# generated_at_unix {secs}")?;
    }
    for line in echo.lines().filter(|l| !l.trim().is_empty()) {
        writeln!(out, "# {line}")?;
    }
    Ok(())
}

/// Long-format trial CSV. Under `deterministic` the `seconds` column is left
/// empty so that output depends on the configuration alone.
pub fn write_trials_csv<W: Write>(
    out: &mut W,
    cfg: &ExperimentConfig,
    records: &[TrialRecord],
    deterministic: bool,
) -> std::io::Result<()> {
    write_header(out, "dynsbm experiment", &cfg.to_toml(), deterministic)?;
    writeln!(out, "trial,t,algorithm,accuracy,ham_star,seconds")?;
    for r in records {
        for p in &r.points {
            let seconds = if deterministic { String::new() } else { format!("{:.6}", r.seconds) };
            writeln!(out, "{},{},{},{:.6},{},{}", r.trial, p.t, r.algorithm, p.accuracy, p.ham_star, seconds)?;
        }
    }
    Ok(())
}

/// Mean accuracy and its standard error at one `(algorithm, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SummaryRow {
    pub algorithm: AlgorithmId,
    pub t: usize,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

/// Mean and standard error of the mean (sample standard deviation over `√n`; 0 for one value).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Aggregates records per algorithm and snapshot, in order of first appearance.
pub fn summarize(records: &[TrialRecord]) -> Vec<SummaryRow> {
    let mut order: Vec<AlgorithmId> = Vec::new();
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in records {
        let idx = order.iter().position(|&a| a == r.algorithm).unwrap_or_else(|| {
            order.push(r.algorithm);
            order.len() - 1
        });
        for p in &r.points {
            groups.entry((idx, p.t)).or_default().push(p.accuracy);
        }
    }
    groups
        .into_iter()
        .map(|((idx, t), values)| {
            let (mean, stderr) = mean_stderr(&values);
            SummaryRow { algorithm: order[idx], t, mean, stderr, trials: values.len() }
        })
        .collect()
}

pub fn write_summary_csv<W: Write>(out: &mut W, cfg: &ExperimentConfig, rows: &[SummaryRow], deterministic: bool) -> std::io::Result<()> {
    write_header(out, "dynsbm experiment summary", &cfg.to_toml(), deterministic)?;
    writeln!(out, "algorithm,t,mean_accuracy,stderr,trials")?;
    for r in rows {
        writeln!(out, "{},{},{:.6},{:.6},{}", r.algorithm, r.t, r.mean, r.stderr, r.trials)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn balanced_labels_have_equal_blocks() {
        let lab = balanced_labelling(101, 2, 3).unwrap();
        assert_eq!(lab.block_sizes(), vec![51, 50]);
        assert_ne!(lab, balanced_labelling(101, 2, 4).unwrap());
    }

    #[test]
    fn standard_error_of_known_sample() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[0.7]), (0.7, 0.0));
    }

    #[test]
    fn trial_seeds_differ_across_trials() {
        let (a, b) = (TrialSeeds::new(1, 0), TrialSeeds::new(1, 1));
        assert_ne!(a.trial, b.trial);
        assert_ne!(a.data, a.init);
        assert_eq!(a, TrialSeeds::new(1, 0));
    }
}
