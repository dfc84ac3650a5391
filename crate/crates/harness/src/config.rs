//! Experiment configuration read from TOML.

use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use dynsbm_core::markov::{chain_from_stationary, BinaryMarkovChainSpec};
use dynsbm_core::recovery::MarkovEstimates;
use serde::{Deserialize, Serialize};

use crate::algorithms::{AlgorithmId, AlgorithmOptions};

/// Unit in which chain densities are given.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum DensityUnit {
    /// Densities are probabilities.
    #[default]
    Absolute,
    /// Multiples of `log N / N`.
    LogNOverN,
    /// Multiples of `1 / N`.
    OneOverN,
}

impl DensityUnit {
    pub fn scale(self, n: usize) -> f64 {
        let n = n as f64;
        match self {
            DensityUnit::Absolute => 1.0,
            DensityUnit::LogNOverN => n.ln() / n,
            DensityUnit::OneOverN => 1.0 / n,
        }
    }
}

/// One binary Markov chain. Without `p01` the chain starts from its
/// stationary law with `P(1) = density`; with `p01` the initial law is
/// `Ber(density)` and `p01` is taken as given.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    pub density: f64,
    pub p11: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p01: Option<f64>,
}

impl ChainConfig {
    pub fn stationary(density: f64, p11: f64) -> Self {
        Self { density, p11, p01: None }
    }

    pub fn resolve(&self, unit: DensityUnit, n: usize) -> Result<BinaryMarkovChainSpec> {
        let density = self.density * unit.scale(n);
        let chain = match self.p01 {
            None => chain_from_stationary(density, self.p11),
            Some(p01) => BinaryMarkovChainSpec::new(density, p01, self.p11),
        };
        chain.with_context(|| format!("invalid chain {self:?} (density {density} after scaling)"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    #[serde(default = "default_k")]
    pub k: usize,
    pub t: usize,
    #[serde(default)]
    pub unit: DensityUnit,
    /// Equal block sizes (random placement) instead of i.i.d. uniform labels.
    #[serde(default = "default_true")]
    pub balanced: bool,
    pub intra: ChainConfig,
    pub inter: ChainConfig,
}

impl ModelConfig {
    pub fn chains(&self) -> Result<MarkovEstimates> {
        Ok(MarkovEstimates { intra: self.intra.resolve(self.unit, self.n)?, inter: self.inter.resolve(self.unit, self.n)? })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub names: Vec<AlgorithmId>,
    #[serde(flatten)]
    pub options: AlgorithmOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub algorithm: AlgorithmConfig,
    pub run: RunConfig,
}

fn default_k() -> usize {
    2
}

fn default_true() -> bool {
    true
}

fn default_trials() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing experiment config")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every parameter an experiment will touch.
    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        ensure!(m.n >= 2, "model.n must be at least 2, got {}", m.n);
        ensure!(m.k >= 1 && m.k <= m.n, "model.k must lie in 1..=n, got {}", m.k);
        ensure!(m.t >= 1, "model.t must be at least 1");
        m.chains()?;
        ensure!(self.run.trials >= 1, "run.trials must be at least 1");
        if self.algorithm.names.is_empty() {
            bail!("algorithm.names is empty");
        }
        ensure!(self.algorithm.options.refresh_every >= 1, "algorithm.refresh_every must be at least 1");
        for id in &self.algorithm.names {
            if id.needs_two_snapshots() {
                ensure!(m.t >= 2, "{id} needs at least 2 snapshots");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[model]
n = 500
t = 10
unit = "log_n_over_n"
intra = { density = 2.5, p11 = 0.7 }
inter = { density = 1.5, p11 = 0.3 }

[algorithm]
names = ["online-known", "spectral-union"]
init = "random"
update_order = "asynchronous"

[run]
trials = 4
seed = 9
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.model.k, 2);
        assert!(cfg.model.balanced);
        let chains = cfg.model.chains().unwrap();
        let scale = 500f64.ln() / 500.0;
        assert!((chains.intra.mu1 - 2.5 * scale).abs() < 1e-15);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        cfg.run.trials = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::from_toml(EXAMPLE).unwrap();
        cfg.model.intra.density = 400.0;
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_toml(&EXAMPLE.replace("trials", "trails")).is_err());
    }
}
