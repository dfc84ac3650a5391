//! Built-in figure bundles: threshold maps, accuracy maps, accuracy
//! curves against the number of snapshots, and method comparisons.

use std::fmt::Write as _;

use anyhow::{bail, Result};
use rayon::prelude::*;

use crate::algorithms::{AlgorithmId, AlgorithmOptions, InitMethod, Order};
use crate::config::{AlgorithmConfig, ChainConfig, DensityUnit, ExperimentConfig, ModelConfig, RunConfig};
use crate::reports::{grid_values, write_threshold_csv, Convention, Scale, ThresholdGrid};
use crate::runner::{mean_stderr, run_experiment, summarize, write_header};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureOptions {
    /// Overrides the figure's trial count.
    pub trials: Option<usize>,
    pub seed: u64,
    pub deterministic: bool,
    pub convention: Convention,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self { trials: None, seed: 0, deterministic: true, convention: Convention::Exact }
    }
}

/// One CSV of a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvFile {
    pub name: String,
    pub contents: String,
}

/// Intra densities of the three panels of the threshold and accuracy maps.
pub const MAP_MU1: [f64; 3] = [1.51, 2.5, 4.0];
/// Intra densities of the three accuracy-curve panels.
pub const CURVE_MU1: [f64; 3] = [1.5, 2.5, 4.0];
/// Inter density of the logarithmic-degree figures, in `log N / N`.
pub const LOG_NU1: f64 = 1.5;
pub const LOG_N: usize = 500;
pub const MAP_T: usize = 10;
pub const CURVE_T: usize = 20;
pub const CONSTANT_DEGREE_T: [usize; 2] = [60, 2000];
pub const LEARNING_NU1: [f64; 3] = [0.03, 0.035, 0.04];
pub const LEARNING_T: usize = 20;
pub const COMPARISON_T: usize = 30;
/// Competitors in the comparison figure, the online likelihood first.
pub const COMPARISON_ALGORITHMS: [AlgorithmId; 6] = [
    AlgorithmId::OnlineKnown,
    AlgorithmId::SpectralUnion,
    AlgorithmId::SpectralAggregate,
    AlgorithmId::SpectralSquared,
    AlgorithmId::BestFriends,
    AlgorithmId::Enemies,
];

fn panel_name(figure: u8, panel: usize) -> String {
    format!("figure{figure}{}.csv", (b'a' + panel as u8) as char)
}

fn online_options(init: InitMethod) -> AlgorithmOptions {
    AlgorithmOptions { init, update_order: Order::Asynchronous, ..AlgorithmOptions::default() }
}

/// Experiment with stationary chains and balanced blocks.
#[allow(clippy::too_many_arguments)]
pub fn markov_config(
    n: usize,
    t: usize,
    unit: DensityUnit,
    intra: ChainConfig,
    inter: ChainConfig,
    names: Vec<AlgorithmId>,
    options: AlgorithmOptions,
    trials: usize,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig {
        model: ModelConfig { n, k: 2, t, unit, balanced: true, intra, inter },
        algorithm: AlgorithmConfig { names, options },
        run: RunConfig { trials, seed, out: None },
    }
}

/// Accuracy-map cell: online likelihood with known parameters from a random guess.
pub fn accuracy_map_config(mu1: f64, p11: f64, q11: f64, trials: usize, seed: u64) -> ExperimentConfig {
    markov_config(
        LOG_N,
        MAP_T,
        DensityUnit::LogNOverN,
        ChainConfig::stationary(mu1, p11),
        ChainConfig::stationary(LOG_NU1, q11),
        vec![AlgorithmId::OnlineKnown],
        online_options(InitMethod::Random),
        trials,
        seed,
    )
}

/// Accuracy curve with `P₁₁ = 0.7`, `Q₁₁ = 0.3` from the given initialization.
pub fn curve_config(mu1: f64, init: InitMethod, trials: usize, seed: u64) -> ExperimentConfig {
    markov_config(
        LOG_N,
        CURVE_T,
        DensityUnit::LogNOverN,
        ChainConfig::stationary(mu1, 0.7),
        ChainConfig::stationary(LOG_NU1, 0.3),
        vec![AlgorithmId::OnlineKnown],
        online_options(init),
        trials,
        seed,
    )
}

/// Constant-degree curves: `(N, μ₁·N, ν₁·N, P₁₁)` per panel; `Q₁₁ = 0.3`.
pub const CONSTANT_DEGREE_PANELS: [(usize, f64, f64, f64); 2] = [(500, 2.5, 1.5, 0.6), (100, 0.15, 0.1, 0.4)];
pub const CONSTANT_DEGREE_Q11: f64 = 0.3;

pub fn constant_degree_config(panel: usize, trials: usize, seed: u64) -> ExperimentConfig {
    let (n, mu, nu, p11) = CONSTANT_DEGREE_PANELS[panel];
    markov_config(
        n,
        CONSTANT_DEGREE_T[panel],
        DensityUnit::OneOverN,
        ChainConfig::stationary(mu, p11),
        ChainConfig::stationary(nu, CONSTANT_DEGREE_Q11),
        vec![AlgorithmId::OnlineKnown],
        online_options(InitMethod::Random),
        trials,
        seed,
    )
}

/// Known against learned parameters, spectral initialization on the first snapshot.
pub fn learning_config(nu1: f64, trials: usize, seed: u64) -> ExperimentConfig {
    markov_config(
        1000,
        LEARNING_T,
        DensityUnit::Absolute,
        ChainConfig::stationary(0.05, 0.6),
        ChainConfig::stationary(nu1, 0.3),
        vec![AlgorithmId::OnlineKnown, AlgorithmId::OnlineLearned],
        online_options(InitMethod::Spectral),
        trials,
        seed,
    )
}

/// Method comparison at `N = 500`, `T = 30`, `μ₁ = 0.05`, `ν₁ = 0.04`.
pub fn comparison_config(p11: f64, q11: f64, trials: usize, seed: u64) -> ExperimentConfig {
    markov_config(
        500,
        COMPARISON_T,
        DensityUnit::Absolute,
        ChainConfig::stationary(0.05, p11),
        ChainConfig::stationary(0.04, q11),
        COMPARISON_ALGORITHMS.to_vec(),
        online_options(InitMethod::Spectral),
        trials,
        seed,
    )
}

/// Grid of the comparison figure: panel (a) varies `Q₁₁` with `P₁₁ = 1`,
/// panel (b) varies `P₁₁` with `Q₁₁ = ν₁`.
pub fn comparison_grid(panel: usize) -> Vec<f64> {
    match panel {
        0 => vec![0.04, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
        _ => vec![0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99, 1.0],
    }
}

pub fn comparison_point(panel: usize, x: f64) -> (f64, f64) {
    match panel {
        0 => (1.0, x),
        _ => (x, 0.04),
    }
}

/// Threshold map of one panel.
pub fn threshold_map(mu1: f64, convention: Convention, grid: Vec<f64>) -> ThresholdGrid {
    let scale = (LOG_N as f64).ln() / LOG_N as f64;
    ThresholdGrid {
        n: LOG_N,
        k: 2,
        mu1: mu1 * scale,
        nu1: LOG_NU1 * scale,
        p11: grid.clone(),
        q11: grid,
        convention,
        scale: Scale::Bhattacharyya,
    }
}

/// Mean final accuracy of one configured algorithm list.
pub fn final_accuracy(cfg: &ExperimentConfig) -> Result<Vec<(AlgorithmId, f64, f64)>> {
    let records = run_experiment(cfg)?;
    Ok(cfg
        .algorithm
        .names
        .iter()
        .map(|&alg| {
            let finals: Vec<f64> = records.iter().filter(|r| r.algorithm == alg).map(|r| r.final_point().accuracy).collect();
            let (m, s) = mean_stderr(&finals);
            (alg, m, s)
        })
        .collect())
}

fn header(title: &str, echo: &str, opts: &FigureOptions) -> String {
    let mut buf = Vec::new();
    write_header(&mut buf, title, echo, opts.deterministic).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}

fn figure2(opts: &FigureOptions) -> Result<Vec<CsvFile>> {
    let grid = grid_values(0.05, 0.95, 0.05)?;
    MAP_MU1
        .iter()
        .enumerate()
        .map(|(panel, &mu1)| {
            let map = threshold_map(mu1, opts.convention, grid.clone());
            let echo = format!(
                "n = {}\nk = 2\nmu1 = {mu1} log N / N\nnu1 = {LOG_NU1} log N / N\nconvention = {:?}\nscale = {:?}",
                LOG_N, opts.convention, map.scale
            );
            let mut contents = header("threshold map: log10 T* over (p11, q11)", &echo, opts).into_bytes();
            write_threshold_csv(&mut contents, &map.compute()?)?;
            Ok(CsvFile { name: panel_name(2, panel), contents: String::from_utf8(contents)? })
        })
        .collect()
}

fn figure3(opts: &FigureOptions) -> Result<Vec<CsvFile>> {
    let trials = opts.trials.unwrap_or(10);
    let grid = grid_values(0.1, 0.9, 0.1)?;
    let mut files = Vec::new();
    for (panel, &mu1) in MAP_MU1.iter().enumerate() {
        let cells: Vec<(f64, f64)> = grid.iter().flat_map(|&p| grid.iter().map(move |&q| (p, q))).collect();
        let results: Vec<(f64, f64, f64, f64)> = cells
            .par_iter()
            .enumerate()
            .map(|(i, &(p, q))| {
                let cfg = accuracy_map_config(mu1, p, q, trials, dynsbm_core::sbm::derive_seed(opts.seed, i as u64));
                let (_, m, s) = final_accuracy(&cfg)?[0];
                Ok((p, q, m, s))
            })
            .collect::<Result<_>>()?;
        let mut echo = accuracy_map_config(mu1, f64::NAN, f64::NAN, trials, opts.seed).to_toml();
        echo.push_str(&format!("\np11 and q11 grid = {grid:?}\ncell seed = derive_seed(seed, cell index)\n"));
        let mut contents = header("accuracy map after T snapshots over (p11, q11)", &echo, opts);
        contents.push_str("p11,q11,mean_accuracy,stderr,trials\n");
        for (p, q, m, s) in results {
            writeln!(contents, "{p},{q},{m:.6},{s:.6},{trials}")?;
        }
        files.push(CsvFile { name: panel_name(3, panel), contents });
    }
    Ok(files)
}

fn curves_file(name: String, title: &str, configs: &[(String, ExperimentConfig)], opts: &FigureOptions) -> Result<CsvFile> {
    let echo: String = configs.iter().map(|(label, cfg)| format!("[{label}]\n{}", cfg.to_toml())).collect();
    let mut contents = header(title, &echo, opts);
    contents.push_str("curve,t,mean_accuracy,stderr,trials\n");
    for (label, cfg) in configs {
        for row in summarize(&run_experiment(cfg)?) {
            writeln!(contents, "{label},{},{:.6},{:.6},{}", row.t, row.mean, row.stderr, row.trials)?;
        }
    }
    Ok(CsvFile { name, contents })
}

fn figure4(opts: &FigureOptions) -> Result<Vec<CsvFile>> {
    let trials = opts.trials.unwrap_or(50);
    CURVE_MU1
        .iter()
        .enumerate()
        .map(|(panel, &mu1)| {
            let configs: Vec<(String, ExperimentConfig)> = [InitMethod::Spectral, InitMethod::Random]
                .into_iter()
                .map(|init| {
                    let label = match init {
                        InitMethod::Spectral => "spectral-init",
                        InitMethod::Random => "random-init",
                    };
                    (label.to_string(), curve_config(mu1, init, trials, opts.seed))
                })
                .collect();
            curves_file(panel_name(4, panel), "accuracy against snapshots, two initializations", &configs, opts)
        })
        .collect()
}

fn figure5(opts: &FigureOptions) -> Result<Vec<CsvFile>> {
    let trials = opts.trials.unwrap_or(50);
    (0..CONSTANT_DEGREE_PANELS.len())
        .map(|panel| {
            let configs = vec![("online-known".to_string(), constant_degree_config(panel, trials, opts.seed))];
            curves_file(panel_name(5, panel), "accuracy against snapshots, constant degree, random initialization", &configs, opts)
        })
        .collect()
}

fn figure6(opts: &FigureOptions) -> Result<Vec<CsvFile>> {
    let trials = opts.trials.unwrap_or(20);
    LEARNING_NU1
        .iter()
        .enumerate()
        .map(|(panel, &nu1)| {
            let cfg = learning_config(nu1, trials, opts.seed);
            let mut contents = header("accuracy against snapshots, known and learned parameters", &cfg.to_toml(), opts);
            contents.push_str("curve,t,mean_accuracy,stderr,trials\n");
            for row in summarize(&run_experiment(&cfg)?) {
                writeln!(contents, "{},{},{:.6},{:.6},{}", row.algorithm, row.t, row.mean, row.stderr, row.trials)?;
            }
            Ok(CsvFile { name: panel_name(6, panel), contents })
        })
        .collect()
}

fn figure7(opts: &FigureOptions) -> Result<Vec<CsvFile>> {
    let trials = opts.trials.unwrap_or(20);
    (0..2)
        .map(|panel| {
            let axis = if panel == 0 { "q11" } else { "p11" };
            let grid = comparison_grid(panel);
            let mut echo = comparison_config(f64::NAN, f64::NAN, trials, opts.seed).to_toml();
            echo.push_str(&format!("\n{axis} grid = {grid:?}\npoint seed = derive_seed(seed, point index)\n"));
            let mut contents = header("final accuracy by method; the free transition probability varies", &echo, opts);
            contents.push_str(&format!("{axis},algorithm,mean_accuracy,stderr,trials\n"));
            for (i, &x) in grid.iter().enumerate() {
                let (p11, q11) = comparison_point(panel, x);
                let seed = dynsbm_core::sbm::derive_seed(opts.seed, i as u64);
                for (alg, m, s) in final_accuracy(&comparison_config(p11, q11, trials, seed))? {
                    writeln!(contents, "{x},{alg},{m:.6},{s:.6},{trials}")?;
                }
            }
            Ok(CsvFile { name: panel_name(7, panel), contents })
        })
        .collect()
}

/// CSV bundle of figure `id` (2 to 7).
pub fn replicate_figure(id: u8, opts: &FigureOptions) -> Result<Vec<CsvFile>> {
    match id {
        2 => figure2(opts),
        3 => figure3(opts),
        4 => figure4(opts),
        5 => figure5(opts),
        6 => figure6(opts),
        7 => figure7(opts),
        _ => bail!("unknown figure {id}; expected 2 to 7"),
    }
}
