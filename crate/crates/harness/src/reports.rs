//! Divergence reports and threshold grids.

use std::io::Write;

use anyhow::{ensure, Result};
use clap::ValueEnum;
use dynsbm_core::markov::{
    chain_from_stationary, divergence_report, t_star, BinaryMarkovChainSpec, DivergenceReport, DivergenceScale, ThresholdConvention,
    ThresholdProblem, T_STAR_CAP,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    #[default]
    Exact,
    Itilde,
}

impl From<Convention> for ThresholdConvention {
    fn from(c: Convention) -> Self {
        match c {
            Convention::Exact => ThresholdConvention::Exact,
            Convention::Itilde => ThresholdConvention::ITilde,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Renyi,
    Bhattacharyya,
}

impl From<Scale> for DivergenceScale {
    fn from(s: Scale) -> Self {
        match s {
            Scale::Renyi => DivergenceScale::Renyi,
            Scale::Bhattacharyya => DivergenceScale::Bhattacharyya,
        }
    }
}

fn opt<T: std::fmt::Display>(x: Option<T>) -> String {
    x.map_or_else(|| "none".into(), |v| v.to_string())
}

pub fn report_text(r: &DivergenceReport) -> String {
    let level = r.k as f64 * (r.n as f64).ln() / r.n as f64;
    let mut s = String::new();
    s.push_str(&format!("N = {}, K = {}, T = {}\n", r.n, r.k, r.t));
    s.push_str(&format!("D_1/2 exact            {:.6e}\n", r.exact));
    s.push_str(&format!("D_1/2 / (K log N / N)  {:.6}\n", r.exact / level));
    s.push_str(&format!(
        "sparse approximation   {:.6e} (error radius {:.3e}{})\n",
        r.sparse.value,
        r.sparse.error_radius,
        if r.sparse.in_regime { "" } else { ", outside the guaranteed regime" }
    ));
    s.push_str(&format!("I~(T)                  {}\n", opt(r.i_tilde)));
    s.push_str(&format!("J                      {:.6e}\n", r.j));
    s.push_str(&format!("D_3/2 / D_1/2          {}\n", opt(r.beta_half)));
    s.push_str(&format!("lower bound (I^2)      {:.6e}\n", r.lower_bound_appendix));
    s.push_str(&format!("lower bound (I^3/2)    {:.6e}\n", r.lower_bound_main_text));
    s.push_str(&format!("upper bound            {:.6e} (kappa {:.4}, eps {}, zeta {})\n", r.upper_bound, r.kappa, r.eps, r.zeta));
    s.push_str(&format!("scale                  {:?}\n", r.scale));
    s.push_str(&format!("T* exact               {}\n", opt(r.t_star_exact)));
    s.push_str(&format!("T* I~                  {}\n", opt(r.t_star_i_tilde)));
    s
}

fn chain_json(c: &BinaryMarkovChainSpec) -> serde_json::Value {
    json!({ "mu1": c.mu1, "p01": c.p01, "p11": c.p11 })
}

pub fn report_json(r: &DivergenceReport, f: &BinaryMarkovChainSpec, g: &BinaryMarkovChainSpec) -> serde_json::Value {
    json!({
        "n": r.n,
        "k": r.k,
        "t": r.t,
        "intra": chain_json(f),
        "inter": chain_json(g),
        "exact": r.exact,
        "sparse_approximation": { "value": r.sparse.value, "error_radius": r.sparse.error_radius, "in_regime": r.sparse.in_regime },
        "i_tilde": r.i_tilde,
        "j": r.j,
        "beta_half": r.beta_half,
        "lower_bound": { "appendix": r.lower_bound_appendix, "main_text": r.lower_bound_main_text },
        "upper_bound": r.upper_bound,
        "kappa": r.kappa,
        "eps": r.eps,
        "zeta": r.zeta,
        "scale": format!("{:?}", r.scale).to_lowercase(),
        "t_star": { "exact": r.t_star_exact, "itilde": r.t_star_i_tilde },
    })
}

#[allow(clippy::too_many_arguments)]
pub fn divergence(
    f: &BinaryMarkovChainSpec,
    g: &BinaryMarkovChainSpec,
    n: usize,
    k: usize,
    t: usize,
    eps: f64,
    zeta: f64,
    scale: Scale,
) -> Result<DivergenceReport> {
    ensure!(n >= 2 && k >= 2 && t >= 1, "need N >= 2, K >= 2 and T >= 1");
    Ok(divergence_report(f, g, n, k, t, eps, zeta, scale.into())?)
}

/// `(P₁₁, Q₁₁)` grid of `T*` with stationary chains of fixed densities.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdGrid {
    pub n: usize,
    pub k: usize,
    /// Absolute densities.
    pub mu1: f64,
    pub nu1: f64,
    pub p11: Vec<f64>,
    pub q11: Vec<f64>,
    pub convention: Convention,
    pub scale: Scale,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdCell {
    pub p11: f64,
    pub q11: f64,
    pub t_star: Option<usize>,
}

/// `lo, lo + step, …` up to `hi` inclusive (within rounding).
pub fn grid_values(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    ensure!(step > 0.0 && lo <= hi, "grid needs step > 0 and lo <= hi");
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| ((lo + i as f64 * step) * 1e10).round() / 1e10).collect())
}

impl ThresholdGrid {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.n >= 2 && self.k >= 2, "need N >= 2 and K >= 2");
        ensure!(!self.p11.is_empty() && !self.q11.is_empty(), "empty grid");
        for &x in self.p11.iter().chain(&self.q11) {
            ensure!(x > 0.0 && x <= 1.0, "grid value {x} outside (0, 1]");
        }
        chain_from_stationary(self.mu1, 0.5)?;
        chain_from_stationary(self.nu1, 0.5)?;
        Ok(())
    }

    pub fn cell(&self, p11: f64, q11: f64) -> Result<ThresholdCell> {
        let problem = ThresholdProblem {
            f: chain_from_stationary(self.mu1, p11)?,
            g: chain_from_stationary(self.nu1, q11)?,
            n: self.n,
            k: self.k,
            convention: self.convention.into(),
            scale: self.scale.into(),
        };
        Ok(ThresholdCell { p11, q11, t_star: t_star(&problem, T_STAR_CAP)? })
    }

    /// Every cell, `P₁₁` outer and `Q₁₁` inner.
    pub fn compute(&self) -> Result<Vec<ThresholdCell>> {
        self.validate()?;
        let pairs: Vec<(f64, f64)> = self.p11.iter().flat_map(|&p| self.q11.iter().map(move |&q| (p, q))).collect();
        pairs.par_iter().map(|&(p, q)| self.cell(p, q)).collect()
    }
}

pub fn write_threshold_csv<W: Write>(out: &mut W, cells: &[ThresholdCell]) -> std::io::Result<()> {
    writeln!(out, "p11,q11,t_star,log10_t_star")?;
    for c in cells {
        match c.t_star {
            Some(t) => writeln!(out, "{},{},{},{:.6}", c.p11, c.q11, t, (t as f64).log10())?,
            None => writeln!(out, "{},{},inf,inf", c.p11, c.q11)?,
        }
    }
    Ok(())
}
