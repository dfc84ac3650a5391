use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use dynsbm_core::recovery::MarkovEstimates;
use dynsbm_core::tsbm::{read_labels, read_snapshots, write_labels, write_snapshots};
use dynsbm_harness::algorithms::{run_algorithm, AlgorithmId, AlgorithmOptions, InitMethod, LikelihoodMode, Order, RunInputs};
use dynsbm_harness::config::{ChainConfig, DensityUnit, ExperimentConfig};
use dynsbm_harness::figures::{replicate_figure, FigureOptions};
use dynsbm_harness::reports::{self, grid_values, Convention, Scale, ThresholdGrid};
use dynsbm_harness::runner::{run_experiment, sample_instance, score, summarize, write_summary_csv, write_trials_csv, TrialSeeds};

#[derive(Debug, Parser)]
#[command(name = "dynsbm", version, about = "Dynamic stochastic block models: data generation, recovery, thresholds and experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample one instance of an experiment config and write it as a tsbm file plus a labels sidecar.
    Generate(GenerateArgs),
    /// Divergence, bounds and thresholds for one pair of chains.
    Divergence(DivergenceArgs),
    /// Grid of T* over (P11, Q11) as CSV.
    Threshold(ThresholdArgs),
    /// Run one algorithm on a tsbm file.
    Recover(RecoverArgs),
    /// Run an experiment config over seeded trials.
    Experiment(ExperimentArgs),
    /// Write the CSV bundle of a built-in figure.
    ReplicateFigure(FigureArgs),
}

/// Chain parameters given on the command line.
#[derive(Debug, Args)]
struct ChainArgs {
    /// Intra-block density.
    #[arg(long)]
    mu1: Option<f64>,
    /// Intra-block probability of staying at 1.
    #[arg(long)]
    p11: Option<f64>,
    /// Inter-block density.
    #[arg(long)]
    nu1: Option<f64>,
    /// Inter-block probability of staying at 1.
    #[arg(long)]
    q11: Option<f64>,
    /// Intra-block 0 -> 1 probability; the chain is stationary when omitted.
    #[arg(long)]
    p01: Option<f64>,
    /// Inter-block 0 -> 1 probability; the chain is stationary when omitted.
    #[arg(long)]
    q01: Option<f64>,
    /// Unit of `--mu1` and `--nu1`.
    #[arg(long, value_enum, default_value_t = DensityUnit::Absolute)]
    unit: DensityUnit,
}

impl ChainArgs {
    fn given(&self) -> Option<(ChainConfig, ChainConfig)> {
        Some((
            ChainConfig { density: self.mu1?, p11: self.p11?, p01: self.p01 },
            ChainConfig { density: self.nu1?, p11: self.q11?, p01: self.q01 },
        ))
    }

    fn resolve(&self, n: usize) -> Result<Option<MarkovEstimates>> {
        self.given().map(|(f, g)| Ok(MarkovEstimates { intra: f.resolve(self.unit, n)?, inter: g.resolve(self.unit, n)? })).transpose()
    }

    fn require(&self, n: usize, what: &str) -> Result<MarkovEstimates> {
        self.resolve(n)?.ok_or_else(|| UsageError(format!("{what} needs --mu1, --p11, --nu1 and --q11")).into())
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Snapshot file; the labels go to `<out>.labels`.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct DivergenceArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    t: usize,
    #[command(flatten)]
    chains: ChainArgs,
    /// Slack `eps` of the error-rate bounds, at most `zeta`.
    #[arg(long, default_value_t = 0.02)]
    eps: f64,
    /// Slack `zeta` of the error-rate bounds, at most 1/21.
    #[arg(long, default_value_t = 0.04)]
    zeta: f64,
    #[arg(long, value_enum, default_value_t = Scale::Renyi)]
    scale: Scale,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Also write the JSON report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ThresholdArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long)]
    mu1: f64,
    #[arg(long)]
    nu1: f64,
    #[arg(long, value_enum, default_value_t = DensityUnit::Absolute)]
    unit: DensityUnit,
    #[arg(long, value_enum, default_value_t = Convention::Exact)]
    convention: Convention,
    #[arg(long, value_enum, default_value_t = Scale::Renyi)]
    scale: Scale,
    /// Explicit P11 values instead of the grid.
    #[arg(long, value_delimiter = ',')]
    p11: Vec<f64>,
    /// Explicit Q11 values instead of the grid.
    #[arg(long, value_delimiter = ',')]
    q11: Vec<f64>,
    #[arg(long, default_value_t = 0.05)]
    grid_min: f64,
    #[arg(long, default_value_t = 0.95)]
    grid_max: f64,
    #[arg(long, default_value_t = 0.05)]
    grid_step: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RecoverArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    algorithm: AlgorithmId,
    #[arg(long, default_value_t = 2)]
    k: usize,
    /// Labels file with the ground truth; defaults to the labels inside the
    /// input, then to `<input>.labels` if it exists.
    #[arg(long)]
    truth: Option<PathBuf>,
    #[command(flatten)]
    chains: ChainArgs,
    #[arg(long, value_enum, default_value_t = InitMethod::Spectral)]
    init: InitMethod,
    #[arg(long, value_enum, default_value_t = Order::Synchronous)]
    update_order: Order,
    #[arg(long, default_value_t = 1)]
    refresh_every: usize,
    #[arg(long, value_enum, default_value_t = LikelihoodMode::Fast)]
    likelihood_mode: LikelihoodMode,
    /// Master seed; the run uses the seeds of trial 0.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the estimated labels here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Trial CSV; a summary goes next to it as `<stem>.summary.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Omit the timestamp and timings so output depends on the config alone.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Debug, Args)]
struct FigureArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(2..=7))]
    figure: u8,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    deterministic: bool,
    #[arg(long, value_enum, default_value_t = Convention::Exact)]
    convention: Convention,
}

/// Invalid combination of arguments; exits with status 2.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".labels");
    PathBuf::from(s)
}

fn generate(args: GenerateArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    cfg.validate()?;
    let chains = cfg.model.chains()?;
    let (truth, array) = sample_instance(&cfg.model, &chains, &TrialSeeds::new(cfg.run.seed, 0))?;
    write_snapshots(&args.out, &array, Some(&truth))?;
    write_labels(&sidecar(&args.out), &truth)?;
    println!("wrote {} ({} nodes, {} snapshots, {} interactions)", args.out.display(), array.n(), array.t(), array.count_nonzero());
    Ok(())
}

fn divergence(args: DivergenceArgs) -> Result<()> {
    let pm = args.chains.require(args.n, "divergence")?;
    if !(0.0..=1.0 / 21.0).contains(&args.zeta) || !(0.0..=args.zeta).contains(&args.eps) {
        return Err(UsageError("need 0 <= eps <= zeta <= 1/21".into()).into());
    }
    let report = reports::divergence(&pm.intra, &pm.inter, args.n, args.k, args.t, args.eps, args.zeta, args.scale)?;
    let json = reports::report_json(&report, &pm.intra, &pm.inter);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&json)?);
    } else {
        print!("{}", reports::report_text(&report));
    }
    if let Some(path) = args.out {
        let mut out = create(&path)?;
        serde_json::to_writer_pretty(&mut out, &json)?;
        writeln!(out)?;
        out.flush()?;
    }
    Ok(())
}

fn threshold(args: ThresholdArgs) -> Result<()> {
    let axis = |given: &[f64]| -> Result<Vec<f64>> {
        if given.is_empty() {
            grid_values(args.grid_min, args.grid_max, args.grid_step).map_err(|e| UsageError(e.to_string()).into())
        } else {
            Ok(given.to_vec())
        }
    };
    let scale = args.unit.scale(args.n);
    let grid = ThresholdGrid {
        n: args.n,
        k: args.k,
        mu1: args.mu1 * scale,
        nu1: args.nu1 * scale,
        p11: axis(&args.p11)?,
        q11: axis(&args.q11)?,
        convention: args.convention,
        scale: args.scale,
    };
    grid.validate().map_err(|e| UsageError(e.to_string()))?;
    let cells = grid.compute()?;
    match args.out {
        Some(path) => {
            let mut out = create(&path)?;
            reports::write_threshold_csv(&mut out, &cells)?;
            out.flush()?;
        }
        None => reports::write_threshold_csv(&mut io::stdout().lock(), &cells)?,
    }
    Ok(())
}

fn recover(args: RecoverArgs) -> Result<()> {
    let (array, embedded) = read_snapshots(&args.input)?;
    let params = if args.algorithm.needs_parameters() {
        Some(args.chains.require(array.n(), &format!("algorithm {}", args.algorithm))?)
    } else {
        args.chains.resolve(array.n())?
    };
    let truth = match (&args.truth, embedded) {
        (Some(path), _) => Some(read_labels(path)?),
        (None, Some(lab)) => Some(lab),
        (None, None) => {
            let path = sidecar(&args.input);
            path.exists().then(|| read_labels(&path)).transpose()?
        }
    };
    let options = AlgorithmOptions {
        init: args.init,
        update_order: args.update_order,
        refresh_every: args.refresh_every,
        likelihood_mode: args.likelihood_mode,
    };
    let seeds = TrialSeeds::new(args.seed, 0);
    let inputs = RunInputs {
        array: &array,
        k: args.k,
        params: params.as_ref(),
        options: &options,
        init_seed: seeds.init,
        algorithm_seed: seeds.algorithm,
    };
    let estimates = run_algorithm(args.algorithm, &inputs)?;
    let (_, last) = estimates.last().context("algorithm returned no labelling")?;
    if let Some(path) = &args.out {
        write_labels(path, last)?;
    }
    if let Some(truth) = truth {
        let point = *score(&truth, &estimates)?.last().expect("non-empty");
        println!("accuracy {:.4}", point.accuracy);
        println!("ham_star {}", point.ham_star);
    }
    Ok(())
}

fn experiment(args: ExperimentArgs) -> Result<()> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.run.trials = trials;
    }
    let out = args.out.or(cfg.run.out.take());
    let records = run_experiment(&cfg)?;
    let summary = summarize(&records);
    match out {
        Some(path) => {
            let mut w = create(&path)?;
            write_trials_csv(&mut w, &cfg, &records, args.deterministic)?;
            w.flush()?;
            let mut w = create(&path.with_extension("summary.csv"))?;
            write_summary_csv(&mut w, &cfg, &summary, args.deterministic)?;
            w.flush()?;
        }
        None => write_trials_csv(&mut io::stdout().lock(), &cfg, &records, args.deterministic)?,
    }
    Ok(())
}

fn replicate(args: FigureArgs) -> Result<()> {
    let opts = FigureOptions { trials: args.trials, seed: args.seed, deterministic: args.deterministic, convention: args.convention };
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for file in replicate_figure(args.figure, &opts)? {
        let path = args.out.join(&file.name);
        std::fs::write(&path, &file.contents).with_context(|| format!("writing {}", path.display()))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Divergence(a) => divergence(a),
        Command::Threshold(a) => threshold(a),
        Command::Recover(a) => recover(a),
        Command::Experiment(a) => experiment(a),
        Command::ReplicateFigure(a) => replicate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
