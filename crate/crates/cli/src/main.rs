use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hurst_cli::config::{apply_estimation, apply_model, parse_overrides, read_config, unknown_key, Entry};
use hurst_cli::mc::{write_outputs, McStudy};
use hurst_cli::{ingest_csv, run_estimate, run_mc_study, to_json, CliError, Result};
use hurst_core::{simulate_market, EstimationConfig, ModelParams};

/// Hurst roughness estimation for stochastic volatility.
#[derive(Parser)]
#[command(name = "hurst", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a rough-volatility market and write it as CSV.
    Simulate(SimulateArgs),
    /// Estimate H from a `timestamp,price` CSV.
    Estimate(EstimateArgs),
    /// Monte Carlo study over simulated markets.
    Mc(McArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Model parameters (key = value).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Number of increments.
    #[arg(long)]
    n: usize,
    /// Sampling interval; defaults to 1/n.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Override a model key, `key=value`; repeatable.
    #[arg(long = "set")]
    set: Vec<String>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Input CSV; may instead come from a replayed report's `data` key.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Estimation config (key = value) or a previous JSON report to replay.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Report path; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "set")]
    set: Vec<String>,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    /// Estimation config, or a previous mc report to replay.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated sample sizes; overrides --n.
    #[arg(long, value_delimiter = ',')]
    n_ladder: Option<Vec<usize>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long = "set")]
    set: Vec<String>,
}

fn gather(files: &[&Option<PathBuf>], set: &[String]) -> Result<Vec<Entry>> {
    let mut entries = Vec::new();
    for path in files.iter().copied().flatten() {
        entries.extend(read_config(path)?);
    }
    entries.extend(parse_overrides(set)?);
    Ok(entries)
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(|e| CliError::Io {
            path: p.to_path_buf(),
            source: e,
        }),
        None => std::io::stdout().write_all(bytes).map_err(|e| CliError::Io {
            path: "<stdout>".into(),
            source: e,
        }),
    }
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Result<Vec<u8>> {
    to_json(v).map_err(|e| CliError::Config(format!("cannot serialize report: {e}")))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let mut model = ModelParams::default();
    for e in gather(&[&args.model], &args.set)? {
        if !apply_model(&mut model, &e)? {
            return Err(unknown_key(&e));
        }
    }
    let delta = args.delta.unwrap_or(1.0 / args.n as f64);
    let market = simulate_market(&model, args.n, delta, args.seed)?;
    let file = std::fs::File::create(&args.out).map_err(|e| CliError::Io {
        path: args.out.clone(),
        source: e,
    })?;
    market
        .write_csv(std::io::BufWriter::new(file))
        .map_err(|e| CliError::Io {
            path: args.out.clone(),
            source: e,
        })?;
    if market.clamp_warning {
        eprintln!(
            "warning: variance floor active at {} of {} grid points",
            market.clamp_count,
            args.n + 1
        );
    }
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<()> {
    let mut cfg = EstimationConfig::default();
    let mut data = None;
    for e in gather(&[&args.config], &args.set)? {
        if e.key == "data" {
            data = Some(PathBuf::from(&e.value));
        } else if !apply_estimation(&mut cfg, &e)? {
            return Err(unknown_key(&e));
        }
    }
    let data = args
        .data
        .or(data)
        .ok_or_else(|| CliError::Config("no input: pass --data or a report with a data key".into()))?;
    cfg.validate()?;
    let series = ingest_csv(&data)?;
    let report = run_estimate(&series, &cfg, Some(&data))?;
    write_bytes(args.out.as_deref(), &json_bytes(&report)?)
}

fn parse_run_key<T: std::str::FromStr>(e: &Entry) -> Result<T> {
    e.value
        .parse()
        .map_err(|_| CliError::Config(format!("{}: cannot parse {} = {:?}", e.origin, e.key, e.value)))
}

fn mc(args: McArgs) -> Result<()> {
    let mut model = ModelParams::default();
    let mut cfg = EstimationConfig::default();
    let (mut reps, mut n, mut ladder, mut seed) = (None, None, None, None);
    for e in gather(&[&args.model, &args.config], &args.set)? {
        match e.key.as_str() {
            "reps" => reps = Some(parse_run_key(&e)?),
            "n" => n = Some(parse_run_key(&e)?),
            "seed" => seed = Some(parse_run_key(&e)?),
            "n_ladder" => {
                ladder = Some(
                    e.value
                        .split(',')
                        .map(|s| s.trim().parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| CliError::Config(format!("{}: bad n_ladder {:?}", e.origin, e.value)))?,
                )
            }
            _ => {
                if !(apply_model(&mut model, &e)? || apply_estimation(&mut cfg, &e)?) {
                    return Err(unknown_key(&e));
                }
            }
        }
    }
    let missing = |what: &str| CliError::Config(format!("--{what} is required"));
    let reps = args.reps.or(reps).ok_or_else(|| missing("reps"))?;
    let seed = args.seed.or(seed).ok_or_else(|| missing("seed"))?;
    let ns = match (args.n_ladder, args.n) {
        (Some(l), _) => l,
        (None, Some(n)) => vec![n],
        (None, None) => ladder.or(n.map(|n| vec![n])).ok_or_else(|| missing("n"))?,
    };
    let study = McStudy {
        model,
        cfg,
        reps,
        ns,
        seed,
    };
    let outcome = match args.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| CliError::Config(format!("cannot start {t} workers: {e}")))?
            .install(|| run_mc_study(&study))?,
        None => run_mc_study(&study)?,
    };
    write_outputs(&outcome, &args.out_dir)?;
    match outcome.failure {
        Some(msg) => Err(CliError::Study(msg)),
        None => Ok(()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(4)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Mc(a) => mc(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
