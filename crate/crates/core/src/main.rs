use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use fbmlab::error::{Error, Result};
use fbmlab::estimators::{
    energy_integral_with, estimate_parabolic_dimension_with, CountMode, EnergyOptions, EstimatorOptions, GraphCloud,
    GraphSource,
};
use fbmlab::experiment::{run_suite, SuiteConfig};
use fbmlab::fbm::{generate_fbm_path, generate_mixed_path, HurstIndex, TimeGrid};
use fbmlab::fractal::WeightedTimeSet;
use fbmlab::gaussian::{detcov_sweep, lnd_sweep};
use fbmlab::io::{path_to_csv, read_sample_path, write_atomic};
use fbmlab::occupation::{interior_probe, occupation_histogram, positive_measure_estimate, WeightedPoint};

#[derive(Parser)]
#[command(name = "fbmlab", version, about = "fBm with drift: simulation, parabolic box counting, occupation measures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Points,
    Interpolated,
    Envelope,
}

impl From<Mode> for CountMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Points => CountMode::Points,
            Mode::Interpolated => CountMode::Interpolated,
            Mode::Envelope => CountMode::Envelope,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum SweepKind {
    Detcov,
    Lnd,
}

#[derive(Subcommand)]
enum Command {
    /// Sample fBm (or fBm plus an independent fBm drift) on a uniform grid.
    Generate {
        #[arg(long)]
        hurst: f64,
        /// Number of grid steps; the path has n+1 points.
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        d: usize,
        #[arg(long)]
        seed: u64,
        /// Adds an independent fBm with this index.
        #[arg(long)]
        alpha_prime: Option<f64>,
        #[arg(long)]
        drift_seed: Option<u64>,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Box-counting dimension estimate of a graph CSV.
    Boxdim {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        hurst: f64,
        /// Scale range `2^-a..2^-b`.
        #[arg(long, default_value = "2^-4..2^-12")]
        deltas: String,
        #[arg(long, value_enum, default_value_t = Mode::Points)]
        mode: Mode,
        #[arg(long, default_value_t = 1.0)]
        trim_octaves: f64,
    },
    /// Discrete γ-energy of a path under the uniform measure on its grid.
    Energy {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        hurst: f64,
        #[arg(long, default_value_t = 4096)]
        exact_limit: usize,
        #[arg(long, default_value_t = 1_000_000)]
        sampled_pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Occupation histogram of a path CSV.
    Occupancy {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        epsilon: f64,
        #[arg(long, default_value_t = 2)]
        radius: usize,
        #[arg(long, default_value_t = 1.0)]
        density_floor: f64,
        /// Sparse histogram CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Randomized sweeps of the determinant bound or the LND ratio.
    GaussSweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
        #[arg(long, default_value_t = 10_000)]
        configs: usize,
        #[arg(long, default_value_t = 5)]
        max_n: usize,
        /// Comma-separated Hurst indices.
        #[arg(long, value_delimiter = ',', default_value = "0.2,0.5,0.8")]
        hurst: Vec<f64>,
        #[arg(long)]
        alpha_prime: Option<f64>,
        #[arg(long)]
        min_gap: Option<f64>,
        #[arg(long)]
        sorted: bool,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a JSON experiment suite.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `2^-a..2^-b` (or `a..b`) into dyadic scales.
fn parse_deltas(s: &str) -> Result<Vec<f64>> {
    let bad = || Error::InvalidArgument(format!("scale range {s:?} is not of the form 2^-a..2^-b"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let exp = |p: &str| -> Result<u32> {
        let p = p.trim();
        let p = p.strip_prefix("2^-").unwrap_or(p);
        p.parse().map_err(|_| bad())
    };
    let (a, b) = (exp(a)?, exp(b)?);
    let (lo, hi) = (a.min(b), a.max(b));
    Ok(fbmlab::estimators::dyadic_deltas(lo, hi))
}

fn threads() {
    if let Some(n) = std::env::var("FBMLAB_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Generate { hurst, n, d, seed, alpha_prime, drift_seed, out } => {
            let grid = TimeGrid::uniform(n)?;
            let h = HurstIndex::new(hurst)?;
            let path = match alpha_prime {
                Some(a) => generate_mixed_path(h, HurstIndex::new(a)?, &grid, d, (seed, drift_seed.unwrap_or(seed)))?,
                None => generate_fbm_path(h, &grid, d, seed)?,
            };
            emit(out.as_ref(), &path_to_csv(&path)?)
        }
        Command::Boxdim { input, hurst, deltas, mode, trim_octaves } => {
            let h = HurstIndex::new(hurst)?;
            let path = read_sample_path(&input, Some(h))?;
            let cloud = GraphCloud::from_path(&path, GraphSource::FunctionGraph, h)?;
            let opts = EstimatorOptions { mode: mode.into(), trim_octaves, ..Default::default() };
            let est = estimate_parabolic_dimension_with(&cloud, &parse_deltas(&deltas)?, h, &opts)?;
            println!("{}", serde_json::to_string_pretty(&est)?);
            Ok(())
        }
        Command::Energy { input, gamma, hurst, exact_limit, sampled_pairs, seed } => {
            let h = HurstIndex::new(hurst)?;
            let path = read_sample_path(&input, Some(h))?;
            let measure = WeightedTimeSet::uniform(path.grid.times().to_vec())?;
            let opts = EnergyOptions { exact_limit, sampled_pairs, seed };
            let points: Vec<Vec<f64>> = (0..path.len()).map(|i| path.point(i)).collect();
            let e = energy_integral_with(&measure, &points, gamma, h, &opts)?;
            println!("{}", json!({"gamma": gamma, "hurst": hurst, "points": path.len(), "energy": e}));
            Ok(())
        }
        Command::Occupancy { input, epsilon, radius, density_floor, out } => {
            let path = read_sample_path(&input, Some(HurstIndex::new(0.5)?))?;
            let w = 1.0 / path.len() as f64;
            let image: Vec<WeightedPoint> = (0..path.len()).map(|i| WeightedPoint { weight: w, value: path.point(i) }).collect();
            let hist = occupation_histogram(&image, epsilon)?;
            if let Some(p) = &out {
                write_atomic(p, hist.to_csv(Some(&format!("source={} epsilon={epsilon}", input.display()))).as_bytes())?;
            }
            let interior = interior_probe(&hist, radius)?;
            println!(
                "{}",
                json!({"cells": hist.occupied(), "epsilon": epsilon,
                       "measure_estimate": positive_measure_estimate(&hist, density_floor)?,
                       "interior_cells": interior.interior_cells.len(), "radius_cells": radius})
            );
            Ok(())
        }
        Command::GaussSweep { kind, configs, max_n, hurst, alpha_prime, min_gap, sorted, seed, out } => {
            let hursts = hurst.iter().map(|&v| HurstIndex::new(v)).collect::<Result<Vec<_>>>()?;
            let summary = match kind {
                SweepKind::Detcov => detcov_sweep(configs, max_n, &hursts, sorted, seed)?,
                SweepKind::Lnd => {
                    let a = alpha_prime.ok_or_else(|| Error::InvalidArgument("--alpha-prime is required for lnd".into()))?;
                    let h = *hursts.first().ok_or_else(|| Error::InvalidArgument("--hurst is empty".into()))?;
                    lnd_sweep(configs, max_n, h, HurstIndex::new(a)?, (0.1, 1.0), min_gap, seed)?
                }
            };
            if let Some(p) = &out {
                write_atomic(p, summary.to_csv(&format!("seed{seed}")).as_bytes())?;
            }
            println!(
                "{}",
                json!({"configs": configs, "evaluated": summary.rows.len(), "singular": summary.singular,
                       "min": summary.min_value, "argmin": summary.argmin})
            );
            Ok(())
        }
        Command::Experiment { config, out } => {
            let text = std::fs::read_to_string(&config)?;
            let cfg = SuiteConfig::from_json(&text)?;
            let rows = run_suite(&cfg, &out)?;
            let passed = rows.iter().filter(|r| r.pass).count();
            eprintln!("{passed}/{} rows pass; report in {}", rows.len(), out.join("report.csv").display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    threads();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
