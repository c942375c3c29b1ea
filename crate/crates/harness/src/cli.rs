//! Command-line interface: `run`, `sweep`, `verify`, `fit` and `floor`.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use stochsort_core::engine::Profile;
use stochsort_core::stats::{estimate_log_floor, fit_scaling};
use stochsort_core::streams::Seed;

use crate::algorithms::{AlgoFlags, AlgoSpec};
use crate::config::{parse_key_values, parse_sizes, ConfigError, ExperimentConfig, SeedRange};
use crate::experiment::{run_experiment, summarize, CostSummary};
use crate::suites::{self, Check, THRESHOLDS};
use crate::table;

#[derive(Debug, Parser)]
#[command(name = "stochsort", version, about = "Online sorting of uniform random streams: experiments and checks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one algorithm at one size over a seed range.
    Run(ExperimentArgs),
    /// Run one algorithm over a grid of sizes and fit the growth exponent.
    Sweep(ExperimentArgs),
    /// Run the invariant, distribution and concentration suites.
    Verify(VerifyArgs),
    /// Fit growth exponents and log-floor constants from a trial CSV.
    Fit(FitArgs),
    /// Check the exact n = 2 expected cost of 1/3.
    Floor(FloorArgs),
}

/// Flags shared by `run` and `sweep`. Every flag may also come from the
/// `--config` file as `key=value`; flags on the command line win.
#[derive(Debug, Clone, Default, Args)]
pub struct ExperimentArgs {
    /// Plain key=value file with any of the flags below.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub alg: Option<String>,
    /// Size, or comma-separated sizes for `sweep`; `2^k` is accepted.
    #[arg(long)]
    pub n: Option<String>,
    /// `A..B` or `A..=B`, decimal or 0x-hex.
    #[arg(long)]
    pub seeds: Option<String>,
    /// paper or practical.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub threads: Option<usize>,
    /// Record wall-clock time per trial in `elapsed_ns`.
    #[arg(long)]
    pub timing: bool,
    #[arg(long = "B")]
    pub b: Option<u64>,
    #[arg(long)]
    pub depth: Option<u32>,
    #[arg(long = "cB")]
    pub c_b: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "min-recurse")]
    pub min_recurse: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub c1: Option<f64>,
    #[arg(long)]
    pub c2: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long = "block-count")]
    pub block_count: Option<usize>,
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl ExperimentArgs {
    /// Fills every unset field from `file`.
    pub fn merge_file(&mut self, file: &BTreeMap<String, String>) -> Result<(), ConfigError> {
        fn fill<T: FromStr>(slot: &mut Option<T>, key: &str, v: &str) -> Result<(), ConfigError> {
            if slot.is_none() {
                *slot = Some(parse_value(key, v)?);
            }
            Ok(())
        }
        for (k, v) in file {
            let v = v.as_str();
            match k.as_str() {
                "alg" => fill(&mut self.alg, k, v)?,
                "n" => fill(&mut self.n, k, v)?,
                "seeds" => fill(&mut self.seeds, k, v)?,
                "profile" => fill(&mut self.profile, k, v)?,
                "out" => fill(&mut self.out, k, v)?,
                "threads" => fill(&mut self.threads, k, v)?,
                "timing" => self.timing |= parse_value::<bool>(k, v)?,
                "B" => fill(&mut self.b, k, v)?,
                "depth" => fill(&mut self.depth, k, v)?,
                "cB" => fill(&mut self.c_b, k, v)?,
                "beta" => fill(&mut self.beta, k, v)?,
                "min-recurse" => fill(&mut self.min_recurse, k, v)?,
                "alpha" => fill(&mut self.alpha, k, v)?,
                "c1" => fill(&mut self.c1, k, v)?,
                "c2" => fill(&mut self.c2, k, v)?,
                "eps" => fill(&mut self.eps, k, v)?,
                "block-count" => fill(&mut self.block_count, k, v)?,
                _ => return Err(ConfigError::UnknownKey(k.clone())),
            }
        }
        Ok(())
    }

    fn flags(&self) -> AlgoFlags {
        AlgoFlags {
            b: self.b,
            depth: self.depth,
            c_b: self.c_b,
            beta: self.beta,
            min_recurse: self.min_recurse,
            alpha: self.alpha,
            c1: self.c1,
            c2: self.c2,
            eps: self.eps,
            block_count: self.block_count,
        }
    }

    /// Resolves the config file and builds the experiment.
    pub fn resolve(mut self) -> anyhow::Result<ExperimentConfig> {
        if let Some(path) = self.config.clone() {
            let text = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            self.merge_file(&parse_key_values(&text)?)?;
        }
        let profile = parse_profile(self.profile.as_deref())?;
        let alg = self.alg.as_deref().ok_or(ConfigError::Missing("alg"))?;
        let spec = AlgoSpec::from_name(alg, profile, &self.flags())?;
        let ns = parse_sizes(self.n.as_deref().ok_or(ConfigError::Missing("n"))?)?;
        let seeds: SeedRange = self.seeds.as_deref().unwrap_or("0..100").parse()?;
        let mut cfg = ExperimentConfig::new(spec, ns, seeds)?;
        cfg.out = self.out;
        cfg.threads = self.threads;
        cfg.timing = self.timing;
        Ok(cfg)
    }
}

fn parse_profile(s: Option<&str>) -> Result<Profile, ConfigError> {
    match s {
        None => Ok(Profile::Practical),
        Some(p) => Profile::from_name(p).ok_or_else(|| ConfigError::UnknownProfile(p.to_string())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Structure,
    Precedence,
    Distribution,
    Concentration,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub suite: Suite,
    /// Size of the structural runs.
    #[arg(long, default_value_t = 1 << 14)]
    pub structure_n: usize,
    #[arg(long, default_value = "0..100")]
    pub structure_seeds: String,
    /// Size of the precedence and distribution runs.
    #[arg(long, default_value_t = 1 << 16)]
    pub stat_n: usize,
    #[arg(long, default_value = "0..200")]
    pub stat_seeds: String,
    /// Seed of the concentration checkers.
    #[arg(long, default_value = "0")]
    pub seed: String,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Trial CSV written by `run` or `sweep`.
    pub input: PathBuf,
}

#[derive(Debug, Args)]
pub struct FloorArgs {
    /// One algorithm; all of them when omitted.
    #[arg(long)]
    pub alg: Option<String>,
    #[arg(long, default_value = "0..100000")]
    pub seeds: String,
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub threads: Option<usize>,
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> anyhow::Result<T> {
    match threads {
        Some(t) => Ok(rayon::ThreadPoolBuilder::new().num_threads(t.max(1)).build()?.install(f)),
        None => Ok(f()),
    }
}

pub fn print_summaries(out: &mut impl Write, s: &[CostSummary]) -> io::Result<()> {
    writeln!(
        out,
        "{:<16} {:>9} {:>7} {:>14} {:>12} {:>8} {:>8} {:>7}",
        "algorithm", "n", "trials", "mean", "std_err", "failed", "degen", "phases"
    )?;
    for c in s {
        writeln!(
            out,
            "{:<16} {:>9} {:>7} {:>14.4} {:>12.4} {:>8.4} {:>8.4} {:>7.2}",
            c.algorithm, c.n, c.trials, c.mean, c.std_err, c.failure_fraction, c.degenerate_fraction, c.mean_phases
        )?;
    }
    Ok(())
}

fn report(out: &mut impl Write, checks: &[Check]) -> io::Result<ExitCode> {
    for c in checks {
        writeln!(out, "{c}")?;
    }
    Ok(if checks.iter().all(|c| c.pass) {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

/// `(n, mean)` points of one algorithm, by increasing `n`.
fn points(s: &[CostSummary], alg: &str) -> Vec<(f64, f64)> {
    let mut p: Vec<(f64, f64)> = s.iter().filter(|c| c.algorithm == alg).map(|c| (c.n as f64, c.mean)).collect();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    p
}

fn print_fits(out: &mut impl Write, s: &[CostSummary]) -> io::Result<()> {
    let mut algs: Vec<&str> = s.iter().map(|c| c.algorithm.as_str()).collect();
    algs.dedup();
    for alg in algs {
        let p = points(s, alg);
        let exp = fit_scaling(&p).map_or_else(|e| format!("n/a ({e})"), |e| format!("{e:.4}"));
        let floor: Vec<(f64, f64)> = p.iter().copied().filter(|&(n, _)| n >= 2.0).collect();
        let c_hat = estimate_log_floor(&floor).map_or_else(|e| format!("n/a ({e})"), |c| format!("{c:.4}"));
        writeln!(out, "{alg}: exponent {exp} c_hat {c_hat}")?;
    }
    Ok(())
}

pub fn execute(cli: Cli) -> anyhow::Result<ExitCode> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Run(args) => {
            let cfg = args.resolve()?;
            if cfg.ns.len() != 1 {
                bail!("`run` takes a single --n; use `sweep` for a grid");
            }
            let res = run_experiment(&cfg)?;
            print_summaries(&mut out, &res.summaries)?;
        }
        Command::Sweep(args) => {
            let cfg = args.resolve()?;
            let res = run_experiment(&cfg)?;
            print_summaries(&mut out, &res.summaries)?;
            print_fits(&mut out, &res.summaries)?;
        }
        Command::Fit(args) => {
            let f = File::open(&args.input).with_context(|| format!("opening {}", args.input.display()))?;
            let rows = table::read_rows(BufReader::new(f))?;
            let s = summarize(&rows);
            print_summaries(&mut out, &s)?;
            print_fits(&mut out, &s)?;
        }
        Command::Floor(args) => {
            let profile = parse_profile(args.profile.as_deref())?;
            let seeds: SeedRange = args.seeds.parse()?;
            let specs = match &args.alg {
                Some(a) => vec![AlgoSpec::from_name(a, profile, &AlgoFlags::default())?],
                None => AlgoSpec::all(profile),
            };
            let checks = with_threads(args.threads, || suites::floor_suite(&specs, seeds))?;
            return Ok(report(&mut out, &checks)?);
        }
        Command::Verify(args) => {
            let structure_seeds: SeedRange = args.structure_seeds.parse()?;
            let stat_seeds: SeedRange = args.stat_seeds.parse()?;
            let seed = Seed::parse(&args.seed)?;
            let th = THRESHOLDS;
            let want = |s: Suite| args.suite == Suite::All || args.suite == s;
            let checks = with_threads(args.threads, || {
                let mut c = Vec::new();
                if want(Suite::Structure) {
                    c.extend(suites::structure_suite(args.structure_n, structure_seeds));
                }
                if want(Suite::Precedence) {
                    c.extend(suites::precedence_suite(args.stat_n, stat_seeds, &th));
                }
                if want(Suite::Distribution) {
                    c.extend(suites::distribution_suite(args.stat_n, stat_seeds, &th));
                }
                if want(Suite::Concentration) {
                    c.extend(suites::concentration_suite(seed, &th));
                }
                c
            })?;
            return Ok(report(&mut out, &checks)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
