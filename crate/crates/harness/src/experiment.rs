//! Seed-parallel trial execution and per-size summaries.

use std::io;
use std::time::Instant;

use rayon::prelude::*;
use stochsort_core::stats::Moments;
use stochsort_core::streams::{uniform_stream, Seed};

use crate::algorithms::AlgoSpec;
use crate::config::{ExperimentConfig, SeedRange};
use crate::table;

/// One CSV row: the outcome of one algorithm on one seeded stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRow {
    pub algorithm: String,
    pub n: usize,
    pub seed: u64,
    pub profile: String,
    pub cost: f64,
    pub failed: bool,
    /// Failure name, empty for successful runs.
    pub failure_type: String,
    pub degenerate: bool,
    pub phases: usize,
    pub elapsed_ns: u64,
}

/// Runs `spec` on the uniform stream of `seed`.
pub fn run_trial(spec: &AlgoSpec, n: usize, seed: u64, timing: bool) -> TrialRow {
    let items = uniform_stream(Seed(seed), n);
    let t0 = timing.then(Instant::now);
    let trace = spec.run(&items);
    let elapsed_ns = t0.map_or(0, |t| t.elapsed().as_nanos().min(u64::MAX as u128) as u64);
    TrialRow {
        algorithm: spec.name().to_string(),
        n,
        seed,
        profile: spec.profile_label().to_string(),
        cost: trace.cost(),
        failed: trace.failed(),
        failure_type: trace.failure.map(|f| f.kind.name().to_string()).unwrap_or_default(),
        degenerate: trace.degenerate,
        phases: trace.phase_count(),
        elapsed_ns,
    }
}

/// Runs every `(n, seed)` pair and returns rows sorted by `n`, then seed,
/// whatever the thread count.
pub fn run_trials(spec: &AlgoSpec, ns: &[usize], seeds: SeedRange, threads: Option<usize>, timing: bool) -> io::Result<Vec<TrialRow>> {
    let jobs: Vec<(usize, u64)> = ns.iter().flat_map(|&n| seeds.iter().map(move |s| (n, s))).collect();
    let work = || -> Vec<TrialRow> { jobs.par_iter().map(|&(n, s)| run_trial(spec, n, s, timing)).collect() };
    let mut rows = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(io::Error::other)?
            .install(work),
        None => work(),
    };
    rows.sort_by_key(|r| (r.n, r.seed));
    Ok(rows)
}

/// Aggregates of one `(algorithm, n)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSummary {
    pub algorithm: String,
    pub n: usize,
    pub trials: u64,
    pub mean: f64,
    pub std_err: f64,
    pub failure_fraction: f64,
    pub degenerate_fraction: f64,
    pub mean_phases: f64,
}

/// One summary per `(algorithm, n)`, in order of first appearance. Rows
/// are consumed in seed order so the result does not depend on how they
/// were produced.
pub fn summarize(rows: &[TrialRow]) -> Vec<CostSummary> {
    let mut keys: Vec<(&str, usize)> = Vec::new();
    for r in rows {
        let k = (r.algorithm.as_str(), r.n);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(alg, n)| {
            let mut cell: Vec<&TrialRow> = rows.iter().filter(|r| r.algorithm == alg && r.n == n).collect();
            cell.sort_by_key(|r| r.seed);
            let cost: Moments = cell.iter().map(|r| r.cost).collect();
            let t = cell.len() as f64;
            let frac = |f: fn(&TrialRow) -> bool| cell.iter().filter(|r| f(r)).count() as f64 / t;
            CostSummary {
                algorithm: alg.to_string(),
                n,
                trials: cell.len() as u64,
                mean: cost.mean(),
                std_err: cost.std_err(),
                failure_fraction: frac(|r| r.failed),
                degenerate_fraction: frac(|r| r.degenerate),
                mean_phases: cell.iter().map(|r| r.phases as f64).sum::<f64>() / t,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub rows: Vec<TrialRow>,
    pub summaries: Vec<CostSummary>,
}

/// Runs the experiment and writes the CSV when an output path is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> io::Result<ExperimentOutput> {
    cfg.validate().map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
    let rows = run_trials(&cfg.algorithm, &cfg.ns, cfg.seeds, cfg.threads, cfg.timing)?;
    if let Some(path) = &cfg.out {
        let f = std::fs::File::create(path)?;
        table::write_rows(io::BufWriter::new(f), &rows)?;
    }
    let summaries = summarize(&rows);
    Ok(ExperimentOutput { rows, summaries })
}
