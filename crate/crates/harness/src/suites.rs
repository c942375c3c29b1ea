//! Verification suites: structural invariants, the precedence and
//! distribution properties of the merge-based algorithms, the
//! concentration checkers and the `n = 2` floor.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use stochsort_core::alg_adapt::{run_alg_adapt, AdaptParams};
use stochsort_core::alg_adapt_merge::{check_precedence, run_alg_adapt_merge, MergeParams};
use stochsort_core::alg_final::{run_alg_final, FinalParams};
use stochsort_core::baselines::exact_floor_n2;
use stochsort_core::checks::{check_structure, dampening_replays, final_pool_replay, regular_buffer_samples, StructuralReport};
use stochsort_core::engine::Profile;
use stochsort_core::stats::{check_bin_concentration, check_property_a1, ks_p_value, ks_two_sample, ks_uniform, n2_anchor_holds, Moments};
use stochsort_core::streams::{pool_dist_sample, uniform_stream, PoolDistParams, Seed};
use stochsort_core::trace::RunTrace;

use crate::algorithms::AlgoSpec;
use crate::config::SeedRange;

/// Statistical thresholds of every suite, in one place.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Largest tolerated fraction of runs with a precedence violation.
    pub precedence_max_fraction: f64,
    /// Significance level of every KS test.
    pub ks_alpha: f64,
    /// Smallest pooled sample a buffer needs to be tested.
    pub ks_min_sample: usize,
    /// Most buffers (or cells) tested per KS family.
    pub ks_max_cells: usize,
    /// Smallest per-cell sample of the dampening fit, one value per run.
    pub pool_fit_min_sample: usize,
    pub regular_ks_min_pass: f64,
    pub replay_min_match: f64,
    pub dampening_ks_min_pass: f64,
    pub bin_min_pass: f64,
    pub a1_min_pass: f64,
    /// Regime exponent of the concentration checkers.
    pub regime_exponent: f64,
}

pub const THRESHOLDS: Thresholds = Thresholds {
    precedence_max_fraction: 0.05,
    ks_alpha: 0.01,
    ks_min_sample: 200,
    ks_max_cells: 200,
    pool_fit_min_sample: 100,
    regular_ks_min_pass: 0.90,
    replay_min_match: 0.95,
    dampening_ks_min_pass: 0.90,
    bin_min_pass: 0.999,
    a1_min_pass: 0.99,
    regime_exponent: 2.0,
};

impl Default for Thresholds {
    fn default() -> Self {
        THRESHOLDS
    }
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

/// Runs `f` on every seed of `seeds` and returns the results in seed order.
fn per_seed<T: Send>(seeds: SeedRange, f: impl Fn(u64) -> T + Sync) -> Vec<T> {
    let v: Vec<u64> = seeds.iter().collect();
    v.par_iter().map(|&s| f(s)).collect()
}

/// Zero violations of every structural invariant over `seeds` for the
/// three phased algorithms under the practical profile.
pub fn structure_suite(n: usize, seeds: SeedRange) -> Vec<Check> {
    let p = Profile::Practical;
    let runs: [(&str, Box<dyn Fn(&[f64]) -> RunTrace + Sync>); 3] = [
        ("alg_adapt", Box::new(move |x| run_alg_adapt(x, &AdaptParams::for_profile(p)))),
        ("alg_adapt_merge", Box::new(move |x| run_alg_adapt_merge(x, &MergeParams::for_profile(p)))),
        ("alg_final", Box::new(move |x| run_alg_final(x, &FinalParams::for_profile(p)))),
    ];
    runs.iter()
        .map(|(name, run)| {
            let reports = per_seed(seeds, |s| check_structure(&run(&uniform_stream(Seed(s), n))));
            let mut total = StructuralReport::default();
            reports.iter().for_each(|r| total.add(r));
            let bad: Vec<String> = total.entries().iter().filter(|(_, c)| *c > 0).map(|(k, c)| format!("{k}={c}")).collect();
            let detail = if bad.is_empty() {
                format!("0 violations over {} seeds at n={n}", seeds.len())
            } else {
                format!("violations {} over {} seeds at n={n}", bad.join(" "), seeds.len())
            };
            Check::new(format!("structure/{name}"), bad.is_empty(), detail)
        })
        .collect()
}

/// Fraction of runs in which a buffer filled before a preceding one.
pub fn precedence_suite(n: usize, seeds: SeedRange, th: &Thresholds) -> Vec<Check> {
    let p = Profile::Practical;
    let merge = per_seed(seeds, |s| {
        check_precedence(&run_alg_adapt_merge(&uniform_stream(Seed(s), n), &MergeParams::for_profile(p)))
    });
    let fin = per_seed(seeds, |s| {
        check_precedence(&run_alg_final(&uniform_stream(Seed(s), n), &FinalParams::for_profile(p)))
    });
    [("alg_adapt_merge", merge), ("alg_final", fin)]
        .into_iter()
        .map(|(name, v)| {
            let bad = v.iter().filter(|&&c| c > 0).count();
            let frac = bad as f64 / v.len() as f64;
            Check::new(
                format!("precedence/{name}"),
                frac < th.precedence_max_fraction,
                format!("{bad}/{} runs with a violation ({frac:.4} < {})", v.len(), th.precedence_max_fraction),
            )
        })
        .collect()
}

/// Evenly spaced subset of at most `max` entries.
fn spread<T>(v: Vec<T>, max: usize) -> Vec<T> {
    if v.len() <= max {
        return v;
    }
    let step = v.len() as f64 / max as f64;
    let keep: Vec<usize> = (0..max).map(|i| (i as f64 * step) as usize).collect();
    v.into_iter()
        .enumerate()
        .filter(|(i, _)| keep.binary_search(i).is_ok())
        .map(|(_, x)| x)
        .collect()
}

struct FinalRun {
    failed: bool,
    regular: Vec<((u32, u64, u64), Vec<f64>)>,
    /// Key, values, pool parameters and replay verdict per dampening buffer.
    dampening: Vec<((u32, u64, u64), Vec<f64>, (u64, u64, u64), bool)>,
    final_pool_match: Option<bool>,
}

fn final_run(n: usize, seed: u64) -> FinalRun {
    let items = uniform_stream(Seed(seed), n);
    let t = run_alg_final(&items, &FinalParams::practical());
    let dampening = dampening_replays(&t, &items)
        .into_iter()
        .map(|r| {
            let b = t.buffer(r.buffer);
            ((b.phase, b.segment.granularity, b.segment.index), r.values, r.pool_params, r.matches)
        })
        .collect();
    FinalRun {
        failed: t.failed(),
        regular: regular_buffer_samples(&t),
        dampening,
        final_pool_match: final_pool_replay(&t, &items).map(|r| r.matches),
    }
}

/// Uniformity of regular buffers, replays and pool-distribution fit of
/// dampening buffers, and the final-pool replay, for `alg_final`.
pub fn distribution_suite(n: usize, seeds: SeedRange, th: &Thresholds) -> Vec<Check> {
    let runs = per_seed(seeds, |s| (s, final_run(n, s)));
    let mut out = Vec::new();

    let mut pooled: BTreeMap<(u32, u64, u64), Vec<f64>> = BTreeMap::new();
    for (_, r) in &runs {
        for (k, v) in &r.regular {
            pooled.entry(*k).or_default().extend_from_slice(v);
        }
    }
    let cells: Vec<Vec<f64>> = pooled.into_values().filter(|v| v.len() >= th.ks_min_sample).collect();
    let cells = spread(cells, th.ks_max_cells);
    let ok = cells
        .iter()
        .filter(|v| {
            let d = ks_uniform(v).expect("non-empty");
            ks_p_value(d, v.len() as f64) >= th.ks_alpha
        })
        .count();
    let frac = ok as f64 / cells.len().max(1) as f64;
    out.push(Check::new(
        "distribution/regular_uniform",
        !cells.is_empty() && frac >= th.regular_ks_min_pass,
        format!(
            "{ok}/{} buffers not rejected at {} ({frac:.3} >= {})",
            cells.len(),
            th.ks_alpha,
            th.regular_ks_min_pass
        ),
    ));

    let clean: Vec<&FinalRun> = runs.iter().map(|(_, r)| r).filter(|r| !r.failed).collect();
    let with_damp: Vec<&&FinalRun> = clean.iter().filter(|r| !r.dampening.is_empty()).collect();
    let matched = with_damp.iter().filter(|r| r.dampening.iter().all(|d| d.3)).count();
    let frac = matched as f64 / with_damp.len().max(1) as f64;
    out.push(Check::new(
        "distribution/dampening_replay",
        !with_damp.is_empty() && frac >= th.replay_min_match,
        format!("{matched}/{} non-failed runs match ({frac:.3} >= {})", with_damp.len(), th.replay_min_match),
    ));

    let mut observed: BTreeMap<(u32, u64, u64), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (s, r) in &runs {
        for (k, vals, (pn, pb, pm), _) in &r.dampening {
            let Ok(p) = PoolDistParams::new(*pn, *pb, *pm) else {
                continue;
            };
            if vals.is_empty() {
                continue;
            }
            // One value per buffer: values inside a buffer cluster by
            // sub-segment, so pooling all of them breaks the KS iid premise.
            let salt = (k.0 as u64) << 48 ^ k.1 << 24 ^ k.2;
            let (y, _) = pool_dist_sample(Seed(*s).derive(salt), p);
            let pick = uniform_stream(Seed(*s).derive(!salt), 1)[0];
            let at = |len: usize| ((pick * len as f64) as usize).min(len - 1);
            let e = observed.entry(*k).or_default();
            e.0.push(vals[at(vals.len())]);
            let y = &y[..y.len().min(vals.len())];
            if !y.is_empty() {
                e.1.push(y[at(y.len())]);
            }
        }
    }
    let cells: Vec<(Vec<f64>, Vec<f64>)> = observed
        .into_values()
        .filter(|(a, b)| a.len() >= th.pool_fit_min_sample && b.len() >= th.pool_fit_min_sample)
        .collect();
    let cells = spread(cells, th.ks_max_cells);
    let ok = cells
        .iter()
        .filter(|(a, b)| {
            let d = ks_two_sample(a, b).expect("non-empty");
            let ne = (a.len() * b.len()) as f64 / (a.len() + b.len()) as f64;
            ks_p_value(d, ne) >= th.ks_alpha
        })
        .count();
    let frac = ok as f64 / cells.len().max(1) as f64;
    out.push(Check::new(
        "distribution/dampening_pool_fit",
        !cells.is_empty() && frac >= th.dampening_ks_min_pass,
        format!(
            "{ok}/{} cells not rejected at {} ({frac:.3} >= {})",
            cells.len(),
            th.ks_alpha,
            th.dampening_ks_min_pass
        ),
    ));

    let pools: Vec<bool> = clean.iter().filter_map(|r| r.final_pool_match).collect();
    let matched = pools.iter().filter(|&&m| m).count();
    let frac = matched as f64 / pools.len().max(1) as f64;
    out.push(Check::new(
        "distribution/final_pool_replay",
        !pools.is_empty() && frac >= th.replay_min_match,
        format!("{matched}/{} non-failed runs match ({frac:.3} >= {})", pools.len(), th.replay_min_match),
    ));
    out
}

/// The two concentration checkers at their reference parameters.
pub fn concentration_suite(seed: Seed, th: &Thresholds) -> Vec<Check> {
    let bins = check_bin_concentration(1 << 16, 16, 10_000, seed, th.regime_exponent);
    let a1 = check_property_a1(1 << 16, 4, 4, 1_000, 8, seed.derive(1), th.regime_exponent);
    let mk = |name: &str, r: Result<f64, stochsort_core::Error>, min: f64| match r {
        Ok(f) => Check::new(name, f >= min, format!("pass fraction {f:.4} (>= {min})")),
        Err(e) => Check::new(name, false, format!("rejected: {e}")),
    };
    vec![
        mk("concentration/bins n'=2^16 B=16", bins, th.bin_min_pass),
        mk("concentration/suffix K=4 n=2^16", a1, th.a1_min_pass),
    ]
}

/// Mean and standard error of `spec` at `n = 2`.
pub fn floor_moments(spec: &AlgoSpec, seeds: SeedRange) -> Moments {
    per_seed(seeds, |s| spec.run(&uniform_stream(Seed(s), 2)).cost()).into_iter().collect()
}

/// The `n = 2` expected cost of every algorithm against `1/3`, within
/// three standard errors.
pub fn floor_suite(specs: &[AlgoSpec], seeds: SeedRange) -> Vec<Check> {
    specs
        .iter()
        .map(|spec| {
            let m = floor_moments(spec, seeds);
            let (mean, se) = (m.mean(), m.std_err());
            Check::new(
                format!("floor/{}", spec.name()),
                n2_anchor_holds(mean, se),
                format!("mean {mean:.5} se {se:.5} vs {:.5} over {} seeds", exact_floor_n2(), seeds.len()),
            )
        })
        .collect()
}
