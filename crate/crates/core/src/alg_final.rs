//! The full recursive algorithm and its pool variant.
//!
//! `AlgFinal` runs the merge control flow with `K` of the form `2^(2^k)`.
//! Regular buffers recurse into `AlgFinal` on rescaled values; dampening
//! buffers and the final pool are backed by `AlgPool` instances that see
//! every arrival of their segment, absorb the informative ones into
//! per-segment budgets and place only the real ones.

use alloc::vec::Vec;

use crate::engine::{drive, is_doubly_exponential, EngineConfig, Instance, KRule, Mode, Profile, Sink, Tuning};
use crate::error::{Error, Result};
use crate::params::{seg_index, Margin, Segment};
use crate::trace::{AlgorithmKind, BufferInfo, BufferKind, RunTrace};

/// Exponent of the practical `K` rule: `K` is the `2^(2^k)` in
/// `(log2(n)^alpha, log2(n)^(2 alpha)]`.
pub const PRACTICAL_ALPHA: f64 = 0.45;

/// Constants of the well-parametrized predicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellParams {
    pub c1: f64,
    pub c2: f64,
    pub eps: f64,
}

impl Default for WellParams {
    fn default() -> Self {
        WellParams { c1: 0.1, c2: 10.0, eps: 0.5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FinalParams {
    pub k_rule: KRule,
    pub min_recurse: usize,
    pub profile: Profile,
    pub tuning: Tuning,
    pub well: WellParams,
    pub instrument: bool,
}

impl FinalParams {
    pub fn paper() -> Self {
        Self::for_profile(Profile::Paper)
    }

    pub fn practical() -> Self {
        Self::for_profile(Profile::Practical)
    }

    pub fn for_profile(profile: Profile) -> Self {
        FinalParams {
            k_rule: KRule::DoublyExponential {
                exponent: match profile {
                    Profile::Paper => 8.0,
                    Profile::Practical => PRACTICAL_ALPHA,
                },
            },
            min_recurse: 64,
            profile,
            tuning: profile.merge_tuning(),
            well: WellParams::default(),
            instrument: true,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.k_rule = KRule::DoublyExponential { exponent: alpha };
        self
    }

    pub(crate) fn engine(&self) -> EngineConfig {
        EngineConfig {
            tuning: self.tuning,
            min_recurse: self.min_recurse.max(2),
            adapt_c_b: 1.0,
            adapt_beta: 2.0,
            merge_k: self.k_rule,
            final_k: self.k_rule,
            instrument: self.instrument,
        }
    }

    /// `(K, B_1)` at size `n`, or `None` where the run degenerates.
    pub fn shape(&self, n: u64) -> Option<(u64, u64)> {
        Instance::merge_shape(&self.engine(), Mode::Final, n)
    }
}

impl Default for FinalParams {
    fn default() -> Self {
        Self::practical()
    }
}

pub fn run_alg_final(items: &[f64], params: &FinalParams) -> RunTrace {
    let inst = Instance::new_merge(params.engine(), Mode::Final, 0, items.len());
    drive(AlgorithmKind::AlgFinal, inst, Sink::default(), items, items.len())
}

/// Parameters `(n', B', m')` of an `AlgPool` instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolInstance {
    pub n: u64,
    pub b: u64,
    pub m: u64,
}

impl PoolInstance {
    pub fn new(n: u64, b: u64, m: u64) -> Result<Self> {
        if !is_doubly_exponential(b) {
            return Err(Error::InvalidParams("B' must be of the form 2^(2^k)"));
        }
        if b.checked_mul(m).is_none_or(|bm| bm > n) {
            return Err(Error::InvalidParams("B' * m' must not exceed n'"));
        }
        Ok(PoolInstance { n, b, m })
    }

    /// Cells the instance owns: `n' - B' m'`.
    pub fn array_len(&self) -> usize {
        (self.n - self.b * self.m) as usize
    }

    pub fn is_well_parametrized(&self, well: &WellParams, margin: Margin) -> bool {
        well_parametrized(self.n, self.b, self.m, well, margin)
    }
}

/// `B' in [c1 n'^{2/5}, c2 n'^{3/5}]` and `m' = x - (1 +- eps) d(x)` for
/// `x = n'/B'`.
pub fn well_parametrized(n: u64, b: u64, m: u64, well: &WellParams, margin: Margin) -> bool {
    if n == 0 || b == 0 {
        return false;
    }
    let nf = n as f64;
    let bf = b as f64;
    if bf < well.c1 * libm::pow(nf, 0.4) || bf > well.c2 * libm::pow(nf, 0.6) {
        return false;
    }
    let x = nf / bf;
    let d = margin.d(x);
    if d <= 0.0 {
        return (x - m as f64).abs() < 1.0;
    }
    libm::fabs((x - m as f64) / d - 1.0) <= well.eps
}

/// Runs a standalone `AlgPool` instance on the full arrival sequence `x`
/// (informative and real items). The trace covers the `n' - B' m'` cells
/// of the instance; informative items have no placement.
pub fn run_alg_pool(x: &[f64], inst: PoolInstance, params: &FinalParams) -> RunTrace {
    assert!(x.len() as u64 <= inst.n, "more arrivals than n'");
    let mut sink = Sink::default();
    let engine = Instance::new_pool(params.engine(), 0, inst.n, inst.b, inst.m, &mut sink);
    let mut t = drive(AlgorithmKind::AlgPool, engine, sink, x, inst.array_len());
    for s in 0..inst.b {
        t.buffers.push(BufferInfo {
            id: t.buffers.len() as u32,
            start: 0,
            len: 0,
            segment: Segment::from_zero_based(inst.b, s),
            kind: BufferKind::Phase1Virtual,
            phase: 1,
            allocated_at: 0,
        });
    }
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ItemClass {
    Real,
    Informative,
}

/// Real iff at least `m'` earlier arrivals of `history` share the phase-1
/// segment of `x`.
pub fn classify_item(inst: &PoolInstance, history: &[f64], x: f64) -> ItemClass {
    let s = seg_index(x, inst.b);
    let seen = history.iter().filter(|&&h| seg_index(h, inst.b) == s).count() as u64;
    if seen >= inst.m {
        ItemClass::Real
    } else {
        ItemClass::Informative
    }
}

/// Fraction of the spawned pool instances of `trace` that are
/// well-parametrized, or `None` if there are none.
pub fn well_parametrized_fraction(trace: &RunTrace, well: &WellParams) -> Option<f64> {
    let recs = &trace.pool_instances;
    if recs.is_empty() {
        return None;
    }
    let ok = recs.iter().filter(|r| well_parametrized(r.n, r.b, r.m, well, trace.margin)).count();
    Some(ok as f64 / recs.len() as f64)
}

/// Items of `x` that an instance with these parameters would treat as real.
pub fn real_items(inst: &PoolInstance, x: &[f64]) -> Vec<f64> {
    let mut seen = alloc::vec![0u64; inst.b as usize];
    let mut out = Vec::new();
    for &v in x {
        let s = seg_index(v, inst.b) as usize;
        if seen[s] >= inst.m {
            out.push(v);
        }
        seen[s] += 1;
    }
    out
}
