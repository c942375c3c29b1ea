//! Phased adaptive allocation with a fixed segment count.

use alloc::vec::Vec;

use crate::engine::{drive, EngineConfig, Instance, KRule, Profile, Sink, Tuning};
use crate::error::{Error, Result};
use crate::trace::{AlgorithmKind, PhaseRecord, RunTrace};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptParams {
    /// `B = max(2, ceil(c_b * log2 n))`.
    pub c_b: f64,
    /// Final-pool cutoff `B * log2(n)^beta`; also bounds `B <= n / log2(n)^beta`.
    pub beta: f64,
    pub min_recurse: usize,
    pub profile: Profile,
    pub tuning: Tuning,
    /// Check the capacity identity after every step.
    pub instrument: bool,
}

impl AdaptParams {
    pub fn paper() -> Self {
        Self::for_profile(Profile::Paper)
    }

    pub fn practical() -> Self {
        Self::for_profile(Profile::Practical)
    }

    pub fn for_profile(profile: Profile) -> Self {
        AdaptParams {
            c_b: 1.0,
            beta: match profile {
                Profile::Paper => 5.0,
                Profile::Practical => 2.0,
            },
            min_recurse: 64,
            profile,
            tuning: profile.tuning(),
            instrument: true,
        }
    }

    pub(crate) fn engine(&self) -> EngineConfig {
        EngineConfig {
            tuning: self.tuning,
            min_recurse: self.min_recurse.max(2),
            adapt_c_b: self.c_b,
            adapt_beta: self.beta,
            // unused by this algorithm
            merge_k: KRule::Power { exponent: 2.0 },
            final_k: KRule::DoublyExponential { exponent: 1.0 },
            instrument: self.instrument,
        }
    }

    /// The segment count at size `n`, or `None` where the run degenerates.
    pub fn segments(&self, n: u64) -> Option<u64> {
        Instance::adapt_segments(&self.engine(), n)
    }
}

impl Default for AdaptParams {
    fn default() -> Self {
        Self::practical()
    }
}

pub fn run_alg_adapt(items: &[f64], params: &AdaptParams) -> RunTrace {
    let cfg = params.engine();
    let inst = Instance::new_adapt(cfg, 0, items.len());
    drive(AlgorithmKind::AlgAdapt, inst, Sink::default(), items, items.len())
}

/// The per-phase records of an `AlgAdapt` run.
pub fn phase_ledger(trace: &RunTrace) -> Result<&[PhaseRecord]> {
    if trace.algorithm != AlgorithmKind::AlgAdapt {
        return Err(Error::WrongAlgorithm {
            expected: AlgorithmKind::AlgAdapt.name(),
            found: trace.algorithm.name(),
        });
    }
    Ok(&trace.phases)
}

/// Phases whose largest regular buffer exceeds
/// `slack * (n/B)^{(2/3)^{j-1}} * (1 + eps)`.
///
/// `slack` is the shrink slack of the run's tuning; it is 1 for the
/// unmodified bound.
pub fn buffer_decay_violations(ledger: &[PhaseRecord], slack: f64, eps: f64) -> Vec<u32> {
    let Some(first) = ledger.first() else {
        return Vec::new();
    };
    let x = first.n_j as f64 / first.b_j as f64;
    ledger
        .iter()
        .filter(|p| {
            let exp = libm::pow(2.0 / 3.0, (p.j - 1) as f64);
            let bound = libm::pow(x, exp) * (1.0 + eps) * if p.j > 1 { slack } else { 1.0 };
            p.regular_sizes.iter().any(|&s| s as f64 > bound)
        })
        .map(|p| p.j)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::m_bound;
    use crate::streams::{uniform_stream, Seed};

    #[test]
    fn paper_profile_degenerates_at_desk_scale() {
        let items = uniform_stream(Seed(1), 1 << 12);
        let t = run_alg_adapt(&items, &AdaptParams::paper());
        assert!(t.degenerate);
        assert!(phase_ledger(&t).unwrap().is_empty());
        assert!(t.array.is_full());
        let ff: f64 = items.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
        assert!((t.cost() - ff).abs() < 1e-9);
    }

    #[test]
    fn ledger_starts_at_n() {
        let p = AdaptParams::practical();
        for seed in 0..5 {
            let items = uniform_stream(Seed(seed), 1 << 14);
            let t = run_alg_adapt(&items, &p);
            assert!(!t.degenerate);
            let ledger = phase_ledger(&t).unwrap();
            let b = p.segments(1 << 14).unwrap();
            assert_eq!(ledger[0].n_j, 1 << 14);
            assert_eq!(ledger[0].b_j, b);
            assert_eq!(ledger[0].m_j, p.tuning.margin.bound(1 << 14, b));
            assert!(t.array.is_full());
            assert_eq!(t.accounting_violations, 0);
        }
        let mut paper = AdaptParams::paper();
        paper.beta = 1.0;
        let t = run_alg_adapt(&uniform_stream(Seed(3), 1 << 12), &paper);
        assert_eq!(t.phases[0].m_j, m_bound(1 << 12, 12).unwrap());
    }

    #[test]
    fn ledger_rejects_other_algorithms() {
        let items = uniform_stream(Seed(1), 16);
        let t = crate::baselines::run_first_fit(&items);
        assert!(phase_ledger(&t).is_err());
    }

    #[test]
    fn segment_rule() {
        let p = AdaptParams::practical();
        assert_eq!(p.segments(1 << 16), Some(16));
        assert_eq!(p.segments(1 << 8), None);
        assert_eq!(AdaptParams::paper().segments(1 << 20), None);
    }
}
