//! Phased allocation with merges: the segment count shrinks by a factor `K`
//! whenever the pool gets small, and a dampening buffer per mega-segment
//! absorbs the sub-segment imbalance. Buffers fill by cursor.

use alloc::vec::Vec;

use crate::engine::{drive, EngineConfig, Instance, KRule, Mode, Profile, Sink, Tuning};
use crate::error::{Error, Result};
use crate::trace::{AlgorithmKind, BufferKind, RunTrace, Target};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeParams {
    pub k_rule: KRule,
    pub profile: Profile,
    pub tuning: Tuning,
    pub instrument: bool,
}

impl MergeParams {
    pub fn paper() -> Self {
        Self::for_profile(Profile::Paper)
    }

    pub fn practical() -> Self {
        Self::for_profile(Profile::Practical)
    }

    pub fn for_profile(profile: Profile) -> Self {
        MergeParams {
            k_rule: KRule::Power {
                exponent: match profile {
                    Profile::Paper => 8.0,
                    Profile::Practical => PRACTICAL_ALPHA,
                },
            },
            profile,
            tuning: profile.merge_tuning(),
            instrument: true,
        }
    }

    /// Overrides the exponent of the `K` rule.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.k_rule = KRule::Power { exponent: alpha };
        self
    }

    pub(crate) fn engine(&self) -> EngineConfig {
        EngineConfig {
            tuning: self.tuning,
            min_recurse: usize::MAX,
            adapt_c_b: 1.0,
            adapt_beta: 2.0,
            merge_k: self.k_rule,
            final_k: self.k_rule,
            instrument: self.instrument,
        }
    }

    /// `(K, B_1)` at size `n`, or `None` where the run degenerates.
    pub fn shape(&self, n: u64) -> Option<(u64, u64)> {
        Instance::merge_shape(&self.engine(), Mode::Merge, n)
    }
}

/// Exponent of the practical `K = max(2, ceil(log2(n)^alpha))` rule.
pub const PRACTICAL_ALPHA: f64 = 0.5;

impl Default for MergeParams {
    fn default() -> Self {
        Self::practical()
    }
}

pub fn run_alg_adapt_merge(items: &[f64], params: &MergeParams) -> RunTrace {
    let inst = Instance::new_merge(params.engine(), Mode::Merge, 0, items.len());
    drive(AlgorithmKind::AlgAdaptMerge, inst, Sink::default(), items, items.len())
}

/// Replays `trace` and counts the moments at which a buffer became full
/// while a buffer preceding it (allocated earlier, initial segment
/// contained in its own) still had room.
pub fn check_precedence(trace: &RunTrace) -> usize {
    let bufs = &trace.buffers;
    let tracked = |k: BufferKind| matches!(k, BufferKind::Regular | BufferKind::Dampening);
    let mut fill = alloc::vec![0usize; bufs.len()];
    // non-full tracked buffers in allocation order; the list stays short
    // because buffers fill roughly in age order
    let mut open: Vec<usize> = (0..bufs.len()).filter(|&i| tracked(bufs[i].kind) && bufs[i].len > 0).collect();
    let mut violations = 0;
    for p in &trace.placements {
        let Target::Buffer(id) = p.target else {
            continue;
        };
        let id = id as usize;
        if !tracked(bufs[id].kind) {
            continue;
        }
        fill[id] += 1;
        if fill[id] != bufs[id].len {
            continue;
        }
        let me = &bufs[id];
        let mut bad = false;
        let mut pos = None;
        for (k, &other) in open.iter().enumerate() {
            if other == id {
                pos = Some(k);
            } else if other < id && me.segment.contains_segment(&bufs[other].segment) {
                bad = true;
            }
        }
        if bad {
            violations += 1;
        }
        if let Some(k) = pos {
            open.remove(k);
        }
    }
    violations
}

/// Acceptance window for [`check_merge_numerics`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NumericsWindow {
    /// Largest tolerated `|m_old - (m/K - d(m/K))| / d(m/K)`.
    pub max_deviation: f64,
    /// Smallest tolerated `m_old / K^{2/3}`.
    pub min_old_ratio: f64,
}

impl Default for NumericsWindow {
    fn default() -> Self {
        NumericsWindow {
            max_deviation: 0.5,
            min_old_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MergeNumerics {
    pub phase: u32,
    pub deviation: f64,
    pub old_ratio: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeNumericsReport {
    pub merges: Vec<MergeNumerics>,
}

impl MergeNumericsReport {
    pub fn flagged(&self) -> usize {
        self.merges.iter().filter(|m| m.flagged).count()
    }

    /// Median relative deviation over the merges.
    pub fn median_deviation(&self) -> f64 {
        let mut v: Vec<f64> = self.merges.iter().map(|m| m.deviation).collect();
        v.sort_by(f64::total_cmp);
        match v.len() {
            0 => f64::NAN,
            l if l % 2 == 1 => v[l / 2],
            l => 0.5 * (v[l / 2 - 1] + v[l / 2]),
        }
    }
}

/// Compares `m_old` at every merged phase with its predicted value
/// `m/K - d(m/K)`, using the margin the run was made with.
pub fn check_merge_numerics(trace: &RunTrace, window: NumericsWindow) -> Result<MergeNumericsReport> {
    let k = trace.merge_factor.ok_or(Error::NoMerge)?;
    let merges: Vec<MergeNumerics> = trace
        .phases
        .iter()
        .filter(|p| p.merged)
        .map(|p| {
            let m_old = p.m_old.expect("merged phases carry m_old") as f64;
            let x = p.m_j as f64 / k as f64;
            let d = trace.margin.d(x);
            let deviation = libm::fabs(m_old - (x - d)) / d;
            let kc = libm::cbrt(k as f64);
            let old_ratio = m_old / (kc * kc);
            MergeNumerics {
                phase: p.j,
                deviation,
                old_ratio,
                flagged: !(deviation <= window.max_deviation) || old_ratio < window.min_old_ratio,
            }
        })
        .collect();
    if merges.is_empty() {
        return Err(Error::NoMerge);
    }
    Ok(MergeNumericsReport { merges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Margin;
    use crate::streams::{uniform_stream, Seed};
    use crate::trace::PhaseRecord;

    fn record(j: u32, m_j: i64, m_old: i64) -> PhaseRecord {
        PhaseRecord {
            j,
            start_step: 0,
            n_j: 0,
            b_j: 1,
            m_j,
            m_old: Some(m_old),
            merged: true,
            is_last: false,
            regular_sizes: Vec::new(),
            dampening_size: None,
        }
    }

    fn fake_trace(k: u64, phases: Vec<PhaseRecord>) -> RunTrace {
        let mut t = RunTrace::new(AlgorithmKind::AlgAdaptMerge, 0, 0);
        t.merge_factor = Some(k);
        t.phases = phases;
        t
    }

    #[test]
    fn b1_is_largest_power_of_k() {
        let p = MergeParams {
            k_rule: KRule::Fixed { k: 4 },
            tuning: Tuning::PAPER,
            ..MergeParams::practical()
        };
        assert_eq!(p.shape(1000), Some((4, 64)));
        assert_eq!(p.shape(1024), Some((4, 256)));
        assert_eq!(p.shape(15), None);
        // load ceil(0.25 * 16^2.5) = 256 per segment
        let q = MergeParams::practical();
        assert_eq!(q.shape(1 << 16), Some((4, 256)));
        assert_eq!(q.shape((1 << 16) - 1), Some((4, 64)));
    }

    #[test]
    fn degenerate_is_first_fit() {
        let items = uniform_stream(Seed(5), 100);
        let t = run_alg_adapt_merge(&items, &MergeParams::paper());
        assert!(t.degenerate);
        assert!(t.buffers.is_empty());
        assert_eq!(check_precedence(&t), 0);
        let ff = crate::baselines::run_first_fit(&items);
        assert_eq!(t.array.values(), ff.array.values());
    }

    #[test]
    fn numerics_hand_built() {
        let k = 16;
        let t = fake_trace(k, alloc::vec![record(2, 1600, 100)]);
        let r = check_merge_numerics(&t, NumericsWindow::default()).unwrap();
        assert!((r.merges[0].deviation - 1.0).abs() < 1e-12);
        assert!(r.merges[0].flagged);

        let m = 1600i64;
        let x = m as f64 / k as f64;
        let exact = x - Margin::PAPER.d(x);
        let t = fake_trace(k, alloc::vec![record(2, m, exact as i64)]);
        let r = check_merge_numerics(&t, NumericsWindow::default()).unwrap();
        assert!(r.merges[0].deviation.abs() < 1e-12);
        assert!(!r.merges[0].flagged);
    }

    #[test]
    fn numerics_needs_a_merge() {
        let t = fake_trace(4, Vec::new());
        assert_eq!(check_merge_numerics(&t, NumericsWindow::default()), Err(Error::NoMerge));
        let ff = crate::baselines::run_first_fit(&[0.5]);
        assert!(check_merge_numerics(&ff, NumericsWindow::default()).is_err());
    }

    #[test]
    fn merges_happen_and_fill_the_array() {
        let p = MergeParams::practical();
        let mut merged = 0;
        for s in 0..10 {
            let t = run_alg_adapt_merge(&uniform_stream(Seed(s), 1 << 14), &p);
            assert!(!t.degenerate);
            assert!(t.array.is_full());
            assert_eq!(t.accounting_violations, 0);
            merged += t.phases.iter().filter(|p| p.merged).count();
        }
        assert!(merged > 0);
    }
}
