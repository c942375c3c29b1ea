//! Trace replays: structural invariants of the phased algorithms and the
//! predicted contents of dampening buffers and final pools.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use crate::params::seg_index;
use crate::trace::{AlgorithmKind, BufferInfo, BufferKind, RunTrace, Target};

/// Violation counts of one trace, one field per invariant.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StructuralReport {
    /// Items not placed exactly once, cells not filled exactly once.
    pub bijection: usize,
    /// Buffer placements outside the buffer's segment or cell range.
    pub purity: usize,
    /// Steps and boundaries where the capacity identity failed.
    pub accounting: usize,
    /// Placements that skipped an older non-full buffer accepting the item.
    pub oldest_first: usize,
    /// Buffers of one allocation not laid out in increasing segment order.
    pub allocation_order: usize,
    /// Phases whose dampening buffers do not match the merge record.
    pub dampening: usize,
    /// Phases of a successful merge-based run with `n_j < K * B_j`.
    pub phase_window: usize,
    /// Pairs of overlapping cell ranges.
    pub overlap: usize,
    /// Non-fallback placements at or after the failure step.
    pub after_failure: usize,
}

impl StructuralReport {
    pub fn total(&self) -> usize {
        self.bijection
            + self.purity
            + self.accounting
            + self.oldest_first
            + self.allocation_order
            + self.dampening
            + self.phase_window
            + self.overlap
            + self.after_failure
    }

    pub fn add(&mut self, o: &StructuralReport) {
        self.bijection += o.bijection;
        self.purity += o.purity;
        self.accounting += o.accounting;
        self.oldest_first += o.oldest_first;
        self.allocation_order += o.allocation_order;
        self.dampening += o.dampening;
        self.phase_window += o.phase_window;
        self.overlap += o.overlap;
        self.after_failure += o.after_failure;
    }

    /// `(name, count)` pairs in a fixed order.
    pub fn entries(&self) -> [(&'static str, usize); 9] {
        [
            ("bijection", self.bijection),
            ("purity", self.purity),
            ("accounting", self.accounting),
            ("oldest_first", self.oldest_first),
            ("allocation_order", self.allocation_order),
            ("dampening", self.dampening),
            ("phase_window", self.phase_window),
            ("overlap", self.overlap),
            ("after_failure", self.after_failure),
        ]
    }
}

fn is_merge_based(a: AlgorithmKind) -> bool {
    matches!(a, AlgorithmKind::AlgAdaptMerge | AlgorithmKind::AlgFinal)
}

/// Runs every structural check on `trace`.
pub fn check_structure(trace: &RunTrace) -> StructuralReport {
    let mut r = StructuralReport {
        bijection: check_bijection(trace),
        purity: check_purity(trace),
        accounting: trace.accounting_violations as usize,
        overlap: check_overlap(trace),
        after_failure: check_after_failure(trace),
        ..StructuralReport::default()
    };
    if trace.algorithm.is_phased() && !trace.degenerate {
        r.oldest_first = check_oldest_first(trace);
        r.allocation_order = check_allocation_order(trace);
    }
    if is_merge_based(trace.algorithm) && !trace.degenerate {
        r.dampening = check_dampening(trace);
        if !trace.failed() {
            r.phase_window = check_phase_window(trace);
        }
    }
    r
}

fn check_bijection(trace: &RunTrace) -> usize {
    let cells = trace.array.len();
    let mut cell_seen = vec![false; cells];
    let mut step_seen = vec![false; trace.n_items + 1];
    let mut bad = 0;
    for p in &trace.placements {
        let (c, s) = (p.cell as usize, p.step as usize);
        if c >= cells || core::mem::replace(&mut cell_seen[c], true) {
            bad += 1;
        }
        if s == 0 || s > trace.n_items || core::mem::replace(&mut step_seen[s], true) {
            bad += 1;
        }
        if trace.array.get(c) != Some(p.value) {
            bad += 1;
        }
    }
    // a standalone pool instance places only its real items
    if trace.algorithm != AlgorithmKind::AlgPool {
        bad += step_seen[1..].iter().filter(|&&s| !s).count();
    }
    bad + cell_seen.iter().filter(|&&s| !s).count()
}

fn check_purity(trace: &RunTrace) -> usize {
    let final_pool = trace.buffers.iter().find(|b| b.kind == BufferKind::FinalPool);
    trace
        .placements
        .iter()
        .filter(|p| {
            let c = p.cell as usize;
            match p.target {
                Target::Buffer(id) => trace
                    .buffers
                    .get(id as usize)
                    .is_none_or(|b| !b.segment.contains(p.value) || c < b.start || c >= b.end()),
                Target::FinalPool => final_pool.is_none_or(|b| c < b.start || c >= b.end()),
                _ => false,
            }
        })
        .count()
}

fn check_overlap(trace: &RunTrace) -> usize {
    let mut ranges: Vec<(usize, usize)> = trace.buffers.iter().filter(|b| b.len > 0).map(|b| (b.start, b.end())).collect();
    ranges.sort_unstable();
    let mut bad = ranges.windows(2).filter(|w| w[1].0 < w[0].1).count();
    if ranges.last().is_some_and(|r| r.1 > trace.array.len()) {
        bad += 1;
    }
    bad
}

fn check_after_failure(trace: &RunTrace) -> usize {
    let Some(f) = trace.failure else {
        return 0;
    };
    trace
        .placements
        .iter()
        .filter(|p| p.step >= f.first_fallback_step && p.target != Target::Fallback)
        .count()
}

/// Regular and dampening buffers per granularity and segment, oldest first.
struct BufferIndex {
    levels: Vec<(u64, Vec<Vec<u32>>, Vec<u32>)>,
}

impl BufferIndex {
    fn new(buffers: &[BufferInfo]) -> Self {
        let mut levels: Vec<(u64, Vec<Vec<u32>>, Vec<u32>)> = Vec::new();
        for b in buffers {
            if !matches!(b.kind, BufferKind::Regular | BufferKind::Dampening) || b.len == 0 {
                continue;
            }
            let g = b.segment.granularity;
            let li = match levels.iter().position(|l| l.0 == g) {
                Some(i) => i,
                None => {
                    levels.push((g, vec![Vec::new(); g as usize], vec![0; g as usize]));
                    levels.len() - 1
                }
            };
            levels[li].1[(b.segment.index - 1) as usize].push(b.id);
        }
        BufferIndex { levels }
    }

    /// Oldest buffer accepting `v` that is allocated before `step` and not
    /// full.
    fn oldest(&mut self, v: f64, step: u32, bufs: &[BufferInfo], fill: &[usize]) -> Option<u32> {
        let mut best: Option<u32> = None;
        for (g, lists, cursor) in self.levels.iter_mut() {
            let s = seg_index(v, *g) as usize;
            let list = &lists[s];
            let cur = &mut cursor[s];
            while (*cur as usize) < list.len() && fill[list[*cur as usize] as usize] >= bufs[list[*cur as usize] as usize].len {
                *cur += 1;
            }
            if let Some(&id) = list.get(*cur as usize) {
                if bufs[id as usize].allocated_at < step && best.is_none_or(|b| id < b) {
                    best = Some(id);
                }
            }
        }
        best
    }
}

fn check_oldest_first(trace: &RunTrace) -> usize {
    let bufs = &trace.buffers;
    let mut index = BufferIndex::new(bufs);
    let mut fill = vec![0usize; bufs.len()];
    let end = trace.last_regular_step();
    let mut bad = 0;
    for p in trace.placements.iter().filter(|p| p.step <= end) {
        let expect = index.oldest(p.value, p.step, bufs, &fill);
        match p.target {
            Target::Buffer(id) => {
                if expect != Some(id) {
                    bad += 1;
                }
                fill[id as usize] += 1;
            }
            Target::FinalPool => bad += expect.is_some() as usize,
            _ => {}
        }
    }
    bad
}

fn check_allocation_order(trace: &RunTrace) -> usize {
    let mut groups: BTreeMap<(u32, u64, u8), Vec<&BufferInfo>> = BTreeMap::new();
    for b in &trace.buffers {
        let tag = match b.kind {
            BufferKind::Regular => 0,
            BufferKind::Dampening => 1,
            _ => continue,
        };
        groups.entry((b.phase, b.segment.granularity, tag)).or_default().push(b);
    }
    groups
        .values()
        .map(|g| {
            g.windows(2)
                .filter(|w| !(w[0].segment.index < w[1].segment.index && w[0].end() <= w[1].start))
                .count()
        })
        .sum()
}

fn check_dampening(trace: &RunTrace) -> usize {
    let k = trace.merge_factor.unwrap_or(0) as i64;
    trace
        .phases
        .iter()
        .filter(|p| {
            let damp: Vec<&BufferInfo> = trace.buffers.iter().filter(|b| b.kind == BufferKind::Dampening && b.phase == p.j).collect();
            if !p.merged {
                return !damp.is_empty() || p.dampening_size.is_some();
            }
            let Some(m_old) = p.m_old else {
                return true;
            };
            let size = p.m_j - k * m_old;
            damp.len() as u64 != p.b_j || p.dampening_size != Some(size) || damp.iter().any(|b| b.len as i64 != size || b.segment.granularity != p.b_j)
        })
        .count()
}

fn check_phase_window(trace: &RunTrace) -> usize {
    let k = trace.merge_factor.unwrap_or(0);
    trace.phases.iter().filter(|p| (p.n_j as u128) < k as u128 * p.b_j as u128).count()
}

/// Values that entered each regular buffer of a successful run, rescaled to
/// `[0, 1)` within the buffer's segment and keyed by
/// `(phase, granularity, segment index)`.
pub fn regular_buffer_samples(trace: &RunTrace) -> Vec<((u32, u64, u64), Vec<f64>)> {
    let mut out: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let end = trace.last_regular_step();
    for p in trace.placements.iter().filter(|p| p.step <= end) {
        if let Target::Buffer(id) = p.target {
            let b = trace.buffer(id);
            if b.kind == BufferKind::Regular {
                out.entry(id).or_default().push(b.segment.rescale(p.value));
            }
        }
    }
    out.into_iter()
        .map(|(id, v)| {
            let b = trace.buffer(id);
            ((b.phase, b.segment.granularity, b.segment.index), v)
        })
        .collect()
}

/// Outcome of replaying the fill rule of one pool-like buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct FillReplay {
    pub buffer: u32,
    /// The placed values equal the predicted ones as multisets.
    pub matches: bool,
    /// Placed values rescaled to `[0, 1)` within the buffer's segment.
    pub values: Vec<f64>,
    /// `(n', B', m')` of the matching pool distribution.
    pub pool_params: (u64, u64, u64),
}

/// The first `len` items after `from` (exclusive step index) within `seg`
/// whose sub-segment at granularity `sub` has already seen `quota` items
/// since `from`.
fn predicted_fill(trace: &RunTrace, items: &[f64], from: usize, within: Option<&BufferInfo>, sub: u64, quota: i64, len: usize) -> Vec<f64> {
    let mut seen: BTreeMap<u64, i64> = BTreeMap::new();
    let mut out = Vec::new();
    let end = trace.last_regular_step() as usize;
    for &v in items.iter().take(end).skip(from) {
        if out.len() == len {
            break;
        }
        if within.is_some_and(|b| !b.segment.contains(v)) {
            continue;
        }
        let c = seen.entry(seg_index(v, sub)).or_insert(0);
        if *c >= quota {
            out.push(v);
        }
        *c += 1;
    }
    out
}

fn placed_in(trace: &RunTrace, target: Target) -> Vec<f64> {
    trace.placements.iter().filter(|p| p.target == target).map(|p| p.value).collect()
}

fn same_multiset(mut a: Vec<f64>, mut b: Vec<f64>) -> bool {
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    a == b
}

/// Replays every dampening buffer of a merge-based run on its input
/// sequence `items`: after allocation, an item of the buffer's segment is
/// predicted to enter it once its sub-segment has already delivered
/// `m_old` items, until the buffer is full.
pub fn dampening_replays(trace: &RunTrace, items: &[f64]) -> Vec<FillReplay> {
    let Some(k) = trace.merge_factor else {
        return Vec::new();
    };
    trace
        .buffers
        .iter()
        .filter(|b| b.kind == BufferKind::Dampening)
        .filter_map(|b| {
            let p = trace.phases.iter().find(|p| p.j == b.phase)?;
            let m_old = p.m_old?;
            let sub = b.segment.granularity * k;
            let predicted = predicted_fill(trace, items, b.allocated_at as usize, Some(b), sub, m_old, b.len);
            let placed = placed_in(trace, Target::Buffer(b.id));
            Some(FillReplay {
                buffer: b.id,
                values: placed.iter().map(|&v| b.segment.rescale(v)).collect(),
                matches: same_multiset(predicted, placed),
                pool_params: (p.m_j as u64, k, m_old as u64),
            })
        })
        .collect()
}

/// Replays the final pool: in the last phase, an item is predicted to
/// enter it once its segment has already delivered `m_j` items in that
/// phase, until the pool is full.
pub fn final_pool_replay(trace: &RunTrace, items: &[f64]) -> Option<FillReplay> {
    let fp = trace.buffers.iter().find(|b| b.kind == BufferKind::FinalPool)?;
    let last = trace.phases.iter().rev().find(|p| p.is_last)?;
    let predicted = predicted_fill(trace, items, fp.allocated_at as usize, None, last.b_j, last.m_j, fp.len);
    let placed = placed_in(trace, Target::FinalPool);
    Some(FillReplay {
        buffer: fp.id,
        values: placed.clone(),
        matches: same_multiset(predicted, placed),
        pool_params: (last.n_j, last.b_j, last.m_j.max(0) as u64),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::alg_adapt::{run_alg_adapt, AdaptParams};
    use crate::baselines::{run_blocked_baseline, run_first_fit, run_linear_probing};
    use crate::params::Segment;
    use crate::streams::{uniform_stream, Seed};

    #[test]
    fn baselines_are_clean() {
        let items = uniform_stream(Seed(2), 500);
        for t in [run_first_fit(&items), run_linear_probing(&items), run_blocked_baseline(&items, 23)] {
            assert_eq!(check_structure(&t).total(), 0, "{}", t.algorithm);
        }
    }

    #[test]
    fn adapt_runs_are_clean() {
        for s in 0..5 {
            let items = uniform_stream(Seed(s), 1 << 13);
            let t = run_alg_adapt(&items, &AdaptParams::practical());
            assert_eq!(check_structure(&t), StructuralReport::default());
        }
    }

    #[test]
    fn detects_tampering() {
        let items = uniform_stream(Seed(4), 1 << 13);
        let mut t = run_alg_adapt(&items, &AdaptParams::practical());
        let i = t.placements.iter().position(|p| matches!(p.target, Target::Buffer(_))).unwrap();
        let Target::Buffer(id) = t.placements[i].target else { unreachable!() };
        // claim the item went into a buffer of another segment
        let other = t
            .buffers
            .iter()
            .find(|b| b.segment != t.buffer(id).segment && b.kind == BufferKind::Regular)
            .unwrap()
            .id;
        t.placements[i].target = Target::Buffer(other);
        let r = check_structure(&t);
        assert!(r.purity >= 1);
        assert!(r.oldest_first >= 1);

        let mut t2 = run_first_fit(&items[..10]);
        t2.buffers.push(BufferInfo {
            id: 0,
            start: 0,
            len: 5,
            segment: Segment::new(1, 1).unwrap(),
            kind: BufferKind::Regular,
            phase: 1,
            allocated_at: 0,
        });
        t2.buffers.push(BufferInfo {
            id: 1,
            start: 3,
            len: 5,
            segment: Segment::new(1, 1).unwrap(),
            kind: BufferKind::Regular,
            phase: 1,
            allocated_at: 0,
        });
        assert_eq!(check_overlap(&t2), 1);
    }

    #[test]
    fn regular_samples_are_rescaled() {
        let items = uniform_stream(Seed(8), 1 << 13);
        let t = run_alg_adapt(&items, &AdaptParams::practical());
        let samples = regular_buffer_samples(&t);
        assert!(!samples.is_empty());
        for (_, v) in &samples {
            assert!(v.iter().all(|x| (0.0..1.0).contains(x)));
        }
    }
}
