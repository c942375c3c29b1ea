//! The base algorithm: `B` equal buffers sized by the capacity bound, an
//! overflow pool run by the blocked allocator, optional recursion inside
//! the buffers.

use alloc::boxed::Box;
use alloc::vec::Vec;

use crate::baselines::{ceil_sqrt, Blocked};
use crate::engine::Occupancy;
use crate::params::{rescale, seg_index, Margin, Segment};
use crate::trace::{AlgorithmKind, BufferInfo, BufferKind, Failure, FailureType, RunTrace, Target};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaseParams {
    /// Fixed segment count for the top level; `None` uses the default
    /// schedule at every level.
    pub b: Option<u64>,
    pub recursion_depth: u32,
    pub min_recurse_size: usize,
}

impl Default for BaseParams {
    fn default() -> Self {
        BaseParams {
            b: None,
            recursion_depth: 0,
            min_recurse_size: 64,
        }
    }
}

/// `ceil(n^{1/3})` without recursion, `ceil(n^{1/2})` with.
pub fn default_segments(n: u64, recursion_depth: u32) -> u64 {
    if recursion_depth == 0 {
        let mut r = libm::cbrt(n as f64) as u64;
        while r * r * r > n {
            r -= 1;
        }
        while r * r * r < n {
            r += 1;
        }
        r
    } else {
        ceil_sqrt(n)
    }
    .max(1)
}

enum Inner {
    Fill(usize),
    Rec(Box<BaseInstance>),
}

struct BaseInstance {
    b: u64,
    m: usize,
    filled: Vec<usize>,
    inner: Vec<Inner>,
    pool: Blocked,
    pool_start: usize,
    occ: Occupancy,
    failed: Option<usize>,
    processed: usize,
}

impl BaseInstance {
    fn new(n: usize, b: u64, depth: u32, min_recurse: usize) -> Self {
        let b = b.clamp(1, n.max(1) as u64);
        let m = if n == 0 { 0 } else { Margin::PAPER.bound(n as u64, b).max(0) as usize };
        let pool_len = n - b as usize * m;
        let inner = (0..b)
            .map(|_| {
                if depth > 0 && m >= min_recurse {
                    let cb = default_segments(m as u64, depth - 1);
                    Inner::Rec(Box::new(BaseInstance::new(m, cb, depth - 1, min_recurse)))
                } else {
                    Inner::Fill(0)
                }
            })
            .collect();
        BaseInstance {
            b,
            m,
            filled: alloc::vec![0; b as usize],
            inner,
            pool: Blocked::new(pool_len, ceil_sqrt(pool_len as u64) as usize),
            pool_start: b as usize * m,
            occ: Occupancy::new(n),
            failed: None,
            processed: 0,
        }
    }

    fn feed(&mut self, v: f64) -> (usize, Target) {
        self.processed += 1;
        if self.failed.is_none() {
            let s = seg_index(v, self.b) as usize;
            if self.filled[s] < self.m {
                self.filled[s] += 1;
                let slot = match &mut self.inner[s] {
                    Inner::Fill(next) => {
                        *next += 1;
                        *next - 1
                    }
                    Inner::Rec(child) => child.feed(rescale(v, self.b, s as u64)).0,
                };
                let cell = s * self.m + slot;
                self.occ.set(cell);
                return (cell, Target::Buffer(s as u32));
            }
            if let Some((c, _)) = self.pool.place(v) {
                let cell = self.pool_start + c;
                self.occ.set(cell);
                return (cell, Target::Pool);
            }
            self.failed = Some(self.processed);
        }
        let cell = self.occ.take_first_empty().expect("no more items than cells");
        (cell, Target::Fallback)
    }
}

pub fn run_alg_base(items: &[f64], params: &BaseParams) -> RunTrace {
    assert!(items.iter().all(|v| (0.0..1.0).contains(v)), "items must lie in [0, 1)");
    let n = items.len();
    let b = params.b.unwrap_or_else(|| default_segments(n as u64, params.recursion_depth));
    let mut inst = BaseInstance::new(n, b, params.recursion_depth, params.min_recurse_size);
    let mut t = RunTrace::new(AlgorithmKind::AlgBase, n, n);
    t.buffers = (0..inst.b)
        .map(|s| BufferInfo {
            id: s as u32,
            start: s as usize * inst.m,
            len: inst.m,
            segment: Segment::from_zero_based(inst.b, s),
            kind: BufferKind::Regular,
            phase: 1,
            allocated_at: 0,
        })
        .collect();
    for (k, &v) in items.iter().enumerate() {
        let (cell, target) = inst.feed(v);
        t.place(k + 1, v, cell, target);
    }
    t.failure = inst.failed.map(|step| Failure {
        first_fallback_step: step as u32,
        kind: FailureType::NoCell,
    });
    t.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{run_blocked_baseline, run_first_fit};
    use crate::params::m_bound;
    use crate::streams::{uniform_stream, Seed};

    #[test]
    fn default_schedule() {
        assert_eq!(default_segments(1 << 15, 0), 32);
        assert_eq!(default_segments(1 << 14, 0), 26);
        assert_eq!(default_segments(1 << 14, 1), 128);
        assert_eq!(default_segments(1, 0), 1);
    }

    #[test]
    fn n_equals_b_is_legal() {
        for s in 0..50 {
            let items = uniform_stream(Seed(s), 8);
            let p = BaseParams {
                b: Some(8),
                ..BaseParams::default()
            };
            let t = run_alg_base(&items, &p);
            assert!(t.array.is_full());
        }
    }

    #[test]
    fn single_buffer_is_first_fit_plus_blocked_pool() {
        let n = 500;
        let items = uniform_stream(Seed(9), n);
        let p = BaseParams {
            b: Some(1),
            recursion_depth: 0,
            min_recurse_size: 64,
        };
        let t = run_alg_base(&items, &p);
        let m = m_bound(n as u64, 1).unwrap() as usize;
        let head = run_first_fit(&items[..m]);
        assert_eq!(&t.array.values()[..m], head.array.values());
        let pool = run_blocked_baseline(&items[m..], ceil_sqrt((n - m) as u64) as usize);
        assert_eq!(&t.array.values()[m..], pool.array.values());
    }

    #[test]
    fn purity_and_pool_volume() {
        let n = 1 << 12;
        for s in 0..10 {
            let items = uniform_stream(Seed(s), n);
            for depth in [0, 1, 2] {
                let p = BaseParams {
                    recursion_depth: depth,
                    ..BaseParams::default()
                };
                let t = run_alg_base(&items, &p);
                assert!(t.array.is_full());
                let mut in_buffers = 0;
                let mut in_pool = 0;
                let mut fallback = 0;
                for pl in &t.placements {
                    match pl.target {
                        Target::Buffer(id) => {
                            in_buffers += 1;
                            let b = t.buffer(id);
                            assert!(b.segment.contains(pl.value));
                            assert!(b.start <= pl.cell as usize && (pl.cell as usize) < b.end());
                        }
                        Target::Pool => in_pool += 1,
                        _ => fallback += 1,
                    }
                }
                // every item lands somewhere, so a successful run leaves
                // no buffer slack and fills the pool exactly
                assert_eq!(in_buffers + in_pool + fallback, n);
                if t.failure.is_none() {
                    let bm: usize = t.buffers.iter().map(|b| b.len).sum();
                    assert_eq!(in_buffers, bm);
                    assert_eq!(in_pool, n - bm);
                }
            }
        }
    }
}
