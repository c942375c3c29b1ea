//! Reference algorithms: first-fit, linear probing and the blocked
//! interval allocator.

use alloc::vec;
use alloc::vec::Vec;

use crate::engine::Occupancy;
use crate::params::{scaled_ceil, seg_index, Segment};
use crate::trace::{AlgorithmKind, BufferInfo, BufferKind, RunTrace, Target};

fn check_items(items: &[f64]) {
    assert!(items.iter().all(|v| (0.0..1.0).contains(v)), "items must lie in [0, 1)");
}

/// Item `k` goes to cell `k`.
pub fn run_first_fit(items: &[f64]) -> RunTrace {
    check_items(items);
    let mut t = RunTrace::new(AlgorithmKind::FirstFit, items.len(), items.len());
    for (i, &v) in items.iter().enumerate() {
        t.place(i + 1, v, i, Target::Direct);
    }
    t.finish()
}

/// 1-based probe start `max(1, ceil(x * n))`.
pub fn probe_start(x: f64, n: usize) -> usize {
    (scaled_ceil(x, n as u64) as usize).max(1)
}

/// Probes `max(1, ceil(x*n))`, then the following cells with wraparound.
pub fn run_linear_probing(items: &[f64]) -> RunTrace {
    check_items(items);
    let n = items.len();
    let mut t = RunTrace::new(AlgorithmKind::LinearProbing, n, n);
    // next[i]: some cell >= i that may be empty; n stands for "wrap to 0"
    let mut next: Vec<usize> = (0..=n).collect();
    fn find(next: &mut [usize], mut i: usize) -> usize {
        let mut root = i;
        while next[root] != root {
            root = next[root];
        }
        while next[i] != root {
            let up = next[i];
            next[i] = root;
            i = up;
        }
        root
    }
    for (k, &v) in items.iter().enumerate() {
        let h = probe_start(v, n) - 1;
        let mut cell = find(&mut next, h);
        if cell == n {
            cell = find(&mut next, 0);
        }
        next[cell] = cell + 1;
        t.place(k + 1, v, cell, Target::Direct);
    }
    t.finish()
}

/// `ceil(sqrt(n))`, exactly.
pub fn ceil_sqrt(n: u64) -> u64 {
    let mut r = libm::sqrt(n as f64) as u64;
    while r * r > n {
        r -= 1;
    }
    while r * r < n {
        r += 1;
    }
    r
}

/// Online state of the blocked allocator over `len` local cells.
#[derive(Debug, Clone)]
pub(crate) struct Blocked {
    len: usize,
    blocks: usize,
    occ: Occupancy,
    filled: Vec<usize>,
    cursor: Vec<usize>,
    open: Vec<Option<usize>>,
    next_empty_block: usize,
    /// Claimed blocks as `(block, interval, items seen when claimed)`.
    pub claims: Vec<(usize, usize, usize)>,
    seen: usize,
    total: usize,
    pub fallbacks: usize,
}

impl Blocked {
    pub fn new(len: usize, block_count: usize) -> Self {
        let blocks = block_count.clamp(1, len.max(1));
        Blocked {
            len,
            blocks,
            occ: Occupancy::new(len),
            filled: vec![0; blocks],
            cursor: (0..blocks).map(|b| Self::start_of(len, blocks, b)).collect(),
            open: vec![None; blocks],
            next_empty_block: 0,
            claims: Vec::new(),
            seen: 0,
            total: 0,
            fallbacks: 0,
        }
    }

    // The first `len % blocks` blocks are one cell longer.
    fn start_of(len: usize, blocks: usize, b: usize) -> usize {
        let q = len / blocks;
        let r = len % blocks;
        b * q + b.min(r)
    }

    pub fn block_range(&self, b: usize) -> (usize, usize) {
        let s = Self::start_of(self.len, self.blocks, b);
        (s, Self::start_of(self.len, self.blocks, b + 1) - s)
    }

    fn block_of(&self, cell: usize) -> usize {
        let q = self.len / self.blocks;
        let r = self.len % self.blocks;
        let big = r * (q + 1);
        if cell < big {
            cell / (q + 1)
        } else {
            r + (cell - big) / q
        }
    }

    fn block_full(&self, b: usize) -> bool {
        self.filled[b] == self.block_range(b).1
    }

    fn mark(&mut self, cell: usize) {
        self.total += 1;
        let b = self.block_of(cell);
        self.filled[b] += 1;
    }

    /// Places `v`; returns the local cell and the claimed block, or `None`
    /// for the block when the first-empty fallback was used.
    pub fn place(&mut self, v: f64) -> Option<(usize, Option<usize>)> {
        self.seen += 1;
        if self.total == self.len {
            return None;
        }
        let interval = seg_index(v, self.blocks as u64) as usize;
        let usable = self.open[interval].filter(|&b| !self.block_full(b));
        let block = match usable {
            Some(b) => Some(b),
            None => {
                while self.next_empty_block < self.blocks && self.filled[self.next_empty_block] > 0 {
                    self.next_empty_block += 1;
                }
                if self.next_empty_block < self.blocks {
                    let b = self.next_empty_block;
                    self.next_empty_block += 1;
                    self.open[interval] = Some(b);
                    self.claims.push((b, interval, self.seen - 1));
                    Some(b)
                } else {
                    self.open[interval] = None;
                    None
                }
            }
        };
        match block {
            Some(b) => {
                let (s, l) = self.block_range(b);
                let mut c = self.cursor[b];
                while c < s + l && self.is_taken(c) {
                    c += 1;
                }
                debug_assert!(c < s + l);
                self.cursor[b] = c + 1;
                self.occ.set(c);
                self.mark(c);
                Some((c, Some(b)))
            }
            None => {
                let c = self.occ.take_first_empty()?;
                self.fallbacks += 1;
                self.mark(c);
                Some((c, None))
            }
        }
    }

    fn is_taken(&self, c: usize) -> bool {
        // a cell before the block cursor can only be taken, after it only
        // by the fallback; the occupancy bitset is authoritative
        self.occ.is_set(c)
    }
}

/// Blocks of balanced size, one open block per value interval, leftmost
/// fully-empty block claimed on demand, first-empty fallback otherwise.
pub fn run_blocked_baseline(items: &[f64], block_count: usize) -> RunTrace {
    check_items(items);
    let n = items.len();
    let mut t = RunTrace::new(AlgorithmKind::Blocked, n, n);
    if n == 0 {
        return t.finish();
    }
    let mut st = Blocked::new(n, block_count);
    let mut buffer_of_block = vec![u32::MAX; st.blocks];
    for (k, &v) in items.iter().enumerate() {
        let (cell, block) = st.place(v).expect("a cell is always free");
        let target = match block {
            Some(b) => {
                if buffer_of_block[b] == u32::MAX {
                    let &(_, interval, at) = st.claims.last().expect("claim recorded");
                    let (start, len) = st.block_range(b);
                    buffer_of_block[b] = t.buffers.len() as u32;
                    t.buffers.push(BufferInfo {
                        id: t.buffers.len() as u32,
                        start,
                        len,
                        segment: Segment::from_zero_based(st.blocks as u64, interval as u64),
                        kind: BufferKind::Regular,
                        phase: 1,
                        allocated_at: at as u32,
                    });
                }
                Target::Buffer(buffer_of_block[b])
            }
            None => Target::Fallback,
        };
        t.place(k + 1, v, cell, target);
    }
    t.finish()
}

/// Default block count `ceil(sqrt(n))`.
pub fn default_block_count(n: usize) -> usize {
    ceil_sqrt(n as u64).max(1) as usize
}

/// Expected cost of any algorithm at `n = 2`: the cost is `|x_1 - x_2|`
/// whatever the placement.
pub fn exact_floor_n2() -> f64 {
    1.0 / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::streams::{uniform_stream, Seed};

    #[test]
    fn first_fit_examples() {
        let t = run_first_fit(&[0.2, 0.9, 0.1]);
        assert!((t.cost() - 1.5).abs() < 1e-12);
        let sorted: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        assert!((run_first_fit(&sorted).cost() - 0.99).abs() < 1e-9);
    }

    #[test]
    fn first_fit_mean() {
        let n = 10_000;
        let mean: f64 = (0..20).map(|s| run_first_fit(&uniform_stream(Seed(s), n)).cost()).sum::<f64>() / 20.0;
        let expect = (n - 1) as f64 / 3.0;
        assert!((mean - expect).abs() < 0.03 * expect);
    }

    #[test]
    fn linear_probing_hand_trace() {
        let t = run_linear_probing(&[0.6, 0.55, 0.1, 0.9]);
        assert_eq!(t.array.values(), &[0.1, 0.9, 0.6, 0.55]);
        assert!((t.cost() - 1.15).abs() < 1e-12);
        let one = run_linear_probing(&[0.0]);
        assert_eq!(one.cost(), 0.0);
        assert_eq!(probe_start(0.0, 10), 1);
        assert_eq!(probe_start(0.25, 4), 1);
        assert_eq!(probe_start(0.2500001, 4), 2);
    }

    #[test]
    fn linear_probing_fills_everything() {
        for s in 0..10 {
            let items = uniform_stream(Seed(s), 777);
            let t = run_linear_probing(&items);
            assert!(t.array.is_full());
        }
    }

    #[test]
    fn blocked_hand_trace() {
        let t = run_blocked_baseline(&[0.1, 0.2, 0.9, 0.8], 2);
        assert_eq!(t.array.values(), &[0.1, 0.2, 0.9, 0.8]);
        assert!((t.cost() - 0.9).abs() < 1e-12);
        assert_eq!(run_blocked_baseline(&[0.4], 1).cost(), 0.0);
        assert_eq!(t.buffers.len(), 2);
    }

    #[test]
    fn blocked_balanced_blocks() {
        let st = Blocked::new(10, 3);
        assert_eq!(st.block_range(0), (0, 4));
        assert_eq!(st.block_range(1), (4, 3));
        assert_eq!(st.block_range(2), (7, 3));
        for c in 0..10 {
            let b = st.block_of(c);
            let (s, l) = st.block_range(b);
            assert!(s <= c && c < s + l);
        }
    }

    #[test]
    fn blocked_purity_outside_fallback() {
        for s in 0..10 {
            let items = uniform_stream(Seed(s), 1000);
            let t = run_blocked_baseline(&items, default_block_count(1000));
            assert!(t.array.is_full());
            for p in &t.placements {
                if let Target::Buffer(id) = p.target {
                    let b = t.buffer(id);
                    assert!(b.segment.contains(p.value));
                    assert!(b.start <= p.cell as usize && (p.cell as usize) < b.end());
                }
            }
        }
    }

    #[test]
    fn ceil_sqrt_exact() {
        assert_eq!(ceil_sqrt(0), 0);
        assert_eq!(ceil_sqrt(1), 1);
        assert_eq!(ceil_sqrt(15), 4);
        assert_eq!(ceil_sqrt(16), 4);
        assert_eq!(ceil_sqrt(17), 5);
        assert_eq!(ceil_sqrt(1 << 40), 1 << 20);
    }

    #[test]
    fn floor_n2() {
        assert!((exact_floor_n2() - 1.0 / 3.0).abs() < 1e-15);
    }
}
