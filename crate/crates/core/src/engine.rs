//! The phased allocation engine shared by the adaptive algorithms.
//!
//! One [`Instance`] runs a single (sub)problem: it owns a local array of
//! `len` cells, keeps per-segment remaining capacities, allocates buffers
//! from the pool prefix at phase boundaries and delegates the interior of
//! every buffer to a child (a cursor, a recursive instance on rescaled
//! values, or a pool instance that also sees the informative items). Only
//! the caller at depth 0 touches the real [`CellArray`](crate::CellArray);
//! children report local slots that each parent maps into its own range.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::params::{rescale, seg_index, Margin, Segment};
use crate::trace::{AlgorithmKind, BufferInfo, BufferKind, Failure, FailureType, PhaseRecord, PoolInstanceRecord, RunTrace, Target};

/// Constants that trade failure probability against cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tuning {
    /// Margin used for every `m_j` and `m_j^old`.
    pub margin: Margin,
    /// Failure 1 fires when `n_{j+1}/B > slack * (n_j/B)^{2/3}`.
    pub shrink_slack: f64,
    /// Merge-based runs pick `B_1` as the largest power of `K` with
    /// `B_1 * max(K, c * log2(n)^e) <= n`; `e = 0` leaves the plain
    /// `B_1 * K <= n` rule.
    pub load_exponent: f64,
    /// The factor `c` above.
    pub load_scale: f64,
    /// A merge fires once the pool drops below `slack * B * K`.
    pub merge_slack: f64,
}

impl Tuning {
    pub const PAPER: Tuning = Tuning {
        margin: Margin::PAPER,
        shrink_slack: 1.0,
        load_exponent: 0.0,
        load_scale: 1.0,
        merge_slack: 1.0,
    };
    /// Practical constants of the single-granularity adaptive runs.
    pub const PRACTICAL: Tuning = Tuning {
        margin: Margin { scale: 1.5 },
        shrink_slack: 3.0,
        load_exponent: 0.0,
        load_scale: 1.0,
        merge_slack: 1.0,
    };
    /// Practical constants of the merge-based runs. Segments start with
    /// about `log2(n)^2.5 / 4` items each and merges fire well before the
    /// pool runs dry, which keeps the per-phase spread inside the margin.
    pub const PRACTICAL_MERGE: Tuning = Tuning {
        margin: Margin { scale: 3.0 },
        shrink_slack: 8.0,
        load_exponent: 2.5,
        load_scale: 0.25,
        merge_slack: 64.0,
    };
}

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Profile {
    /// The formulas and constants verbatim; degenerates at desk-scale `n`.
    Paper,
    /// Constants chosen so that phases, merges and recursion all occur for
    /// `n` between `2^10` and `2^20`.
    #[default]
    Practical,
}

impl Profile {
    pub fn name(self) -> &'static str {
        match self {
            Profile::Paper => "paper",
            Profile::Practical => "practical",
        }
    }

    pub fn from_name(s: &str) -> Option<Profile> {
        match s {
            "paper" => Some(Profile::Paper),
            "practical" => Some(Profile::Practical),
            _ => None,
        }
    }

    pub fn tuning(self) -> Tuning {
        match self {
            Profile::Paper => Tuning::PAPER,
            Profile::Practical => Tuning::PRACTICAL,
        }
    }

    /// Tuning of the merge-based algorithms under this profile.
    pub fn merge_tuning(self) -> Tuning {
        match self {
            Profile::Paper => Tuning::PAPER,
            Profile::Practical => Tuning::PRACTICAL_MERGE,
        }
    }
}

/// How the merge factor `K` is derived from the instance size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KRule {
    /// `max(2, ceil(log2(n)^exponent))`.
    Power { exponent: f64 },
    /// The unique `2^(2^k)` in `(log2(n)^exponent, log2(n)^(2*exponent)]`.
    DoublyExponential { exponent: f64 },
    /// A constant factor, regardless of `n`.
    Fixed { k: u64 },
}

impl KRule {
    pub fn k(&self, n: u64) -> Option<u64> {
        if n < 2 {
            return None;
        }
        let l = libm::log2(n as f64);
        match *self {
            KRule::Power { exponent } => {
                let k = libm::ceil(libm::pow(l, exponent));
                if !(k < 1.8e19) {
                    return None;
                }
                Some((k as u64).max(2))
            }
            KRule::DoublyExponential { exponent } => {
                let lo = libm::pow(l, exponent);
                let hi = libm::pow(l, 2.0 * exponent);
                let mut k: u64 = 2;
                while (k as f64) <= lo {
                    k = k.checked_mul(k)?;
                }
                ((k as f64) <= hi).then_some(k)
            }
            KRule::Fixed { k } => (k >= 2).then_some(k),
        }
    }
}

/// Whether `b` is of the form `2^(2^k)`.
pub fn is_doubly_exponential(b: u64) -> bool {
    b >= 2 && b.is_power_of_two() && b.trailing_zeros().is_power_of_two()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct EngineConfig {
    pub tuning: Tuning,
    pub min_recurse: usize,
    pub adapt_c_b: f64,
    pub adapt_beta: f64,
    pub merge_k: KRule,
    pub final_k: KRule,
    pub instrument: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    Adapt,
    Merge,
    Final,
    Pool,
}

/// Diagnostics collected from every instance of one run.
#[derive(Debug, Default)]
pub(crate) struct Sink {
    pub pool_instances: Vec<PoolInstanceRecord>,
    pub nested_failures: u64,
    pub accounting_violations: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Verdict {
    Informative,
    Placed {
        cell: usize,
        target: Target,
    },
    /// A real item for which the instance has no empty cell at all.
    NoRoom,
}

/// Occupancy bitset with a lowest-empty cursor.
#[derive(Debug, Clone)]
pub(crate) struct Occupancy {
    words: Vec<u64>,
    first: usize,
    len: usize,
    count: usize,
}

impl Occupancy {
    pub fn new(len: usize) -> Self {
        Occupancy {
            words: vec![0; len.div_ceil(64)],
            first: 0,
            len,
            count: 0,
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize) {
        let w = &mut self.words[i / 64];
        let bit = 1 << (i % 64);
        self.count += (*w & bit == 0) as usize;
        *w |= bit;
    }

    pub fn free(&self) -> usize {
        self.len - self.count
    }

    #[inline]
    pub fn is_set(&self, i: usize) -> bool {
        self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn take_first_empty(&mut self) -> Option<usize> {
        while self.first < self.words.len() && self.words[self.first] == u64::MAX {
            self.first += 1;
        }
        let w = *self.words.get(self.first)?;
        let i = self.first * 64 + (!w).trailing_zeros() as usize;
        if i >= self.len {
            return None;
        }
        self.set(i);
        Some(i)
    }
}

enum Child {
    Fill {
        next: usize,
    },
    Sorter(Box<Instance>),
    /// Receives every arrival of the covered segment while `feed_left > 0`.
    Pool {
        inst: Box<Instance>,
        feed_left: u64,
    },
}

struct Buf {
    start: usize,
    len: usize,
    filled: usize,
    gran: u64,
    seg: u64,
    kind: BufferKind,
    phase: u32,
    allocated_at: u64,
    child: Child,
}

impl Buf {
    fn is_full(&self) -> bool {
        self.filled == self.len
    }
}

/// All buffers allocated at one granularity, per segment in age order.
struct Level {
    gran: u64,
    lists: Vec<Vec<u32>>,
    cursor: Vec<u32>,
}

struct DampLevel {
    gran: u64,
    by_seg: Vec<u32>,
}

struct FinalPool {
    start: usize,
    len: usize,
    filled: usize,
    child: Child,
}

struct PoolState {
    b1: u64,
    m: u64,
    seen: Vec<u64>,
    budgets: Vec<i64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Dest {
    Budget,
    Buf(usize),
    FinalPool,
    Nothing,
}

pub(crate) struct Instance {
    mode: Mode,
    cfg: EngineConfig,
    depth: u32,
    n_items: u64,
    len: usize,
    k: u64,
    processed: u64,
    degenerate: bool,
    failure: Option<(u64, FailureType)>,
    occ: Occupancy,
    b_cur: u64,
    cap: Vec<i64>,
    cap_sum: i64,
    pool_start: usize,
    last: bool,
    bufs: Vec<Buf>,
    levels: Vec<Level>,
    damp: Vec<DampLevel>,
    final_pool: Option<FinalPool>,
    pool: Option<PoolState>,
    adapt_cutoff: f64,
    phase: u32,
    phase_start: u64,
    n_j: u64,
    record: bool,
    phases: Vec<PhaseRecord>,
}

impl Instance {
    fn blank(mode: Mode, cfg: EngineConfig, depth: u32, n_items: u64, len: usize) -> Self {
        Instance {
            mode,
            cfg,
            depth,
            n_items,
            len,
            k: 0,
            processed: 0,
            degenerate: false,
            failure: None,
            occ: Occupancy::new(len),
            b_cur: 1,
            cap: Vec::new(),
            cap_sum: 0,
            pool_start: 0,
            last: false,
            bufs: Vec::new(),
            levels: Vec::new(),
            damp: Vec::new(),
            final_pool: None,
            pool: None,
            adapt_cutoff: 0.0,
            phase: 1,
            phase_start: 0,
            n_j: n_items,
            record: depth == 0,
            phases: Vec::new(),
        }
    }

    /// A first-fit instance flagged degenerate.
    fn degenerate(mode: Mode, cfg: EngineConfig, depth: u32, n: usize) -> Self {
        let mut inst = Instance::blank(mode, cfg, depth, n as u64, n);
        inst.degenerate = true;
        inst
    }

    /// Segment count of an `AlgAdapt` instance of size `n`, if viable.
    pub fn adapt_segments(cfg: &EngineConfig, n: u64) -> Option<u64> {
        if n < 2 {
            return None;
        }
        let l = libm::log2(n as f64);
        let b = (libm::ceil(cfg.adapt_c_b * l) as u64).max(2);
        let limit = n as f64 / libm::pow(l, cfg.adapt_beta);
        (b > 1 && (b as f64) <= limit).then_some(b)
    }

    /// `(K, B_1)` of a merge-based instance of size `n`, if viable.
    pub fn merge_shape(cfg: &EngineConfig, mode: Mode, n: u64) -> Option<(u64, u64)> {
        let rule = if mode == Mode::Merge { cfg.merge_k } else { cfg.final_k };
        let k = rule.k(n)?;
        let e = cfg.tuning.load_exponent;
        let load = if e > 0.0 {
            (libm::ceil(cfg.tuning.load_scale * libm::pow(libm::log2(n as f64), e)) as u64).max(k)
        } else {
            k
        };
        if k.checked_mul(load).is_none_or(|x| x > n) {
            return None;
        }
        let mut b = k;
        while let Some(next) = b.checked_mul(k) {
            if next.checked_mul(load).is_none_or(|x| x > n) {
                break;
            }
            b = next;
        }
        Some((k, b))
    }

    pub fn new_adapt(cfg: EngineConfig, depth: u32, n: usize) -> Self {
        let Some(b) = Self::adapt_segments(&cfg, n as u64) else {
            return Self::degenerate(Mode::Adapt, cfg, depth, n);
        };
        let m1 = cfg.tuning.margin.bound(n as u64, b);
        if m1 <= 0 {
            return Self::degenerate(Mode::Adapt, cfg, depth, n);
        }
        let mut inst = Instance::blank(Mode::Adapt, cfg, depth, n as u64, n);
        inst.adapt_cutoff = b as f64 * libm::pow(libm::log2(n as f64), cfg.adapt_beta);
        inst.start_phase_one(b, m1);
        if ((inst.len - inst.pool_start) as f64) < inst.adapt_cutoff {
            inst.last = true;
            inst.open_final_pool(m1, None);
        }
        inst.record_phase(m1, None, false, vec![m1; b as usize], None);
        inst
    }

    pub fn new_merge(cfg: EngineConfig, mode: Mode, depth: u32, n: usize) -> Self {
        debug_assert!(matches!(mode, Mode::Merge | Mode::Final));
        let Some((k, b)) = Self::merge_shape(&cfg, mode, n as u64) else {
            return Self::degenerate(mode, cfg, depth, n);
        };
        let m1 = cfg.tuning.margin.bound(n as u64, b);
        if m1 <= 0 {
            return Self::degenerate(mode, cfg, depth, n);
        }
        let mut inst = Instance::blank(mode, cfg, depth, n as u64, n);
        inst.k = k;
        inst.start_phase_one(b, m1);
        inst.record_phase(m1, None, false, vec![m1; b as usize], None);
        inst
    }

    /// A pool instance over `n` arrivals with `b` phase-1 segments, initial
    /// budget `m` each, and `n - b*m` cells.
    pub fn new_pool(cfg: EngineConfig, depth: u32, n: u64, b: u64, m: u64, sink: &mut Sink) -> Self {
        debug_assert!(b >= 1 && b * m <= n);
        let len = (n - b * m) as usize;
        let mut inst = Instance::blank(Mode::Pool, cfg, depth, n, len);
        inst.k = cfg.final_k.k(n).unwrap_or(u64::MAX);
        inst.b_cur = b;
        inst.cap = vec![m as i64; b as usize];
        inst.cap_sum = (b * m) as i64;
        inst.pool = Some(PoolState {
            b1: b,
            m,
            seen: vec![0; b as usize],
            budgets: vec![m as i64; b as usize],
        });
        inst.record_phase(m as i64, None, false, Vec::new(), None);
        sink.pool_instances.push(PoolInstanceRecord {
            n,
            b,
            m,
            depth,
            for_final_pool: false,
        });
        if m == 0 {
            inst.boundary(sink);
        }
        inst
    }

    fn start_phase_one(&mut self, b: u64, m1: i64) {
        self.b_cur = b;
        self.cap = vec![m1; b as usize];
        self.cap_sum = m1 * b as i64;
        let mut level = Level {
            gran: b,
            lists: vec![Vec::new(); b as usize],
            cursor: vec![0; b as usize],
        };
        for s in 0..b {
            let id = self.alloc(m1 as usize, b, s, BufferKind::Regular);
            level.lists[s as usize].push(id as u32);
        }
        self.levels.push(level);
    }

    fn record_phase(&mut self, m_j: i64, m_old: Option<i64>, merged: bool, regular_sizes: Vec<i64>, dampening_size: Option<i64>) {
        if !self.record {
            return;
        }
        self.phases.push(PhaseRecord {
            j: self.phase,
            start_step: self.processed as u32,
            n_j: self.n_j,
            b_j: self.b_cur,
            m_j,
            m_old,
            merged,
            is_last: self.last,
            regular_sizes,
            dampening_size,
        });
    }

    /// Carves a buffer from the pool prefix.
    fn alloc(&mut self, size: usize, gran: u64, seg: u64, kind: BufferKind) -> usize {
        let child = match (kind, self.mode) {
            (BufferKind::Regular, Mode::Adapt) if size >= self.cfg.min_recurse => {
                let c = Instance::new_adapt(self.cfg, self.depth + 1, size);
                Self::sorter_or_fill(c)
            }
            (BufferKind::Regular, Mode::Final | Mode::Pool) if size >= self.cfg.min_recurse => {
                let c = Instance::new_merge(self.cfg, Mode::Final, self.depth + 1, size);
                Self::sorter_or_fill(c)
            }
            _ => Child::Fill { next: 0 },
        };
        let id = self.bufs.len();
        self.bufs.push(Buf {
            start: self.pool_start,
            len: size,
            filled: 0,
            gran,
            seg,
            kind,
            phase: self.phase,
            allocated_at: self.processed,
            child,
        });
        self.pool_start += size;
        id
    }

    fn sorter_or_fill(c: Instance) -> Child {
        // a degenerate child is first-fit, which is what the cursor does
        if c.degenerate {
            Child::Fill { next: 0 }
        } else {
            Child::Sorter(Box::new(c))
        }
    }

    fn pool_child(&self, n: u64, b: u64, m: i64, len: usize, sink: &mut Sink) -> Child {
        let wants_pool = matches!(self.mode, Mode::Final | Mode::Pool)
            && len >= self.cfg.min_recurse
            && is_doubly_exponential(b)
            && m >= 0
            && n >= b * m as u64
            && (n - b * m as u64) as usize == len;
        if wants_pool {
            let inst = Instance::new_pool(self.cfg, self.depth + 1, n, b, m as u64, sink);
            Child::Pool {
                inst: Box::new(inst),
                feed_left: n,
            }
        } else {
            Child::Fill { next: 0 }
        }
    }

    fn open_final_pool(&mut self, m_j: i64, sink: Option<&mut Sink>) {
        let start = self.pool_start;
        let len = self.len - start;
        let n_rem = self.n_items - self.processed;
        let child = match sink {
            Some(sink) => {
                let c = self.pool_child(n_rem, self.b_cur, m_j, len, sink);
                if let Child::Pool { .. } = c {
                    if let Some(r) = sink.pool_instances.last_mut() {
                        r.for_final_pool = true;
                    }
                }
                c
            }
            None => Child::Fill { next: 0 },
        };
        self.final_pool = Some(FinalPool { start, len, filled: 0, child });
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn failure(&self) -> Option<(u64, FailureType)> {
        self.failure
    }

    pub fn merge_factor(&self) -> Option<u64> {
        matches!(self.mode, Mode::Merge | Mode::Final | Mode::Pool)
            .then_some(self.k)
            .filter(|&k| k != 0 && k != u64::MAX && !self.degenerate)
    }

    pub fn take_phases(&mut self) -> Vec<PhaseRecord> {
        core::mem::take(&mut self.phases)
    }

    /// Layout of the buffers this instance allocated.
    pub fn buffer_infos(&self) -> Vec<BufferInfo> {
        let mut out: Vec<BufferInfo> = self
            .bufs
            .iter()
            .enumerate()
            .map(|(i, b)| BufferInfo {
                id: i as u32,
                start: b.start,
                len: b.len,
                segment: Segment::from_zero_based(b.gran, b.seg),
                kind: b.kind,
                phase: b.phase,
                allocated_at: b.allocated_at as u32,
            })
            .collect();
        if let Some(fp) = &self.final_pool {
            out.push(BufferInfo {
                id: out.len() as u32,
                start: fp.start,
                len: fp.len,
                segment: Segment::from_zero_based(1, 0),
                kind: BufferKind::FinalPool,
                phase: self.phase,
                allocated_at: self.phase_start as u32,
            });
        }
        out
    }

    fn fail(&mut self, kind: FailureType, sink: &mut Sink) {
        if self.failure.is_none() {
            // the current item is handled in failure mode for no-cell and
            // mismatch events, the next one for boundary failures
            let first = match kind {
                FailureType::NoCell | FailureType::PoolMismatch => self.processed,
                _ => self.processed + 1,
            };
            self.failure = Some((first, kind));
            if self.depth > 0 {
                sink.nested_failures += 1;
            }
        }
    }

    fn fallback(&mut self) -> Verdict {
        match self.occ.take_first_empty() {
            Some(cell) => Verdict::Placed {
                cell,
                target: if self.degenerate { Target::Direct } else { Target::Fallback },
            },
            None => Verdict::NoRoom,
        }
    }

    fn find_buffer(&mut self, v: f64) -> Option<usize> {
        let bufs = &self.bufs;
        for level in self.levels.iter_mut() {
            let s = seg_index(v, level.gran) as usize;
            let list = &level.lists[s];
            let cur = &mut level.cursor[s];
            while (*cur as usize) < list.len() && bufs[list[*cur as usize] as usize].is_full() {
                *cur += 1;
            }
            if let Some(&id) = list.get(*cur as usize) {
                return Some(id as usize);
            }
        }
        None
    }

    /// Processes one arrival.
    pub fn feed(&mut self, v: f64, sink: &mut Sink) -> Verdict {
        self.processed += 1;
        let informative = match &mut self.pool {
            Some(p) => {
                let s = seg_index(v, p.b1) as usize;
                let informative = p.seen[s] < p.m;
                p.seen[s] += 1;
                informative
            }
            None => false,
        };
        if self.degenerate || self.failure.is_some() {
            return if informative { Verdict::Informative } else { self.fallback() };
        }

        let dest = if informative {
            Dest::Budget
        } else if let Some(b) = self.find_buffer(v) {
            Dest::Buf(b)
        } else if self.final_pool.as_ref().is_some_and(|fp| fp.filled < fp.len) {
            Dest::FinalPool
        } else {
            Dest::Nothing
        };

        // Forward to every pool child covering `v`, and check that its
        // real/informative verdict agrees with the outer decision.
        let mut mismatch = false;
        let mut child_slot: Option<usize> = None;
        let mut dest_fed = false;
        for li in 0..self.damp.len() {
            let gran = self.damp[li].gran;
            let s = seg_index(v, gran);
            let b = self.damp[li].by_seg[s as usize] as usize;
            if let Child::Pool { inst, feed_left } = &mut self.bufs[b].child {
                if *feed_left == 0 {
                    continue;
                }
                *feed_left -= 1;
                let verdict = inst.feed(rescale(v, gran, s), sink);
                let is_dest = dest == Dest::Buf(b);
                dest_fed |= is_dest;
                match verdict {
                    Verdict::Placed { cell, .. } if is_dest => child_slot = Some(cell),
                    Verdict::Informative if !is_dest => {}
                    _ => mismatch = true,
                }
            }
        }
        if let Some(FinalPool {
            child: Child::Pool { inst, feed_left },
            ..
        }) = &mut self.final_pool
        {
            if *feed_left > 0 {
                *feed_left -= 1;
                let verdict = inst.feed(v, sink);
                let is_dest = dest == Dest::FinalPool;
                dest_fed |= is_dest;
                match verdict {
                    Verdict::Placed { cell, .. } if is_dest => child_slot = Some(cell),
                    Verdict::Informative if !is_dest => {}
                    _ => mismatch = true,
                }
            }
        }
        let dest_forwards = match dest {
            Dest::Buf(b) => matches!(self.bufs[b].child, Child::Pool { .. }),
            Dest::FinalPool => matches!(self.final_pool.as_ref().map(|f| &f.child), Some(Child::Pool { .. })),
            _ => false,
        };
        if mismatch || (dest_forwards && !dest_fed) {
            self.fail(FailureType::PoolMismatch, sink);
            return if informative { Verdict::Informative } else { self.fallback() };
        }

        let cur = seg_index(v, self.b_cur) as usize;
        let verdict = match dest {
            Dest::Budget => {
                let p = self.pool.as_mut().expect("budget without pool state");
                p.budgets[seg_index(v, p.b1) as usize] -= 1;
                self.cap[cur] -= 1;
                self.cap_sum -= 1;
                Verdict::Informative
            }
            Dest::Nothing => {
                self.fail(FailureType::NoCell, sink);
                return self.fallback();
            }
            Dest::Buf(b) => {
                let slot = match child_slot {
                    Some(s) => s,
                    None => {
                        let buf = &mut self.bufs[b];
                        match Self::child_place(&mut buf.child, v, buf.gran, buf.seg, sink) {
                            Some(s) => s,
                            None => {
                                self.fail(FailureType::PoolMismatch, sink);
                                return self.fallback();
                            }
                        }
                    }
                };
                let buf = &mut self.bufs[b];
                debug_assert!(slot < buf.len);
                buf.filled += 1;
                let cell = buf.start + slot;
                self.occ.set(cell);
                self.cap[cur] -= 1;
                self.cap_sum -= 1;
                Verdict::Placed {
                    cell,
                    target: Target::Buffer(b as u32),
                }
            }
            Dest::FinalPool => {
                let fp = self.final_pool.as_mut().expect("final pool");
                let slot = match child_slot {
                    Some(s) => s,
                    None => match Self::child_place(&mut fp.child, v, 1, 0, sink) {
                        Some(s) => s,
                        None => {
                            self.fail(FailureType::PoolMismatch, sink);
                            return self.fallback();
                        }
                    },
                };
                debug_assert!(slot < fp.len);
                fp.filled += 1;
                let cell = fp.start + slot;
                self.occ.set(cell);
                Verdict::Placed {
                    cell,
                    target: Target::FinalPool,
                }
            }
        };

        if self.cfg.instrument && !self.identity_holds() {
            sink.accounting_violations += 1;
        }
        if !self.last && self.cap[cur] == 0 {
            self.boundary(sink);
        }
        verdict
    }

    fn child_place(child: &mut Child, v: f64, gran: u64, seg: u64, sink: &mut Sink) -> Option<usize> {
        match child {
            Child::Fill { next } => {
                *next += 1;
                Some(*next - 1)
            }
            Child::Sorter(inst) => match inst.feed(rescale(v, gran, seg), sink) {
                Verdict::Placed { cell, .. } => Some(cell),
                _ => None,
            },
            Child::Pool { .. } => None,
        }
    }

    /// `sum c_i + free pool cells = future items`.
    fn identity_holds(&self) -> bool {
        let pool_free = match &self.final_pool {
            Some(fp) => fp.len - fp.filled,
            None => self.len - self.pool_start,
        };
        self.cap_sum + pool_free as i64 == (self.n_items - self.processed) as i64
    }

    /// Recomputes every remaining capacity from the buffers and budgets.
    fn recount_matches(&self) -> bool {
        let mut cap = vec![0i64; self.b_cur as usize];
        for b in &self.bufs {
            let s = b.seg / (b.gran / self.b_cur);
            cap[s as usize] += (b.len - b.filled) as i64;
        }
        if let Some(p) = &self.pool {
            let ratio = p.b1 / self.b_cur;
            for (s, &budget) in p.budgets.iter().enumerate() {
                cap[s / ratio as usize] += budget;
            }
        }
        cap == self.cap && cap.iter().sum::<i64>() == self.cap_sum
    }

    /// Ends the current phase: adaptive allocation, then the merge branch.
    fn boundary(&mut self, sink: &mut Sink) {
        if self.cfg.instrument && !self.recount_matches() {
            sink.accounting_violations += 1;
        }
        let n_next = self.n_items - self.processed;
        // a pool instance whose cells are all taken expects no real items
        if n_next == 0 || self.occ.free() == 0 {
            self.last = true;
            return;
        }
        let b = self.b_cur;
        let arrived = self.processed > self.phase_start;
        let x_prev = self.n_j as f64 / b as f64;
        let x_next = n_next as f64 / b as f64;
        let c = libm::cbrt(x_prev);
        if arrived && x_next > self.cfg.tuning.shrink_slack * c * c {
            self.fail(FailureType::ShrinkTooSlow, sink);
            return;
        }
        let margin = self.cfg.tuning.margin;
        let m_old = margin.bound(n_next, b);
        let sizes: Vec<i64> = self.cap.iter().map(|&c| m_old - c).collect();
        if sizes.iter().any(|&s| s <= 0) {
            self.fail(FailureType::NonpositiveBuffer, sink);
            return;
        }
        let need: i64 = sizes.iter().sum();
        if need > (self.len - self.pool_start) as i64 {
            self.fail(FailureType::NoCell, sink);
            return;
        }

        self.phase += 1;
        self.phase_start = self.processed;
        self.n_j = n_next;
        let li = self.level_index(b);
        for s in 0..b {
            let id = self.alloc(sizes[s as usize] as usize, b, s, BufferKind::Regular);
            self.levels[li].lists[s as usize].push(id as u32);
        }
        self.cap.iter_mut().for_each(|c| *c = m_old);
        self.cap_sum = m_old * b as i64;

        let pool = (self.len - self.pool_start) as u64;
        let mut merged = false;
        let mut damp_size = None;
        let mut m_j = m_old;
        match self.mode {
            Mode::Adapt => self.last = (pool as f64) < self.adapt_cutoff,
            _ => {
                let k = self.k;
                let trigger = self.cfg.tuning.merge_slack * b as f64 * k as f64;
                if pool as f64 >= trigger {
                } else if b > k && b.is_multiple_of(k) {
                    let nb = b / k;
                    let m_new = margin.bound(n_next, nb);
                    let dsz = m_new - k as i64 * m_old;
                    if dsz <= 0 {
                        self.fail(FailureType::NonpositiveDampening, sink);
                        return;
                    }
                    if (dsz * nb as i64) > pool as i64 {
                        self.fail(FailureType::NoCell, sink);
                        return;
                    }
                    self.b_cur = nb;
                    let dl = self.level_index(nb);
                    let mut by_seg = Vec::with_capacity(nb as usize);
                    for s in 0..nb {
                        let id = self.alloc(dsz as usize, nb, s, BufferKind::Dampening);
                        if let Child::Fill { .. } = self.bufs[id].child {
                            let child = self.pool_child(m_new as u64, k, m_old, dsz as usize, sink);
                            self.bufs[id].child = child;
                        }
                        self.levels[dl].lists[s as usize].push(id as u32);
                        by_seg.push(id as u32);
                    }
                    self.damp.push(DampLevel { gran: nb, by_seg });
                    self.cap = vec![m_new; nb as usize];
                    self.cap_sum = m_new * nb as i64;
                    merged = true;
                    damp_size = Some(dsz);
                    m_j = m_new;
                } else {
                    self.last = true;
                }
            }
        }
        if self.last {
            self.open_final_pool(m_j, Some(sink));
        }
        self.record_phase(m_j, Some(m_old), merged, sizes, damp_size);
        if self.cfg.instrument && !self.recount_matches() {
            sink.accounting_violations += 1;
        }
    }

    /// Index of the level at granularity `gran`, creating it (coarsest
    /// last) when needed.
    fn level_index(&mut self, gran: u64) -> usize {
        if let Some(i) = self.levels.iter().position(|l| l.gran == gran) {
            return i;
        }
        self.levels.push(Level {
            gran,
            lists: vec![Vec::new(); gran as usize],
            cursor: vec![0; gran as usize],
        });
        self.levels.len() - 1
    }
}

/// Runs `inst` over `items` and assembles the trace.
pub(crate) fn drive(kind: AlgorithmKind, mut inst: Instance, mut sink: Sink, items: &[f64], cells: usize) -> RunTrace {
    assert!(items.iter().all(|v| (0.0..1.0).contains(v)), "items must lie in [0, 1)");
    let mut trace = RunTrace::new(kind, items.len(), cells);
    for (i, &v) in items.iter().enumerate() {
        if let Verdict::Placed { cell, target } = inst.feed(v, &mut sink) {
            trace.place(i + 1, v, cell, target);
        }
    }
    trace.degenerate = inst.is_degenerate();
    trace.failure = inst.failure().map(|(step, kind)| Failure {
        first_fallback_step: step as u32,
        kind,
    });
    trace.buffers = inst.buffer_infos();
    trace.phases = inst.take_phases();
    trace.merge_factor = inst.merge_factor();
    trace.margin = inst.cfg.tuning.margin;
    trace.accounting_violations = sink.accounting_violations;
    trace.pool_instances = sink.pool_instances;
    trace.nested_failures = sink.nested_failures;
    trace.finish()
}
