//! Run traces: every placement, every allocated buffer, the phase ledger
//! and failure diagnostics of one run.

use alloc::vec::Vec;
use core::fmt;

use crate::cost::{eval_cost, CellArray};
use crate::params::{Margin, Segment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AlgorithmKind {
    FirstFit,
    LinearProbing,
    Blocked,
    AlgBase,
    AlgAdapt,
    AlgAdaptMerge,
    AlgFinal,
    AlgPool,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 7] = [
        AlgorithmKind::FirstFit,
        AlgorithmKind::LinearProbing,
        AlgorithmKind::Blocked,
        AlgorithmKind::AlgBase,
        AlgorithmKind::AlgAdapt,
        AlgorithmKind::AlgAdaptMerge,
        AlgorithmKind::AlgFinal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AlgorithmKind::FirstFit => "first_fit",
            AlgorithmKind::LinearProbing => "linear_probing",
            AlgorithmKind::Blocked => "blocked",
            AlgorithmKind::AlgBase => "alg_base",
            AlgorithmKind::AlgAdapt => "alg_adapt",
            AlgorithmKind::AlgAdaptMerge => "alg_adapt_merge",
            AlgorithmKind::AlgFinal => "alg_final",
            AlgorithmKind::AlgPool => "alg_pool",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL
            .iter()
            .chain(core::iter::once(&AlgorithmKind::AlgPool))
            .copied()
            .find(|a| a.name() == s)
    }

    /// Algorithms built on the phased allocation engine.
    pub fn is_phased(self) -> bool {
        matches!(
            self,
            AlgorithmKind::AlgAdapt | AlgorithmKind::AlgAdaptMerge | AlgorithmKind::AlgFinal | AlgorithmKind::AlgPool
        )
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BufferKind {
    Regular,
    Dampening,
    /// A budget-only buffer of an `AlgPool` instance; it owns no cells.
    Phase1Virtual,
    FinalPool,
}

/// A contiguous cell range bound to an initial segment.
#[derive(Debug, Clone, PartialEq)]
pub struct BufferInfo {
    pub id: u32,
    pub start: usize,
    pub len: usize,
    pub segment: Segment,
    pub kind: BufferKind,
    pub phase: u32,
    /// Number of items processed when the buffer was allocated.
    pub allocated_at: u32,
}

impl BufferInfo {
    pub fn end(&self) -> usize {
        self.start + self.len
    }
}

/// Where a placement went.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Buffer(u32),
    FinalPool,
    /// The overflow pool of the base algorithm.
    Pool,
    /// First-empty-cell after a failure or when no block is available.
    Fallback,
    /// Placed by the algorithm's own rule without a buffer structure, as in
    /// first-fit, linear probing and degenerate runs.
    Direct,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Placement {
    /// 1-based arrival index.
    pub step: u32,
    pub value: f64,
    /// 0-based cell index.
    pub cell: u32,
    pub target: Target,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailureType {
    /// `n_{j+1}/B_j` exceeded the allowed shrink of `n_j/B_j`.
    ShrinkTooSlow,
    /// A new regular buffer would have non-positive size.
    NonpositiveBuffer,
    /// A new dampening buffer would have non-positive size.
    NonpositiveDampening,
    /// An item found no accepting buffer and no final pool.
    NoCell,
    /// A nested pool instance disagreed with the outer overflow decision.
    PoolMismatch,
}

impl FailureType {
    pub fn name(self) -> &'static str {
        match self {
            FailureType::ShrinkTooSlow => "shrink_too_slow",
            FailureType::NonpositiveBuffer => "nonpositive_buffer",
            FailureType::NonpositiveDampening => "nonpositive_dampening",
            FailureType::NoCell => "no_cell",
            FailureType::PoolMismatch => "pool_mismatch",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Failure {
    /// 1-based step of the first item handled in failure mode.
    pub first_fallback_step: u32,
    pub kind: FailureType,
}

/// Per-phase bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseRecord {
    pub j: u32,
    /// Items processed before the phase started.
    pub start_step: u32,
    pub n_j: u64,
    pub b_j: u64,
    pub m_j: i64,
    /// Bound at the previous granularity, `n_j/B_{j-1} - d(n_j/B_{j-1})`.
    pub m_old: Option<i64>,
    pub merged: bool,
    pub is_last: bool,
    /// Sizes of the regular buffers allocated at the start of this phase,
    /// in segment order.
    pub regular_sizes: Vec<i64>,
    pub dampening_size: Option<i64>,
}

/// Parameters of a nested pool instance spawned somewhere in a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolInstanceRecord {
    pub n: u64,
    pub b: u64,
    pub m: u64,
    pub depth: u32,
    pub for_final_pool: bool,
}

#[derive(Debug, Clone)]
pub struct RunTrace {
    pub algorithm: AlgorithmKind,
    /// Number of items the run received.
    pub n_items: usize,
    pub array: CellArray,
    pub placements: Vec<Placement>,
    pub buffers: Vec<BufferInfo>,
    pub phases: Vec<PhaseRecord>,
    pub failure: Option<Failure>,
    pub degenerate: bool,
    /// Merge factor, for the merge-based algorithms.
    pub merge_factor: Option<u64>,
    /// Margin the run used for its capacity bounds.
    pub margin: Margin,
    pub final_cost: f64,
    /// Steps at which the instrumented capacity identity did not hold.
    pub accounting_violations: u64,
    pub pool_instances: Vec<PoolInstanceRecord>,
    /// Nested instances (at any depth) that entered failure mode.
    pub nested_failures: u64,
}

impl RunTrace {
    pub(crate) fn new(algorithm: AlgorithmKind, n_items: usize, cells: usize) -> Self {
        RunTrace {
            algorithm,
            n_items,
            array: CellArray::new(cells),
            placements: Vec::with_capacity(n_items.min(cells)),
            buffers: Vec::new(),
            phases: Vec::new(),
            failure: None,
            degenerate: false,
            merge_factor: None,
            margin: Margin::PAPER,
            final_cost: f64::NAN,
            accounting_violations: 0,
            pool_instances: Vec::new(),
            nested_failures: 0,
        }
    }

    pub(crate) fn place(&mut self, step: usize, value: f64, cell: usize, target: Target) {
        self.array.fill(cell, value).expect("placement into an occupied cell");
        self.placements.push(Placement {
            step: step as u32,
            value,
            cell: cell as u32,
            target,
        });
    }

    pub(crate) fn finish(mut self) -> Self {
        self.final_cost = eval_cost(&self.array).unwrap_or(f64::NAN);
        self
    }

    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn cost(&self) -> f64 {
        self.final_cost
    }

    /// Number of phases, zero for algorithms without phases.
    pub fn phase_count(&self) -> usize {
        self.phases.len()
    }

    pub fn buffer(&self, id: u32) -> &BufferInfo {
        &self.buffers[id as usize]
    }

    /// The last step handled by the regular buffer logic.
    pub fn last_regular_step(&self) -> u32 {
        self.failure.map_or(self.n_items as u32, |f| f.first_fallback_step - 1)
    }
}
