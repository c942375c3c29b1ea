#![no_std]
extern crate alloc;

pub mod alg_adapt;
pub mod alg_adapt_merge;
pub mod alg_base;
pub mod alg_final;
pub mod baselines;
pub mod checks;
pub mod cost;
pub mod engine;
pub mod error;
pub mod params;
pub mod stats;
pub mod streams;
pub mod trace;

pub use cost::{eval_cost, offline_cost, CellArray};
pub use error::{Error, Result};
pub use params::{d, m_bound, segment_of, Margin, Segment};
