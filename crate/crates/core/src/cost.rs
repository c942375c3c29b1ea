//! The cell array and the adjacent-difference cost.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// The `n`-cell placement target. Cells are 0-based here; external formats
/// add one.
#[derive(Debug, Clone, PartialEq)]
pub struct CellArray {
    cells: Vec<f64>,
    filled: usize,
}

impl CellArray {
    pub fn new(n: usize) -> Self {
        CellArray {
            cells: vec![f64::NAN; n],
            filled: 0,
        }
    }

    /// Builds a fully specified array; every value must be in `[0, 1)`.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let mut a = CellArray::new(values.len());
        for (i, &v) in values.iter().enumerate() {
            a.fill(i, v)?;
        }
        Ok(a)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn filled_count(&self) -> usize {
        self.filled
    }

    pub fn is_full(&self) -> bool {
        self.filled == self.cells.len()
    }

    pub fn get(&self, i: usize) -> Option<f64> {
        self.cells.get(i).copied().filter(|v| !v.is_nan())
    }

    /// Writes `v` into empty cell `i`. A filled cell never changes.
    pub fn fill(&mut self, i: usize, v: f64) -> Result<()> {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::ValueOutOfRange(v));
        }
        match self.cells.get_mut(i) {
            Some(c) if c.is_nan() => {
                *c = v;
                self.filled += 1;
                Ok(())
            }
            _ => Err(Error::InvalidParams("cell is out of range or already filled")),
        }
    }

    /// The raw values; empty cells read as NaN.
    pub fn values(&self) -> &[f64] {
        &self.cells
    }
}

/// `sum_{i} |A[i+1] - A[i]|` over a full array.
pub fn eval_cost(array: &CellArray) -> Result<f64> {
    if let Some(i) = array.cells.iter().position(|v| v.is_nan()) {
        return Err(Error::EmptyCell(i));
    }
    Ok(adjacent_cost(&array.cells))
}

pub(crate) fn adjacent_cost(values: &[f64]) -> f64 {
    values.windows(2).map(|w| libm::fabs(w[1] - w[0])).sum()
}

/// Cost of the sorted placement, `max - min`.
pub fn offline_cost(items: &[f64]) -> Result<f64> {
    let mut it = items.iter().copied();
    let first = it.next().ok_or(Error::EmptySample)?;
    let (lo, hi) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
    Ok(hi - lo)
}
