//! Segment arithmetic and the Chernoff-style capacity bounds.
//!
//! A segment at granularity `B` is one of the half-open value intervals
//! `[(i-1)/B, i/B)`. Segment membership is computed exactly in integer
//! arithmetic from the binary representation of the value, so a value is
//! assigned to the same nested segment at every granularity that divides a
//! finer one.

use crate::error::{Error, Result};

/// `d(x) = x - ceil(x - x^{2/3} / 2)`.
pub fn d(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::NonPositive(x));
    }
    Ok(Margin::PAPER.d(x))
}

/// `ceil(n_j/B - (n_j/B)^{2/3} / 2)`, the per-segment lower bound on future
/// arrivals.
pub fn m_bound(n_j: u64, b: u64) -> Result<i64> {
    if n_j == 0 || b == 0 {
        return Err(Error::InvalidParams("m_bound needs n_j >= 1 and B >= 1"));
    }
    Ok(Margin::PAPER.bound(n_j, b))
}

/// Margin function `d_s(x) = x - ceil(x - s * x^{2/3})` together with the
/// bound `m = x - d_s(x)` it induces.
///
/// The scale `s = 1/2` gives [`d`] and [`m_bound`]. Larger scales widen the
/// safety margin; the `practical` profile uses one because the `1/2` margin
/// only dominates binomial fluctuations once `x^{1/6}` is large.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin {
    pub scale: f64,
}

impl Margin {
    pub const PAPER: Margin = Margin { scale: 0.5 };

    pub fn d(&self, x: f64) -> f64 {
        x - self.ceil_bound(x) as f64
    }

    fn ceil_bound(&self, x: f64) -> i64 {
        let c = libm::cbrt(x);
        libm::ceil(x - self.scale * c * c) as i64
    }

    /// `ceil(x - s * x^{2/3})` for `x = n / b`. May be zero or negative for
    /// tiny `x`; callers treat non-positive sizes as failures.
    pub fn bound(&self, n: u64, b: u64) -> i64 {
        self.ceil_bound(n as f64 / b as f64)
    }
}

impl Default for Margin {
    fn default() -> Self {
        Margin::PAPER
    }
}

/// `floor(v * b)` computed exactly for any finite `v >= 0`.
pub(crate) fn scaled_floor(v: f64, b: u64) -> u64 {
    let (mant, shift) = decompose(v);
    let prod = mant as u128 * b as u128;
    if shift >= 128 {
        0
    } else {
        (prod >> shift) as u64
    }
}

/// `ceil(v * b)` computed exactly.
pub(crate) fn scaled_ceil(v: f64, b: u64) -> u64 {
    let (mant, shift) = decompose(v);
    let prod = mant as u128 * b as u128;
    if shift >= 128 {
        return u64::from(prod != 0);
    }
    let q = (prod >> shift) as u64;
    let rem = prod & ((1u128 << shift) - 1);
    q + u64::from(rem != 0)
}

// v = mant * 2^-shift for v in [0, 1).
fn decompose(v: f64) -> (u64, u32) {
    debug_assert!((0.0..1.0).contains(&v));
    let bits = v.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i32;
    let frac = bits & ((1u64 << 52) - 1);
    if exp == 0 {
        (frac, 1074)
    } else {
        (frac | (1u64 << 52), (1075 - exp) as u32)
    }
}

/// 0-based segment index of `v` at granularity `b`.
#[inline]
pub(crate) fn seg_index(v: f64, b: u64) -> u64 {
    scaled_floor(v, b).min(b - 1)
}

/// Maps `v` from segment `idx` (0-based) at granularity `b` onto `[0, 1)`.
///
/// Exact whenever `b` is a power of two and `v` has at most 53 significant
/// fractional bits.
#[inline]
pub(crate) fn rescale(v: f64, b: u64, idx: u64) -> f64 {
    let r = v * b as f64 - idx as f64;
    if r < 0.0 {
        0.0
    } else if r >= 1.0 {
        ONE_MINUS_ULP
    } else {
        r
    }
}

pub(crate) const ONE_MINUS_ULP: f64 = 1.0 - f64::EPSILON / 2.0;

/// A value interval `[(index-1)/granularity, index/granularity)`; `index` is
/// 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Segment {
    pub granularity: u64,
    pub index: u64,
}

impl Segment {
    pub fn new(granularity: u64, index: u64) -> Result<Self> {
        if granularity == 0 || index == 0 || index > granularity {
            return Err(Error::InvalidParams("segment index must lie in [1, B]"));
        }
        Ok(Segment { granularity, index })
    }

    pub(crate) fn from_zero_based(granularity: u64, idx: u64) -> Self {
        Segment { granularity, index: idx + 1 }
    }

    pub fn lower(&self) -> f64 {
        (self.index - 1) as f64 / self.granularity as f64
    }

    pub fn upper(&self) -> f64 {
        self.index as f64 / self.granularity as f64
    }

    pub fn contains(&self, v: f64) -> bool {
        (0.0..1.0).contains(&v) && seg_index(v, self.granularity) + 1 == self.index
    }

    /// Whether `other` is a refinement contained in `self`. Requires the
    /// granularity of `self` to divide that of `other`.
    pub fn contains_segment(&self, other: &Segment) -> bool {
        if !other.granularity.is_multiple_of(self.granularity) {
            return false;
        }
        let ratio = other.granularity / self.granularity;
        (other.index - 1) / ratio + 1 == self.index
    }

    /// Maps a member value onto `[0, 1)`.
    pub fn rescale(&self, v: f64) -> f64 {
        rescale(v, self.granularity, self.index - 1)
    }
}

/// The segment containing `v` at granularity `b`.
pub fn segment_of(v: f64, b: u64) -> Result<Segment> {
    if !(0.0..1.0).contains(&v) {
        return Err(Error::ValueOutOfRange(v));
    }
    if b == 0 {
        return Err(Error::InvalidParams("granularity must be >= 1"));
    }
    Ok(Segment::from_zero_based(b, seg_index(v, b)))
}
