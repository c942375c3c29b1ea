//! Statistics: Kolmogorov-Smirnov tests, log-log scaling fits, the
//! logarithmic floor estimate, and Monte Carlo concentration checkers.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::{seg_index, Margin};
use crate::streams::{Seed, UniformSource};

fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// One-sample statistic `sup |F_n - F|` against a continuous `cdf`.
pub fn ks_statistic_cdf(sample: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let v = sorted(sample);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    Ok(d)
}

/// One-sample statistic against the uniform law on `[0, 1)`.
pub fn ks_uniform(sample: &[f64]) -> Result<f64> {
    ks_statistic_cdf(sample, |x| x.clamp(0.0, 1.0))
}

/// Two-sample statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySample);
    }
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max(libm::fabs(i as f64 / na - j as f64 / nb));
    }
    Ok(d)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(t) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 t^2)`.
pub fn kolmogorov_q(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let term = libm::exp(-2.0 * (k * k) as f64 * t * t);
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value of statistic `d` at effective sample size `ne`
/// (`n` for one sample, `n m / (n + m)` for two), with the usual
/// small-sample correction.
pub fn ks_p_value(d: f64, ne: f64) -> f64 {
    let s = libm::sqrt(ne);
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

/// Least-squares slope of `ln(cost)` against `ln(n)`.
pub fn fit_scaling(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(3));
    }
    if points.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(Error::NotIncreasing);
    }
    if let Some(&(_, c)) = points.iter().find(|p| !(p.1 > 0.0) || !(p.0 > 0.0)) {
        return Err(Error::NonPositiveCost(c));
    }
    let k = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| libm::log(p.0)).collect();
    let ys: Vec<f64> = points.iter().map(|p| libm::log(p.1)).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(sxy / sxx)
}

/// `min mean_cost / ln(n)` over the points.
pub fn estimate_log_floor(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::TooFewPoints(3));
    }
    if let Some(&(n, _)) = points.iter().find(|p| !(p.0 >= 2.0)) {
        return Err(Error::InvalidParams(if n < 2.0 { "floor points need n >= 2" } else { "n must be finite" }));
    }
    Ok(points.iter().map(|&(n, c)| c / libm::log(n)).fold(f64::INFINITY, f64::min))
}

/// Whether an observed mean cost at `n = 2` is within three standard errors
/// of `1/3`.
pub fn n2_anchor_holds(mean: f64, std_err: f64) -> bool {
    libm::fabs(mean - 1.0 / 3.0) < 3.0 * std_err
}

/// Mean, standard error and count, accumulated in one pass.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub count: u64,
    mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Sample variance (`n - 1` denominator).
    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_err(&self) -> f64 {
        if self.count == 0 {
            return f64::NAN;
        }
        libm::sqrt(self.variance() / self.count as f64)
    }
}

impl FromIterator<f64> for Moments {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut m = Moments::default();
        iter.into_iter().for_each(|x| m.push(x));
        m
    }
}

/// Result of the balls-into-bins simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinConcentration {
    pub trials: u64,
    /// Trials where every final load is at least `m'`.
    pub final_load_fraction: f64,
    /// Trials where, when the first bin reaches `m'`, every other bin has at
    /// least `m' - d(n'/B)/5`.
    pub first_hit_fraction: f64,
    /// Trials where both hold.
    pub pass_fraction: f64,
    /// `B * log2(n')^exponent <= n'`.
    pub in_regime: bool,
}

/// Throws `n'` balls into `b` bins `trials` times and checks both
/// concentration bullets with `m' = bound(n', B)` under `margin`. Never
/// rejects; the regime is reported.
pub fn simulate_bin_concentration(n: u64, b: u64, trials: u64, seed: Seed, margin: Margin, regime_exponent: f64) -> BinConcentration {
    let in_regime = b >= 1 && n >= 2 && (b as f64) * libm::pow(libm::log2(n as f64), regime_exponent) <= n as f64;
    let m = margin.bound(n, b);
    let slack = margin.d(n as f64 / b as f64) / 5.0;
    let (mut a_ok, mut b_ok, mut both) = (0u64, 0u64, 0u64);
    let mut loads = vec![0i64; b as usize];
    for t in 0..trials {
        let mut rng = UniformSource::new(seed.derive(t));
        loads.iter_mut().for_each(|l| *l = 0);
        let mut first_hit_ok = m <= 0 || b == 1;
        let mut hit = m <= 0;
        for _ in 0..n {
            let i = rng.next_below(b) as usize;
            loads[i] += 1;
            if !hit && loads[i] == m {
                hit = true;
                first_hit_ok = loads.iter().all(|&l| l as f64 >= m as f64 - slack);
            }
        }
        let final_ok = loads.iter().all(|&l| l >= m);
        a_ok += final_ok as u64;
        b_ok += first_hit_ok as u64;
        both += (final_ok && first_hit_ok) as u64;
    }
    let frac = |c: u64| if trials == 0 { 0.0 } else { c as f64 / trials as f64 };
    BinConcentration {
        trials,
        final_load_fraction: frac(a_ok),
        first_hit_fraction: frac(b_ok),
        pass_fraction: frac(both),
        in_regime,
    }
}

/// Pass fraction of both concentration bullets with the unmodified margin.
/// Rejects parameters outside the regime `B log2(n')^exponent <= n'`.
pub fn check_bin_concentration(n: u64, b: u64, trials: u64, seed: Seed, regime_exponent: f64) -> Result<f64> {
    if trials == 0 || b == 0 {
        return Err(Error::InvalidParams("need trials >= 1 and B >= 1"));
    }
    let r = simulate_bin_concentration(n, b, trials, seed, Margin::PAPER, regime_exponent);
    if !r.in_regime {
        return Err(Error::OutOfRegime);
    }
    Ok(r.pass_fraction)
}

/// One sampled instance of the two-bullet suffix property.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct A1Tuple {
    /// Level: the segment has length `K^-level`.
    pub level: u32,
    /// 0-based segment index at granularity `K^level`.
    pub segment: u64,
    /// Suffix length.
    pub i: usize,
    /// Number of earliest suffix items of the segment examined.
    pub m: usize,
}

/// Regime floors `(K^level log2(n)^e, K log2(n)^e)` for the suffix length
/// and the prefix count.
fn a1_floors(n: usize, k: u64, level: u32, exponent: f64) -> (f64, f64) {
    let l = libm::pow(libm::log2(n as f64), exponent);
    (libm::pow(k as f64, level as f64) * l, k as f64 * l)
}

/// First bullet: among the last `i` items, the count in segment `segment`
/// at granularity `gran` is `i/gran +- d(i/gran)/20`.
pub fn a1_suffix_holds(items: &[f64], gran: u64, segment: u64, i: usize) -> bool {
    let count = items[items.len() - i..].iter().filter(|&&v| seg_index(v, gran) == segment).count();
    let x = i as f64 / gran as f64;
    libm::fabs(count as f64 - x) <= Margin::PAPER.d(x) / 20.0
}

/// Checks both bullets for one tuple on `items`; `Ok(false)` is a
/// violation. Tuples below the regime floors are rejected.
pub fn a1_tuple_holds(items: &[f64], k: u64, t: A1Tuple, exponent: f64) -> Result<bool> {
    let n = items.len();
    let (i_floor, m_floor) = a1_floors(n, k, t.level, exponent);
    if (t.i as f64) < i_floor || t.i > n || (t.m as f64) < m_floor {
        return Err(Error::OutOfRegime);
    }
    let gran = k.checked_pow(t.level).ok_or(Error::OutOfRegime)?;
    let sub = gran.checked_mul(k).ok_or(Error::OutOfRegime)?;
    let d = Margin::PAPER;
    let suffix = &items[n - t.i..];
    let in_seg = |v: f64| seg_index(v, gran) == t.segment;
    let count = suffix.iter().filter(|&&v| in_seg(v)).count();
    let first = a1_suffix_holds(items, gran, t.segment, t.i);
    if count < t.m {
        return Ok(first);
    }
    let mut per_sub = vec![0usize; k as usize];
    for &v in suffix.iter().filter(|&&v| in_seg(v)).take(t.m) {
        per_sub[(seg_index(v, sub) - t.segment * k) as usize] += 1;
    }
    let y = t.m as f64 / k as f64;
    let tol = d.d(y) / 20.0;
    Ok(first && per_sub.iter().all(|&c| libm::fabs(c as f64 - y) <= tol))
}

/// Monte Carlo check of the suffix concentration property: each trial
/// draws `n` items and `tuples_per_trial` random tuples with levels in
/// `0..levels`; a trial passes if all its tuples hold. Returns the pass
/// fraction. Rejects parameters where no tuple fits the regime.
pub fn check_property_a1(n: usize, k: u64, levels: u32, trials: u64, tuples_per_trial: usize, seed: Seed, exponent: f64) -> Result<f64> {
    if trials == 0 || levels == 0 || k < 2 || n < 2 {
        return Err(Error::InvalidParams("need trials, levels >= 1, K >= 2, n >= 2"));
    }
    let (_, m_floor) = a1_floors(n, k, 0, exponent);
    let top = (0..levels)
        .take_while(|&l| a1_floors(n, k, l, exponent).0 <= n as f64 && (n as f64) / libm::pow(k as f64, l as f64) >= m_floor)
        .count() as u32;
    if top == 0 {
        return Err(Error::OutOfRegime);
    }
    let mut passed = 0;
    for t in 0..trials {
        let trial_seed = seed.derive(t);
        let items = crate::streams::uniform_stream(trial_seed, n);
        let mut rng = UniformSource::new(trial_seed.derive(u64::MAX));
        let mut ok = true;
        for _ in 0..tuples_per_trial {
            let level = rng.next_below(top as u64) as u32;
            let gran = k.pow(level);
            let (i_floor, _) = a1_floors(n, k, level, exponent);
            let i_lo = libm::ceil(i_floor) as usize;
            let i = i_lo + rng.next_below((n - i_lo + 1) as u64) as usize;
            let segment = rng.next_below(gran);
            let m_lo = libm::ceil(m_floor) as usize;
            let expected = i / gran as usize;
            let m_hi = expected.max(m_lo);
            let m = m_lo + rng.next_below((m_hi - m_lo + 1) as u64) as usize;
            let tuple = A1Tuple { level, segment, i, m };
            if !a1_tuple_holds(&items, k, tuple, exponent)? {
                ok = false;
                break;
            }
        }
        passed += ok as u64;
    }
    Ok(passed as f64 / trials as f64)
}
