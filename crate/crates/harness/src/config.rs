//! Experiment configuration: seed ranges, `key=value` files and the
//! validated experiment description.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use stochsort_core::streams::Seed;
use thiserror::Error;

use crate::algorithms::AlgoSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown algorithm `{0}`")]
    UnknownAlgorithm(String),
    #[error("unknown profile `{0}` (expected paper or practical)")]
    UnknownProfile(String),
    #[error("--{flag} does not apply to {algorithm}")]
    FlagNotApplicable { flag: &'static str, algorithm: &'static str },
    #[error("bad seed range `{0}` (expected A..B or A..=B)")]
    BadSeedRange(String),
    #[error("seed range is empty")]
    EmptySeedRange,
    #[error("n must be at least 1")]
    ZeroN,
    #[error("no n values given")]
    NoN,
    #[error("line {line}: expected key=value")]
    BadLine { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("missing required setting `{0}`")]
    Missing(&'static str),
}

/// Seeds `start..end` (exclusive end), stored half-open.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRange {
    pub start: u64,
    pub end: u64,
}

impl SeedRange {
    pub fn new(start: u64, end: u64) -> Result<Self, ConfigError> {
        if end <= start {
            return Err(ConfigError::EmptySeedRange);
        }
        Ok(SeedRange { start, end })
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + Clone {
        self.start..self.end
    }
}

impl FromStr for SeedRange {
    type Err = ConfigError;

    /// `A..B`, `A..=B` or a single seed `A`; bounds are decimal or `0x` hex.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConfigError::BadSeedRange(s.to_string());
        let seed = |t: &str| Seed::parse(t).map(|x| x.0).map_err(|_| bad());
        let (a, b, inclusive) = if let Some((a, b)) = s.split_once("..=") {
            (a, b, true)
        } else if let Some((a, b)) = s.split_once("..") {
            (a, b, false)
        } else {
            let a = seed(s)?;
            return SeedRange::new(a, a.checked_add(1).ok_or_else(bad)?);
        };
        let (a, b) = (seed(a)?, seed(b)?);
        let end = if inclusive { b.checked_add(1).ok_or_else(bad)? } else { b };
        SeedRange::new(a, end)
    }
}

impl fmt::Display for SeedRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Parses a plain `key=value` file. Blank lines and lines starting with
/// `#` are skipped; keys may carry a leading `--`.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, ConfigError> {
    let mut out = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or(ConfigError::BadLine { line: i + 1 })?;
        let k = k.trim().trim_start_matches("--");
        if k.is_empty() {
            return Err(ConfigError::BadLine { line: i + 1 });
        }
        out.insert(k.to_string(), v.trim().to_string());
    }
    Ok(out)
}

/// Parses a comma-separated list of sizes; `2^k` is accepted.
pub fn parse_sizes(s: &str) -> Result<Vec<usize>, ConfigError> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let bad = || ConfigError::BadValue {
                key: "n".into(),
                value: t.to_string(),
            };
            let n = match t.strip_prefix("2^") {
                Some(e) => {
                    let e: u32 = e.parse().map_err(|_| bad())?;
                    1usize.checked_shl(e).filter(|_| e < usize::BITS).ok_or_else(bad)?
                }
                None => t.parse().map_err(|_| bad())?,
            };
            if n == 0 {
                return Err(ConfigError::ZeroN);
            }
            Ok(n)
        })
        .collect()
}

/// One experiment: an algorithm over a grid of sizes and a seed range.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: AlgoSpec,
    pub ns: Vec<usize>,
    pub seeds: SeedRange,
    pub out: Option<PathBuf>,
    /// Worker threads; `None` lets the pool decide.
    pub threads: Option<usize>,
    /// Fill the `elapsed_ns` column; off keeps the CSV deterministic.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(algorithm: AlgoSpec, ns: Vec<usize>, seeds: SeedRange) -> Result<Self, ConfigError> {
        let c = ExperimentConfig {
            algorithm,
            ns,
            seeds,
            out: None,
            threads: None,
            timing: false,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.ns.is_empty() {
            return Err(ConfigError::NoN);
        }
        if self.ns.contains(&0) {
            return Err(ConfigError::ZeroN);
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::EmptySeedRange);
        }
        Ok(())
    }
}
