//! Algorithm selection by CLI name, with the per-algorithm flags.

use stochsort_core::alg_adapt::{run_alg_adapt, AdaptParams};
use stochsort_core::alg_adapt_merge::{run_alg_adapt_merge, MergeParams};
use stochsort_core::alg_base::{run_alg_base, BaseParams};
use stochsort_core::alg_final::{run_alg_final, FinalParams};
use stochsort_core::baselines::{default_block_count, run_blocked_baseline, run_first_fit, run_linear_probing};
use stochsort_core::engine::Profile;
use stochsort_core::trace::{AlgorithmKind, RunTrace};

use crate::ConfigError;

/// Optional per-algorithm overrides. Unset fields keep the profile
/// defaults; a set field that the algorithm does not take is an error.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AlgoFlags {
    /// `alg_base`: top-level segment count.
    pub b: Option<u64>,
    /// `alg_base`: recursion depth.
    pub depth: Option<u32>,
    /// `alg_adapt`: `B = ceil(c_B log2 n)`.
    pub c_b: Option<f64>,
    /// `alg_adapt`: final-pool cutoff exponent.
    pub beta: Option<f64>,
    pub min_recurse: Option<usize>,
    /// `alg_adapt_merge`, `alg_final`: exponent of the `K` rule.
    pub alpha: Option<f64>,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub eps: Option<f64>,
    /// `blocked`: block count, `ceil(sqrt(n))` when unset.
    pub block_count: Option<usize>,
}

impl AlgoFlags {
    fn set_names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        let mut push = |set: bool, name| {
            if set {
                v.push(name)
            }
        };
        push(self.b.is_some(), "B");
        push(self.depth.is_some(), "depth");
        push(self.c_b.is_some(), "cB");
        push(self.beta.is_some(), "beta");
        push(self.min_recurse.is_some(), "min-recurse");
        push(self.alpha.is_some(), "alpha");
        push(self.c1.is_some(), "c1");
        push(self.c2.is_some(), "c2");
        push(self.eps.is_some(), "eps");
        push(self.block_count.is_some(), "block-count");
        v
    }
}

fn accepted(kind: AlgorithmKind) -> &'static [&'static str] {
    match kind {
        AlgorithmKind::Blocked => &["block-count"],
        AlgorithmKind::AlgBase => &["B", "depth", "min-recurse"],
        AlgorithmKind::AlgAdapt => &["cB", "beta", "min-recurse"],
        AlgorithmKind::AlgAdaptMerge => &["alpha"],
        AlgorithmKind::AlgFinal => &["alpha", "min-recurse", "c1", "c2", "eps"],
        _ => &[],
    }
}

/// A fully parametrized algorithm.
#[derive(Debug, Clone, PartialEq)]
pub enum AlgoSpec {
    FirstFit,
    LinearProbing,
    Blocked { block_count: Option<usize> },
    AlgBase(BaseParams),
    AlgAdapt(AdaptParams),
    AlgAdaptMerge(MergeParams),
    AlgFinal(FinalParams),
}

impl AlgoSpec {
    /// Parses a CLI name and builds it under `profile`.
    pub fn from_name(name: &str, profile: Profile, flags: &AlgoFlags) -> Result<Self, ConfigError> {
        match AlgorithmKind::from_name(name) {
            Some(k) if k != AlgorithmKind::AlgPool => Self::build(k, profile, flags),
            _ => Err(ConfigError::UnknownAlgorithm(name.to_string())),
        }
    }

    pub fn build(kind: AlgorithmKind, profile: Profile, flags: &AlgoFlags) -> Result<Self, ConfigError> {
        let ok = accepted(kind);
        if let Some(bad) = flags.set_names().into_iter().find(|f| !ok.contains(f)) {
            return Err(ConfigError::FlagNotApplicable {
                flag: bad,
                algorithm: kind.name(),
            });
        }
        Ok(match kind {
            AlgorithmKind::FirstFit => AlgoSpec::FirstFit,
            AlgorithmKind::LinearProbing => AlgoSpec::LinearProbing,
            AlgorithmKind::Blocked => AlgoSpec::Blocked {
                block_count: flags.block_count,
            },
            AlgorithmKind::AlgBase => {
                let mut p = BaseParams::default();
                p.b = flags.b.or(p.b);
                p.recursion_depth = flags.depth.unwrap_or(p.recursion_depth);
                p.min_recurse_size = flags.min_recurse.unwrap_or(p.min_recurse_size);
                AlgoSpec::AlgBase(p)
            }
            AlgorithmKind::AlgAdapt => {
                let mut p = AdaptParams::for_profile(profile);
                p.c_b = flags.c_b.unwrap_or(p.c_b);
                p.beta = flags.beta.unwrap_or(p.beta);
                p.min_recurse = flags.min_recurse.unwrap_or(p.min_recurse);
                AlgoSpec::AlgAdapt(p)
            }
            AlgorithmKind::AlgAdaptMerge => {
                let mut p = MergeParams::for_profile(profile);
                if let Some(a) = flags.alpha {
                    p = p.with_alpha(a);
                }
                AlgoSpec::AlgAdaptMerge(p)
            }
            AlgorithmKind::AlgFinal => {
                let mut p = FinalParams::for_profile(profile);
                if let Some(a) = flags.alpha {
                    p = p.with_alpha(a);
                }
                p.min_recurse = flags.min_recurse.unwrap_or(p.min_recurse);
                p.well.c1 = flags.c1.unwrap_or(p.well.c1);
                p.well.c2 = flags.c2.unwrap_or(p.well.c2);
                p.well.eps = flags.eps.unwrap_or(p.well.eps);
                AlgoSpec::AlgFinal(p)
            }
            AlgorithmKind::AlgPool => return Err(ConfigError::UnknownAlgorithm("alg_pool".into())),
        })
    }

    /// Every CLI-selectable algorithm with its defaults.
    pub fn all(profile: Profile) -> Vec<AlgoSpec> {
        AlgorithmKind::ALL
            .iter()
            .map(|&k| Self::build(k, profile, &AlgoFlags::default()).expect("defaults are valid"))
            .collect()
    }

    pub fn kind(&self) -> AlgorithmKind {
        match self {
            AlgoSpec::FirstFit => AlgorithmKind::FirstFit,
            AlgoSpec::LinearProbing => AlgorithmKind::LinearProbing,
            AlgoSpec::Blocked { .. } => AlgorithmKind::Blocked,
            AlgoSpec::AlgBase(_) => AlgorithmKind::AlgBase,
            AlgoSpec::AlgAdapt(_) => AlgorithmKind::AlgAdapt,
            AlgoSpec::AlgAdaptMerge(_) => AlgorithmKind::AlgAdaptMerge,
            AlgoSpec::AlgFinal(_) => AlgorithmKind::AlgFinal,
        }
    }

    pub fn name(&self) -> &'static str {
        self.kind().name()
    }

    /// The parameter profile, for the algorithms that have one.
    pub fn profile(&self) -> Option<Profile> {
        match self {
            AlgoSpec::AlgAdapt(p) => Some(p.profile),
            AlgoSpec::AlgAdaptMerge(p) => Some(p.profile),
            AlgoSpec::AlgFinal(p) => Some(p.profile),
            _ => None,
        }
    }

    /// Value of the CSV `profile` column.
    pub fn profile_label(&self) -> &'static str {
        self.profile().map_or("none", Profile::name)
    }

    pub fn run(&self, items: &[f64]) -> RunTrace {
        match self {
            AlgoSpec::FirstFit => run_first_fit(items),
            AlgoSpec::LinearProbing => run_linear_probing(items),
            AlgoSpec::Blocked { block_count } => {
                let bc = block_count.unwrap_or_else(|| default_block_count(items.len()));
                run_blocked_baseline(items, bc)
            }
            AlgoSpec::AlgBase(p) => run_alg_base(items, p),
            AlgoSpec::AlgAdapt(p) => run_alg_adapt(items, p),
            AlgoSpec::AlgAdaptMerge(p) => run_alg_adapt_merge(items, p),
            AlgoSpec::AlgFinal(p) => run_alg_final(items, p),
        }
    }
}
