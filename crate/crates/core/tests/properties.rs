use proptest::prelude::*;
use stochsort_core::alg_adapt::{run_alg_adapt, AdaptParams};
use stochsort_core::alg_adapt_merge::{run_alg_adapt_merge, MergeParams};
use stochsort_core::alg_base::{run_alg_base, BaseParams};
use stochsort_core::alg_final::{classify_item, run_alg_final, run_alg_pool, FinalParams, ItemClass, PoolInstance};
use stochsort_core::baselines::{default_block_count, run_blocked_baseline, run_first_fit, run_linear_probing};
use stochsort_core::checks::check_structure;
use stochsort_core::streams::{pool_dist_from_draws, pool_dist_sample_traced, uniform_stream, PoolDistParams, Seed};
use stochsort_core::trace::RunTrace;
use stochsort_core::{d, eval_cost, m_bound, offline_cost, segment_of, CellArray};

fn all_algorithms(items: &[f64]) -> Vec<RunTrace> {
    vec![
        run_first_fit(items),
        run_linear_probing(items),
        run_blocked_baseline(items, default_block_count(items.len())),
        run_alg_base(items, &BaseParams::default()),
        run_alg_base(
            items,
            &BaseParams {
                recursion_depth: 2,
                min_recurse_size: 4,
                ..BaseParams::default()
            },
        ),
        run_alg_adapt(items, &AdaptParams::practical()),
        run_alg_adapt_merge(items, &MergeParams::practical()),
        run_alg_final(
            items,
            &FinalParams {
                min_recurse: 8,
                ..FinalParams::practical()
            },
        ),
    ]
}

fn cost_by_rescan(values: &[f64]) -> f64 {
    let mut total = 0.0;
    for i in 1..values.len() {
        let gap = values[i] - values[i - 1];
        total += if gap < 0.0 { -gap } else { gap };
    }
    total
}

fn permutations(v: &mut Vec<f64>, k: usize, best: &mut f64) {
    if k == v.len() {
        *best = best.min(cost_by_rescan(v));
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permutations(v, k + 1, best);
        v.swap(k, i);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn every_algorithm_places_a_bijection(seed in any::<u64>(), n in 1usize..1500) {
        let items = uniform_stream(Seed(seed), n);
        for t in all_algorithms(&items) {
            prop_assert!(t.array.is_full(), "{} left a hole", t.algorithm);
            prop_assert_eq!(t.placements.len(), n);
            let r = check_structure(&t);
            prop_assert_eq!(r.bijection, 0, "{}", t.algorithm);
            prop_assert_eq!(r.after_failure, 0, "{}", t.algorithm);
            let mut placed: Vec<f64> = t.array.values().to_vec();
            let mut want = items.clone();
            placed.sort_by(f64::total_cmp);
            want.sort_by(f64::total_cmp);
            prop_assert_eq!(placed, want);
        }
    }

    #[test]
    fn cost_matches_rescan(values in prop::collection::vec(0.0f64..1.0, 1..400)) {
        let a = CellArray::from_values(&values).unwrap();
        let c = eval_cost(&a).unwrap();
        prop_assert!((c - cost_by_rescan(&values)).abs() <= 1e-12 * values.len() as f64);
    }

    #[test]
    fn sorted_order_is_optimal(values in prop::collection::vec(0.0f64..1.0, 1..=8)) {
        let mut v = values.clone();
        let mut best = f64::INFINITY;
        permutations(&mut v, 0, &mut best);
        prop_assert!(best >= offline_cost(&values).unwrap() - 1e-12);
    }

    #[test]
    fn m_bound_is_quotient_minus_margin(b in 1u64..200, q in 1u64..5000) {
        let n = b * q;
        let x = q as f64;
        prop_assert_eq!(m_bound(n, b).unwrap() as f64, x - d(x).unwrap());
    }

    #[test]
    fn segments_partition_the_interval(v in 0.0f64..1.0, b in 1u64..10_000) {
        let s = segment_of(v, b).unwrap();
        prop_assert!(s.lower() <= v && v < s.upper());
        prop_assert!(s.contains(v));
        // nested granularities agree
        let coarse = segment_of(v, b).unwrap();
        let fine = segment_of(v, b * 4).unwrap();
        prop_assert!(coarse.contains_segment(&fine));
    }

    #[test]
    fn pool_distribution_conserves(seed in any::<u64>(), b in 1u64..6, m in 0u64..40, extra in 0u64..300) {
        let p = PoolDistParams::new(b * m + extra, b, m).unwrap();
        let s = pool_dist_sample_traced(Seed(seed), p);
        if !s.underflow {
            prop_assert_eq!(s.absorbed.len() + s.y.len(), p.n as usize);
            prop_assert_eq!(s.y.len() as u64, extra);
        } else {
            prop_assert!(s.absorbed.len() + s.y.len() < p.n as usize);
        }
        // prefix absorption: per segment, the absorbed items are the
        // earliest arrivals
        let x = uniform_stream(Seed(seed), p.n as usize);
        for seg in 0..b {
            let arrivals: Vec<f64> = x.iter().copied().filter(|&v| segment_of(v, b).unwrap().index == seg + 1).collect();
            let absorbed: Vec<f64> = s.absorbed.iter().copied().filter(|&v| segment_of(v, b).unwrap().index == seg + 1).collect();
            let k = (m as usize).min(arrivals.len());
            prop_assert_eq!(&absorbed[..], &arrivals[..k]);
        }
    }

    #[test]
    fn classification_counts_prior_arrivals(seed in any::<u64>(), m in 0u64..10) {
        let inst = PoolInstance::new(4 * m + 20, 4, m).unwrap();
        let x = uniform_stream(Seed(seed), inst.n as usize);
        let real = (0..x.len()).filter(|&i| classify_item(&inst, &x[..i], x[i]) == ItemClass::Real).count();
        let sample = pool_dist_from_draws(&x, PoolDistParams::new(inst.n, inst.b, inst.m).unwrap());
        if !sample.underflow {
            prop_assert_eq!(real, inst.array_len());
        }
    }
}

#[test]
fn pool_runs_fill_exactly_their_real_items() {
    let params = FinalParams::practical();
    for seed in 0..20 {
        let inst = PoolInstance::new(4096, 4, 960).unwrap();
        let s = pool_dist_sample_traced(Seed(seed), PoolDistParams::new(4096, 4, 960).unwrap());
        if s.underflow {
            continue;
        }
        let x = uniform_stream(Seed(seed), 4096);
        let t = run_alg_pool(&x, inst, &params);
        assert_eq!(t.array.len(), 256);
        assert_eq!(t.placements.len(), 256);
        assert!(t.array.is_full());
        let mut placed: Vec<f64> = t.array.values().to_vec();
        let mut y = s.y.clone();
        placed.sort_by(f64::total_cmp);
        y.sort_by(f64::total_cmp);
        assert_eq!(placed, y);
    }
}
