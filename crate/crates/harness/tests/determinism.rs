use stochsort::config::SeedRange;
use stochsort::experiment::{run_trials, summarize};
use stochsort::table::{data_lines, write_rows};
use stochsort::AlgoSpec;
use stochsort_core::engine::Profile;

fn csv(spec: &AlgoSpec, threads: usize) -> String {
    let rows = run_trials(spec, &[1, 2, 100, 2000], SeedRange::new(0, 16).unwrap(), Some(threads), false).unwrap();
    let mut buf = Vec::new();
    write_rows(&mut buf, &rows).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn rows_do_not_depend_on_threads() {
    for profile in [Profile::Paper, Profile::Practical] {
        for spec in AlgoSpec::all(profile) {
            let a = csv(&spec, 1);
            let b = csv(&spec, 4);
            assert_eq!(data_lines(&a), data_lines(&b), "{}", spec.name());
            assert_eq!(data_lines(&a).len(), 64);
        }
    }
}

#[test]
fn summaries_match_a_two_pass_recomputation() {
    let spec = AlgoSpec::all(Profile::Practical).pop().unwrap();
    let rows = run_trials(&spec, &[500, 3000], SeedRange::new(10, 60).unwrap(), None, false).unwrap();
    let s = summarize(&rows);
    assert_eq!(s.len(), 2);
    for cell in &s {
        let costs: Vec<f64> = rows.iter().filter(|r| r.n == cell.n).map(|r| r.cost).collect();
        let n = costs.len() as f64;
        let mean = costs.iter().sum::<f64>() / n;
        let var = costs.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert_eq!(cell.trials, 50);
        assert!((cell.mean - mean).abs() <= 1e-9 * mean.abs());
        assert!((cell.std_err - se).abs() <= 1e-9 * se.abs());
        assert!(cell.mean >= 0.0 && cell.mean <= cell.n as f64);
        let failed = rows.iter().filter(|r| r.n == cell.n && r.failed).count() as f64;
        assert_eq!(cell.failure_fraction, failed / n);
    }
}
