use std::io::Write;
use std::process::Command;

use fimix::families::{FamilyKind, MixtureModel};
use fimix::simulate::sample_mixture;
use serde_json::Value;

fn fimix(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_fimix"))
        .args(args)
        .env_remove("FIMIX_THREADS")
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn durations_file(n: usize, seed: u64, truth: (f64, f64, f64)) -> tempfile::NamedTempFile {
    let m = MixtureModel::from_params(FamilyKind::Weibull, truth.0, truth.1, truth.2).unwrap();
    let s = sample_mixture(&m, n, seed).unwrap();
    let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
    writeln!(f, "time").unwrap();
    for t in s.times() {
        writeln!(f, "{t}").unwrap();
    }
    f
}

fn counts_file() -> tempfile::NamedTempFile {
    let mut f = tempfile::Builder::new().suffix(".json").tempfile().unwrap();
    let rows: Vec<String> = [(0, 40), (1, 60), (2, 70), (3, 64), (4, 55), (5, 44), (6, 35), (7, 25), (8, 18), (9, 12), (10, 8), (12, 5), (14, 2)]
        .iter()
        .map(|(d, c)| format!("{{\"day\": {d}, \"count\": {c}}}"))
        .collect();
    write!(f, "[{}]", rows.join(", ")).unwrap();
    f
}

#[test]
fn nulldist_is_byte_reproducible() {
    let args = ["nulldist", "--family", "weibull", "--levels", "0.05", "--mc-draws", "1000000", "--seed", "7"];
    let (c1, a, _) = fimix(&args);
    let (c2, b, _) = fimix(&args);
    assert_eq!((c1, c2), (0, 0));
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(lines.next(), Some("level,quantile,M,seed,family,version"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..1], &["0.05"]);
    assert_eq!(&row[2..5], &["1000000", "7", "weibull"]);
    assert_eq!(row[5], env!("CARGO_PKG_VERSION"));
}

#[test]
fn fit_test_and_gof_report_json() {
    let f = durations_file(600, 3, (0.2, 1.6, 0.6));
    let path = f.path().to_str().unwrap();
    let (code, out, err) = fimix(&["fit", "--data", path, "--seed", "4"]);
    assert_eq!(code, 0, "{err}");
    let fit: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(fit["family"], "weibull");
    assert_eq!(fit["seed"], 4);
    assert!(fit["profile_trace"]["grid"].as_array().unwrap().len() == 51);

    let (code, out, err) = fimix(&["test", "--data", path, "--mc-draws", "100000"]);
    assert_eq!(code, 0, "{err}");
    let test: Value = serde_json::from_str(&out).unwrap();
    assert!(test["r_n"].as_f64().unwrap() > 0.0);
    assert!(test["p_value"].as_f64().unwrap() < 0.05);
    assert_eq!(test["version"], env!("CARGO_PKG_VERSION"));
    assert!(test["constants"]["delta1"].is_number());

    let (code, out, err) = fimix(&["gof", "--data", path, "--family", "gamma"]);
    assert_eq!(code, 0, "{err}");
    let gof: Value = serde_json::from_str(&out).unwrap();
    assert!(gof["gof"]["G_n"].as_f64().unwrap() >= 0.0);
    assert_eq!(gof["gof"]["df"].as_i64().unwrap(), gof["gof"]["k"].as_i64().unwrap() - 4);
}

#[test]
fn counts_need_an_imputation() {
    let f = counts_file();
    let path = f.path().to_str().unwrap();
    let (code, _, err) = fimix(&["fit", "--data", path]);
    assert_eq!(code, 1);
    let diag: Value = serde_json::from_str(err.trim()).unwrap();
    assert_eq!(diag["error"], "domain");
    let (code, out, _) = fimix(&["fit", "--data", path, "--impute", "jitter", "--seed", "9"]);
    assert_eq!(code, 0);
    let (_, again, _) = fimix(&["fit", "--data", path, "--impute", "jitter", "--seed", "9"]);
    assert_eq!(out, again);
    let (code, _, _) = fimix(&["fit", "--data", path, "--impute", "midpoint"]);
    assert_eq!(code, 0);
}

#[test]
fn analyze_summarizes_replicates() {
    let f = counts_file();
    let (code, out, err) = fimix(&["analyze", "--data", f.path().to_str().unwrap(), "--reps", "3", "--mc-draws", "20000", "--seed", "2"]);
    assert_eq!(code, 0, "{err}");
    let v: Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["jitter"]["reps"], 3);
    assert_eq!(v["jitter"]["replicates"].as_array().unwrap().len(), 3);
    assert!(v["midpoint"]["r_n"].as_f64().unwrap() >= 0.0);
    assert_eq!(v["seed"], 2);
}

#[test]
fn simulate_is_thread_count_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let qq = dir.path().join("qq.csv");
    let base = ["simulate", "--mode", "type1", "--n", "80", "--reps", "40", "--truth", "1,1,1", "--seed", "5", "--mc-draws", "50000"];
    let mut one = base.to_vec();
    one.extend(["--threads", "1", "--qq-out", qq.to_str().unwrap()]);
    let mut three = base.to_vec();
    three.extend(["--threads", "3"]);
    let (c1, a, e1) = fimix(&one);
    let (c3, b, _) = fimix(&three);
    assert_eq!((c1, c3), (0, 0), "{e1}");
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 4);
    let qq = std::fs::read_to_string(qq).unwrap();
    assert_eq!(qq.lines().next(), Some("empirical,limit"));
    assert_eq!(qq.lines().count(), 41);
    let (code, _, _) = fimix(&["simulate", "--mode", "power", "--n", "80", "--reps", "4", "--truth", "1,1,1"]);
    assert_eq!(code, 1);
}

#[test]
fn usage_errors() {
    assert_eq!(fimix(&["fit", "--data", "x.csv", "--nope"]).0, 2);
    assert_eq!(fimix(&["frobnicate"]).0, 2);
    assert_eq!(fimix(&["fit", "--data", "x.csv", "--family", "cauchy"]).0, 2);
    let (code, out, _) = fimix(&["--version"]);
    assert_eq!(code, 0);
    assert!(out.contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn null_p_values_are_rarely_small() {
    // Exponential data: p-values should be roughly uniform, so p ≤ 0.01 in
    // about one run in a hundred.
    let small = (0..100)
        .filter(|&seed| {
            let f = durations_file(1000, 1000 + seed, (1.0, 1.0, 1.0));
            let (mut out, mut err) = (Vec::new(), Vec::new());
            let seed_arg = seed.to_string();
            let code = fimix::cli::run(
                ["fimix", "test", "--data", f.path().to_str().unwrap(), "--mc-draws", "100000", "--seed", &seed_arg],
                &mut out,
                &mut err,
            );
            assert_eq!(code, 0);
            let v: Value = serde_json::from_slice(&out).unwrap();
            v["p_value"].as_f64().unwrap() <= 0.01
        })
        .count();
    assert!(small <= 2, "{small} of 100 runs had p ≤ 0.01");
}
