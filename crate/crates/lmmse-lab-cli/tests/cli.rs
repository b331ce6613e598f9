//! End-to-end tests driving the compiled binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lmmse_lab::matio::{read_matrix, write_matrix};
use lmmse_lab::model::{build_model, solve_lmmse};
use nalgebra::DMatrix;

const BIN: &str = env!("CARGO_BIN_EXE_lmmse-lab");

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .args(["--out", dir.to_str().unwrap()])
        .output()
        .expect("binary runs")
}

fn assert_ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn read_json(path: PathBuf) -> serde_json::Value {
    let body = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    serde_json::from_str(&body).expect("valid JSON")
}

#[test]
fn plan_reproduces_published_sample_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["plan", "--M", "784", "--eps", "0.0625", "--format", "json"]);
    assert_ok(&out);
    let table = read_json(dir.path().join("plan_0.0625.json"));
    assert_eq!(table["n0"], serde_json::json!(13329));
}

#[test]
fn plan_tail_rule_orders_n1_below_n2() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["plan", "--M", "16", "--eps", "1", "--delta", "0.05", "--format", "json"],
    );
    assert_ok(&out);
    let table = read_json(dir.path().join("plan_1.json"));
    let n1 = table["n1"].as_f64().unwrap();
    let n2 = table["n2"].as_f64().unwrap();
    assert!(n1 <= n2, "n1 = {n1}, n2 = {n2}");
}

#[test]
fn plan_without_dimension_is_a_usage_error() {
    let out = Command::new(BIN).args(["plan", "--eps", "0.25"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn write_scalar(path: &Path, v: f64) {
    write_matrix(path, &DMatrix::from_element(1, 1, v)).unwrap();
}

#[test]
fn lmmse_scalar_identity_model_halves_the_observation() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let cxx = dir.path().join("cxx.txt");
    let czz = dir.path().join("czz.txt");
    write_scalar(&a, 1.0);
    write_scalar(&cxx, 1.0);
    write_scalar(&czz, 1.0);
    let out = run(
        dir.path(),
        &["lmmse", "--a", a.to_str().unwrap(), "--cxx", cxx.to_str().unwrap(), "--czz", czz.to_str().unwrap()],
    );
    assert_ok(&out);
    let theta = read_matrix(&dir.path().join("lmmse_theta_star.txt")).unwrap();
    assert!((theta[(0, 0)] - 0.5).abs() < 1e-12);
}

#[test]
fn lmmse_files_round_trip_the_solution_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.5, -0.25, 0.0, 1.5, 2.0 / 3.0]);
    let cxx = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, 0.0, 0.1, 0.0, 0.7]);
    let czz = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.4]);
    let pa = dir.path().join("a.txt");
    let pxx = dir.path().join("cxx.txt");
    let pzz = dir.path().join("czz.txt");
    write_matrix(&pa, &a).unwrap();
    write_matrix(&pxx, &cxx).unwrap();
    write_matrix(&pzz, &czz).unwrap();
    let out = run(
        dir.path(),
        &["lmmse", "--a", pa.to_str().unwrap(), "--cxx", pxx.to_str().unwrap(), "--czz", pzz.to_str().unwrap()],
    );
    assert_ok(&out);
    let sol = solve_lmmse(&build_model(a, cxx, czz).unwrap()).unwrap();
    for (file, expected) in [
        ("lmmse_theta_star.txt", &sol.theta_star),
        ("lmmse_cee.txt", &sol.cee),
        ("lmmse_cyy.txt", &sol.cyy),
    ] {
        let loaded = read_matrix(&dir.path().join(file)).unwrap();
        assert_eq!(&loaded, expected, "{file} did not round-trip bitwise");
    }
}

#[test]
fn lmmse_rejects_indefinite_prior_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let bad = dir.path().join("bad.txt");
    let czz = dir.path().join("czz.txt");
    write_scalar(&a, 1.0);
    write_scalar(&bad, -1.0);
    write_scalar(&czz, 1.0);
    let out = run(
        dir.path(),
        &["lmmse", "--a", a.to_str().unwrap(), "--cxx", bad.to_str().unwrap(), "--czz", czz.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("positive definite"), "stderr: {stderr}");
}

#[test]
fn bounds_quadratic_form_matches_hand_arithmetic_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["bounds", "quadratic-form", "--trace", "16", "--trace2", "16", "--norm", "1", "--sigma", "1", "--t", "2"],
    );
    assert_ok(&out);
    let csv = std::fs::read_to_string(dir.path().join("bounds_quadratic-form.csv")).unwrap();
    let row = csv.lines().nth(1).unwrap();
    let value: f64 = row.strip_prefix("bound,").unwrap().parse().unwrap();
    assert_eq!(value, 16.0 + 2.0 * 32.0f64.sqrt() + 4.0);
}

#[test]
fn bounds_rejects_unknown_names_and_negative_t() {
    let unknown = Command::new(BIN).args(["bounds", "no-such-bound"]).output().unwrap();
    assert_eq!(unknown.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let negative = run(dir.path(), &["bounds", "sum", "--M", "4", "--sigma", "1", "--t", "-1"]);
    assert_eq!(negative.status.code(), Some(2));
}

fn strip_wall_time(mut sidecar: serde_json::Value) -> serde_json::Value {
    sidecar.as_object_mut().unwrap().remove("wall_time_secs");
    sidecar
}

#[test]
fn gaussian_campaign_reruns_byte_identical() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    let args = ["gaussian-exp", "--M", "4", "--N", "4", "--eps", "0.5", "--reps", "12", "--seed", "9"];
    assert_ok(&run(dir_a.path(), &args));
    assert_ok(&run(dir_b.path(), &args));
    for file in ["gaussian-exp_0.5_9.csv", "gaussian-exp_0.5_9_raw.csv"] {
        let a = std::fs::read(dir_a.path().join(file)).unwrap();
        let b = std::fs::read(dir_b.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    let meta_a = strip_wall_time(read_json(dir_a.path().join("gaussian-exp_9.meta.json")));
    let meta_b = strip_wall_time(read_json(dir_b.path().join("gaussian-exp_9.meta.json")));
    assert_eq!(meta_a, meta_b);
}

#[test]
fn csv_and_json_formats_encode_identical_numbers() {
    let dir_csv = tempfile::tempdir().unwrap();
    let dir_json = tempfile::tempdir().unwrap();
    let base = ["gaussian-exp", "--M", "3", "--N", "3", "--eps", "1", "--reps", "10", "--seed", "4"];
    assert_ok(&run(dir_csv.path(), &base));
    let mut json_args = base.to_vec();
    json_args.extend(["--format", "json"]);
    assert_ok(&run(dir_json.path(), &json_args));
    let report = read_json(dir_json.path().join("gaussian-exp_1_4.json"));
    let tau_csv = std::fs::read_to_string(dir_csv.path().join("gaussian-exp_1_4.csv")).unwrap();
    let taus: Vec<f64> = report["tau_grid"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let fracs: Vec<f64> =
        report["exceed_fractions"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    let rows: Vec<(f64, f64)> = tau_csv
        .lines()
        .skip(1)
        .map(|line| {
            let (tau, frac) = line.split_once(',').unwrap();
            (tau.parse().unwrap(), frac.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), taus.len());
    for (i, (tau, frac)) in rows.iter().enumerate() {
        assert_eq!(*tau, taus[i], "tau row {i}");
        assert_eq!(*frac, fracs[i], "fraction row {i}");
    }
    let mse_csv = std::fs::read_to_string(dir_csv.path().join("gaussian-exp_1_4_raw.csv")).unwrap();
    let mses: Vec<f64> = report["mse_values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for (i, line) in mse_csv.lines().skip(1).enumerate() {
        let mse: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(mse, mses[i], "mse row {i}");
    }
}

#[test]
fn denoise_campaign_runs_from_synthetic_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["denoise-exp", "--synthetic", "16,300", "--eps", "1", "--reps", "8", "--seed", "6"],
    );
    assert_ok(&out);
    let raw = std::fs::read_to_string(dir.path().join("denoise-exp_1_6_raw.csv")).unwrap();
    let mut lines = raw.lines();
    assert_eq!(lines.next(), Some("replication,mse,test_mse"));
    for line in lines {
        let test_cell = line.split(',').nth(2).unwrap();
        let test: f64 = test_cell.parse().expect("test_mse filled in");
        assert!(test.is_finite() && test > 0.0);
    }
}

#[test]
fn wishart_summary_tracks_the_exact_expectation() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &["wishart", "--M", "8", "--n", "41", "--reps", "200", "--seed", "1", "--format", "json"],
    );
    assert_ok(&out);
    let summary = read_json(dir.path().join("wishart_1.json"));
    let mean = summary["mean_trace"].as_f64().unwrap();
    let reference = summary["reference_wishart"].as_f64().unwrap();
    assert_eq!(reference, 0.25);
    assert!((mean - reference).abs() / reference < 0.1, "mean = {mean}");
    assert!(summary["reference_lower"].as_f64().unwrap() < mean);
}

/// 16-dimensional IDX fixture: `count` images of 4×4 with varied bytes.
fn write_idx_fixture(path: &Path, count: usize) {
    let mut bytes = Vec::with_capacity(16 + count * 16);
    bytes.extend_from_slice(&0x0000_0803u32.to_be_bytes());
    bytes.extend_from_slice(&(count as u32).to_be_bytes());
    bytes.extend_from_slice(&4u32.to_be_bytes());
    bytes.extend_from_slice(&4u32.to_be_bytes());
    for i in 0..count {
        for p in 0..16 {
            bytes.push(((37 * i * i + 11 * i + 61 * p * p + p) % 251) as u8);
        }
    }
    std::fs::write(path, bytes).unwrap();
}

#[test]
fn denoise_campaign_reads_idx_files_from_env_dir() {
    let data = tempfile::tempdir().unwrap();
    write_idx_fixture(&data.path().join("train-images-idx3-ubyte"), 60);
    write_idx_fixture(&data.path().join("t10k-images-idx3-ubyte"), 20);
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(BIN)
        .args(["denoise-exp", "--eps", "1", "--reps", "5", "--seed", "2"])
        .args(["--out", dir.path().to_str().unwrap()])
        .env("LMMSE_LAB_DATA_DIR", data.path())
        .output()
        .unwrap();
    assert_ok(&out);
    // n0(16, 1) = 33 of the 60 fixture images per replication.
    let meta = read_json(dir.path().join("denoise-exp_2.meta.json"));
    assert_eq!(meta["config"]["cells"][0]["n"], serde_json::json!(33));
}
