//! End-to-end tests of the `floret` binary: output contents, JSON shape,
//! determinism of seeded simulation, and exit codes.

use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../floret-core/fixtures")
        .join(name)
}

fn floret(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_floret"))
        .args(args)
        .env_remove("FLORET_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

#[test]
fn validate_reports_structure() {
    let out = floret(&["validate", fixture("johnson.json").to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("leaves (I)            = 9"));
    assert!(text.contains("degrees of freedom    = 5"));
    assert!(text.contains("severity"));
    assert!(text.contains("overall effect = true"));
}

#[test]
fn matrix_prints_labelled_rows() {
    let out = floret(&["matrix", fixture("regimen.json").to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("t1:positive"));
    assert!(text.contains("t2:negative"));
    assert!(text.contains("negative/negative"));
    // first data row of the regimen matrix is 2 2 1 0 0
    let row = text
        .lines()
        .find(|l| l.starts_with("t1:positive"))
        .unwrap();
    let values: Vec<&str> = row.split_whitespace().skip(1).collect();
    assert_eq!(values, ["2", "2", "1", "0", "0"]);
}

#[test]
fn fit_text_shows_rational_estimate() {
    let out = floret(&[
        "fit",
        fixture("vaccine.json").to_str().unwrap(),
        fixture("vaccine_data.json").to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("308/428"));
    assert!(text.contains("X2 = 11.84"));
    assert!(text.contains("G2 = 14.65"));
    assert!(text.contains("df = 2"));
}

#[test]
fn fit_json_round_trips_rationals() {
    let out = floret(&[
        "fit",
        fixture("johnson.json").to_str().unwrap(),
        fixture("johnson_data.json").to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["n"], 519);
    assert_eq!(v["gof"]["df"], 5);
    let sev = &v["theta_hat"][0]["theta"];
    assert_eq!(sev[0]["rational"]["num"], 305);
    assert_eq!(sev[0]["rational"]["den"], 519);
    assert_eq!(sev[1]["rational"]["num"], 144);
}

#[test]
fn fit_reads_csv_counts() {
    let out = floret(&[
        "fit",
        fixture("calves.json").to_str().unwrap(),
        fixture("calves_data.csv").to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["n"], 100);
    assert_eq!(v["theta_hat"][0]["theta"][0]["rational"]["num"], 80);
    assert_eq!(v["theta_hat"][0]["theta"][0]["rational"]["den"], 150);
}

#[test]
fn simulate_is_deterministic_and_respects_env_seed() {
    let model = fixture("calves.json");
    let args = [
        "simulate",
        model.to_str().unwrap(),
        "--theta",
        "infection=0.6,0.4",
        "--n",
        "500",
    ];
    let a = floret(&[&args[..], &["--seed", "42"]].concat());
    let b = Command::new(env!("CARGO_BIN_EXE_floret"))
        .args(args)
        .env("FLORET_SEED", "42")
        .output()
        .unwrap();
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);

    let counts: Vec<u64> = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(counts.len(), 3);
    assert_eq!(counts.iter().sum::<u64>(), 500);
}

#[test]
fn simulate_rejects_bad_theta() {
    let out = floret(&[
        "simulate",
        fixture("calves.json").to_str().unwrap(),
        "--theta",
        "infection=0.6,0.6",
        "--n",
        "10",
        "--seed",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_data_file_exits_2() {
    let out = floret(&[
        "fit",
        fixture("vaccine.json").to_str().unwrap(),
        "/no/such/file.json",
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn wrong_length_data_exits_2() {
    let dir = std::env::temp_dir().join("floret-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let data = dir.join("short.json");
    std::fs::write(&data, "[1, 2, 3]").unwrap();
    let out = floret(&[
        "fit",
        fixture("vaccine.json").to_str().unwrap(),
        data.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn malformed_model_exits_2() {
    let dir = std::env::temp_dir().join("floret-cli-test");
    std::fs::create_dir_all(&dir).unwrap();
    let model = dir.join("broken.json");
    std::fs::write(&model, "{ not json").unwrap();
    let out = floret(&["validate", model.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn mc_check_small_run_passes() {
    let out = floret(&[
        "mc-check",
        fixture("calves.json").to_str().unwrap(),
        "--theta",
        "infection=0.6,0.4",
        "--n",
        "5000",
        "--reps",
        "400",
        "--seed",
        "7",
        "--tolerance",
        "0.2",
    ]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["reps"], 400);
    assert_eq!(v["boundary_count"], 0);
}
