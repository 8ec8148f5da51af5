//! End-to-end checks of the `hyla` binary: exit codes, determinism of the
//! verify output, dataset generation round trips, and the bench report
//! files.

use std::process::{Command, Output};

fn hyla(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyla"))
        .args(args)
        .env_remove("HYLA_THREADS")
        .output()
        .expect("spawn hyla")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

#[test]
fn verify_is_deterministic_and_green() {
    let a = hyla(&["verify", "--scope", "poincare", "--seed", "7"]);
    let b = hyla(&["verify", "--scope", "poincare", "--seed", "7"]);
    assert_eq!(exit_code(&a), 0, "stderr: {}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout, "verify output differs between runs");
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.contains("[PASS]"));
    assert!(!text.contains("[FAIL]"));
    assert!(text.contains("seed 7"));
}

#[test]
fn verify_rejects_positive_kappa_as_usage_error() {
    let out = hyla(&["verify", "--kappa", "1.0"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn verify_rejects_multiple_threads() {
    let out = hyla(&["verify", "--threads", "4"]);
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("single-threaded"));
}

#[test]
fn unknown_subcommand_is_usage_error() {
    let out = hyla(&["frobnicate"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn gen_data_demo_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("ds");
    let data_s = data.to_str().unwrap();

    let gen = hyla(&["gen-data", "--out", data_s, "--per-class", "6"]);
    assert_eq!(exit_code(&gen), 0, "stderr: {}", String::from_utf8_lossy(&gen.stderr));
    assert!(data.join("manifest.json").exists());
    let bins = std::fs::read_dir(&data)
        .unwrap()
        .filter(|e| {
            e.as_ref().unwrap().path().extension().is_some_and(|x| x == "bin")
        })
        .count();
    assert_eq!(bins, 24, "expected 4 classes x 6 samples");

    // refusing to clobber is an I/O error (exit 3)
    let again = hyla(&["gen-data", "--out", data_s, "--per-class", "6"]);
    assert_eq!(exit_code(&again), 3);

    // forced rewrite with the same seed is byte-identical
    let manifest_before = std::fs::read(data.join("manifest.json")).unwrap();
    let forced = hyla(&["gen-data", "--out", data_s, "--per-class", "6", "--force"]);
    assert_eq!(exit_code(&forced), 0);
    let manifest_after = std::fs::read(data.join("manifest.json")).unwrap();
    assert_eq!(manifest_before, manifest_after);

    let demo = hyla(&["demo", "--data", data_s]);
    assert_eq!(exit_code(&demo), 0, "stderr: {}", String::from_utf8_lossy(&demo.stderr));
    let text = String::from_utf8(demo.stdout).unwrap();
    assert!(text.contains("probe train accuracy"));
    assert!(text.contains("chance baseline 0.2500"));
}

#[test]
fn demo_on_missing_dataset_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = hyla(&["demo", "--data", missing.to_str().unwrap()]);
    assert_eq!(exit_code(&out), 3);
}

#[test]
fn bench_writes_parseable_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("bench");
    let out = hyla(&[
        "bench",
        "--grid",
        "64,128,256,512,1024",
        "--feature-dim",
        "16",
        "--warmup",
        "1",
        "--mechanisms",
        "hla,linear_identity",
        "--threads",
        "1",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let csv = std::fs::read_to_string(out_dir.join("bench.csv")).unwrap();
    assert!(csv.starts_with("mechanism,N,F,runtime_ns,repeats,peak_bytes"));
    let records = hyliformer::bench::parse_csv(&csv).unwrap();
    assert_eq!(records.len(), 10, "2 mechanisms x 5 grid points");

    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("bench.json")).unwrap())
            .unwrap();
    assert_eq!(json["records"].as_array().unwrap().len(), 10);
    assert_eq!(json["slopes"].as_array().unwrap().len(), 2);
}

#[test]
fn bench_rejects_short_grid_as_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = hyla(&[
        "bench",
        "--grid",
        "64,128",
        "--out",
        dir.path().join("b").to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
}
