//! The JSON bench report must validate against the shipped schema file.

use hyliformer::bench::{emit_json, fit_loglog_slope, run_scaling_bench, BenchConfig, Mechanism};

fn schema() -> serde_json::Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../schemas/bench_report.schema.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn bench_json_validates_against_schema() {
    let validator = jsonschema::validator_for(&schema()).unwrap();

    let config = BenchConfig {
        ns: vec![64, 128, 256, 512, 1024],
        feature_dim: 8,
        warmup: 1,
        ..BenchConfig::default()
    };
    let mechanisms = [Mechanism::Hla, Mechanism::SsmScan];
    let records = run_scaling_bench(&mechanisms, &config).unwrap();
    let slopes: Vec<_> = mechanisms
        .iter()
        .map(|&m| fit_loglog_slope(&records, m).unwrap())
        .collect();
    let report: serde_json::Value =
        serde_json::from_str(&emit_json(&records, &slopes).unwrap()).unwrap();

    let errors: Vec<String> = validator.iter_errors(&report).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "schema violations: {errors:?}");
}

#[test]
fn schema_rejects_malformed_reports() {
    let validator = jsonschema::validator_for(&schema()).unwrap();
    for bad in [
        serde_json::json!({}),
        serde_json::json!({"records": [], "slopes": [{"mechanism": "softmax"}]}),
        serde_json::json!({
            "records": [{"mechanism": "warp_drive", "n": 1, "f": 1,
                         "runtime_ns": 1, "repeats": 1, "peak_bytes": 0, "threads": 1}],
            "slopes": []
        }),
    ] {
        assert!(!validator.is_valid(&bad), "accepted malformed report {bad}");
    }
}
