use std::path::Path;
use std::process::{Command, Output};

fn tarot(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tarot-sim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = tarot(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_writes_csv_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    ok(&[
        "run", "--trace", "constant:20", "--mode", "lll", "--fec", "rq", "--loss", "const:0.05", "--out", s(&out),
    ]);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "mode,loss,strategy,abr,quality,rebuffer_s,rebuffer_pct,overhead_pct,avg_bitrate_bps,decision_us_mean,decision_us_p99"
    );
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&row[..4], ["lll", "const:0.05", "rq", "throughput"]);
    assert_eq!(row[7], "50");
    assert!(lines.next().is_none());
}

#[test]
fn run_json_is_reproducible_without_timing() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for out in [&a, &b] {
        ok(&[
            "run",
            "--trace",
            "synthetic:cascade",
            "--fec",
            "rq-tarot",
            "--abr",
            "dynamic",
            "--loss",
            "var:0:0.05",
            "--seed",
            "9",
            "--per-segment",
            "--no-timing",
            "--out",
            s(out),
        ]);
    }
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["segments"].as_array().unwrap().len(), 135);
    assert_eq!(doc["summary"]["strategy"], "rq-tarot");
}

#[test]
fn per_segment_csv_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run.csv");
    ok(&["run", "--trace", "constant:10", "--fec", "rs-tarot", "--loss", "const:0.01", "--per-segment", "--out", s(&out)]);
    let side = std::fs::read_to_string(dir.path().join("run.segments.csv")).unwrap();
    assert!(side.starts_with("index,representation,"));
    assert_eq!(side.lines().count(), 136);
}

#[test]
fn generated_inputs_load_back() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.json");
    let manifest = dir.path().join("manifest.json");
    let hp = dir.path().join("hp.json");
    std::fs::write(&hp, r#"{"o_cap": 0.2}"#).unwrap();
    ok(&["gen-trace", "--archetype", "lte-belgium", "--periods", "120", "--out", s(&trace)]);
    ok(&["gen-manifest", "--out", s(&manifest)]);
    let out = dir.path().join("run.json");
    ok(&[
        "run",
        "--manifest",
        s(&manifest),
        "--trace",
        s(&trace),
        "--fec",
        "rfec",
        "--loss",
        "const:0.05",
        "--gamma",
        "0.7",
        "--hp",
        s(&hp),
        "--out",
        s(&out),
    ]);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(doc["totals"]["segments"], 135);
}

#[test]
fn sweep_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{"traces": ["constant:25", "missing-trace.json"], "losses": ["none", "const:0.05"],
            "strategies": ["none", "rq-tarot"], "modes": ["lll"], "seeds": [1]}"#,
    )
    .unwrap();
    let csv = dir.path().join("table.csv");
    let out = ok(&["sweep", "--spec", s(&spec), "--out", s(&csv)]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing-trace.json"));
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 5);

    let json = dir.path().join("table.json");
    ok(&["sweep", "--spec", s(&spec), "--out", s(&json)]);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(doc["rows"].as_array().unwrap().len(), 4);
    assert_eq!(doc["cells"].as_array().unwrap().len(), 4);
    assert_eq!(doc["failures"].as_array().unwrap().len(), 4);
}

#[test]
fn validation_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    for bad in [
        vec!["run", "--trace", "constant:10", "--loss", "const:2", "--out", s(&out)],
        vec!["run", "--trace", "constant:10", "--fec", "ldpc", "--out", s(&out)],
        vec!["run", "--trace", "constant:10", "--gamma", "-1", "--out", s(&out)],
        vec!["run", "--trace", "nowhere.json", "--out", s(&out)],
        vec!["run", "--trace", "constant:10", "--out", "/nonexistent-dir/x.csv"],
        vec!["sweep", "--spec", "nowhere.json", "--out", s(&out)],
    ] {
        let o = tarot(&bad);
        assert!(!o.status.success(), "{bad:?} should fail");
    }
}
