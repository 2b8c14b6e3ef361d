//! End-to-end tests of the `mixlab` binary: the suite determinism
//! acceptance criterion, exit-code contract, and the batch evaluation
//! surface.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mixlab"))
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn dir_snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).unwrap() {
        let entry = entry.unwrap();
        out.insert(
            entry.file_name().to_string_lossy().into_owned(),
            fs::read(entry.path()).unwrap(),
        );
    }
    out
}

const TWO_ATOM: &str = r#"{"dimension": 1, "mixer": {"type": "scalar_atomic", "scales": [1.0, 2.0], "weights": [0.5, 0.5]}}"#;

#[test]
fn criterion_9_suite_determinism() {
    let start = std::time::Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut snapshots = Vec::new();
    for (label, threads) in [("run1", "1"), ("run2", "1"), ("t8a", "8"), ("t8b", "8")] {
        let out_dir = tmp.path().join(label);
        let status = bin()
            .args(["suite", "--seed", "7", "--out"])
            .arg(&out_dir)
            .env("MIXLAB_THREADS", threads)
            .status()
            .unwrap();
        assert!(status.success(), "suite run {label} failed");
        snapshots.push((label, dir_snapshot(&out_dir)));
    }
    let (first_label, first) = &snapshots[0];
    assert!(first.contains_key("summary.json"));
    assert!(first.contains_key("clt_rate.csv"));
    for (label, snap) in &snapshots[1..] {
        assert_eq!(
            first.keys().collect::<Vec<_>>(),
            snap.keys().collect::<Vec<_>>(),
            "file sets differ between {first_label} and {label}"
        );
        for (name, bytes) in first {
            assert_eq!(
                bytes,
                snap.get(name).unwrap(),
                "{name} differs between {first_label} and {label}"
            );
        }
    }
    println!(
        "[PASS] criterion 9: suite --seed 7 byte-identical across two runs and across \
         MIXLAB_THREADS in {{1, 8}} ({} files), in {:?}",
        first.len(),
        start.elapsed()
    );
}

#[test]
fn exit_codes_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("two_atom.json");
    write(&model, TWO_ATOM);

    // entropy report on stdout, exit 0
    let out: Output = bin().args(["entropy", "--model"]).arg(&model).output().unwrap();
    assert!(out.status.success());
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((report["value"].as_f64().unwrap() - 1.8582455051510582).abs() < 1e-9);
    assert_eq!(report["method"], "quadrature");

    // a passing check exits 0
    let cfg = tmp.path().join("pair.json");
    write(
        &cfg,
        &format!(r#"{{"model1": {TWO_ATOM}, "model2": {TWO_ATOM}, "grid": 9}}"#),
    );
    let st = bin()
        .args(["check", "blachman_stam", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));

    // unknown flag is a usage error: exit 2
    let st = bin().arg("--definitely-not-a-flag").status().unwrap();
    assert_eq!(st.code(), Some(2));

    // unknown subcommand arguments as well
    let st = bin().args(["check", "no_such_check", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(st.code(), Some(2));

    // malformed config: exit 2 with line diagnostics
    let bad = tmp.path().join("bad.json");
    write(&bad, "{\"model1\": {\n  \"dimension\": oops\n}}");
    let out = bin()
        .args(["check", "blachman_stam", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line"), "diagnostics should name the line: {err}");

    // unknown keys in configs are hard errors
    let extra = tmp.path().join("extra.json");
    write(
        &extra,
        &format!(r#"{{"model1": {TWO_ATOM}, "model2": {TWO_ATOM}, "grid": 9, "oops": 1}}"#),
    );
    let st = bin().args(["check", "blachman_stam", "--config"]).arg(&extra).status().unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn eval_appends_density_and_score_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("two_atom.json");
    write(&model, TWO_ATOM);
    let pts = tmp.path().join("pts.csv");
    write(&pts, "0.0\n1.0\n-2.5\n");
    let out_csv = tmp.path().join("out.csv");

    let st = bin()
        .args(["eval", "--model"])
        .arg(&model)
        .arg("--points")
        .arg(&pts)
        .arg("--out")
        .arg(&out_csv)
        .status()
        .unwrap();
    assert!(st.success());

    let text = fs::read_to_string(&out_csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    let first: Vec<f64> = lines[0].split(',').map(|f| f.parse().unwrap()).collect();
    assert_eq!(first.len(), 3); // x, density, score
    assert!((first[1] - 0.2992067103010745).abs() < 1e-12);
    assert_eq!(first[2], 0.0);

    // round-trip exactness of the 17-significant-digit format
    let second: Vec<f64> = lines[1].split(',').map(|f| f.parse().unwrap()).collect();
    let re_rendered = format!("{:.16e}", second[1]);
    assert_eq!(re_rendered.parse::<f64>().unwrap(), second[1]);

    // dimension mismatch in the points file is a usage error
    write(&pts, "0.0,1.0\n");
    let st = bin()
        .args(["eval", "--model"])
        .arg(&model)
        .arg("--points")
        .arg(&pts)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn clt_rate_and_type_check_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("clt.json");
    write(
        &cfg,
        r#"{
  "base_model": {"type": "scalar_atomic", "scales": [1.0, 2.0], "weights": [0.5, 0.5]},
  "delta": 0.5,
  "weight_scheme": "equal",
  "n_values": [4, 16, 64, 256, 1024]
}"#,
    );
    let out_csv = tmp.path().join("rate.csv");
    let st = bin()
        .args(["clt-rate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_csv)
        .status()
        .unwrap();
    assert!(st.success());
    let text = fs::read_to_string(&out_csv).unwrap();
    assert!(text.starts_with("n,d,delta,scheme,deviation,error_bound,predictor,method,m,samples\n"));
    assert_eq!(text.lines().count(), 1 + 5 + 1, "header, five rows, fit line");
    assert!(text.lines().last().unwrap().starts_with("# fit: slope="));

    let report = tmp.path().join("type.json");
    let st = bin()
        .args(["type-check", "--p", "4", "--delta", "1", "--n", "8", "--d", "4", "--trials", "10", "--out"])
        .arg(&report)
        .status()
        .unwrap();
    assert!(st.success());
    let rep: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(rep["pass"], true);
    assert_eq!(rep["exhaustive"], true);
}

#[test]
fn min_fisher_trace() {
    let tmp = tempfile::tempdir().unwrap();
    let model = tmp.path().join("two_atom.json");
    write(&model, TWO_ATOM);
    let trace = tmp.path().join("trace.csv");
    let st = bin()
        .args(["min-fisher", "--model"])
        .arg(&model)
        .args(["--n", "2", "--out"])
        .arg(&trace)
        .status()
        .unwrap();
    assert!(st.success());
    let text = fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("sq_1,sq_2,value,error_bound\n"));
    assert_eq!(text.lines().count(), 1 + 41 + 1, "header, 41 lattice rows, best line");
    assert!(text.lines().last().unwrap().contains("entropy_max_at_equal_weights=true"));
}
