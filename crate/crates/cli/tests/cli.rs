use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn pid(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pid"))
        .args(args)
        .output()
        .expect("pid runs")
}

fn run(command: &str, file: &str, extra: &[&str]) -> (i32, Value, String) {
    let path = fixture(file);
    let mut args = vec![command, path.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = pid(&args);
    let json = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (
        out.status.code().unwrap(),
        json,
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn bits(v: &Value, q: &str) -> f64 {
    v["values"][q]["bits"].as_f64().unwrap()
}

fn numbers(v: &Value, out: &mut Vec<f64>) {
    match v {
        Value::Number(n) => out.extend(n.as_f64()),
        Value::Array(a) => a.iter().for_each(|x| numbers(x, out)),
        Value::Object(o) => o.values().for_each(|x| numbers(x, out)),
        _ => {}
    }
}

#[test]
fn xor_is_one_bit_of_synergy() {
    let (code, v, stderr) = run("compute", "xor.tsv", &[]);
    assert_eq!(code, 0, "{stderr}");
    assert!((bits(&v, "CI") - 1.0).abs() < 1e-5);
    for q in ["SI", "UIY", "UIZ"] {
        assert!(bits(&v, q).abs() < 1e-5, "{q}");
    }
    assert_eq!(v["certified"], Value::Bool(true));
}

#[test]
fn and_shared_information() {
    let (code, v, _) = run("compute", "and.tsv", &[]);
    assert_eq!(code, 0);
    assert!((bits(&v, "SI") - 0.311278).abs() < 1e-5);
    assert!((bits(&v, "CI") - 0.5).abs() < 1e-5);
}

#[test]
fn nats_only_when_asked() {
    let (_, v, stderr) = run("compute", "and.tsv", &["--unit", "nats"]);
    assert!(v["values"]["SI"].get("bits").is_none());
    assert!(v["values"]["SI"]["nats"].is_f64());
    assert!(stderr.contains("(nats)"));
}

#[test]
fn report_envelope() {
    let (_, v, _) = run("compute", "rdn.json", &[]);
    assert_eq!(v["tool"], "pid");
    assert_eq!(v["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(v["command"], "compute");
    let hash = v["input"]["sha256"].as_str().unwrap();
    assert_eq!(hash.len(), 64);
    assert!(hash.chars().all(|c| c.is_ascii_hexdigit()));
    assert_eq!(v["tolerances"]["tol_kkt"].as_f64(), Some(1e-7));
    let (_, w, _) = run("compute", "xor.tsv", &[]);
    assert_ne!(w["input"]["sha256"], v["input"]["sha256"]);
}

#[test]
fn twelve_significant_digits() {
    let (_, v, _) = run("gradients", "random_3x2x2.tsv", &[]);
    let mut all = Vec::new();
    numbers(&v, &mut all);
    assert!(all.len() > 50);
    for x in all {
        let rounded: f64 = format!("{x:.11e}").parse().unwrap();
        assert_eq!(rounded, x);
    }
}

#[test]
fn malformed_line_is_reported() {
    let (code, _, stderr) = run("compute", "malformed.tsv", &[]);
    assert_eq!(code, 1);
    assert!(stderr.contains("line 3"), "{stderr}");
}

#[test]
fn missing_file_is_an_input_error() {
    let out = pid(&["compute", "/nonexistent/p.tsv"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_distribution_exits_2() {
    let (code, _, stderr) = run("compute", "not_normalized.tsv", &[]);
    assert_eq!(code, 2);
    assert!(stderr.contains("mass"), "{stderr}");
    let (code, _, _) = run("compute", "and.tsv", &["--tol", "-1"]);
    assert_eq!(code, 2);
}

#[test]
fn kkt_on_and_has_two_empty_fibers() {
    let (code, v, _) = run("kkt", "and.tsv", &[]);
    assert_eq!(code, 0);
    let fibers = v["zero_fibers"].as_array().unwrap();
    let mut cells: Vec<(String, String)> = fibers
        .iter()
        .map(|f| {
            (
                f["y"].as_str().unwrap().into(),
                f["z"].as_str().unwrap().into(),
            )
        })
        .collect();
    cells.sort();
    assert_eq!(cells, [("0".into(), "1".into()), ("1".into(), "0".into())]);
    for f in fibers {
        assert!(f["exp_sum"].as_f64().unwrap() <= 1.0 + 1e-7);
    }
    assert_eq!(v["lambda"].as_array().unwrap().len(), 4);
}

#[test]
fn gradcheck_passes_on_a_smooth_instance() {
    let (code, v, stderr) = run("gradcheck", "random_3x2x2.tsv", &["--ndirs", "10"]);
    assert_eq!(code, 0, "{stderr}");
    assert_eq!(v["pass"], Value::Bool(true));
    assert!(v["max_deviation"].as_f64().unwrap() < 1e-4);
    assert_eq!(v["probes"].as_array().unwrap().len(), 50);
    assert!(stderr.starts_with("pass"));
}

#[test]
fn extract_rdn() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rdn.json");
    let (code, _, stderr) = run(
        "extract",
        "rdn.json",
        &[
            "--m",
            "2",
            "--restarts",
            "10",
            "--seed",
            "42",
            "--out",
            out.to_str().unwrap(),
        ],
    );
    assert_eq!(code, 0, "{stderr}");
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(v["value"]["bits"].as_f64().unwrap() >= 1.0 - 1e-4);
    assert_eq!(v["certified"], Value::Bool(false));
    assert_eq!(v["si_ext"]["certified"], Value::Bool(true));
    assert!(stderr.contains("SI_ext(m=2)"), "{stderr}");
    let csv = std::fs::read_to_string(dir.path().join("rdn.trace.csv")).unwrap();
    assert!(csv.starts_with("restart,iteration,objective_nats\n"));
    assert_eq!(
        csv.lines().count() - 1,
        v["trace_points"].as_u64().unwrap() as usize
    );
}

#[test]
fn repeated_runs_are_byte_identical() {
    let path = fixture("and.tsv");
    let args = [
        "extract",
        path.to_str().unwrap(),
        "--m",
        "3",
        "--restarts",
        "4",
        "--seed",
        "7",
    ];
    let a = pid(&args);
    let b = pid(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn enumeration_too_large_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("wide.tsv");
    let text: String = (0..8).map(|s| format!("{s}\t0\t0\t0.125\n")).collect();
    std::fs::write(&input, text).unwrap();
    let out = pid(&["extract", input.to_str().unwrap(), "--restarts", "0"]);
    assert_eq!(out.status.code(), Some(4));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["si_ext"]["skipped"].is_string());
    assert!(v["value"]["nats"].as_f64().unwrap().abs() < 1e-9);
}

#[test]
fn witness_without_attempts_finds_nothing() {
    let (code, v, stderr) = run("witness", "and.tsv", &["--attempts", "0"]);
    assert_eq!(code, 0);
    for r in v["reports"].as_array().unwrap() {
        assert!(r["concavity"].is_null() && r["convexity"].is_null());
    }
    assert!(stderr.starts_with("0 of 8"));
}

#[test]
fn witness_finds_all_eight() {
    let (code, v, _) = run("witness", "xor.tsv", &["--attempts", "2000"]);
    assert_eq!(code, 0);
    for r in v["reports"].as_array().unwrap() {
        assert!(r["concavity"]["margin"].as_f64().unwrap() > 1e-4);
        assert!(r["convexity"]["margin"].as_f64().unwrap() > 1e-4);
    }
}
