//! Stored non-convexity witnesses must keep violating midpoint concavity or
//! convexity. Regenerate with
//! `cargo test -p broja-pid --test witnesses -- --ignored`.

use std::path::PathBuf;

use serde_json::{json, Value};

use broja_pid::pid::{nonconvexity_witness, Witness};
use broja_pid::{pid, JointDistribution, Quantity};

const MIN_MARGIN: f64 = 1e-4;
const SEED: u64 = 42;

fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/witnesses.json")
}

fn value(q: Quantity, shape: [usize; 3], pmf: &[f64]) -> f64 {
    let p = JointDistribution::from_dense(shape, pmf.to_vec()).unwrap();
    pid(&p).unwrap().get(q)
}

#[test]
fn stored_witnesses_still_hold() {
    let text = std::fs::read_to_string(fixture_path()).unwrap();
    let stored: Vec<Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(stored.len(), 8);
    for entry in stored {
        let q: Quantity = entry["quantity"].as_str().unwrap().parse().unwrap();
        let kind = entry["kind"].as_str().unwrap();
        let w: Witness = serde_json::from_value(entry["witness"].clone()).unwrap();
        let f1 = value(q, w.shape, &w.p1);
        let f2 = value(q, w.shape, &w.p2);
        let mid: Vec<f64> =
            w.p1.iter()
                .zip(&w.p2)
                .map(|(a, b)| w.theta * a + (1.0 - w.theta) * b)
                .collect();
        let f_mid = value(q, w.shape, &mid);
        for (now, then) in [(f1, w.f1), (f2, w.f2), (f_mid, w.f_mid)] {
            assert!(
                (now - then).abs() < 1e-7,
                "{} {kind}: {now} vs {then}",
                q.name()
            );
        }
        let chord = w.theta * f1 + (1.0 - w.theta) * f2;
        let margin = match kind {
            "concavity" => chord - f_mid,
            "convexity" => f_mid - chord,
            other => panic!("unknown witness kind {other}"),
        };
        assert!(margin > MIN_MARGIN, "{} {kind}: margin {margin}", q.name());
    }
}

#[test]
#[ignore]
fn regenerate_fixtures() {
    let mut out = Vec::new();
    for q in [Quantity::CI, Quantity::SI, Quantity::UIY, Quantity::UIZ] {
        let r = nonconvexity_witness(q, [2, 2, 2], 10_000, MIN_MARGIN, SEED).unwrap();
        for (kind, w) in [("concavity", r.concavity), ("convexity", r.convexity)] {
            let w = w.unwrap_or_else(|| panic!("no {kind} witness for {}", q.name()));
            out.push(json!({ "quantity": q.name(), "kind": kind, "seed": SEED, "witness": w }));
        }
    }
    let text = serde_json::to_string_pretty(&out).unwrap() + "\n";
    std::fs::write(fixture_path(), text).unwrap();
}
