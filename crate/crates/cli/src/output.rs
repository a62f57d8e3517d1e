use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use broja_pid::{JointDistribution, Unit};

/// Significant digits of every number in the JSON output.
pub const DIGITS: usize = 12;

/// Rounds `x` to [`DIGITS`] significant digits. Non-finite values become
/// `null` in JSON.
pub fn round(x: f64) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let r: f64 = format!("{:.*e}", DIGITS - 1, x)
        .parse()
        .expect("formatted float");
    json!(r)
}

/// Rounds every floating-point number in `v`.
pub fn round_all(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => round(n.as_f64().expect("f64 number")),
        Value::Array(a) => Value::Array(a.into_iter().map(round_all).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_all(v))).collect()),
        other => other,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub struct Header<'a> {
    pub command: &'a str,
    pub path: &'a str,
    pub input: &'a [u8],
    pub tolerances: Value,
}

/// Fields shared by every report.
pub fn envelope(h: &Header, body: Map<String, Value>) -> Value {
    let mut out = Map::new();
    out.insert("tool".into(), json!("pid"));
    out.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    out.insert("command".into(), json!(h.command));
    out.insert(
        "input".into(),
        json!({ "path": h.path, "sha256": sha256_hex(h.input) }),
    );
    out.insert("tolerances".into(), h.tolerances.clone());
    out.extend(body);
    round_all(Value::Object(out))
}

/// `{"nats": .., "bits": ..}` for a value in nats, or nats alone.
pub fn in_units(nats: f64, unit: Unit) -> Value {
    match unit {
        Unit::Nats => json!({ "nats": nats }),
        Unit::Bits => json!({ "nats": nats, "bits": nats * Unit::Bits.per_nat() }),
    }
}

pub fn unit_name(unit: Unit) -> &'static str {
    match unit {
        Unit::Nats => "nats",
        Unit::Bits => "bits",
    }
}

/// Cells of `p` as `{"s", "y", "z"}` label objects, row-major.
pub fn cell_labels(p: &JointDistribution) -> Vec<Value> {
    let l = p.labels();
    p.cells()
        .map(|(s, y, z)| json!({ "s": l.s[s], "y": l.y[y], "z": l.z[z] }))
        .collect()
}
