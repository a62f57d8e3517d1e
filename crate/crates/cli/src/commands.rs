use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use broja_pid::pid::{
    gradient_audit, nonconvexity_witness, pid_with, random_directions, support_gradients,
    CheckOptions,
};
use broja_pid::{
    si_club, si_ext, verify_kkt, ExtractOptions, JointDistribution, PidError, PidResult, Quantity,
    SolveOptions, SolveReport, StochasticMatrix, Unit,
};

use crate::output::{cell_labels, in_units, unit_name};

/// Minimum violation, in nats, for a witness to count.
const WITNESS_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// The solver did not certify its optimum, or a check failed.
    NotCertified,
    /// The report is complete except for an enumeration that was refused.
    TooLarge,
}

pub struct Outcome {
    pub body: Map<String, Value>,
    pub summary: String,
    pub status: Status,
    /// Trace CSV of an extraction run.
    pub trace: Option<String>,
}

impl Outcome {
    fn new(body: Value, summary: String, status: Status) -> Self {
        let Value::Object(body) = body else {
            unreachable!("report bodies are objects")
        };
        Outcome {
            body,
            summary,
            status,
            trace: None,
        }
    }
}

pub struct Settings {
    pub unit: Unit,
    pub solve: SolveOptions,
    pub m: Option<usize>,
    pub restarts: usize,
    pub seed: u64,
    pub eps: f64,
    pub rel_tol: f64,
    pub ndirs: usize,
    pub attempts: usize,
}

/// Solves, keeping the best iterate when certification fails.
fn solve(p: &JointDistribution, opts: &SolveOptions) -> Result<(PidResult, SolveReport), PidError> {
    match pid_with(p, opts) {
        Ok(r) => Ok(r),
        Err(PidError::MaxIterationsExceeded(rep)) => Ok((PidResult::from_m(p, rep.m_value), *rep)),
        Err(e) => Err(e),
    }
}

fn status_of(rep: &SolveReport) -> Status {
    if rep.certified {
        Status::Ok
    } else {
        Status::NotCertified
    }
}

fn values(r: &PidResult, unit: Unit) -> Value {
    Quantity::ALL
        .iter()
        .map(|&q| (q.name().to_string(), in_units(r.get(q), unit)))
        .collect::<Map<_, _>>()
        .into()
}

fn certificate_residuals(rep: &SolveReport) -> Value {
    json!({
        "primal": rep.certificate.residual_primal,
        "stationarity": rep.certificate.residual_stationarity,
        "zero_cells": rep.certificate.residual_zero_cells,
    })
}

fn summary_line(r: &PidResult, unit: Unit) -> String {
    let k = unit.per_nat();
    format!(
        "CI {:.12} SI {:.12} UIy {:.12} UIz {:.12} ({})",
        r.ci * k,
        r.si * k,
        r.ui_y * k,
        r.ui_z * k,
        unit_name(unit)
    )
}

pub fn compute(p: &JointDistribution, cfg: &Settings) -> Result<Outcome, PidError> {
    let (r, rep) = solve(p, &cfg.solve)?;
    let ids = r.identity_residuals(p);
    let body = json!({
        "certified": rep.certified,
        "values": values(&r, cfg.unit),
        "identity_residuals": { "total": ids.total, "y": ids.y, "z": ids.z },
        "certificate_residuals": certificate_residuals(&rep),
        "iterations": rep.iterations,
    });
    Ok(Outcome::new(
        body,
        summary_line(&r, cfg.unit),
        status_of(&rep),
    ))
}

pub fn gradients(p: &JointDistribution, cfg: &Settings) -> Result<Outcome, PidError> {
    let (r, rep) = solve(p, &cfg.solve)?;
    if !rep.certified {
        let body = json!({
            "certified": false,
            "values": values(&r, cfg.unit),
            "certificate_residuals": certificate_residuals(&rep),
        });
        return Ok(Outcome::new(
            body,
            "solver did not certify the optimum".into(),
            Status::NotCertified,
        ));
    }
    let bundle = support_gradients(p, &rep)?;
    let cells: Vec<Value> = cell_labels(p)
        .into_iter()
        .enumerate()
        .filter(|&(k, _)| bundle.support[k])
        .map(|(k, mut cell)| {
            let obj = cell.as_object_mut().expect("label object");
            obj.insert("p".into(), json!(p.pmf()[k]));
            for q in Quantity::ALL {
                obj.insert(q.name().into(), json!(bundle.get(q)[k]));
            }
            cell
        })
        .collect();
    let body = json!({
        "certified": true,
        "smooth": bundle.smooth,
        "full_support": p.is_full_support(),
        "values": values(&r, cfg.unit),
        "gradients": cells,
    });
    let summary = format!(
        "{} support cells, {}",
        cells.len(),
        if bundle.smooth {
            "smooth"
        } else {
            "not smooth"
        }
    );
    Ok(Outcome::new(body, summary, Status::Ok))
}

pub fn gradcheck(p: &JointDistribution, cfg: &Settings) -> Result<Outcome, PidError> {
    let (_, rep) = solve(p, &cfg.solve)?;
    if !rep.certified {
        let body =
            json!({ "certified": false, "certificate_residuals": certificate_residuals(&rep) });
        return Ok(Outcome::new(
            body,
            "solver did not certify the optimum".into(),
            Status::NotCertified,
        ));
    }
    let bundle = support_gradients(p, &rep)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let directions = random_directions(p, cfg.ndirs, &mut rng);
    let opts = CheckOptions {
        step: cfg.eps,
        rel_tol: cfg.rel_tol,
        solve: cfg.solve,
    };
    let audit = gradient_audit(p, &bundle, &Quantity::ALL, &directions, &opts)?;
    let probes: Vec<Value> = audit
        .probes
        .iter()
        .map(|pr| {
            json!({
                "direction": pr.direction,
                "quantity": pr.quantity.name(),
                "predicted": pr.predicted,
                "observed": pr.observed,
                "tolerance": pr.tolerance,
                "pass": pr.pass,
            })
        })
        .collect();
    let body = json!({
        "certified": true,
        "smooth": bundle.smooth,
        "directions": directions.len(),
        "pass": audit.pass,
        "max_deviation": audit.max_deviation,
        "probes": probes,
    });
    let summary = format!(
        "{} (max deviation {:.3e} over {} probes)",
        if audit.pass { "pass" } else { "FAIL" },
        audit.max_deviation,
        audit.probes.len()
    );
    let status = if audit.pass {
        Status::Ok
    } else {
        Status::NotCertified
    };
    Ok(Outcome::new(body, summary, status))
}

pub fn kkt(p: &JointDistribution, cfg: &Settings) -> Result<Outcome, PidError> {
    let (r, rep) = solve(p, &cfg.solve)?;
    let report = verify_kkt(p, &rep.coupling, &rep.certificate, cfg.solve.tol_kkt);
    let l = p.labels();
    let [ns, ny, nz] = p.shape();
    let mut lambda = Vec::new();
    for s in 0..ns {
        for y in 0..ny {
            lambda.push(json!({ "s": l.s[s], "y": l.y[y], "value": rep.certificate.lambda(s, y) }));
        }
    }
    let mut mu = Vec::new();
    for s in 0..ns {
        for z in 0..nz {
            mu.push(json!({ "s": l.s[s], "z": l.z[z], "value": rep.certificate.mu(s, z) }));
        }
    }
    let coupling: Vec<Value> = cell_labels(p)
        .into_iter()
        .enumerate()
        .filter(|&(k, _)| rep.coupling.admissible[k])
        .map(|(k, mut cell)| {
            cell.as_object_mut()
                .expect("label object")
                .insert("q".into(), json!(rep.coupling.q[k]));
            cell
        })
        .collect();
    let zero_fibers: Vec<Value> = report
        .zero_fibers
        .iter()
        .map(|f| json!({ "y": l.y[f.y], "z": l.z[f.z], "exp_sum": f.exp_sum }))
        .collect();
    let body = json!({
        "certified": report.pass,
        "M": in_units(r.m, cfg.unit),
        "lambda": lambda,
        "mu": mu,
        "coupling": coupling,
        "residuals": {
            "primal": report.residual_primal,
            "stationarity": report.residual_stationarity,
            "zero_cells": report.residual_zero_cells,
        },
        "positive_fibers": report.positive_fibers,
        "zero_fibers": zero_fibers,
    });
    let summary = format!(
        "{}: primal {:.3e}, stationarity {:.3e}, zero cells {:.3e}, {} empty fibers",
        if report.pass {
            "certified"
        } else {
            "NOT certified"
        },
        report.residual_primal,
        report.residual_stationarity,
        report.residual_zero_cells,
        report.zero_fibers.len()
    );
    let status = if report.pass {
        Status::Ok
    } else {
        Status::NotCertified
    };
    Ok(Outcome::new(body, summary, status))
}

fn matrix_json(pi: &StochasticMatrix) -> Value {
    let entries: Vec<Vec<f64>> = (0..pi.rows())
        .map(|t| (0..pi.columns().len()).map(|s| pi.get(t, s)).collect())
        .collect();
    json!({ "columns": pi.columns(), "rows": pi.rows(), "entries": entries })
}

pub fn extract(p: &JointDistribution, cfg: &Settings) -> Result<Outcome, PidError> {
    let m = cfg.m.unwrap_or(p.shape()[0]);
    let opts = ExtractOptions {
        restarts: cfg.restarts,
        seed: cfg.seed,
        solve: cfg.solve,
        ..Default::default()
    };
    let club = si_club(p, m, &opts)?;
    let (exact, status) = match si_ext(p, m) {
        Ok(r) => (
            json!({
                "value": in_units(r.value, cfg.unit),
                "map": r.argmax.as_map(),
                "certified": r.certified,
            }),
            Status::Ok,
        ),
        Err(PidError::EnumerationTooLarge { count, limit }) => (
            json!({ "skipped": format!("{count} maps exceed the limit of {limit}") }),
            Status::TooLarge,
        ),
        Err(e) => return Err(e),
    };
    let k = cfg.unit.per_nat();
    let mut summary = format!(
        "SI_club(m={m}) = {:.12} {} over {} starts",
        club.value * k,
        unit_name(cfg.unit),
        club.restarts_used
    );
    if let Some(v) = exact.pointer("/value/nats").and_then(Value::as_f64) {
        summary.push_str(&format!(
            "\nSI_ext(m={m}) = {:.12} {}",
            v * k,
            unit_name(cfg.unit)
        ));
    }
    let body = json!({
        "m": m,
        "seed": cfg.seed,
        "restarts": cfg.restarts,
        "restarts_used": club.restarts_used,
        "value": in_units(club.value, cfg.unit),
        "certified": club.certified,
        "argmax": matrix_json(&club.argmax),
        "trace_points": club.trace.len(),
        "si_ext": exact,
    });
    let mut out = Outcome::new(body, summary, status);
    out.trace = Some(club.trace_csv());
    Ok(out)
}

pub fn witness(p: &JointDistribution, cfg: &Settings) -> Result<Outcome, PidError> {
    let shape = p.shape();
    let mut reports = Vec::new();
    let mut found = 0;
    for q in [Quantity::CI, Quantity::SI, Quantity::UIY, Quantity::UIZ] {
        let r = nonconvexity_witness(q, shape, cfg.attempts, WITNESS_MARGIN, cfg.seed)?;
        found += r.concavity.is_some() as usize + r.convexity.is_some() as usize;
        reports.push(serde_json::to_value(&r).expect("serializable report"));
    }
    let body = json!({
        "shape": shape,
        "attempts": cfg.attempts,
        "seed": cfg.seed,
        "min_margin": WITNESS_MARGIN,
        "reports": reports,
    });
    let summary = format!("{found} of 8 witnesses found on shape {shape:?}");
    Ok(Outcome::new(body, summary, Status::Ok))
}
