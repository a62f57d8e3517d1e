//! Shared information extractable by garbling `S`: the best `SI(Π(p))` over
//! deterministic maps `S → [m]` (exact, by enumeration) and over stochastic
//! `m × |S|` matrices (projected supergradient ascent, a lower bound).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::Serialize;

use crate::dist::{pushforward, JointDistribution, StochasticMatrix};
use crate::error::{PidError, Result};
use crate::pid::{pid_with, support_gradients};
use crate::solver::SolveOptions;

mod simplex;

pub use simplex::project_simplex;

/// Largest number of maps `si_ext` will enumerate.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExtractOptions {
    /// Random Dirichlet(1) starts, on top of the identity-padded start and
    /// any warm starts.
    pub restarts: usize,
    pub max_steps: usize,
    pub seed: u64,
    /// Initial step of the backtracking search.
    pub eta0: f64,
    /// Halvings before falling back to the diminishing step `eta0 / √k`.
    pub max_halvings: usize,
    /// Stop after `patience` consecutive steps with relative improvement
    /// below `rel_improvement`.
    pub rel_improvement: f64,
    pub patience: usize,
    pub solve: SolveOptions,
}

impl Default for ExtractOptions {
    fn default() -> Self {
        ExtractOptions {
            restarts: 10,
            max_steps: 500,
            seed: 42,
            eta0: 1.0,
            max_halvings: 20,
            rel_improvement: 1e-9,
            patience: 5,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub restart: usize,
    pub iteration: usize,
    pub objective_nats: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExtractionResult {
    pub m: usize,
    /// Best `SI(Π(p))` found, nats.
    pub value: f64,
    pub argmax: StochasticMatrix,
    pub trace: Vec<TracePoint>,
    pub restarts_used: usize,
    /// Only exhaustive enumeration certifies the maximum.
    pub certified: bool,
}

impl ExtractionResult {
    /// `restart,iteration,objective_nats` lines with a header.
    pub fn trace_csv(&self) -> String {
        let mut out = String::from("restart,iteration,objective_nats\n");
        for t in &self.trace {
            out.push_str(&format!(
                "{},{},{:.11e}\n",
                t.restart, t.iteration, t.objective_nats
            ));
        }
        out
    }

    /// `SI` recomputed from scratch at the reported maximizer.
    pub fn recompute(&self, p: &JointDistribution) -> Result<f64> {
        shared_information(&self.argmax, p, &SolveOptions::default())
    }
}

/// `SI(Π(p))` in nats.
pub fn shared_information(
    garbling: &StochasticMatrix,
    p: &JointDistribution,
    opts: &SolveOptions,
) -> Result<f64> {
    Ok(pid_with(&pushforward(garbling, p)?, opts)?.0.si)
}

/// Maps `S → [m]` up to relabeling of `[m]`: restricted growth strings with
/// at most `m` blocks, in lexicographic order.
fn canonical_maps(n: usize, m: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; n];
    fn rec(i: usize, used: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if i == cur.len() {
            out.push(cur.clone());
            return;
        }
        for t in 0..(used + 1).min(m) {
            cur[i] = t;
            rec(i + 1, used.max(t + 1), m, cur, out);
        }
    }
    if n > 0 {
        rec(0, 0, m, &mut cur, &mut out);
    }
    out
}

/// Exact maximum of `SI(Π(p))` over deterministic maps `S → [m]`.
///
/// Relabeling the outcomes of a map does not change `SI`, so one map per
/// partition of `S` into at most `m` blocks is solved; the guard still
/// applies to the full count `m^|S|`.
pub fn si_ext(p: &JointDistribution, m: usize) -> Result<ExtractionResult> {
    if m == 0 {
        return Err(PidError::InvalidArgument("m must be positive".into()));
    }
    let ns = p.shape()[0];
    let count = (m as u128).checked_pow(ns as u32).unwrap_or(u128::MAX);
    if count > ENUMERATION_LIMIT {
        return Err(PidError::EnumerationTooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let columns = p.labels().s.clone();
    let maps = canonical_maps(ns, m);
    let opts = SolveOptions::default();
    let values: Vec<f64> = maps
        .par_iter()
        .map(|f| {
            let pi = StochasticMatrix::deterministic(m, columns.clone(), f)?;
            shared_information(&pi, p, &opts)
        })
        .collect::<Result<_>>()?;
    let (best, value) = values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    let trace = values
        .iter()
        .enumerate()
        .map(|(i, &v)| TracePoint {
            restart: 0,
            iteration: i,
            objective_nats: v,
        })
        .collect();
    Ok(ExtractionResult {
        m,
        value,
        argmax: StochasticMatrix::deterministic(m, columns, &maps[best])?,
        trace,
        restarts_used: 1,
        certified: true,
    })
}

/// Objective and chain-rule supergradient `D_ts = Σ_yz g_SI(Π(p))_tyz p_syz`.
/// Cells off the support of `Π(p)` contribute nothing.
fn value_and_direction(
    pi: &StochasticMatrix,
    p: &JointDistribution,
    opts: &SolveOptions,
) -> Result<(f64, Vec<f64>)> {
    let q = pushforward(pi, p)?;
    let (res, report) = pid_with(&q, opts)?;
    let bundle = support_gradients(&q, &report)?;
    let [ns, ny, nz] = p.shape();
    let m = pi.rows();
    let mut d = vec![0.0; m * ns];
    for t in 0..m {
        for s in 0..ns {
            let mut acc = 0.0;
            for y in 0..ny {
                for z in 0..nz {
                    let k = (t * ny + y) * nz + z;
                    if bundle.support[k] {
                        acc += bundle.grad_si[k] * p.get(s, y, z);
                    }
                }
            }
            d[t * ns + s] = acc;
        }
    }
    Ok((res.si, d))
}

/// `Π + η D`, column by column projected back onto the simplex.
fn step(pi: &StochasticMatrix, d: &[f64], eta: f64) -> Result<StochasticMatrix> {
    let ns = pi.columns().len();
    let cols: Vec<Vec<f64>> = (0..ns)
        .map(|s| {
            let v: Vec<f64> = (0..pi.rows())
                .map(|t| pi.get(t, s) + eta * d[t * ns + s])
                .collect();
            project_simplex(&v)
        })
        .collect();
    StochasticMatrix::from_columns(pi.columns().to_vec(), &cols)
}

struct Ascent {
    value: f64,
    argmax: StochasticMatrix,
    trace: Vec<f64>,
}

/// Value and direction at a trial point, `None` when the solver could not
/// certify it. Such points are treated like rejected steps.
fn try_point(
    pi: &StochasticMatrix,
    p: &JointDistribution,
    opts: &SolveOptions,
) -> Result<Option<(f64, Vec<f64>)>> {
    match value_and_direction(pi, p, opts) {
        Ok(v) => Ok(Some(v)),
        Err(PidError::MaxIterationsExceeded(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn ascend(start: StochasticMatrix, p: &JointDistribution, opts: &ExtractOptions) -> Result<Ascent> {
    let mut pi = start;
    let (mut f, mut d) = value_and_direction(&pi, p, &opts.solve)?;
    let mut best = (f, pi.clone());
    let mut trace = vec![f];
    let mut quiet = 0;
    for k in 1..=opts.max_steps {
        let mut eta = opts.eta0;
        let mut next = None;
        for _ in 0..opts.max_halvings {
            let trial = step(&pi, &d, eta)?;
            if let Some((ft, dt)) = try_point(&trial, p, &opts.solve)? {
                if ft >= f - 1e-12 {
                    next = Some((trial, ft, dt));
                    break;
                }
            }
            eta *= 0.5;
        }
        let next = match next {
            Some(n) => Some(n),
            None => {
                let trial = step(&pi, &d, opts.eta0 / (k as f64).sqrt())?;
                try_point(&trial, p, &opts.solve)?.map(|(ft, dt)| (trial, ft, dt))
            }
        };
        let Some((trial, ft, dt)) = next else {
            break;
        };
        // Progress is measured against the best value so far, so that the
        // diminishing fallback step wandering off a kink and back counts as
        // no improvement.
        let gain = (ft - best.0) / best.0.abs().max(1e-300);
        pi = trial;
        f = ft;
        d = dt;
        trace.push(f);
        if f > best.0 {
            best = (f, pi.clone());
        }
        quiet = if gain < opts.rel_improvement {
            quiet + 1
        } else {
            0
        };
        if quiet >= opts.patience {
            break;
        }
    }
    Ok(Ascent {
        value: best.0,
        argmax: best.1,
        trace,
    })
}

fn dirichlet_start(
    m: usize,
    columns: Vec<String>,
    seed: u64,
    restart: usize,
) -> Result<StochasticMatrix> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    let gamma = Gamma::new(1.0, 1.0).expect("positive shape");
    let cols: Vec<Vec<f64>> = (0..columns.len())
        .map(|_| {
            let raw: Vec<f64> = (0..m).map(|_| gamma.sample(&mut rng)).collect();
            let total: f64 = raw.iter().sum();
            raw.iter().map(|v| v / total).collect()
        })
        .collect();
    StochasticMatrix::from_columns(columns, &cols)
}

/// Identity on the first `min(m, |S|)` outcomes; further sources go to the
/// last outcome.
fn identity_start(m: usize, columns: Vec<String>) -> Result<StochasticMatrix> {
    let assignment: Vec<usize> = (0..columns.len()).map(|s| s.min(m - 1)).collect();
    StochasticMatrix::deterministic(m, columns, &assignment)
}

/// Lower bound on the best `SI(Π(p))` over stochastic `m × |S|` matrices.
pub fn si_club(p: &JointDistribution, m: usize, opts: &ExtractOptions) -> Result<ExtractionResult> {
    si_club_from(p, m, opts, &[])
}

/// As [`si_club`], also ascending from `warm` starts (each padded with zero
/// rows up to `m`). The result is never below the value at any warm start.
pub fn si_club_from(
    p: &JointDistribution,
    m: usize,
    opts: &ExtractOptions,
    warm: &[StochasticMatrix],
) -> Result<ExtractionResult> {
    if m == 0 {
        return Err(PidError::InvalidArgument("m must be positive".into()));
    }
    let columns = p.labels().s.clone();
    let mut starts = Vec::new();
    for w in warm {
        if w.columns() != columns.as_slice() || w.rows() > m {
            return Err(PidError::InvalidArgument("warm start does not fit".into()));
        }
        let mut padded = w.clone();
        while padded.rows() < m {
            padded = padded.padded();
        }
        starts.push(padded);
    }
    starts.push(identity_start(m, columns.clone())?);
    for r in 0..opts.restarts {
        starts.push(dirichlet_start(m, columns.clone(), opts.seed, r)?);
    }

    // A start the solver cannot certify is dropped; the error only surfaces
    // when every start fails.
    let outcomes: Vec<Result<Ascent>> =
        starts.into_par_iter().map(|s| ascend(s, p, opts)).collect();
    let mut runs = Vec::with_capacity(outcomes.len());
    let mut failure = None;
    for outcome in outcomes {
        match outcome {
            Ok(run) => runs.push(run),
            Err(e @ PidError::MaxIterationsExceeded(_)) => failure = Some(e),
            Err(e) => return Err(e),
        }
    }
    if runs.is_empty() {
        return Err(failure.expect("at least one start"));
    }
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.value > runs[best].value {
            best = i;
        }
    }
    let trace = runs
        .iter()
        .enumerate()
        .flat_map(|(r, run)| {
            run.trace.iter().enumerate().map(move |(i, &v)| TracePoint {
                restart: r,
                iteration: i,
                objective_nats: v,
            })
        })
        .collect();
    let restarts_used = runs.len();
    let winner = runs.into_iter().nth(best).expect("at least one start");
    Ok(ExtractionResult {
        m,
        value: winner.value,
        argmax: winner.argmax,
        trace,
        restarts_used,
        certified: false,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SandwichReport {
    pub m0: usize,
    /// Exact maximum over maps `S → [|S|]`.
    pub si_ext: f64,
    /// `(m, value)` for `m = m0, m0 + 1, m0 + 2`.
    pub si_club: Vec<(usize, f64)>,
    pub tol: f64,
    pub ext_below_club: bool,
    pub monotone: bool,
    pub pass: bool,
}

/// Checks `SI^ext(p) ≤ SI♣_{m0}(p)` and that the stochastic values do not
/// decrease over `m0, m0 + 1, m0 + 2`. Each `m` is warm-started from the
/// padded maximizer of the previous one.
pub fn check_sandwich(
    p: &JointDistribution,
    m0: usize,
    opts: &ExtractOptions,
) -> Result<SandwichReport> {
    let ns = p.shape()[0];
    if m0 < ns {
        return Err(PidError::InvalidArgument(format!(
            "m0 = {m0} is below |S| = {ns}"
        )));
    }
    let tol = 1e-5;
    let ext = si_ext(p, ns)?.value;
    let mut values = Vec::new();
    let mut warm: Vec<StochasticMatrix> = Vec::new();
    for m in m0..m0 + 3 {
        let r = si_club_from(p, m, opts, &warm)?;
        values.push((m, r.value));
        warm = vec![r.argmax];
    }
    let ext_below_club = ext <= values[0].1 + tol;
    let monotone = values.windows(2).all(|w| w[1].1 >= w[0].1 - tol);
    Ok(SandwichReport {
        m0,
        si_ext: ext,
        si_club: values,
        tol,
        ext_below_club,
        monotone,
        pass: ext_below_club && monotone,
    })
}

#[cfg(test)]
mod tests;
