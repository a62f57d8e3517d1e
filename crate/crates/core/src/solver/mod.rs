//! Maximum conditional entropy over couplings with fixed `(S,Y)` and `(S,Z)`
//! marginals:
//!
//! ```text
//! M(p) = max H(S | Y, Z)_q   over q ≥ 0 with q_{s,y,*} = p_{s,y,*}, q_{s,*,z} = p_{s,*,z}
//! ```
//!
//! [`solve`] returns the optimal coupling together with multipliers `λ`
//! (indexed by `(s, y)`) and `μ` (indexed by `(s, z)`) such that on every
//! fiber with mass `λ_{s,y} + μ_{s,z} = ln q(s | y, z)`, and on every empty
//! fiber `Σ_s exp(λ_{s,y} + μ_{s,z}) ≤ 1`. [`verify_kkt`] re-checks these
//! conditions from scratch.
//!
//! The solve is a log-barrier Newton method followed by an active-set Newton
//! polish on the fibers that keep mass, which brings both the marginals and
//! the stationarity conditions to rounding level.

use serde::Serialize;

use crate::dist::JointDistribution;
use crate::error::{PidError, Result};
use crate::info::xlnx;

mod barrier;
mod bruteforce;
mod kkt;
mod polish;
mod problem;
mod repair;

pub use bruteforce::{bruteforce_m, BruteForceOptions};
pub use kkt::{verify_kkt, KktReport, ZeroFiber};

use problem::{Problem, RowKind};

/// Fibers with `q_{*,y,z}` at or below this are treated as empty.
pub const POSITIVE_FIBER_TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BarrierSchedule {
    /// Initial barrier weight `t` (objective multiplier).
    pub t0: f64,
    /// Factor applied to `t` after every stage.
    pub factor: f64,
}

impl Default for BarrierSchedule {
    fn default() -> Self {
        BarrierSchedule {
            t0: 1.0,
            factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolveOptions {
    pub tol_kkt: f64,
    pub tol_feas: f64,
    /// Cap on barrier Newton iterations.
    pub max_iter: usize,
    pub barrier_schedule: BarrierSchedule,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol_kkt: 1e-7,
            tol_feas: 1e-10,
            max_iter: 2000,
            barrier_schedule: BarrierSchedule::default(),
        }
    }
}

/// A coupling `q` on `S × Y × Z`, dense row-major.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling {
    pub shape: [usize; 3],
    pub q: Vec<f64>,
    /// Cells allowed to carry mass (`p_{s,y,*} > 0` and `p_{s,*,z} > 0`).
    pub admissible: Vec<bool>,
}

impl Coupling {
    pub fn get(&self, s: usize, y: usize, z: usize) -> f64 {
        let [_, ny, nz] = self.shape;
        self.q[(s * ny + y) * nz + z]
    }

    /// `H(S | Y, Z)` under `q`, in nats.
    pub fn conditional_entropy(&self) -> f64 {
        let [ns, ny, nz] = self.shape;
        let mut h = 0.0;
        for y in 0..ny {
            for z in 0..nz {
                let mass: f64 = (0..ns).map(|s| self.get(s, y, z)).sum();
                if mass > 0.0 {
                    h -= (0..ns).map(|s| xlnx(self.get(s, y, z))).sum::<f64>() - xlnx(mass);
                }
            }
        }
        h
    }
}

/// Multipliers `λ ∈ ℝ^{S×Y}`, `μ ∈ ℝ^{S×Z}` with the residuals they achieve.
///
/// Entries whose marginal is zero are unused and stored as zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktCertificate {
    pub shape: [usize; 3],
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub residual_primal: f64,
    pub residual_stationarity: f64,
    pub residual_zero_cells: f64,
}

impl KktCertificate {
    pub fn lambda(&self, s: usize, y: usize) -> f64 {
        self.lambda[s * self.shape[1] + y]
    }

    pub fn mu(&self, s: usize, z: usize) -> f64 {
        self.mu[s * self.shape[2] + z]
    }

    /// `λ_{s,y} + μ_{s,z}`.
    pub fn pair_sum(&self, s: usize, y: usize, z: usize) -> f64 {
        self.lambda(s, y) + self.mu(s, z)
    }

    /// `λ_{s,y} + c_s`, `μ_{s,z} - c_s`; leaves every pair sum unchanged.
    pub fn gauge_shifted(&self, c: &[f64]) -> KktCertificate {
        let [ns, ny, nz] = self.shape;
        assert_eq!(c.len(), ns);
        let mut out = self.clone();
        for s in 0..ns {
            for y in 0..ny {
                out.lambda[s * ny + y] += c[s];
            }
            for z in 0..nz {
                out.mu[s * nz + z] -= c[s];
            }
        }
        out
    }

    fn with_residuals(mut self, report: &KktReport) -> Self {
        self.residual_primal = report.residual_primal;
        self.residual_stationarity = report.residual_stationarity;
        self.residual_zero_cells = report.residual_zero_cells;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveReport {
    /// `M(p) = H(S|Y,Z)` at the returned coupling, in nats.
    pub m_value: f64,
    pub coupling: Coupling,
    pub certificate: KktCertificate,
    pub iterations: usize,
    pub barrier_stages: usize,
    pub polish_rounds: usize,
    /// `q > τ` on every admissible cell.
    pub strict_interior: bool,
    /// The feasible set is a single point.
    pub singleton: bool,
    pub certified: bool,
}

impl SolveReport {
    pub fn require_certified(&self) -> Result<()> {
        if self.certified {
            Ok(())
        } else {
            Err(PidError::UncertifiedSolution)
        }
    }
}

/// The product-form start `q⁰_{s,y,z} = p_{s,y,*} p_{s,*,z} / p_{s,*,*}`.
/// It meets both marginal families exactly and is positive on every
/// admissible cell.
pub fn feasible_start(p: &JointDistribution) -> Coupling {
    let pr = Problem::new(p);
    coupling_of(&pr, &pr.start())
}

fn coupling_of(pr: &Problem, q: &[f64]) -> Coupling {
    let [ns, ny, nz] = pr.shape;
    let mut admissible = vec![false; ns * ny * nz];
    for &k in &pr.dense {
        admissible[k] = true;
    }
    Coupling {
        shape: pr.shape,
        q: pr.to_dense(q),
        admissible,
    }
}

/// Per-row multipliers (`λ` for `(s,y)` rows, `μ` for `(s,z)` rows) to dense tables.
fn certificate_from_rows(pr: &Problem, x: &[f64]) -> KktCertificate {
    let [ns, ny, nz] = pr.shape;
    let mut lambda = vec![0.0; ns * ny];
    let mut mu = vec![0.0; ns * nz];
    for (row, &v) in pr.rows.iter().zip(x) {
        match row.kind {
            RowKind::Sy { s, y } => lambda[s * ny + y] = v,
            RowKind::Sz { s, z } => mu[s * nz + z] = v,
        }
    }
    KktCertificate {
        shape: pr.shape,
        lambda,
        mu,
        residual_primal: f64::NAN,
        residual_stationarity: f64::NAN,
        residual_zero_cells: f64::NAN,
    }
}

/// Smallest correction of the row multipliers `x0` that satisfies
/// `λ_{s,y} + μ_{s,z} = ln q(s|y,z)` on every cell of a fiber with mass.
fn fit_multipliers(pr: &Problem, q: &[f64], x0: &[f64]) -> Option<Vec<f64>> {
    let mass = pr.fiber_mass(q);
    let cells: Vec<usize> = (0..pr.n_cells())
        .filter(|&c| mass[pr.fiber_of[c]] > POSITIVE_FIBER_TAU && q[c] > 0.0)
        .collect();
    let m = pr.rows.len();
    if cells.is_empty() || m == 0 {
        return Some(x0.to_vec());
    }
    let mut b = nalgebra::DMatrix::zeros(cells.len(), m);
    let mut local = vec![usize::MAX; pr.n_cells()];
    for (i, &c) in cells.iter().enumerate() {
        local[c] = i;
    }
    for (r, row) in pr.rows.iter().enumerate() {
        for &c in &row.cells {
            if local[c] != usize::MAX {
                b[(local[c], r)] = 1.0;
            }
        }
    }
    let x0v = nalgebra::DVector::from_column_slice(x0);
    let target = nalgebra::DVector::from_iterator(
        cells.len(),
        cells.iter().map(|&c| (q[c] / mass[pr.fiber_of[c]]).ln()),
    );
    let resid = target - &b * &x0v;
    let svd = b.svd(true, true);
    let eps = svd.singular_values.max() * 1e-12;
    let delta = svd.solve(&resid, eps).ok()?;
    Some((x0v + delta).iter().copied().collect())
}

struct Candidate {
    q: Vec<f64>,
    cert: KktCertificate,
    report: KktReport,
}

fn assess(p: &JointDistribution, pr: &Problem, q: &[f64], rows: &[f64], tol: f64) -> Candidate {
    let coupling = coupling_of(pr, q);
    let cert = certificate_from_rows(pr, rows);
    let report = verify_kkt(p, &coupling, &cert, tol);
    Candidate {
        q: q.to_vec(),
        cert: cert.with_residuals(&report),
        report,
    }
}

fn certified(c: &Candidate, opts: &SolveOptions) -> bool {
    c.report.residual_primal <= opts.tol_feas
        && c.report.residual_stationarity <= opts.tol_kkt
        && c.report.residual_zero_cells <= opts.tol_kkt
}

fn badness(c: &Candidate) -> f64 {
    c.report
        .residual_stationarity
        .max(c.report.residual_zero_cells)
        .max(c.report.residual_primal)
}

/// Solves the coupling program for `p`.
///
/// On success the report is certified: marginal residual at most
/// `tol_feas`, both multiplier conditions within `tol_kkt`. If no certified
/// point is reached the best iterate is returned inside
/// [`PidError::MaxIterationsExceeded`].
pub fn solve(p: &JointDistribution, opts: &SolveOptions) -> Result<SolveReport> {
    let pr = Problem::new(p);
    if pr.n_cells() == 0 {
        return Err(PidError::DegenerateInstance);
    }
    let q0 = pr.start();
    let m_rows = pr.rows.len();

    if pr.n_cells() == pr.reduced.len() {
        let rows =
            fit_multipliers(&pr, &q0, &vec![0.0; m_rows]).unwrap_or_else(|| vec![0.0; m_rows]);
        let cand = assess(p, &pr, &q0, &rows, opts.tol_kkt);
        return finish(&pr, cand, 0, 0, 0, true, opts);
    }

    let mut gap = opts.tol_kkt;
    let mut bar = barrier::run(&pr, q0, opts.barrier_schedule.t0, gap, opts);
    let mut stats = Stats {
        iterations: bar.iterations,
        stages: bar.stages,
        polish_rounds: 0,
    };
    let mut best: Option<Candidate> = None;
    for escalation in 0..=ESCALATIONS {
        match active_set(p, &pr, &bar, opts, &mut stats) {
            Ok(cand) => {
                return finish(
                    &pr,
                    cand,
                    stats.iterations,
                    stats.stages,
                    stats.polish_rounds,
                    false,
                    opts,
                );
            }
            Err(cand) => {
                if best.as_ref().is_none_or(|b| badness(&cand) < badness(b)) {
                    best = Some(cand);
                }
            }
        }
        if escalation == ESCALATIONS || stats.iterations >= opts.max_iter {
            break;
        }
        // Sharpen the split between vanishing and small fibers.
        gap *= 1e-3;
        let t0 = bar.t * opts.barrier_schedule.factor;
        bar = barrier::run(&pr, bar.q.clone(), t0, gap, opts);
        stats.iterations += bar.iterations;
        stats.stages += bar.stages;
    }

    let best = best.expect("at least one round");
    let report = build_report(
        &pr,
        best,
        stats.iterations,
        stats.stages,
        stats.polish_rounds,
        false,
        opts,
    );
    Err(PidError::MaxIterationsExceeded(Box::new(report)))
}

/// Extra barrier passes, each shrinking the duality gap by 10³, tried when
/// the active set read off the barrier iterate cannot be certified.
const ESCALATIONS: usize = 2;
/// Fiber mass the active-set loop may drop when nothing else shrinks.
const NEGLIGIBLE_FIBER: f64 = 1e-9;

struct Stats {
    iterations: usize,
    stages: usize,
    polish_rounds: usize,
}

/// Guesses the fibers with mass from the barrier iterate, polishes, and
/// adjusts the guess until the multipliers certify the result. Returns the
/// best uncertified candidate on failure.
fn active_set(
    p: &JointDistribution,
    pr: &Problem,
    bar: &barrier::BarrierOutcome,
    opts: &SolveOptions,
    stats: &mut Stats,
) -> std::result::Result<Candidate, Candidate> {
    let mut nu_bar = vec![0.0; pr.rows.len()];
    for (i, &r) in pr.reduced.iter().enumerate() {
        nu_bar[r] = bar.nu[i];
    }
    let rows_bar: Vec<f64> = nu_bar.iter().map(|v| -v).collect();

    // Fibers that vanish at the optimum shrink like 1/t across stages; those
    // already below the mass threshold count as empty either way.
    let mut active: Vec<bool> = bar
        .fiber_mass
        .iter()
        .zip(&bar.prev_fiber_mass)
        .map(|(&now, &before)| now > POSITIVE_FIBER_TAU && now > 0.5 * before)
        .collect();

    let mut best = assess(p, pr, &bar.q, &rows_bar, opts.tol_kkt);
    let mut seed_q = bar.q.clone();
    let mut seed_nu = nu_bar;

    for _ in 0..(2 * pr.fibers.len() + 2) {
        let Some(out) = polish::run(pr, &active, &seed_q, &seed_nu) else {
            break;
        };
        stats.polish_rounds += 1;
        stats.iterations += out.iterations;

        let converged =
            out.dual_residual <= 1e-2 * opts.tol_kkt && out.primal_residual <= 1e-2 * opts.tol_feas;
        if !converged {
            // Drop every fiber the polish drove to zero.
            let mass = pr.fiber_mass(&out.q);
            let seed_mass = pr.fiber_mass(&seed_q);
            let mut shrunk = false;
            for f in 0..pr.fibers.len() {
                if active[f] && mass[f] < 1e-3 * seed_mass[f] {
                    active[f] = false;
                    shrunk = true;
                }
            }
            if !shrunk {
                // A fiber at the boundary without strict complementarity
                // shrinks only slowly under Newton.
                let slowest = (0..pr.fibers.len())
                    .filter(|&f| active[f])
                    .map(|f| (f, mass[f] / seed_mass[f]))
                    .min_by(|a, b| a.1.total_cmp(&b.1));
                // Failing that, a fiber too light to matter at this precision.
                let lightest = (0..pr.fibers.len())
                    .filter(|&f| active[f])
                    .min_by(|&a, &b| mass[a].total_cmp(&mass[b]));
                match (slowest, lightest) {
                    (Some((f, ratio)), _) if ratio < 0.1 => active[f] = false,
                    (_, Some(f)) if mass[f] < NEGLIGIBLE_FIBER => active[f] = false,
                    _ => break,
                }
            }
            continue;
        }

        let from_barrier = fit_multipliers(pr, &out.q, &rows_bar)
            .map(|rows| (assess(p, pr, &out.q, &rows, opts.tol_kkt), rows));
        let rows_polish: Vec<f64> = out.nu.iter().map(|v| -v).collect();
        let from_polish = (
            assess(p, pr, &out.q, &rows_polish, opts.tol_kkt),
            rows_polish,
        );
        // Multipliers drifting along the gauge lose digits to cancellation;
        // the minimum-norm fit does not.
        let zeros = vec![0.0; pr.rows.len()];
        let from_zero = fit_multipliers(pr, &out.q, &zeros)
            .map(|rows| (assess(p, pr, &out.q, &rows, opts.tol_kkt), rows));
        let (mut cand, rows) =
            [from_barrier, from_zero]
                .into_iter()
                .flatten()
                .fold(from_polish, |best, c| {
                    if badness(&c.0) < badness(&best.0) {
                        c
                    } else {
                        best
                    }
                });
        if !certified(&cand, opts) {
            // Huge multipliers from a diverging dual overflow the exponential
            // sums; the search starts from the minimum-norm fit instead.
            let start = fit_multipliers(pr, &out.q, &zeros).unwrap_or(rows);
            if let Some(fixed) = repair::repair_multipliers(pr, &out.q, &start, 0.1 * opts.tol_kkt)
            {
                let c = assess(p, pr, &out.q, &fixed, opts.tol_kkt);
                if certified(&c, opts) {
                    cand = c;
                }
            }
        }
        if certified(&cand, opts) {
            return Ok(cand);
        }

        // Empty fibers whose multipliers say they should carry mass.
        let mut grew = false;
        for zf in &cand.report.zero_fibers {
            if zf.exp_sum - 1.0 > 1e-2 * opts.tol_kkt {
                if let Some(f) = pr.fibers.iter().position(|f| f.y == zf.y && f.z == zf.z) {
                    if !active[f] {
                        active[f] = true;
                        grew = true;
                    }
                }
            }
        }
        if badness(&cand) < badness(&best) {
            best = cand;
        }
        if !grew {
            break;
        }
        seed_q = out.q.clone();
        for (f, fiber) in pr.fibers.iter().enumerate() {
            if active[f] {
                for &c in &fiber.cells {
                    if !(seed_q[c] > 0.0) {
                        seed_q[c] = bar.q[c];
                    }
                }
            }
        }
        seed_nu = out.nu;
    }
    Err(best)
}

fn build_report(
    pr: &Problem,
    cand: Candidate,
    iterations: usize,
    barrier_stages: usize,
    polish_rounds: usize,
    singleton: bool,
    opts: &SolveOptions,
) -> SolveReport {
    let is_certified = certified(&cand, opts);
    let coupling = coupling_of(pr, &cand.q);
    SolveReport {
        m_value: coupling.conditional_entropy(),
        strict_interior: cand.q.iter().all(|&v| v > POSITIVE_FIBER_TAU),
        coupling,
        certificate: cand.cert,
        iterations,
        barrier_stages,
        polish_rounds,
        singleton,
        certified: is_certified,
    }
}

fn finish(
    pr: &Problem,
    cand: Candidate,
    iterations: usize,
    barrier_stages: usize,
    polish_rounds: usize,
    singleton: bool,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let report = build_report(
        pr,
        cand,
        iterations,
        barrier_stages,
        polish_rounds,
        singleton,
        opts,
    );
    if report.certified {
        Ok(report)
    } else {
        Err(PidError::MaxIterationsExceeded(Box::new(report)))
    }
}

#[cfg(test)]
mod tests;
