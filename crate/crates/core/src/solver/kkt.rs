use serde::Serialize;

use super::{Coupling, KktCertificate, POSITIVE_FIBER_TAU};
use crate::dist::{JointDistribution, Marginals};

/// A `(y, z)` fiber without mass, with the exponential sum of its admissible
/// multipliers. A sum at most one is the existence of the distribution `ρ`
/// demanded for empty fibers (any leftover mass can go to its cells).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroFiber {
    pub y: usize,
    pub z: usize,
    pub exp_sum: f64,
}

/// Outcome of [`verify_kkt`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    pub tol: f64,
    /// Largest marginal violation or negative entry of `q`.
    pub residual_primal: f64,
    /// Largest `|λ_{s,y} + μ_{s,z} - ln(q_{s,y,z}/q_{*,y,z})|` over fibers with mass.
    pub residual_stationarity: f64,
    /// Largest `Σ_s exp(λ_{s,y} + μ_{s,z}) - 1` (clamped at zero) over empty fibers.
    pub residual_zero_cells: f64,
    pub positive_fibers: usize,
    pub zero_fibers: Vec<ZeroFiber>,
    pub feasible: bool,
    pub stationary: bool,
    pub zero_cells_ok: bool,
    pub pass: bool,
}

/// Checks that `(λ, μ)` certify optimality of `coupling` for the program
/// defined by `p`. Only `p`, `q` and the multipliers are read, so any
/// coupling can be checked regardless of how it was produced.
///
/// Sums over `s` range over admissible `s` (`p_{s,y,*} > 0` and
/// `p_{s,*,z} > 0`); other cells are forced to zero by feasibility.
pub fn verify_kkt(
    p: &JointDistribution,
    coupling: &Coupling,
    cert: &KktCertificate,
    tol: f64,
) -> KktReport {
    let [ns, ny, nz] = p.shape();
    assert_eq!(coupling.shape, p.shape(), "coupling shape");
    assert_eq!(cert.lambda.len(), ns * ny, "lambda shape");
    assert_eq!(cert.mu.len(), ns * nz, "mu shape");

    let pm = Marginals::of(p);
    let qm = Marginals::of_dense(p.shape(), &coupling.q);
    let q = |s, y, z| coupling.q[(s * ny + y) * nz + z];

    let mut primal = coupling.q.iter().fold(0.0_f64, |m, &v| m.max(-v));
    for (a, b) in qm.sy.iter().zip(&pm.sy).chain(qm.sz.iter().zip(&pm.sz)) {
        primal = primal.max((a - b).abs());
    }

    let mut stationarity = 0.0_f64;
    let mut zero_cells = 0.0_f64;
    let mut positive_fibers = 0;
    let mut zero_fibers = Vec::new();
    for y in 0..ny {
        for z in 0..nz {
            let admissible: Vec<usize> = (0..ns)
                .filter(|&s| pm.sy(s, y) > 0.0 && pm.sz(s, z) > 0.0)
                .collect();
            let mass = qm.yz(y, z);
            if mass > POSITIVE_FIBER_TAU {
                positive_fibers += 1;
                for &s in &admissible {
                    let lhs = cert.lambda(s, y) + cert.mu(s, z);
                    let qs = q(s, y, z);
                    let dev = if qs > 0.0 {
                        (lhs - (qs / mass).ln()).abs()
                    } else {
                        f64::INFINITY
                    };
                    stationarity = stationarity.max(dev);
                }
            } else if !admissible.is_empty() {
                let exp_sum: f64 = admissible
                    .iter()
                    .map(|&s| (cert.lambda(s, y) + cert.mu(s, z)).exp())
                    .sum();
                zero_cells = zero_cells.max(exp_sum - 1.0);
                zero_fibers.push(ZeroFiber { y, z, exp_sum });
            }
        }
    }

    let feasible = primal <= tol;
    let stationary = stationarity <= tol;
    let zero_cells_ok = zero_cells <= tol;
    KktReport {
        tol,
        residual_primal: primal,
        residual_stationarity: stationarity,
        residual_zero_cells: zero_cells,
        positive_fibers,
        zero_fibers,
        feasible,
        stationary,
        zero_cells_ok,
        pass: feasible && stationary && zero_cells_ok,
    }
}
