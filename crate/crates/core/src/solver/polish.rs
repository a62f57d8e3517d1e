//! Newton refinement on a fixed active set of fibers.
//!
//! Fibers whose mass vanishes at the optimum are removed; on the remaining
//! cells the optimum is strictly positive and `-h` is smooth, so an
//! infeasible-start Newton iteration (no barrier) converges to machine
//! precision. The KKT matrix is singular when the optimum is not unique
//! (fiber-rescaling directions along which `-h` is linear), so steps are
//! minimum-norm solutions of a symmetrically scaled system.

use nalgebra::{DMatrix, DVector};

use super::problem::Problem;

const MAX_ITERS: usize = 200;
/// Below this marginal residual steps use an exact line search on the
/// objective instead of the residual merit function.
const FEASIBLE_TOL: f64 = 1e-13;
const RESIDUAL_FLOOR: f64 = 1e-14;
/// Above this size the scaled KKT system is solved by LU instead of SVD.
const SVD_LIMIT: usize = 400;

pub(crate) struct PolishOutcome {
    /// Values on all admissible cells; inactive fibers are exactly zero.
    pub q: Vec<f64>,
    /// Multipliers of every row (`∇f + Aᵀν = 0` on active cells).
    pub nu: Vec<f64>,
    pub dual_residual: f64,
    pub primal_residual: f64,
    pub iterations: usize,
}

struct Restricted<'a> {
    pr: &'a Problem,
    cells: Vec<usize>,
    local: Vec<usize>,
    fibers: Vec<Vec<usize>>,
}

impl<'a> Restricted<'a> {
    fn new(pr: &'a Problem, active: &[bool]) -> Self {
        let mut local = vec![usize::MAX; pr.n_cells()];
        let mut cells = Vec::new();
        let mut fibers = Vec::new();
        for (f, fiber) in pr.fibers.iter().enumerate() {
            if !active[f] {
                continue;
            }
            let mut group = Vec::new();
            for &c in &fiber.cells {
                local[c] = cells.len();
                group.push(cells.len());
                cells.push(c);
            }
            fibers.push(group);
        }
        Restricted {
            pr,
            cells,
            local,
            fibers,
        }
    }

    fn residuals(&self, x: &[f64], nu: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let mut dual = vec![0.0; x.len()];
        for group in &self.fibers {
            let mass: f64 = group.iter().map(|&i| x[i]).sum();
            for &i in group {
                dual[i] = (x[i] / mass).ln();
            }
        }
        let mut primal = Vec::with_capacity(self.pr.rows.len());
        for (r, row) in self.pr.rows.iter().enumerate() {
            let mut sum = 0.0;
            for &c in &row.cells {
                let i = self.local[c];
                if i != usize::MAX {
                    dual[i] += nu[r];
                    sum += x[i];
                }
            }
            primal.push(sum - row.rhs);
        }
        (dual, primal)
    }
}

fn norm(a: &[f64], b: &[f64]) -> f64 {
    a.iter().chain(b).map(|v| v * v).sum::<f64>().sqrt()
}

fn inf_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Slope of `-h` at `x + s dx` along `dx`, fiber by fiber.
fn slope(rs: &Restricted, x: &[f64], dx: &[f64], s: f64) -> f64 {
    let mut total = 0.0;
    for group in &rs.fibers {
        let mass: f64 = group.iter().map(|&i| x[i] + s * dx[i]).sum();
        for &i in group {
            let v = x[i] + s * dx[i];
            if v > 0.0 {
                total += dx[i] * (v / mass).ln();
            }
        }
    }
    total
}

/// Minimizer of the convex `-h` on `[0, s_max]` along `dx`, by bisection on
/// the sign of the slope.
fn exact_step(rs: &Restricted, x: &[f64], dx: &[f64], s_max: f64) -> f64 {
    if slope(rs, x, dx, s_max) <= 0.0 {
        return s_max;
    }
    let (mut lo, mut hi) = (0.0, s_max);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if slope(rs, x, dx, mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Multipliers minimizing the stationarity residual at `x`, computed from
/// zero so that huge incoming multipliers cannot cancel catastrophically.
fn fitted_nu(rs: &Restricted, x: &[f64]) -> Option<Vec<f64>> {
    let n = x.len();
    let m = rs.pr.rows.len();
    let mut at = DMatrix::zeros(n, m);
    for (r, row) in rs.pr.rows.iter().enumerate() {
        for &c in &row.cells {
            let i = rs.local[c];
            if i != usize::MAX {
                at[(i, r)] = 1.0;
            }
        }
    }
    let (rd, _) = rs.residuals(x, &vec![0.0; m]);
    let svd = at.svd(true, true);
    let eps = svd.singular_values.max() * 1e-12;
    let nu = svd.solve(&DVector::from_column_slice(&rd), eps).ok()?;
    Some(nu.iter().map(|v| -v).collect())
}

/// Refines `q_start` on the active fibers. Returns `None` when some row has
/// lost all of its cells (the active set cannot be feasible).
pub(crate) fn run(
    pr: &Problem,
    active: &[bool],
    q_start: &[f64],
    nu_start: &[f64],
) -> Option<PolishOutcome> {
    let rs = Restricted::new(pr, active);
    let n = rs.cells.len();
    let m = pr.rows.len();
    if n == 0 {
        return None;
    }
    for row in &pr.rows {
        if row.rhs > 0.0 && row.cells.iter().all(|&c| rs.local[c] == usize::MAX) {
            return None;
        }
    }

    let mut x: Vec<f64> = rs.cells.iter().map(|&c| q_start[c]).collect();
    if x.iter().any(|&v| !(v > 0.0)) {
        return None;
    }
    let mut nu = nu_start.to_vec();
    pr.balance_gauge(&mut nu);
    let (mut rd, mut rp) = rs.residuals(&x, &nu);
    let mut iterations = 0;
    let mut stalled = 0;

    while iterations < MAX_ITERS && norm(&rd, &rp) > RESIDUAL_FLOOR {
        iterations += 1;
        // Scaled system with Δx = D Δx̃, D = diag(√x), and Δν = E Δν̃ with
        // E = diag(1/‖A_r D‖) so rows of tiny mass keep unit scale:
        // [D H D    D Aᵀ E] [Δx̃]   [-D r_d  ]
        // [E A D    0     ] [Δν̃] = [-E r_p  ]
        let d: Vec<f64> = x.iter().map(|v| v.sqrt()).collect();
        let e: Vec<f64> = pr
            .rows
            .iter()
            .map(|row| {
                let sq: f64 = row
                    .cells
                    .iter()
                    .filter(|&&c| rs.local[c] != usize::MAX)
                    .map(|&c| x[rs.local[c]])
                    .sum();
                if sq > 0.0 {
                    1.0 / sq.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let mut k = DMatrix::zeros(n + m, n + m);
        for group in &rs.fibers {
            let mass: f64 = group.iter().map(|&i| x[i]).sum();
            for &i in group {
                for &j in group {
                    k[(i, j)] = -d[i] * d[j] / mass;
                }
                k[(i, i)] += 1.0;
            }
        }
        for (r, row) in pr.rows.iter().enumerate() {
            for &c in &row.cells {
                let i = rs.local[c];
                if i != usize::MAX {
                    k[(n + r, i)] = d[i] * e[r];
                    k[(i, n + r)] = d[i] * e[r];
                }
            }
        }
        let rhs = DVector::from_fn(n + m, |i, _| {
            if i < n {
                -d[i] * rd[i]
            } else {
                -e[i - n] * rp[i - n]
            }
        });
        let sol = if n + m <= SVD_LIMIT {
            let svd = k.svd(true, true);
            let eps = svd.singular_values.max() * 1e-13;
            svd.solve(&rhs, eps).ok()?
        } else {
            k.lu().solve(&rhs)?
        };
        let dx: Vec<f64> = (0..n).map(|i| d[i] * sol[i]).collect();
        let dnu: Vec<f64> = (0..m).map(|r| e[r] * sol[n + r]).collect();

        let max_step = dx
            .iter()
            .zip(&x)
            .filter(|(dv, _)| **dv < 0.0)
            .map(|(dv, v)| -v / dv)
            .fold(f64::INFINITY, f64::min);
        let s_max = (0.99 * max_step).min(1.0);
        let merit = |x: &[f64], nu: &[f64]| {
            let (rd, rp) = rs.residuals(x, nu);
            let n = norm(&rd, &rp);
            (rd, rp, n)
        };
        if inf_norm(&rp) <= FEASIBLE_TOL {
            let r0 = norm(&rd, &rp);
            // Full step first; near a flat optimum it is often clipped at the
            // boundary, so fall back to minimizing the objective along dx.
            let full: Vec<f64> = x.iter().zip(&dx).map(|(v, dv)| v + s_max * dv).collect();
            let mut nu_full: Vec<f64> = nu.iter().zip(&dnu).map(|(v, dv)| v + s_max * dv).collect();
            pr.balance_gauge(&mut nu_full);
            if full.iter().all(|&v| v > 0.0) {
                let (rdt, rpt, nt) = merit(&full, &nu_full);
                if nt <= (1.0 - 0.01 * s_max) * r0 {
                    x = full;
                    nu = nu_full;
                    rd = rdt;
                    rp = rpt;
                    stalled = 0;
                    continue;
                }
            }
            let s = exact_step(&rs, &x, &dx, s_max);
            if s <= 0.0 {
                break;
            }
            let xt: Vec<f64> = x.iter().zip(&dx).map(|(v, dv)| v + s * dv).collect();
            if xt.iter().any(|&v| !(v > 0.0)) {
                break;
            }
            let Some(mut nut) = fitted_nu(&rs, &xt) else {
                break;
            };
            pr.balance_gauge(&mut nut);
            let (rdt, rpt, nt) = merit(&xt, &nut);
            x = xt;
            nu = nut;
            rd = rdt;
            rp = rpt;
            if nt >= r0 {
                stalled += 1;
                if stalled >= 5 {
                    break;
                }
            } else {
                stalled = 0;
            }
            continue;
        }
        let mut s = s_max;
        let r0 = norm(&rd, &rp);
        // The marginal residual is affine along the step and shrinks by
        // `1 - s` under an exact solve; growth means the solve is unreliable.
        let rp_cap = inf_norm(&rp).max(FEASIBLE_TOL);
        let mut accepted = None;
        for _ in 0..50 {
            let xt: Vec<f64> = x.iter().zip(&dx).map(|(v, dv)| v + s * dv).collect();
            if xt.iter().all(|&v| v > 0.0) {
                let mut nut: Vec<f64> = nu.iter().zip(&dnu).map(|(v, dv)| v + s * dv).collect();
                pr.balance_gauge(&mut nut);
                let (rdt, rpt) = rs.residuals(&xt, &nut);
                if norm(&rdt, &rpt) <= (1.0 - 0.01 * s) * r0 && inf_norm(&rpt) <= rp_cap {
                    accepted = Some((xt, nut, rdt, rpt));
                    break;
                }
            }
            s *= 0.5;
        }
        let Some((xt, nut, rdt, rpt)) = accepted else {
            break;
        };
        x = xt;
        nu = nut;
        rd = rdt;
        rp = rpt;
    }

    let mut q = vec![0.0; pr.n_cells()];
    for (i, &c) in rs.cells.iter().enumerate() {
        q[c] = x[i];
    }
    Some(PolishOutcome {
        q,
        nu,
        dual_residual: inf_norm(&rd),
        primal_residual: inf_norm(&rp),
        iterations,
    })
}
