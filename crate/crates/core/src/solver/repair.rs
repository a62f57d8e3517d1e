//! At a degenerate optimum the multipliers matching `ln q(s|y,z)` on the
//! fibers with mass form an affine family larger than the gauge, and the
//! minimum-norm member may violate the inequality on the empty fibers while
//! another member satisfies it. This searches that family.

use nalgebra::{DMatrix, DVector};

use super::problem::{Problem, RowKind};
use super::POSITIVE_FIBER_TAU;

const KAPPAS: [f64; 5] = [10.0, 1e2, 1e3, 1e4, 1e5];
const STEPS: usize = 100;

/// Cells of the empty fibers with, for each, the two rows whose
/// multipliers enter it.
struct EmptyFibers {
    groups: Vec<Vec<[usize; 2]>>,
}

impl EmptyFibers {
    /// `log Σ_s exp(x_sy + x_sz)` per empty fiber.
    fn log_sums(&self, x: &[f64]) -> Vec<f64> {
        self.groups
            .iter()
            .map(|g| {
                let top = g
                    .iter()
                    .map(|r| x[r[0]] + x[r[1]])
                    .fold(f64::NEG_INFINITY, f64::max);
                top + g
                    .iter()
                    .map(|r| (x[r[0]] + x[r[1]] - top).exp())
                    .sum::<f64>()
                    .ln()
            })
            .collect()
    }

    /// Smoothed maximum `κ⁻¹ log Σ_f exp(κ L_f)` of the log sums and its
    /// gradient in `x`.
    fn smooth_max(&self, x: &[f64], kappa: f64) -> (f64, Vec<f64>) {
        let l = self.log_sums(x);
        let top = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = l.iter().map(|v| (kappa * (v - top)).exp()).collect();
        let total: f64 = w.iter().sum();
        let value = top + total.ln() / kappa;
        let mut grad = vec![0.0; x.len()];
        for ((g, lf), wf) in self.groups.iter().zip(&l).zip(&w) {
            let pf = wf / total;
            for r in g {
                let sigma = (x[r[0]] + x[r[1]] - lf).exp();
                grad[r[0]] += pf * sigma;
                grad[r[1]] += pf * sigma;
            }
        }
        (value, grad)
    }
}

/// Moves the row multipliers `x` within the solutions of the equalities on
/// the cells with mass until every empty fiber satisfies
/// `Σ_s exp(λ_sy + μ_sz) ≤ 1 + target`. `None` when the search fails.
pub(crate) fn repair_multipliers(
    pr: &Problem,
    q: &[f64],
    x: &[f64],
    target: f64,
) -> Option<Vec<f64>> {
    let mass = pr.fiber_mass(q);
    let m = pr.rows.len();
    let mut rows_of = vec![Vec::with_capacity(2); pr.n_cells()];
    for (r, row) in pr.rows.iter().enumerate() {
        for &c in &row.cells {
            rows_of[c].push(r);
        }
    }
    let pair = |c: usize| [rows_of[c][0], rows_of[c][1]];
    let empty = EmptyFibers {
        groups: pr
            .fibers
            .iter()
            .enumerate()
            .filter(|&(f, _)| mass[f] <= POSITIVE_FIBER_TAU)
            .map(|(_, fiber)| fiber.cells.iter().map(|&c| pair(c)).collect())
            .collect(),
    };
    if empty.groups.is_empty() {
        return None;
    }

    // Directions that keep every pair sum on cells with mass, modulo the
    // per-`s` gauge, which changes no pair sum at all.
    let cells: Vec<usize> = (0..pr.n_cells())
        .filter(|&c| mass[pr.fiber_of[c]] > POSITIVE_FIBER_TAU && q[c] > 0.0)
        .collect();
    let ns = pr.shape[0];
    let mut b = DMatrix::<f64>::zeros(cells.len() + ns, m);
    for (i, &c) in cells.iter().enumerate() {
        for r in pair(c) {
            b[(i, r)] = 1.0;
        }
    }
    for (r, row) in pr.rows.iter().enumerate() {
        let (s, sign) = match row.kind {
            RowKind::Sy { s, .. } => (s, 1.0),
            RowKind::Sz { s, .. } => (s, -1.0),
        };
        b[(cells.len() + s, r)] = sign;
    }
    let eig = (b.transpose() * &b).symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    let basis: Vec<DVector<f64>> = (0..m)
        .filter(|&i| eig.eigenvalues[i].abs() <= 1e-10 * scale)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect();
    if basis.is_empty() {
        return None;
    }
    let n = DMatrix::from_columns(&basis);
    let k = n.ncols();

    let x0 = DVector::from_column_slice(x);
    let at = |w: &DVector<f64>| &x0 + &n * w;
    let worst = |w: &DVector<f64>| {
        empty
            .log_sums(at(w).as_slice())
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let eval = |w: &DVector<f64>, kappa: f64| {
        let (v, g) = empty.smooth_max(at(w).as_slice(), kappa);
        (v, n.transpose() * DVector::from_vec(g))
    };
    let mut w = DVector::zeros(k);
    for kappa in KAPPAS {
        for _ in 0..STEPS {
            if worst(&w) <= target.ln_1p() {
                return Some(at(&w).iter().copied().collect());
            }
            let (f0, g) = eval(&w, kappa);
            if g.norm() <= 1e-15 {
                break;
            }
            // Newton direction from a difference Hessian, gradient otherwise.
            let h = 1e-6;
            let mut hess = DMatrix::zeros(k, k);
            for j in 0..k {
                let mut wj = w.clone();
                wj[j] += h;
                hess.set_column(j, &((eval(&wj, kappa).1 - &g) / h));
            }
            hess = (&hess + hess.transpose()) * 0.5;
            let dir = match hess.cholesky() {
                Some(ch) => -ch.solve(&g),
                None => -g.clone(),
            };
            let slope = g.dot(&dir);
            let dir = if slope < 0.0 { dir } else { -g.clone() };
            let slope = g.dot(&dir);
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial = &w + &dir * step;
                if eval(&trial, kappa).0 <= f0 + 1e-4 * step * slope {
                    w = trial;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
    }
    (worst(&w) <= target.ln_1p()).then(|| at(&w).iter().copied().collect())
}
