//! Log-barrier Newton method for `min -h(q)` over the marginal polytope.
//!
//! With `μ = 1/t` each stage minimizes `φ(q) = Σ q ln(q/q_*) - μ Σ ln q`
//! subject to the reduced marginal rows. The Hessian is block diagonal over
//! `(y, z)` fibers, `diag(1/q + μ/q²) - 𝟙𝟙ᵀ/q_*`, and each block is inverted
//! in closed form by Sherman–Morrison; the Newton system is then solved
//! through the Schur complement `A H⁻¹ Aᵀ`.

use nalgebra::{DMatrix, DVector};

use super::problem::Problem;
use super::SolveOptions;

const NEWTON_TOL: f64 = 1e-15;
const MAX_STAGE_ITERS: usize = 100;
const ARMIJO: f64 = 0.25;
const DRIFT_FLOOR: f64 = 1e-12;

pub(crate) struct BarrierOutcome {
    pub q: Vec<f64>,
    /// Multipliers of the reduced rows, sign convention `∇f + Aᵀν ≈ 0`.
    pub nu: Vec<f64>,
    pub fiber_mass: Vec<f64>,
    pub prev_fiber_mass: Vec<f64>,
    pub iterations: usize,
    pub stages: usize,
    /// Barrier weight of the last stage.
    pub t: f64,
}

struct FiberInverse {
    u: Vec<f64>,
    gamma: Vec<f64>,
}

impl FiberInverse {
    fn new(pr: &Problem, q: &[f64], mu: f64) -> Self {
        let u = q.iter().map(|&x| x * x / (x + mu)).collect();
        let gamma = pr
            .fibers
            .iter()
            .map(|f| {
                let w: f64 = f.cells.iter().map(|&c| q[c] / (q[c] + mu)).sum();
                1.0 / (mu * w)
            })
            .collect();
        FiberInverse { u, gamma }
    }

    fn apply(&self, pr: &Problem, v: &[f64], out: &mut [f64]) {
        for (f, fiber) in pr.fibers.iter().enumerate() {
            let dot: f64 = fiber.cells.iter().map(|&c| self.u[c] * v[c]).sum();
            for &c in &fiber.cells {
                out[c] = self.u[c] * v[c] + self.gamma[f] * self.u[c] * dot;
            }
        }
    }
}

fn gradient(pr: &Problem, q: &[f64], mu: f64) -> Vec<f64> {
    let mass = pr.fiber_mass(q);
    (0..q.len())
        .map(|c| (q[c] / mass[pr.fiber_of[c]]).ln() - mu / q[c])
        .collect()
}

fn objective(pr: &Problem, q: &[f64], mu: f64) -> f64 {
    pr.neg_entropy(q) - mu * q.iter().map(|x| x.ln()).sum::<f64>()
}

fn residual(a: &DMatrix<f64>, b: &[f64], q: &[f64]) -> f64 {
    let aq = a * DVector::from_column_slice(q);
    aq.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

struct Step {
    dx: Vec<f64>,
    nu: Vec<f64>,
    slope: f64,
    decrement: f64,
}

fn newton_step(pr: &Problem, a: &DMatrix<f64>, b: &[f64], q: &[f64], mu: f64) -> Option<Step> {
    let n = q.len();
    let m = a.nrows();
    let g = gradient(pr, q, mu);
    let inv = FiberInverse::new(pr, q, mu);

    // W = H⁻¹ Aᵀ, column by column.
    let mut w = DMatrix::zeros(n, m);
    let mut col = vec![0.0; n];
    let mut buf = vec![0.0; n];
    for i in 0..m {
        for c in 0..n {
            col[c] = a[(i, c)];
        }
        inv.apply(pr, &col, &mut buf);
        for c in 0..n {
            w[(c, i)] = buf[c];
        }
    }
    let schur = a * &w;
    let mut hg = vec![0.0; n];
    inv.apply(pr, &g, &mut hg);
    let ahg = a * DVector::from_column_slice(&hg);
    let aq = a * DVector::from_column_slice(q);
    let rhs = DVector::from_fn(m, |i, _| -ahg[i] - (b[i] - aq[i]));
    let nu = match schur.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => schur.lu().solve(&rhs)?,
    };

    let atnu = a.transpose() * &nu;
    let v: Vec<f64> = (0..n).map(|c| g[c] + atnu[c]).collect();
    let mut dx = vec![0.0; n];
    inv.apply(pr, &v, &mut dx);
    dx.iter_mut().for_each(|d| *d = -*d);
    let decrement = -v.iter().zip(&dx).map(|(a, b)| a * b).sum::<f64>();
    let slope = g.iter().zip(&dx).map(|(a, b)| a * b).sum();
    if !decrement.is_finite() {
        return None;
    }
    Some(Step {
        dx,
        nu: nu.iter().copied().collect(),
        slope,
        decrement,
    })
}

/// Runs barrier stages from the strictly feasible `q0`, starting at weight
/// `t0` and stopping once `n/t < gap`.
pub(crate) fn run(
    pr: &Problem,
    q0: Vec<f64>,
    t0: f64,
    gap: f64,
    opts: &SolveOptions,
) -> BarrierOutcome {
    let a = pr.matrix(&pr.reduced);
    let b: Vec<f64> = pr.reduced.iter().map(|&r| pr.rows[r].rhs).collect();
    let n = pr.n_cells() as f64;

    let mut q = q0;
    let mut nu = vec![0.0; b.len()];
    let mut t = t0;
    let mut iterations = 0;
    let mut stages = 0;
    let mut hit_cap = false;
    let mut prev_fiber_mass = pr.fiber_mass(&q);
    let mut trial = vec![0.0; q.len()];

    loop {
        let mu = 1.0 / t;
        prev_fiber_mass = if stages == 0 {
            prev_fiber_mass
        } else {
            pr.fiber_mass(&q)
        };
        stages += 1;
        for _ in 0..MAX_STAGE_ITERS {
            if iterations >= opts.max_iter {
                hit_cap = true;
                break;
            }
            iterations += 1;
            let Some(step) = newton_step(pr, &a, &b, &q, mu) else {
                break;
            };
            nu = step.nu;
            if step.decrement / 2.0 <= NEWTON_TOL || step.slope >= 0.0 {
                break;
            }
            let max_step = step
                .dx
                .iter()
                .zip(&q)
                .filter(|(d, _)| **d < 0.0)
                .map(|(d, x)| -x / d)
                .fold(f64::INFINITY, f64::min);
            let mut s = (0.99 * max_step).min(1.0);
            let f0 = objective(pr, &q, mu);
            // At large t the Schur complement is badly conditioned and the
            // step can leave the affine set; such steps are cut back.
            let drift_cap = (2.0 * residual(&a, &b, &q)).max(DRIFT_FLOOR);
            let mut accepted = false;
            for _ in 0..60 {
                for c in 0..q.len() {
                    trial[c] = q[c] + s * step.dx[c];
                }
                if trial.iter().all(|&x| x > 0.0) && residual(&a, &b, &trial) <= drift_cap {
                    let f1 = objective(pr, &trial, mu);
                    let sufficient = f1 <= f0 + ARMIJO * s * step.slope;
                    let downhill = || {
                        gradient(pr, &trial, mu)
                            .iter()
                            .zip(&step.dx)
                            .map(|(g, d)| g * d)
                            .sum::<f64>()
                            <= 0.0
                    };
                    if sufficient || downhill() {
                        accepted = true;
                        break;
                    }
                }
                s *= 0.5;
            }
            if !accepted {
                break;
            }
            std::mem::swap(&mut q, &mut trial);
        }
        if hit_cap || n / t < gap {
            break;
        }
        t *= opts.barrier_schedule.factor;
    }

    BarrierOutcome {
        fiber_mass: pr.fiber_mass(&q),
        q,
        nu,
        prev_fiber_mass,
        iterations,
        stages,
        t,
    }
}
