//! Derivative-free lower bound on `M(p)`, used as an independent check of
//! the solver. Only feasibility is shared with it: the search moves along
//! random directions in the null space of the marginal rows and maximizes
//! the concave restriction of `h` on each segment by golden-section search.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::problem::Problem;
use crate::dist::JointDistribution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceOptions {
    /// Number of line searches.
    pub samples: usize,
    /// Golden-section iterations per line search.
    pub line_iters: usize,
    pub seed: u64,
}

impl Default for BruteForceOptions {
    fn default() -> Self {
        BruteForceOptions {
            samples: 4000,
            line_iters: 80,
            seed: 7,
        }
    }
}

fn null_space(a: &DMatrix<f64>) -> Vec<DVector<f64>> {
    let ata = a.transpose() * a;
    let eig = ata.symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i].abs() <= 1e-10 * scale)
        .map(|i| eig.eigenvectors.column(i).into_owned())
        .collect()
}

/// Largest `t` range keeping `q + t d ≥ 0`.
fn segment(q: &[f64], d: &DVector<f64>) -> (f64, f64) {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (i, &x) in q.iter().enumerate() {
        let di = d[i];
        if di > 1e-15 {
            lo = lo.max(-x / di);
        } else if di < -1e-15 {
            hi = hi.min(-x / di);
        }
    }
    (lo, hi)
}

/// A feasible `q` with `h(q)` as large as the search finds, and that value.
/// The value never exceeds `M(p)` beyond rounding.
pub fn bruteforce_m(p: &JointDistribution, opts: &BruteForceOptions) -> f64 {
    let pr = Problem::new(p);
    if pr.n_cells() == 0 {
        return 0.0;
    }
    let all: Vec<usize> = (0..pr.rows.len()).collect();
    let basis = null_space(&pr.matrix(&all));
    let mut q = pr.start();
    let h = |q: &[f64]| -pr.neg_entropy(q);
    let mut best = h(&q);
    if basis.is_empty() {
        return best;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    let mut trial = vec![0.0; q.len()];
    for k in 0..opts.samples {
        // Alternate basis directions with random combinations.
        let d = if k < basis.len() * 2 {
            basis[k % basis.len()].clone()
        } else {
            let mut d = DVector::zeros(q.len());
            for b in &basis {
                let w: f64 = StandardNormal.sample(&mut rng);
                d += b * w;
            }
            d
        };
        let (mut lo, mut hi) = segment(&q, &d);
        if !(lo.is_finite() && hi.is_finite()) || hi - lo < 1e-15 {
            continue;
        }
        let mut value_at = |t: f64| {
            for i in 0..q.len() {
                trial[i] = (q[i] + t * d[i]).max(0.0);
            }
            h(&trial)
        };
        let mut x1 = hi - golden * (hi - lo);
        let mut x2 = lo + golden * (hi - lo);
        let mut f1 = value_at(x1);
        let mut f2 = value_at(x2);
        for _ in 0..opts.line_iters {
            if f1 < f2 {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + golden * (hi - lo);
                f2 = value_at(x2);
            } else {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - golden * (hi - lo);
                f1 = value_at(x1);
            }
        }
        let candidates = [(x1, f1), (x2, f2), (lo, value_at(lo)), (hi, value_at(hi))];
        let (t, f) = candidates
            .into_iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if f > best {
            best = f;
            for i in 0..q.len() {
                q[i] = (q[i] + t * d[i]).max(0.0);
            }
        }
    }
    best
}
