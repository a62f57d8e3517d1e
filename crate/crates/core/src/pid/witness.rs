//! Random search for pairs on which a measure fails midpoint concavity or
//! midpoint convexity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{pid, Quantity};
use crate::dist::JointDistribution;
use crate::error::{PidError, Result};

/// Pairs are evaluated in parallel batches of this size; the first hit in
/// attempt order wins, so results do not depend on the thread count.
const BATCH: usize = 256;
/// Shape-parameter cycle for the Dirichlet draws; small values reach
/// towards the boundary of the simplex.
const ALPHAS: [f64; 3] = [1.0, 0.3, 0.1];
/// Mixed in to keep every draw at full support.
const FLOOR: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub shape: [usize; 3],
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
    pub theta: f64,
    pub f1: f64,
    pub f2: f64,
    /// Value at `theta p1 + (1 - theta) p2`.
    pub f_mid: f64,
    /// Violation in nats, always positive: `chord - f_mid` for a concavity
    /// witness, `f_mid - chord` for a convexity witness.
    pub margin: f64,
}

impl Witness {
    pub fn chord(&self) -> f64 {
        self.theta * self.f1 + (1.0 - self.theta) * self.f2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WitnessReport {
    pub quantity: Quantity,
    pub shape: [usize; 3],
    pub seed: u64,
    pub attempts: usize,
    pub attempts_used: usize,
    pub min_margin: f64,
    /// A pair on which the measure is not concave.
    pub concavity: Option<Witness>,
    /// A pair on which the measure is not convex.
    pub convexity: Option<Witness>,
}

fn draw(rng: &mut ChaCha8Rng, n: usize, alpha: f64) -> Vec<f64> {
    let gamma = Gamma::new(alpha, 1.0).expect("positive shape");
    let raw: Vec<f64> = (0..n).map(|_| gamma.sample(rng).max(1e-300)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter()
        .map(|v| (1.0 - FLOOR) * v / total + FLOOR / n as f64)
        .collect()
}

fn evaluate(
    q: Quantity,
    shape: [usize; 3],
    p1: &[f64],
    p2: &[f64],
    theta: f64,
) -> Option<(f64, f64, f64)> {
    let a = JointDistribution::from_dense(shape, p1.to_vec()).ok()?;
    let b = JointDistribution::from_dense(shape, p2.to_vec()).ok()?;
    let mid = a.mix(&b, theta).ok()?;
    let value = |p: &JointDistribution| pid(p).ok().map(|r| r.get(q));
    Some((value(&a)?, value(&b)?, value(&mid)?))
}

/// Searches random full-support pairs on `shape` with `θ = 1/2` for
/// violations of midpoint concavity and convexity larger than `min_margin`
/// nats. Stops once both are found or after `attempts` pairs.
pub fn nonconvexity_witness(
    quantity: Quantity,
    shape: [usize; 3],
    attempts: usize,
    min_margin: f64,
    seed: u64,
) -> Result<WitnessReport> {
    let n: usize = shape.iter().product();
    if n == 0 {
        return Err(PidError::InvalidArgument("empty shape".into()));
    }
    let theta = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = WitnessReport {
        quantity,
        shape,
        seed,
        attempts,
        attempts_used: 0,
        min_margin,
        concavity: None,
        convexity: None,
    };
    let mut start = 0;
    while start < attempts && (report.concavity.is_none() || report.convexity.is_none()) {
        let len = BATCH.min(attempts - start);
        let pairs: Vec<(Vec<f64>, Vec<f64>)> = (start..start + len)
            .map(|k| {
                let alpha = ALPHAS[k % ALPHAS.len()];
                (draw(&mut rng, n, alpha), draw(&mut rng, n, alpha))
            })
            .collect();
        let values: Vec<Option<(f64, f64, f64)>> = pairs
            .par_iter()
            .map(|(p1, p2)| evaluate(quantity, shape, p1, p2, theta))
            .collect();
        for (k, ((p1, p2), v)) in pairs.into_iter().zip(values).enumerate() {
            report.attempts_used = start + k + 1;
            let Some((f1, f2, f_mid)) = v else { continue };
            let chord = theta * f1 + (1.0 - theta) * f2;
            let witness = |margin| Witness {
                shape,
                p1: p1.clone(),
                p2: p2.clone(),
                theta,
                f1,
                f2,
                f_mid,
                margin,
            };
            if report.concavity.is_none() && chord - f_mid > min_margin {
                report.concavity = Some(witness(chord - f_mid));
            }
            if report.convexity.is_none() && f_mid - chord > min_margin {
                report.convexity = Some(witness(f_mid - chord));
            }
            if report.concavity.is_some() && report.convexity.is_some() {
                break;
            }
        }
        start += len;
    }
    Ok(report)
}
