//! Finite-difference checks of the gradient bundle. Every probe re-solves
//! the coupling program from scratch at the perturbed point.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use super::{pid_with, GradientBundle, PidResult, Quantity};
use crate::dist::JointDistribution;
use crate::error::Result;
use crate::solver::SolveOptions;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CheckOptions {
    /// Finite-difference step.
    pub step: f64,
    /// Relative tolerance; a probe passes within `rel_tol * (1 + |g·d|)`.
    pub rel_tol: f64,
    pub solve: SolveOptions,
}

impl CheckOptions {
    /// Central differences at `ε = 1e-5`, tolerance `1e-4 (1 + |g·d|)`.
    pub fn central() -> Self {
        CheckOptions {
            step: 1e-5,
            rel_tol: 1e-4,
            solve: SolveOptions::default(),
        }
    }

    /// One-sided differences at `h = 1e-4`, tolerance `1e-5 (1 + |g·d|)`.
    pub fn one_sided() -> Self {
        CheckOptions {
            step: 1e-4,
            rel_tol: 1e-5,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Probe {
    pub direction: usize,
    pub quantity: Quantity,
    /// `g · d`.
    pub predicted: f64,
    /// Difference-quotient estimate of the directional derivative.
    pub observed: f64,
    pub tolerance: f64,
    /// Amount by which the probe's inequality or equality is violated
    /// (nonpositive when it holds exactly).
    pub violation: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub options: CheckOptions,
    pub probes: Vec<Probe>,
    /// Largest `|observed - predicted| / (1 + |predicted|)`.
    pub max_deviation: f64,
    pub pass: bool,
}

impl AuditReport {
    fn new(options: CheckOptions, probes: Vec<Probe>) -> Self {
        let max_deviation = probes
            .iter()
            .map(|p| (p.observed - p.predicted).abs() / (1.0 + p.predicted.abs()))
            .fold(0.0, f64::max);
        let pass = probes.iter().all(|p| p.pass);
        AuditReport {
            options,
            probes,
            max_deviation,
            pass,
        }
    }
}

/// `count` random tangent directions at `p`: `d_c = p_c (ξ_c - Σ_k p_k ξ_k)`
/// for Gaussian `ξ`, scaled so that `|d_c| ≤ p_c`. They sum to zero, vanish
/// off the support and keep `p + h d` inside the support for `|h| < 1`;
/// perturbations are relative to each cell's mass, so difference quotients
/// stay well conditioned near the boundary of the simplex.
pub fn random_directions<R: Rng>(
    p: &JointDistribution,
    count: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let pmf = p.pmf();
    let k = pmf.iter().filter(|&&v| v > 0.0).count();
    let mut out = Vec::with_capacity(count);
    while out.len() < count && k >= 2 {
        let xi: Vec<f64> = pmf
            .iter()
            .map(|&v| {
                if v > 0.0 {
                    StandardNormal.sample(rng)
                } else {
                    0.0
                }
            })
            .collect();
        let mean: f64 = pmf.iter().zip(&xi).map(|(p, x)| p * x).sum();
        let rel: Vec<f64> = pmf
            .iter()
            .zip(&xi)
            .map(|(&v, x)| if v > 0.0 { x - mean } else { 0.0 })
            .collect();
        let scale = rel.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if scale > 0.0 {
            let mut d: Vec<f64> = pmf.iter().zip(&rel).map(|(p, r)| p * r / scale).collect();
            // Exact zero sum up to rounding.
            let drift = d.iter().sum::<f64>() / k as f64;
            for (v, &pv) in d.iter_mut().zip(pmf) {
                if pv > 0.0 {
                    *v -= drift;
                }
            }
            out.push(d);
        }
    }
    out
}

fn values_at(
    p: &JointDistribution,
    d: &[f64],
    step: f64,
    opts: &SolveOptions,
) -> Result<PidResult> {
    let shifted = p.shifted(d, step)?;
    pid_with(&shifted, opts).map(|(r, _)| r)
}

/// Compares `g · d` with the central difference
/// `(f(p + εd) - f(p - εd)) / 2ε` for every direction and quantity.
pub fn gradient_audit(
    p: &JointDistribution,
    bundle: &GradientBundle,
    quantities: &[Quantity],
    directions: &[Vec<f64>],
    opts: &CheckOptions,
) -> Result<AuditReport> {
    let eps = opts.step;
    let per_direction: Vec<Vec<Probe>> = directions
        .par_iter()
        .enumerate()
        .map(|(i, d)| -> Result<Vec<Probe>> {
            let plus = values_at(p, d, eps, &opts.solve)?;
            let minus = values_at(p, d, -eps, &opts.solve)?;
            Ok(quantities
                .iter()
                .map(|&q| {
                    let predicted = bundle.dot(q, d);
                    let observed = (plus.get(q) - minus.get(q)) / (2.0 * eps);
                    let tolerance = opts.rel_tol * (1.0 + predicted.abs());
                    let violation = (observed - predicted).abs() - tolerance;
                    Probe {
                        direction: i,
                        quantity: q,
                        predicted,
                        observed,
                        tolerance,
                        violation,
                        pass: violation <= 0.0,
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(AuditReport::new(
        *opts,
        per_direction.into_iter().flatten().collect(),
    ))
}

/// Smallest step the directional check shrinks to.
const MIN_STEP: f64 = 1e-8;

/// Checks the one-sided directional derivative against `g · d`: at most
/// `g · d` for `M`, CI and SI (supergradients), at least `g · d` for the
/// unique informations (subgradients).
///
/// The derivative is estimated as `R(h) = 2 D(h/2) - D(h)` with
/// `D(h) = (f(p + h d) - f(p)) / h`, which removes the first-order
/// curvature error of the plain quotient. Near a face of the coupling
/// polytope the curvature scale can be far below `h`; the step is halved
/// until `R(h)` and `R(h/2)` agree to half the tolerance or reach
/// `MIN_STEP`, and `R(h/2)` is used.
pub fn directional_check(
    p: &JointDistribution,
    bundle: &GradientBundle,
    quantities: &[Quantity],
    directions: &[Vec<f64>],
    opts: &CheckOptions,
) -> Result<AuditReport> {
    let base = pid_with(p, &opts.solve)?.0;
    let per_direction: Vec<Vec<Probe>> = directions
        .par_iter()
        .enumerate()
        .map(|(i, d)| -> Result<Vec<Probe>> {
            let predicted: Vec<f64> = quantities.iter().map(|&q| bundle.dot(q, d)).collect();
            let tolerance: Vec<f64> = predicted
                .iter()
                .map(|g| opts.rel_tol * (1.0 + g.abs()))
                .collect();
            let quotient = |h: f64| -> Result<Vec<f64>> {
                let r = values_at(p, d, h, &opts.solve)?;
                Ok(quantities
                    .iter()
                    .map(|&q| (r.get(q) - base.get(q)) / h)
                    .collect())
            };
            let mut h = opts.step;
            let mut d_full = quotient(h)?;
            let mut d_half = quotient(h / 2.0)?;
            let observed = loop {
                let d_quarter = quotient(h / 4.0)?;
                let coarse: Vec<f64> = d_half
                    .iter()
                    .zip(&d_full)
                    .map(|(a, b)| 2.0 * a - b)
                    .collect();
                let fine: Vec<f64> = d_quarter
                    .iter()
                    .zip(&d_half)
                    .map(|(a, b)| 2.0 * a - b)
                    .collect();
                let settled = coarse
                    .iter()
                    .zip(&fine)
                    .zip(&tolerance)
                    .all(|((a, b), t)| (a - b).abs() <= 0.5 * t);
                if settled || h / 4.0 < MIN_STEP {
                    break fine;
                }
                h /= 2.0;
                d_full = d_half;
                d_half = d_quarter;
            };
            Ok(quantities
                .iter()
                .enumerate()
                .map(|(k, &q)| {
                    let gap = if q.is_concave_type() {
                        observed[k] - predicted[k]
                    } else {
                        predicted[k] - observed[k]
                    };
                    Probe {
                        direction: i,
                        quantity: q,
                        predicted: predicted[k],
                        observed: observed[k],
                        tolerance: tolerance[k],
                        violation: gap - tolerance[k],
                        pass: gap <= tolerance[k],
                    }
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(AuditReport::new(
        *opts,
        per_direction.into_iter().flatten().collect(),
    ))
}
