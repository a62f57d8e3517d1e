//! Shared, unique and synergistic information from `M(p)`:
//!
//! ```text
//! CI  = M - H(S|Y,Z)
//! SI  = M + MI(S;Y) - H(S|Z)
//! UIY = H(S|Z) - M
//! UIZ = H(S|Y) - M
//! ```
//!
//! Each measure is `±M ± g` with `g` from [`crate::info::g_value`], so its
//! gradient is `±(-λ-μ) ± ∇g` once the multipliers of the coupling program
//! are known.

use serde::Serialize;

use crate::dist::{AxisSet, JointDistribution, Marginals};
use crate::error::{PidError, Result};
use crate::info::{self, MeasureSelector};
use crate::solver::{self, SolveOptions, SolveReport};

mod audit;
mod witness;

pub use audit::{
    directional_check, gradient_audit, random_directions, AuditReport, CheckOptions, Probe,
};
pub use witness::{nonconvexity_witness, Witness, WitnessReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Unit {
    Nats,
    Bits,
}

impl Unit {
    /// Multiplier from nats to this unit.
    pub fn per_nat(self) -> f64 {
        match self {
            Unit::Nats => 1.0,
            Unit::Bits => 1.0 / std::f64::consts::LN_2,
        }
    }
}

impl std::str::FromStr for Unit {
    type Err = PidError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nats" => Ok(Unit::Nats),
            "bits" => Ok(Unit::Bits),
            _ => Err(PidError::InvalidArgument(format!("unknown unit {s:?}"))),
        }
    }
}

/// `M` or one of the four measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Quantity {
    M,
    CI,
    SI,
    UIY,
    UIZ,
}

impl Quantity {
    pub const ALL: [Quantity; 5] = [
        Quantity::M,
        Quantity::CI,
        Quantity::SI,
        Quantity::UIY,
        Quantity::UIZ,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Quantity::M => "M",
            Quantity::CI => "CI",
            Quantity::SI => "SI",
            Quantity::UIY => "UIY",
            Quantity::UIZ => "UIZ",
        }
    }

    pub fn selector(self) -> Option<MeasureSelector> {
        match self {
            Quantity::M => None,
            Quantity::CI => Some(MeasureSelector::CI),
            Quantity::SI => Some(MeasureSelector::SI),
            Quantity::UIY => Some(MeasureSelector::UIY),
            Quantity::UIZ => Some(MeasureSelector::UIZ),
        }
    }

    /// `M`, CI and SI are checked against supergradients; the unique
    /// informations against subgradients.
    pub fn is_concave_type(self) -> bool {
        !matches!(self, Quantity::UIY | Quantity::UIZ)
    }
}

impl From<MeasureSelector> for Quantity {
    fn from(sel: MeasureSelector) -> Self {
        match sel {
            MeasureSelector::CI => Quantity::CI,
            MeasureSelector::SI => Quantity::SI,
            MeasureSelector::UIY => Quantity::UIY,
            MeasureSelector::UIZ => Quantity::UIZ,
        }
    }
}

impl std::str::FromStr for Quantity {
    type Err = PidError;
    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("m") {
            Ok(Quantity::M)
        } else {
            s.parse::<MeasureSelector>().map(Quantity::from)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PidResult {
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "CI")]
    pub ci: f64,
    #[serde(rename = "SI")]
    pub si: f64,
    #[serde(rename = "UIy")]
    pub ui_y: f64,
    #[serde(rename = "UIz")]
    pub ui_z: f64,
}

impl PidResult {
    /// The decomposition of `p` given its optimum `m` (nats).
    pub fn from_m(p: &JointDistribution, m: f64) -> PidResult {
        let g = |sel| info::g_value(p, sel);
        PidResult {
            m,
            ci: m - g(MeasureSelector::CI),
            si: m + g(MeasureSelector::SI),
            ui_y: g(MeasureSelector::UIY) - m,
            ui_z: g(MeasureSelector::UIZ) - m,
        }
    }

    pub fn get(&self, q: Quantity) -> f64 {
        match q {
            Quantity::M => self.m,
            Quantity::CI => self.ci,
            Quantity::SI => self.si,
            Quantity::UIY => self.ui_y,
            Quantity::UIZ => self.ui_z,
        }
    }

    pub fn in_unit(&self, unit: Unit) -> PidResult {
        let k = unit.per_nat();
        PidResult {
            m: self.m * k,
            ci: self.ci * k,
            si: self.si * k,
            ui_y: self.ui_y * k,
            ui_z: self.ui_z * k,
        }
    }

    /// Deviations from the decomposition identities, in nats.
    pub fn identity_residuals(&self, p: &JointDistribution) -> IdentityResiduals {
        let mi = |b| info::mutual_information(p, AxisSet::S, b).expect("disjoint axes");
        IdentityResiduals {
            total: (self.ci + self.si + self.ui_y + self.ui_z - mi(AxisSet::YZ)).abs(),
            y: (self.si + self.ui_y - mi(AxisSet::Y)).abs(),
            z: (self.si + self.ui_z - mi(AxisSet::Z)).abs(),
        }
    }
}

/// `|CI+SI+UIY+UIZ - MI(S;Y,Z)|`, `|SI+UIY - MI(S;Y)|`, `|SI+UIZ - MI(S;Z)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityResiduals {
    pub total: f64,
    pub y: f64,
    pub z: f64,
}

impl IdentityResiduals {
    pub fn max(&self) -> f64 {
        self.total.max(self.y).max(self.z)
    }
}

/// Solves with default options and returns the decomposition in nats.
pub fn pid(p: &JointDistribution) -> Result<PidResult> {
    pid_with(p, &SolveOptions::default()).map(|(r, _)| r)
}

pub fn pid_with(p: &JointDistribution, opts: &SolveOptions) -> Result<(PidResult, SolveReport)> {
    let report = solver::solve(p, opts)?;
    Ok((PidResult::from_m(p, report.m_value), report))
}

/// `-λ_{s,y} - μ_{s,z}` on admissible cells and zero elsewhere, a
/// supergradient of the concave function `M` at `p`.
pub fn supergradient_m(report: &SolveReport) -> Result<Vec<f64>> {
    report.require_certified()?;
    let [ns, ny, nz] = report.coupling.shape;
    let cert = &report.certificate;
    let mut g = vec![0.0; ns * ny * nz];
    for s in 0..ns {
        for y in 0..ny {
            for z in 0..nz {
                let k = (s * ny + y) * nz + z;
                if report.coupling.admissible[k] {
                    g[k] = -cert.pair_sum(s, y, z);
                }
            }
        }
    }
    Ok(g)
}

/// Gradients of `M` and the four measures, dense over `S × Y × Z`.
/// Entries outside `support` are zero and carry no meaning.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradientBundle {
    pub shape: [usize; 3],
    pub support: Vec<bool>,
    pub grad_m: Vec<f64>,
    pub grad_ci: Vec<f64>,
    pub grad_si: Vec<f64>,
    pub grad_ui_y: Vec<f64>,
    pub grad_ui_z: Vec<f64>,
    /// The optimal coupling is strictly positive on its admissible cells.
    pub smooth: bool,
}

impl GradientBundle {
    pub fn get(&self, q: Quantity) -> &[f64] {
        match q {
            Quantity::M => &self.grad_m,
            Quantity::CI => &self.grad_ci,
            Quantity::SI => &self.grad_si,
            Quantity::UIY => &self.grad_ui_y,
            Quantity::UIZ => &self.grad_ui_z,
        }
    }

    /// `g · d` over the support.
    pub fn dot(&self, q: Quantity, d: &[f64]) -> f64 {
        self.get(q)
            .iter()
            .zip(d)
            .zip(&self.support)
            .filter(|(_, &on)| on)
            .map(|((g, d), _)| g * d)
            .sum()
    }
}

/// Gradients at a full-support `p` from its certified solve.
pub fn pid_gradients(p: &JointDistribution, report: &SolveReport) -> Result<GradientBundle> {
    if let Some((s, y, z)) = p.cells().find(|&(s, y, z)| p.get(s, y, z) <= 0.0) {
        return Err(PidError::ZeroCellOnSupportRequired { s, y, z });
    }
    support_gradients(p, report)
}

/// Gradients on the support of `p`, for any `p`. On the support every
/// marginal entering the formulas is positive.
pub fn support_gradients(p: &JointDistribution, report: &SolveReport) -> Result<GradientBundle> {
    if report.coupling.shape != p.shape() {
        return Err(PidError::InvalidArgument(
            "solve report does not match the distribution".into(),
        ));
    }
    let grad_m = supergradient_m(report)?;
    let marg = Marginals::of(p);
    let support: Vec<bool> = p.pmf().iter().map(|&v| v > 0.0).collect();
    let measure = |sel: MeasureSelector| -> Vec<f64> {
        p.cells()
            .zip(&grad_m)
            .zip(&support)
            .map(|(((s, y, z), &gm), &on)| {
                if on {
                    sel.sign_of_m() * gm + sel.sign_of_g() * info::g_partial(p, &marg, sel, s, y, z)
                } else {
                    0.0
                }
            })
            .collect()
    };
    Ok(GradientBundle {
        shape: p.shape(),
        grad_ci: measure(MeasureSelector::CI),
        grad_si: measure(MeasureSelector::SI),
        grad_ui_y: measure(MeasureSelector::UIY),
        grad_ui_z: measure(MeasureSelector::UIZ),
        grad_m: grad_m
            .iter()
            .zip(&support)
            .map(|(&g, &on)| if on { g } else { 0.0 })
            .collect(),
        support,
        smooth: report.strict_interior,
    })
}

#[cfg(test)]
mod tests;
