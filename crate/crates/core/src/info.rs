//! Discrete entropies and mutual informations in nats.
//!
//! All functions take `0 ln 0 = 0`. Logarithms of zero marginals only arise
//! in the `g`-gradients, which require full support.

use serde::{Deserialize, Serialize};

use crate::dist::{AxisSet, JointDistribution, Marginals};
use crate::error::{PidError, Result};

/// Tolerance on the total mass accepted by [`entropy`].
pub const ENTROPY_MASS_TOL: f64 = 1e-9;

/// One of the four decomposition measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MeasureSelector {
    CI,
    SI,
    UIY,
    UIZ,
}

impl MeasureSelector {
    pub const ALL: [MeasureSelector; 4] = [
        MeasureSelector::CI,
        MeasureSelector::SI,
        MeasureSelector::UIY,
        MeasureSelector::UIZ,
    ];

    /// Coefficient of `M(p)` in the measure: `+1` for CI and SI, `-1` for
    /// the unique informations.
    pub fn sign_of_m(self) -> f64 {
        match self {
            MeasureSelector::CI | MeasureSelector::SI => 1.0,
            MeasureSelector::UIY | MeasureSelector::UIZ => -1.0,
        }
    }

    /// Coefficient of [`g_value`] in the measure.
    pub fn sign_of_g(self) -> f64 {
        match self {
            MeasureSelector::CI => -1.0,
            _ => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MeasureSelector::CI => "CI",
            MeasureSelector::SI => "SI",
            MeasureSelector::UIY => "UIY",
            MeasureSelector::UIZ => "UIZ",
        }
    }
}

impl std::str::FromStr for MeasureSelector {
    type Err = PidError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "CI" => Ok(MeasureSelector::CI),
            "SI" => Ok(MeasureSelector::SI),
            "UIY" => Ok(MeasureSelector::UIY),
            "UIZ" => Ok(MeasureSelector::UIZ),
            _ => Err(PidError::InvalidArgument(format!("unknown measure {s:?}"))),
        }
    }
}

#[inline]
pub(crate) fn xlnx(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

/// Shannon entropy `-Σ x ln x` of a probability vector.
pub fn entropy(dist: &[f64]) -> Result<f64> {
    if dist.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(PidError::InvalidDistribution(
            "entries must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = dist.iter().sum();
    if (total - 1.0).abs() > ENTROPY_MASS_TOL {
        return Err(PidError::InvalidDistribution(format!(
            "mass {total} is not 1"
        )));
    }
    Ok(raw_entropy(dist))
}

pub(crate) fn raw_entropy(dist: &[f64]) -> f64 {
    -dist.iter().map(|&x| xlnx(x)).sum::<f64>()
}

/// Joint entropy of the marginal on `axes`; zero for the empty set.
pub fn joint_entropy(p: &JointDistribution, axes: AxisSet) -> f64 {
    if axes.is_empty() {
        return 0.0;
    }
    raw_entropy(&p.marginal(axes).values)
}

/// `H(target | given) = H(target, given) - H(given)`.
pub fn conditional_entropy(p: &JointDistribution, target: AxisSet, given: AxisSet) -> Result<f64> {
    if target.intersects(given) {
        return Err(PidError::AxisOverlap);
    }
    if target.is_empty() {
        return Err(PidError::InvalidArgument("empty target axis set".into()));
    }
    let h = joint_entropy(p, target | given) - joint_entropy(p, given);
    Ok(h.max(0.0))
}

/// `MI(A; B) = H(A) + H(B) - H(A, B)`.
pub fn mutual_information(p: &JointDistribution, a: AxisSet, b: AxisSet) -> Result<f64> {
    conditional_mutual_information(p, a, b, AxisSet::EMPTY)
}

/// `MI(A; B | G) = H(A, G) + H(B, G) - H(A, B, G) - H(G)`.
pub fn conditional_mutual_information(
    p: &JointDistribution,
    a: AxisSet,
    b: AxisSet,
    given: AxisSet,
) -> Result<f64> {
    if a.intersects(b) || a.intersects(given) || b.intersects(given) {
        return Err(PidError::AxisOverlap);
    }
    if a.is_empty() || b.is_empty() {
        return Err(PidError::InvalidArgument("empty axis set".into()));
    }
    Ok(joint_entropy(p, a | given) + joint_entropy(p, b | given)
        - joint_entropy(p, a | b | given)
        - joint_entropy(p, given))
}

/// `CoI(S; Y; Z) = MI(S; Y) - MI(S; Y | Z)`; may be negative.
pub fn co_information(p: &JointDistribution) -> f64 {
    let mi = mutual_information(p, AxisSet::S, AxisSet::Y).expect("disjoint axes");
    let cmi = conditional_mutual_information(p, AxisSet::S, AxisSet::Y, AxisSet::Z)
        .expect("disjoint axes");
    mi - cmi
}

/// The part of each measure that depends on `p` alone:
///
/// | selector | value |
/// |---|---|
/// | CI  | `H(S|Y,Z)` |
/// | SI  | `MI(S;Y) - H(S|Z)` |
/// | UIY | `H(S|Z)` |
/// | UIZ | `H(S|Y)` |
///
/// so that `CI = M - g`, `SI = M + g`, `UIY = g - M`, `UIZ = g - M`.
pub fn g_value(p: &JointDistribution, sel: MeasureSelector) -> f64 {
    let h = |t, g| conditional_entropy(p, t, g).expect("disjoint axes");
    match sel {
        MeasureSelector::CI => h(AxisSet::S, AxisSet::YZ),
        MeasureSelector::SI => {
            mutual_information(p, AxisSet::S, AxisSet::Y).expect("disjoint axes")
                - h(AxisSet::S, AxisSet::Z)
        }
        MeasureSelector::UIY => h(AxisSet::S, AxisSet::Z),
        MeasureSelector::UIZ => h(AxisSet::S, AxisSet::Y),
    }
}

/// Gradient of [`g_value`] in ambient coordinates, row-major over `S × Y × Z`.
/// Requires every cell to carry positive mass.
pub fn g_gradient(p: &JointDistribution, sel: MeasureSelector) -> Result<Vec<f64>> {
    if let Some((s, y, z)) = p.cells().find(|&(s, y, z)| p.get(s, y, z) <= 0.0) {
        return Err(PidError::ZeroCellOnSupportRequired { s, y, z });
    }
    let m = Marginals::of(p);
    Ok(p.cells()
        .map(|(s, y, z)| g_partial(p, &m, sel, s, y, z))
        .collect())
}

/// One coordinate of the `g`-gradient. Callers guarantee that every marginal
/// entering the selected formula is positive.
pub(crate) fn g_partial(
    p: &JointDistribution,
    m: &Marginals,
    sel: MeasureSelector,
    s: usize,
    y: usize,
    z: usize,
) -> f64 {
    match sel {
        MeasureSelector::CI => (m.yz(y, z) / p.get(s, y, z)).ln(),
        MeasureSelector::SI => -1.0 + (m.sy(s, y) * m.sz(s, z) / (m.s[s] * m.y[y] * m.z[z])).ln(),
        MeasureSelector::UIY => (m.z[z] / m.sz(s, z)).ln(),
        MeasureSelector::UIZ => (m.y[y] / m.sy(s, y)).ln(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::gates;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::LN_2;

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&[0.5, 0.5]).unwrap(), LN_2, epsilon = 1e-15);
        assert_eq!(entropy(&[1.0, 0.0, 0.0]).unwrap(), 0.0);
        let expected = 0.25 * 4f64.ln() + 0.75 * (4.0f64 / 3.0).ln();
        assert_abs_diff_eq!(entropy(&[0.25, 0.75]).unwrap(), expected, epsilon = 1e-15);
        assert_abs_diff_eq!(expected, 0.562335, epsilon = 1e-6);
    }

    #[test]
    fn entropy_rejects_bad_input() {
        assert!(entropy(&[0.5, 0.6]).is_err());
        assert!(entropy(&[1.5, -0.5]).is_err());
    }

    #[test]
    fn conditional_entropies_on_gates() {
        let h = |p: &JointDistribution, t, g| conditional_entropy(p, t, g).unwrap();
        assert_abs_diff_eq!(
            h(&gates::xor(), AxisSet::S, AxisSet::YZ),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            h(&gates::rdn(), AxisSet::S, AxisSet::Z),
            0.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            h(&gates::and(), AxisSet::S, AxisSet::Y),
            0.5 * LN_2,
            epsilon = 1e-15
        );
        assert!(matches!(
            conditional_entropy(&gates::and(), AxisSet::SY, AxisSet::Y),
            Err(PidError::AxisOverlap)
        ));
    }

    #[test]
    fn mutual_informations_on_gates() {
        let mi = |p: &JointDistribution| mutual_information(p, AxisSet::S, AxisSet::Y).unwrap();
        assert_abs_diff_eq!(mi(&gates::unq()), LN_2, epsilon = 1e-15);
        assert_abs_diff_eq!(mi(&gates::xor()), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(co_information(&gates::xor()), -LN_2, epsilon = 1e-15);
        assert!(matches!(
            conditional_mutual_information(&gates::xor(), AxisSet::S, AxisSet::Y, AxisSet::S),
            Err(PidError::AxisOverlap)
        ));
    }

    #[test]
    fn uniform_gradients() {
        let p = JointDistribution::from_dense([2, 2, 2], vec![0.125; 8]).unwrap();
        for g in g_gradient(&p, MeasureSelector::CI).unwrap() {
            assert_abs_diff_eq!(g, LN_2, epsilon = 1e-15);
        }
        // p_{*,*,z} = 1/2 and p_{s,*,z} = 1/4.
        for g in g_gradient(&p, MeasureSelector::UIY).unwrap() {
            assert_abs_diff_eq!(g, LN_2, epsilon = 1e-15);
        }
    }

    #[test]
    fn gradient_requires_full_support() {
        assert!(matches!(
            g_gradient(&gates::and(), MeasureSelector::SI),
            Err(PidError::ZeroCellOnSupportRequired { .. })
        ));
    }
}
