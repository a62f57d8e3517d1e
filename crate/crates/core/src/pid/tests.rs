use super::*;
use crate::dist::gates;
use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::LN_2;

fn bits(p: &JointDistribution) -> PidResult {
    pid(p).unwrap().in_unit(Unit::Bits)
}

fn random_full_support(rng: &mut impl Rng, shape: [usize; 3]) -> JointDistribution {
    let n = shape.iter().product();
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    JointDistribution::from_dense(shape, raw.iter().map(|v| v / total).collect()).unwrap()
}

fn product(u: &[f64], v: &[f64], w: &[f64]) -> JointDistribution {
    let mut pmf = Vec::new();
    for a in u {
        for b in v {
            for c in w {
                pmf.push(a * b * c);
            }
        }
    }
    JointDistribution::from_dense([u.len(), v.len(), w.len()], pmf).unwrap()
}

#[test]
fn gate_values_in_bits() {
    let r = bits(&gates::xor());
    assert_abs_diff_eq!(r.ci, 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(r.si, 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(r.ui_y, 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(r.ui_z, 0.0, epsilon = 1e-9);

    let r = bits(&gates::and());
    assert_abs_diff_eq!(r.si, 0.311278, epsilon = 1e-6);
    assert_abs_diff_eq!(r.ci, 0.5, epsilon = 1e-9);
    assert_abs_diff_eq!(r.ui_y, 0.0, epsilon = 1e-9);

    let r = bits(&gates::unq());
    assert_abs_diff_eq!(r.ui_y, 1.0, epsilon = 1e-9);
    assert_abs_diff_eq!(r.si, 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(r.ci, 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(r.ui_z, 0.0, epsilon = 1e-9);
}

#[test]
fn identities_on_random_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..30 {
        let p = random_full_support(&mut rng, [3, 2, 3]);
        let r = pid(&p).unwrap();
        assert!(r.identity_residuals(&p).max() <= 1e-10);
        for v in [r.ci, r.si, r.ui_y, r.ui_z] {
            assert!(v >= -1e-7);
        }
    }
}

#[test]
fn swapping_y_and_z_swaps_unique_informations() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let p = random_full_support(&mut rng, [2, 3, 2]);
    let a = pid(&p).unwrap();
    let b = pid(&p.swap_yz()).unwrap();
    assert_abs_diff_eq!(a.m, b.m, epsilon = 1e-8);
    assert_abs_diff_eq!(a.ci, b.ci, epsilon = 1e-8);
    assert_abs_diff_eq!(a.si, b.si, epsilon = 1e-8);
    assert_abs_diff_eq!(a.ui_y, b.ui_z, epsilon = 1e-8);
    assert_abs_diff_eq!(a.ui_z, b.ui_y, epsilon = 1e-8);
}

#[test]
fn relabeling_leaves_values_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let p = random_full_support(&mut rng, [3, 2, 3]);
    let q = p.permute(&[2, 0, 1], &[1, 0], &[1, 2, 0]).unwrap();
    let (a, b) = (pid(&p).unwrap(), pid(&q).unwrap());
    for quantity in Quantity::ALL {
        assert_abs_diff_eq!(a.get(quantity), b.get(quantity), epsilon = 1e-9);
    }
}

#[test]
fn xor_supergradient_is_ln2() {
    let (_, report) = pid_with(&gates::xor(), &SolveOptions::default()).unwrap();
    for g in supergradient_m(&report).unwrap() {
        assert_abs_diff_eq!(g, LN_2, epsilon = 1e-9);
    }
}

#[test]
fn product_supergradient_is_minus_log_source() {
    let u = [0.2, 0.5, 0.3];
    let p = product(&u, &[0.6, 0.4], &[0.1, 0.9]);
    let (_, report) = pid_with(&p, &SolveOptions::default()).unwrap();
    let g = supergradient_m(&report).unwrap();
    for (k, (s, _, _)) in p.cells().enumerate() {
        assert_abs_diff_eq!(g[k], -u[s].ln(), epsilon = 1e-8);
    }
    let mut shifted = report.clone();
    shifted.certificate = report.certificate.gauge_shifted(&[5.0, 5.0, 5.0]);
    for (a, b) in g.iter().zip(supergradient_m(&shifted).unwrap()) {
        assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
    }
}

#[test]
fn ci_is_stationary_where_coupling_equals_p() {
    let p = product(&[0.3, 0.7], &[0.5, 0.25, 0.25], &[0.4, 0.6]);
    let (_, report) = pid_with(&p, &SolveOptions::default()).unwrap();
    let bundle = pid_gradients(&p, &report).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for d in random_directions(&p, 10, &mut rng) {
        assert_abs_diff_eq!(bundle.dot(Quantity::CI, &d), 0.0, epsilon = 1e-8);
    }
}

#[test]
fn unique_plus_shared_matches_mi_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let p = random_full_support(&mut rng, [2, 2, 3]);
    let (_, report) = pid_with(&p, &SolveOptions::default()).unwrap();
    let b = pid_gradients(&p, &report).unwrap();
    let m = crate::dist::Marginals::of(&p);
    // ∂MI(S;Y) = ln(p_{s,y,*} / (p_{s,*,*} p_{*,y,*})) - 1 in ambient coordinates.
    for d in random_directions(&p, 5, &mut rng) {
        let mi: f64 = p
            .cells()
            .zip(&d)
            .map(|((s, y, _), dv)| dv * ((m.sy(s, y) / (m.s[s] * m.y[y])).ln() - 1.0))
            .sum();
        assert_abs_diff_eq!(
            b.dot(Quantity::SI, &d) + b.dot(Quantity::UIY, &d),
            mi,
            epsilon = 1e-8
        );
    }
}

#[test]
fn strict_gradients_need_full_support() {
    let p = gates::and();
    let (_, report) = pid_with(&p, &SolveOptions::default()).unwrap();
    assert!(matches!(
        pid_gradients(&p, &report),
        Err(PidError::ZeroCellOnSupportRequired { .. })
    ));
    let b = support_gradients(&p, &report).unwrap();
    assert_eq!(b.support.iter().filter(|&&s| s).count(), 4);
    assert!(!b.smooth);
}

#[test]
fn central_audit_on_smooth_instance() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = random_full_support(&mut rng, [2, 2, 2]);
    let (_, report) = pid_with(&p, &SolveOptions::default()).unwrap();
    let bundle = pid_gradients(&p, &report).unwrap();
    assert!(bundle.smooth);
    let dirs = random_directions(&p, 5, &mut rng);
    let audit =
        gradient_audit(&p, &bundle, &Quantity::ALL, &dirs, &CheckOptions::central()).unwrap();
    assert!(audit.pass, "max deviation {}", audit.max_deviation);
}

#[test]
fn m_supergradient_directional_check() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let p = random_full_support(&mut rng, [3, 2, 2]);
    let (_, report) = pid_with(&p, &SolveOptions::default()).unwrap();
    let bundle = pid_gradients(&p, &report).unwrap();
    let dirs = random_directions(&p, 10, &mut rng);
    let check = directional_check(
        &p,
        &bundle,
        &[Quantity::M],
        &dirs,
        &CheckOptions::one_sided(),
    )
    .unwrap();
    assert!(check.pass);
}

#[test]
fn directions_are_zero_sum_and_support_preserving() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for d in random_directions(&gates::and(), 4, &mut rng) {
        assert_abs_diff_eq!(d.iter().sum::<f64>(), 0.0, epsilon = 1e-14);
        for (k, v) in d.iter().enumerate() {
            if gates::and().pmf()[k] == 0.0 {
                assert_eq!(*v, 0.0);
            }
        }
    }
}

#[test]
fn zero_attempts_find_nothing() {
    let r = nonconvexity_witness(Quantity::CI, [2, 2, 2], 0, 1e-4, 42).unwrap();
    assert!(r.concavity.is_none() && r.convexity.is_none());
}

#[test]
fn m_has_no_concavity_witness() {
    let r = nonconvexity_witness(Quantity::M, [2, 2, 2], 300, 1e-9, 42).unwrap();
    assert!(r.concavity.is_none());
}
