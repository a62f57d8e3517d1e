use super::*;
use crate::dist::gates;
use crate::pid::pid;
use approx::assert_abs_diff_eq;
use std::f64::consts::LN_2;

fn quick() -> ExtractOptions {
    ExtractOptions {
        restarts: 4,
        ..Default::default()
    }
}

#[test]
fn canonical_map_counts() {
    // Bell numbers, truncated at m blocks.
    assert_eq!(canonical_maps(3, 3).len(), 5);
    assert_eq!(canonical_maps(3, 2).len(), 4);
    assert_eq!(canonical_maps(4, 4).len(), 15);
    assert_eq!(canonical_maps(2, 1), vec![vec![0, 0]]);
}

#[test]
fn rdn_extracts_one_bit() {
    let r = si_ext(&gates::rdn(), 2).unwrap();
    assert!(r.certified);
    assert_abs_diff_eq!(r.value, LN_2, epsilon = 1e-9);
    assert_eq!(r.argmax.as_map(), Some(vec![0, 1]));
}

#[test]
fn and_gate_identity_is_best() {
    let p = gates::and();
    let r = si_ext(&p, 2).unwrap();
    assert_abs_diff_eq!(r.value, pid(&p).unwrap().si, epsilon = 1e-9);
    assert_abs_diff_eq!(r.value / LN_2, 0.311278, epsilon = 1e-6);
}

#[test]
fn constant_map_scores_zero() {
    let p = gates::and();
    let pi = StochasticMatrix::deterministic(2, p.labels().s.clone(), &[0, 0]).unwrap();
    assert_abs_diff_eq!(
        shared_information(&pi, &p, &SolveOptions::default()).unwrap(),
        0.0,
        epsilon = 1e-12
    );
}

#[test]
fn enumeration_guard() {
    let p = JointDistribution::from_dense([8, 1, 1], vec![0.125; 8]).unwrap();
    assert!(matches!(
        si_ext(&p, 8),
        Err(PidError::EnumerationTooLarge { .. })
    ));
}

#[test]
fn club_reaches_one_bit_on_rdn() {
    let r = si_club(&gates::rdn(), 2, &quick()).unwrap();
    assert!(!r.certified);
    assert!(r.value >= LN_2 - 1e-4 * LN_2, "{}", r.value);
    assert_abs_diff_eq!(r.recompute(&gates::rdn()).unwrap(), r.value, epsilon = 1e-9);
}

#[test]
fn constant_source_has_nothing_to_extract() {
    let p = JointDistribution::from_dense([1, 2, 2], vec![0.1, 0.2, 0.3, 0.4]).unwrap();
    for m in 1..=3 {
        assert_abs_diff_eq!(si_club(&p, m, &quick()).unwrap().value, 0.0, epsilon = 1e-9);
    }
}

#[test]
fn padded_warm_start_is_monotone() {
    let p = gates::and();
    let r2 = si_club(&p, 2, &quick()).unwrap();
    let r3 = si_club_from(&p, 3, &quick(), &[r2.argmax.clone()]).unwrap();
    assert!(r3.value >= r2.value - 1e-12);
}

#[test]
fn trace_csv_layout() {
    let r = si_club(&gates::rdn(), 2, &quick()).unwrap();
    let csv = r.trace_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("restart,iteration,objective_nats"));
    assert_eq!(lines.count(), r.trace.len());
    assert_eq!(r.restarts_used, 5);
}

#[test]
fn club_is_reproducible() {
    let p = gates::and();
    let a = si_club(&p, 3, &quick()).unwrap();
    let b = si_club(&p, 3, &quick()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sandwich_on_gates() {
    for p in [gates::and(), gates::rdn()] {
        let r = check_sandwich(&p, 2, &quick()).unwrap();
        assert!(r.pass, "{r:?}");
    }
}
