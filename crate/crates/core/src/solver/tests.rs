use super::*;
use crate::dist::gates;
use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::LN_2;

fn random_full_support(rng: &mut impl Rng, shape: [usize; 3]) -> JointDistribution {
    let n = shape.iter().product();
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 0.05).collect();
    let total: f64 = raw.iter().sum();
    JointDistribution::from_dense(shape, raw.iter().map(|v| v / total).collect()).unwrap()
}

#[test]
fn xor_optimum_is_uniform() {
    let r = solve(&gates::xor(), &SolveOptions::default()).unwrap();
    assert_abs_diff_eq!(r.m_value, LN_2, epsilon = 1e-9);
    for &v in &r.coupling.q {
        assert_abs_diff_eq!(v, 0.125, epsilon = 1e-9);
    }
    assert!(r.strict_interior);
}

#[test]
fn and_optimum_has_two_empty_fibers() {
    let p = gates::and();
    let r = solve(&p, &SolveOptions::default()).unwrap();
    assert_abs_diff_eq!(r.m_value, 0.5 * LN_2, epsilon = 1e-9);
    assert_abs_diff_eq!(r.coupling.get(0, 0, 0), 0.5, epsilon = 1e-10);
    assert_abs_diff_eq!(r.coupling.get(0, 1, 1), 0.25, epsilon = 1e-10);
    assert_abs_diff_eq!(r.coupling.get(1, 1, 1), 0.25, epsilon = 1e-10);
    let report = verify_kkt(&p, &r.coupling, &r.certificate, 1e-7);
    assert!(report.pass);
    let empty: Vec<(usize, usize)> = report.zero_fibers.iter().map(|f| (f.y, f.z)).collect();
    assert_eq!(empty, vec![(0, 1), (1, 0)]);
}

#[test]
fn rdn_is_a_singleton() {
    let p = gates::rdn();
    let r = solve(&p, &SolveOptions::default()).unwrap();
    assert!(r.singleton);
    assert_eq!(r.m_value, 0.0);
    assert_eq!(r.coupling.q, p.pmf().to_vec());
}

#[test]
fn feasible_start_examples() {
    assert_eq!(feasible_start(&gates::rdn()).q, gates::rdn().pmf().to_vec());
    for &v in &feasible_start(&gates::xor()).q {
        assert_abs_diff_eq!(v, 0.125, epsilon = 1e-16);
    }
}

#[test]
fn hand_checked_and_certificate() {
    let p = gates::and();
    let r = solve(&p, &SolveOptions::default()).unwrap();
    // λ_{0,0}+μ_{0,0} = 0, λ_{s,1}+μ_{s,1} = -ln 2; (0,1) and (1,0) empty.
    let mut cert = KktCertificate {
        shape: [2, 2, 2],
        lambda: vec![0.0, -0.5 * LN_2, -1.0, -0.5 * LN_2],
        mu: vec![0.0, -0.5 * LN_2, 0.0, -0.5 * LN_2],
        residual_primal: 0.0,
        residual_stationarity: 0.0,
        residual_zero_cells: 0.0,
    };
    let good = verify_kkt(&p, &r.coupling, &cert, 1e-6);
    assert!(good.pass, "{good:?}");
    cert.lambda[0] += 0.1;
    let bad = verify_kkt(&p, &r.coupling, &cert, 1e-6);
    assert!(!bad.stationary);
    assert_abs_diff_eq!(bad.residual_stationarity, 0.1, epsilon = 1e-9);

    let mut off = r.coupling.clone();
    off.q[0] += 1e-3;
    assert!(!verify_kkt(&p, &off, &r.certificate, 1e-6).feasible);
}

#[test]
fn gauge_shift_keeps_residuals() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = random_full_support(&mut rng, [3, 2, 3]);
    let r = solve(&p, &SolveOptions::default()).unwrap();
    let a = verify_kkt(&p, &r.coupling, &r.certificate, 1e-7);
    let b = verify_kkt(
        &p,
        &r.coupling,
        &r.certificate.gauge_shifted(&[5.0, -2.0, 0.5]),
        1e-7,
    );
    assert!(a.pass && b.pass);
    assert_abs_diff_eq!(
        a.residual_stationarity,
        b.residual_stationarity,
        epsilon = 1e-12
    );
}

#[test]
fn random_instances_certify() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let shape = [
            rng.random_range(1..=3),
            rng.random_range(1..=3),
            rng.random_range(1..=3),
        ];
        let p = random_full_support(&mut rng, shape);
        let r = solve(&p, &SolveOptions::default()).unwrap_or_else(|e| panic!("{shape:?}: {e}"));
        assert!(r.certificate.residual_primal <= 1e-10);
        assert!(r.certificate.residual_stationarity <= 1e-7);
        assert!(r.certificate.residual_zero_cells <= 1e-7);
        let hs = crate::info::joint_entropy(&p, crate::dist::AxisSet::S);
        assert!(r.m_value >= -1e-12 && r.m_value <= hs + 1e-9);
    }
}

#[test]
fn sparse_instances_certify() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut done = 0;
    while done < 40 {
        let shape = [
            rng.random_range(2..=3),
            rng.random_range(2..=3),
            rng.random_range(2..=3),
        ];
        let n: usize = shape.iter().product();
        let raw: Vec<f64> = (0..n)
            .map(|_| {
                if rng.random::<f64>() < 0.4 {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        let total: f64 = raw.iter().sum();
        if total == 0.0 {
            continue;
        }
        let p =
            JointDistribution::from_dense(shape, raw.iter().map(|v| v / total).collect()).unwrap();
        let r =
            solve(&p, &SolveOptions::default()).unwrap_or_else(|e| panic!("{:?}: {e}", p.pmf()));
        assert!(r.certified);
        done += 1;
    }
}

#[test]
fn bruteforce_never_beats_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let opts = BruteForceOptions {
        samples: 600,
        ..Default::default()
    };
    for _ in 0..10 {
        let p = random_full_support(&mut rng, [2, 2, 2]);
        let m = solve(&p, &SolveOptions::default()).unwrap().m_value;
        let b = bruteforce_m(&p, &opts);
        assert!(m >= b - 1e-9, "{m} < {b}");
        assert!(m - b < 1e-5, "{m} vs {b}");
    }
}

#[test]
fn no_admissible_cells_is_impossible_for_valid_input() {
    let p = JointDistribution::from_dense([1, 1, 1], vec![1.0]).unwrap();
    let r = solve(&p, &SolveOptions::default()).unwrap();
    assert_eq!(r.m_value, 0.0);
}

fn from_bits(shape: [usize; 3], bits: &[u64]) -> JointDistribution {
    JointDistribution::from_dense(shape, bits.iter().map(|&b| f64::from_bits(b)).collect()).unwrap()
}

#[test]
fn near_xor_flat_optimum() {
    let p = from_bits(
        [2, 2, 2],
        &[
            4598172103052875311,
            4550021246799021303,
            4549123699963674704,
            4598169386529970663,
            4547174421201950220,
            4598171435806568940,
            4598170837031710851,
            4545373706557733515,
        ],
    );
    let r = solve(&p, &SolveOptions::default()).unwrap();
    assert!(r.certified);
    assert!((r.m_value - LN_2).abs() < 1e-3);
}

// Two empty fibers coupled through one source value; the minimum-norm
// multipliers violate the zero-fiber inequality.
#[test]
fn degenerate_multipliers_are_repaired() {
    let p = from_bits(
        [2, 2, 3],
        &[
            4526948578087498441,
            0,
            0,
            0,
            0,
            4593908263421280379,
            4591960456937792446,
            4596905359950276031,
            4563619175548082929,
            4596619343365709374,
            4599874129899558684,
            0,
        ],
    );
    let r = solve(&p, &SolveOptions::default()).unwrap();
    assert!(r.certified);
    let b = bruteforce_m(&p, &BruteForceOptions::default());
    assert!(
        r.m_value >= b - 1e-12 && r.m_value - b < 1e-9,
        "{} vs {b}",
        r.m_value
    );
}
