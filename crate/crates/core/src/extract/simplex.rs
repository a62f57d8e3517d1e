/// Euclidean projection onto `{x ≥ 0, Σx = 1}` by the sorted-threshold rule.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    let mut x: Vec<f64> = v.iter().map(|&vi| (vi - theta).max(0.0)).collect();
    // Remove the rounding left in the sum.
    let total: f64 = x.iter().sum();
    x.iter_mut().for_each(|xi| *xi /= total);
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_shift() {
        let x = project_simplex(&[0.6, 0.9]);
        assert_abs_diff_eq!(x[0], 0.35, epsilon = 1e-15);
        assert_abs_diff_eq!(x[1], 0.65, epsilon = 1e-15);
    }

    #[test]
    fn feasible_points_are_fixed() {
        let v = [0.2, 0.3, 0.5];
        let x = project_simplex(&v);
        for (a, b) in x.iter().zip(v) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn clipped_to_a_vertex() {
        assert_eq!(project_simplex(&[2.0, -1.0, 0.0]), vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn single_coordinate() {
        assert_eq!(project_simplex(&[-3.0]), vec![1.0]);
    }
}
