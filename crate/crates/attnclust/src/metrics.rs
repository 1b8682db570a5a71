//! Centroid-recovery metrics.
//!
//! Learned heads are only identified up to relabeling and per-head sign, so
//! recovery is measured by the Frobenius distance minimized over the signed
//! permutation group (or the plain permutation group for the sign-sensitive
//! variant). The search is exhaustive over the `K! * 2^K` candidates — with
//! the per-head sign chosen optimally inside each permutation — and is
//! guarded to `K <= 8` heads.

use ndarray::ArrayView2;

use crate::error::{Error, Result};

/// Largest head count the exhaustive matching accepts.
pub const MAX_MATCH_HEADS: usize = 8;

/// Alignment between an estimated head matrix and reference centroids.
#[derive(Clone, Debug)]
pub struct RecoveryReport {
    /// Frobenius distance minimized over permutations and per-head signs.
    pub distance_up_to_sign_perm: f64,
    /// Frobenius distance minimized over permutations only.
    pub signed_distance: f64,
    /// `distance_up_to_sign_perm / sqrt(d)` — the per-coordinate RMSE of the
    /// best alignment.
    pub minimal_rmse: f64,
    /// `best_permutation[c]` is the reference row matched to estimate row `c`.
    pub best_permutation: Vec<usize>,
    /// Sign applied to each matched reference row (`+1.0` or `-1.0`).
    pub best_signs: Vec<f64>,
}

fn check_shapes(estimate: &ArrayView2<'_, f64>, truth: &ArrayView2<'_, f64>) -> Result<usize> {
    let (k, d) = estimate.dim();
    let (kt, dt) = truth.dim();
    if k != kt {
        return Err(Error::Argument(format!(
            "estimate has {k} heads but reference has {kt}"
        )));
    }
    if d != dt {
        return Err(Error::Dimension(format!(
            "estimate dimension {d} does not match reference dimension {dt}"
        )));
    }
    if k == 0 {
        return Err(Error::Argument("need at least one head to match".into()));
    }
    if k > MAX_MATCH_HEADS {
        return Err(Error::Argument(format!(
            "exhaustive matching is limited to {MAX_MATCH_HEADS} heads, got {k}"
        )));
    }
    Ok(k)
}

/// Pairwise squared distances `cost[c][j] = |est_c - s * ref_j|^2` minimized
/// over the sign `s`, along with the minimizing sign.
fn signed_pair_costs(
    estimate: &ArrayView2<'_, f64>,
    truth: &ArrayView2<'_, f64>,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = estimate.nrows();
    let mut cost = vec![vec![0.0; k]; k];
    let mut sign = vec![vec![1.0; k]; k];
    for c in 0..k {
        let e = estimate.row(c);
        let ne = e.dot(&e);
        for j in 0..k {
            let r = truth.row(j);
            let dot = e.dot(&r);
            cost[c][j] = ne + r.dot(&r) - 2.0 * dot.abs();
            sign[c][j] = if dot < 0.0 { -1.0 } else { 1.0 };
        }
    }
    (cost, sign)
}

fn best_assignment(cost: &[Vec<f64>]) -> (f64, Vec<usize>) {
    let k = cost.len();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best = f64::INFINITY;
    let mut best_perm = perm.clone();
    permute(&mut perm, 0, &mut |p| {
        let total: f64 = p.iter().enumerate().map(|(c, &j)| cost[c][j]).sum();
        if total < best {
            best = total;
            best_perm = p.to_vec();
        }
    });
    (best, best_perm)
}

fn permute(items: &mut [usize], start: usize, visit: &mut impl FnMut(&[usize])) {
    if start == items.len() {
        visit(items);
        return;
    }
    for i in start..items.len() {
        items.swap(start, i);
        permute(items, start + 1, visit);
        items.swap(start, i);
    }
}

/// Frobenius distance up to signed permutation, with the minimizing witness:
/// `min_{pi, s} sqrt(sum_c |est_c - s_c * ref_{pi(c)}|^2)` and the `(pi, s)`
/// attaining it.
pub fn dist_up_to_sign_perm(
    estimate: ArrayView2<'_, f64>,
    truth: ArrayView2<'_, f64>,
) -> Result<(f64, Vec<usize>, Vec<f64>)> {
    let k = check_shapes(&estimate, &truth)?;
    let (cost, sign) = signed_pair_costs(&estimate, &truth);
    let (best, perm) = best_assignment(&cost);
    let signs: Vec<f64> = (0..k).map(|c| sign[c][perm[c]]).collect();
    Ok((best.max(0.0).sqrt(), perm, signs))
}

/// Frobenius distance up to permutation only — sign flips count as error.
pub fn dist_signed(estimate: ArrayView2<'_, f64>, truth: ArrayView2<'_, f64>) -> Result<f64> {
    check_shapes(&estimate, &truth)?;
    let k = estimate.nrows();
    let mut cost = vec![vec![0.0; k]; k];
    for c in 0..k {
        let e = estimate.row(c);
        for j in 0..k {
            let diff = &e.to_owned() - &truth.row(j);
            cost[c][j] = diff.dot(&diff);
        }
    }
    let (best, _) = best_assignment(&cost);
    Ok(best.max(0.0).sqrt())
}

/// Per-coordinate RMSE of an aligned distance: `distance / sqrt(dim)`.
/// Zero-padding both matrices into a larger ambient dimension leaves the
/// distance unchanged, so the RMSE scales as `1/sqrt(dim)`.
pub fn minimal_rmse(distance: f64, dim: usize) -> Result<f64> {
    if dim == 0 {
        return Err(Error::Dimension("dimension must be positive".into()));
    }
    if !(distance >= 0.0) {
        return Err(Error::Domain(format!(
            "distance must be non-negative, got {distance}"
        )));
    }
    Ok(distance / (dim as f64).sqrt())
}

/// Full recovery report for an estimate against reference centroids.
pub fn recovery_report(
    estimate: ArrayView2<'_, f64>,
    truth: ArrayView2<'_, f64>,
) -> Result<RecoveryReport> {
    let (dist, perm, signs) = dist_up_to_sign_perm(estimate, truth)?;
    let signed = dist_signed(estimate, truth)?;
    let rmse = minimal_rmse(dist, estimate.ncols())?;
    Ok(RecoveryReport {
        distance_up_to_sign_perm: dist,
        signed_distance: signed,
        minimal_rmse: rmse,
        best_permutation: perm,
        best_signs: signs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn half_rotated_head_example() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let truth = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let est = array![[1.0, 0.0, 0.0], [s, s, 0.0]];
        let (dist, perm, signs) = dist_up_to_sign_perm(est.view(), truth.view()).unwrap();
        let expect = (2.0 - std::f64::consts::SQRT_2).sqrt();
        assert!((dist - expect).abs() < 1e-12, "dist {dist} expect {expect}");
        assert_eq!(perm, vec![0, 1]);
        assert_eq!(signs, vec![1.0, 1.0]);
    }

    #[test]
    fn sign_flip_is_free_only_in_the_signed_perm_metric() {
        let truth = array![[1.0, 0.0], [0.0, 1.0]];
        let est = array![[-1.0, 0.0], [0.0, 1.0]];
        let (dist, _, signs) = dist_up_to_sign_perm(est.view(), truth.view()).unwrap();
        assert!(dist.abs() < 1e-12);
        assert_eq!(signs, vec![-1.0, 1.0]);
        let signed = dist_signed(est.view(), truth.view()).unwrap();
        assert!((signed - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sign_perm_distance_never_exceeds_signed_distance() {
        let truth = array![[0.8, 0.6, 0.0], [0.0, 0.6, -0.8]];
        let est = array![[0.1, -0.4, 0.9], [-0.7, 0.1, 0.7]];
        let (dist, _, _) = dist_up_to_sign_perm(est.view(), truth.view()).unwrap();
        let signed = dist_signed(est.view(), truth.view()).unwrap();
        assert!(dist <= signed + 1e-15);
    }

    #[test]
    fn rmse_scales_with_dimension() {
        assert!((minimal_rmse(0.1, 100).unwrap() - 0.01).abs() < 1e-15);
        assert!(minimal_rmse(0.1, 0).is_err());
        assert!(minimal_rmse(-0.5, 3).is_err());
    }

    #[test]
    fn head_count_guard() {
        let est = ndarray::Array2::<f64>::eye(9);
        let truth = ndarray::Array2::<f64>::eye(9);
        assert!(matches!(
            dist_up_to_sign_perm(est.view(), truth.view()),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn permutation_recovery() {
        let truth = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let est = array![[0.0, 0.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]];
        let (dist, perm, signs) = dist_up_to_sign_perm(est.view(), truth.view()).unwrap();
        assert!(dist.abs() < 1e-12);
        assert_eq!(perm, vec![2, 0, 1]);
        assert_eq!(signs, vec![-1.0, 1.0, 1.0]);
    }
}
