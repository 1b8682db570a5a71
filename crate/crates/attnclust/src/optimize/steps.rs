//! Single sphere-projected gradient steps.

use crate::error::{Error, Result};
use ndarray::{Array1, ArrayView1};

fn check_step(mu: &ArrayView1<'_, f64>, grad: &ArrayView1<'_, f64>, gamma: f64) -> Result<()> {
    if mu.len() != grad.len() {
        return Err(Error::Dimension(format!(
            "parameter has dimension {}, gradient has {}",
            mu.len(),
            grad.len()
        )));
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::Domain(format!(
            "step size must be finite and non-negative, got {gamma}"
        )));
    }
    Ok(())
}

fn renormalize(mut v: Array1<f64>) -> Result<Array1<f64>> {
    let norm = v.dot(&v).sqrt();
    if norm < 1e-12 {
        return Err(Error::Step(
            "renormalization of a vanishing iterate".into(),
        ));
    }
    v /= norm;
    Ok(v)
}

/// One Riemannian step on the unit sphere: tangent-project the gradient at
/// `mu`, move against it, renormalize. A radial gradient leaves `mu` fixed.
pub fn riemannian_step(
    mu: ArrayView1<'_, f64>,
    grad: ArrayView1<'_, f64>,
    gamma: f64,
) -> Result<Array1<f64>> {
    check_step(&mu, &grad, gamma)?;
    let radial = mu.dot(&grad);
    let mut out = Array1::zeros(mu.len());
    for ((o, &m), &g) in out.iter_mut().zip(mu.iter()).zip(grad.iter()) {
        *o = m - gamma * (g - radial * m);
    }
    renormalize(out)
}

/// One Euclidean step followed by renormalization, without tangent
/// projection.
pub fn euclidean_step(
    mu: ArrayView1<'_, f64>,
    grad: ArrayView1<'_, f64>,
    gamma: f64,
) -> Result<Array1<f64>> {
    check_step(&mu, &grad, gamma)?;
    let mut out = Array1::zeros(mu.len());
    for ((o, &m), &g) in out.iter_mut().zip(mu.iter()).zip(grad.iter()) {
        *o = m - gamma * g;
    }
    renormalize(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn radial_gradient_is_a_fixed_point() {
        let mu = array![0.0, 1.0, 0.0];
        let grad = array![0.0, 2.5, 0.0];
        let out = riemannian_step(mu.view(), grad.view(), 0.05).unwrap();
        assert_eq!(out, mu);
        // Euclidean: the point moves along itself and renormalizes back.
        let out = euclidean_step(mu.view(), grad.view(), 0.05).unwrap();
        assert_eq!(out, mu);
    }

    #[test]
    fn zero_gradient_leaves_mu_unchanged() {
        let mu = array![1.0, 0.0];
        let grad = array![0.0, 0.0];
        assert_eq!(riemannian_step(mu.view(), grad.view(), 0.01).unwrap(), mu);
        assert_eq!(euclidean_step(mu.view(), grad.view(), 0.01).unwrap(), mu);
    }

    #[test]
    fn unit_step_splits_the_angle() {
        let mu = array![1.0, 0.0];
        let grad = array![0.0, 1.0];
        let expect = array![1.0 / 2.0_f64.sqrt(), -1.0 / 2.0_f64.sqrt()];
        let r = riemannian_step(mu.view(), grad.view(), 1.0).unwrap();
        let e = euclidean_step(mu.view(), grad.view(), 1.0).unwrap();
        for j in 0..2 {
            assert!((r[j] - expect[j]).abs() < 1e-15);
            assert!((e[j] - expect[j]).abs() < 1e-15);
        }
    }

    #[test]
    fn vanishing_iterate_is_a_step_error() {
        // Euclidean step straight through the origin.
        let mu = array![1.0, 0.0];
        let grad = array![1.0, 0.0];
        let err = euclidean_step(mu.view(), grad.view(), 1.0).unwrap_err();
        assert!(matches!(err, Error::Step(_)));
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let mu = array![1.0, 0.0];
        let grad = array![1.0, 0.0, 0.0];
        assert!(matches!(
            riemannian_step(mu.view(), grad.view(), 0.01),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            euclidean_step(mu.view(), grad.view(), -0.5),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn negative_step_size_is_rejected() {
        let mu = array![1.0, 0.0];
        let grad = array![0.0, 1.0];
        assert!(matches!(
            riemannian_step(mu.view(), grad.view(), -0.01),
            Err(Error::Domain(_))
        ));
    }
}
