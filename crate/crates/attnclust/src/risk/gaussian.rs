//! Closed-form Gaussian risk of the two-head linear predictor.
//!
//! Two levels are provided. On the aligned manifold (each head inside the
//! span of its own centroid, no cross or mutual overlap) the risk is the
//! two-variable quartic `A (k0^4 + k1^4) + B (k0^2 + k1^2) + C k0^2 k1^2 + D`
//! with coefficients polynomial in `sigma^2`, `1/L`, and `lambda`. Off the
//! manifold the risk is assembled from the moment polynomials of
//! [`crate::moments`] as a function of the five inner-product coordinates;
//! the assembly is a polynomial of single-coordinate degree at most four, so
//! the five-point finite-difference gradient below is exact.

use ndarray::ArrayView1;

use super::ReparamCoords;
use crate::error::{Error, Result};
use crate::moments::{p0_kernel, p1_0_kernel, p2_0_kernel, p2_1_kernel, p3_1_kernel};

/// Orthonormality tolerance for the reference centroids of the general
/// closed form.
const ORTHO_TOL: f64 = 1e-8;

/// `1 + n sigma^2`.
pub fn c1(sigma: f64, n: f64) -> f64 {
    1.0 + n * sigma * sigma
}

/// `1 + sigma^2 (d + n)`.
pub fn c2(sigma: f64, dim: f64, n: f64) -> f64 {
    1.0 + sigma * sigma * (dim + n)
}

/// Coefficients of the on-manifold risk quartic, plus the denominator
/// polynomial of the optimal temperature.
#[derive(Clone, Copy, Debug)]
pub struct RiskCoefficients {
    /// Quartic self-alignment coefficient (multiplies `k0^4 + k1^4`).
    pub a: f64,
    /// Quadratic alignment coefficient (multiplies `k0^2 + k1^2`).
    pub b: f64,
    /// Cross-alignment coefficient (multiplies `k0^2 k1^2`).
    pub c: f64,
    /// Constant term — the risk of two fully unaligned heads.
    pub d: f64,
    /// Temperature-free denominator of [`lambda_star`].
    pub c3: f64,
    sigma: f64,
    dim: usize,
}

impl RiskCoefficients {
    /// `1 + n sigma^2` at this configuration's noise scale.
    pub fn c1(&self, n: f64) -> f64 {
        c1(self.sigma, n)
    }

    /// `1 + sigma^2 (d + n)` at this configuration's noise scale and
    /// dimension.
    pub fn c2(&self, n: f64) -> f64 {
        c2(self.sigma, self.dim as f64, n)
    }
}

fn check_risk_params(sigma: f64, dim: usize, seq_len: usize, lambda: f64) -> Result<(f64, f64)> {
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!(
            "noise scale must be non-negative and finite, got {sigma}"
        )));
    }
    if dim == 0 {
        return Err(Error::Dimension("dimension must be positive".into()));
    }
    if seq_len == 0 {
        return Err(Error::Argument("sequence length must be positive".into()));
    }
    if !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "temperature must be finite, got {lambda}"
        )));
    }
    Ok((dim as f64, seq_len as f64))
}

/// Computes the on-manifold risk coefficients for one configuration.
pub fn coefficients(
    sigma: f64,
    dim: usize,
    seq_len: usize,
    lambda: f64,
) -> Result<RiskCoefficients> {
    let (d, l) = check_risk_params(sigma, dim, seq_len, lambda)?;
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    let s6 = s4 * s2;
    let l2 = l * l;
    let lam2 = lambda * lambda;
    let c1n = |n: f64| c1(sigma, n);
    let c2n = |n: f64| c2(sigma, d, n);

    let a = (2.0 * lam2 / l2) * c2n(8.0)
        + (2.0 * lam2 * (l - 1.0) / l2) * c1n(5.0)
        + (lam2 * (l - 1.0) / l2) * c2n(4.0)
        + (lam2 * (l - 1.0) * (l - 2.0) / (2.0 * l2)) * c1n(4.0);

    let b = -(2.0 * lambda / l) * c2n(4.0)
        + (16.0 * lam2 * s2 / l2) * c2n(6.0)
        + (8.0 * lam2 * s2 * (l - 1.0) / l2) * c1n(6.0)
        - (lambda * (l - 1.0) / l) * c1n(4.0)
        + (4.0 * lam2 * s2 * (l - 1.0) / l2) * c2n(3.0)
        + (lam2 * s2 * (l - 1.0) * (l - 2.0) / l2) * c1n(6.0);

    let c = 4.0 * lam2 * s2 * (l - 1.0) / l2;

    let d_term = c1n(d)
        - (8.0 * lambda * s2 / l) * c2n(2.0)
        + (32.0 * lam2 * s4 / l2) * c2n(4.0)
        + 64.0 * lam2 * s6 * (l - 1.0) / l2
        - 8.0 * lambda * s4 * (l - 1.0) / l
        + (8.0 * lam2 * s4 * (l - 1.0) / l2) * c2n(2.0)
        + 8.0 * lam2 * s6 * (l - 1.0) * (l - 2.0) / l2;

    let c3 = 16.0 * s2 * c2n(6.0)
        + 8.0 * s2 * (l - 1.0) * c1n(6.0)
        + 4.0 * s2 * (l - 1.0) * c2n(3.0)
        + s2 * (l - 1.0) * (l - 2.0) * c1n(6.0)
        + 4.0 * c2n(8.0)
        + 4.0 * (l - 1.0) * c1n(5.0)
        + 2.0 * (l - 1.0) * c2n(4.0)
        + (l - 1.0) * (l - 2.0) * c1n(4.0)
        + 4.0 * s2 * (l - 1.0);

    Ok(RiskCoefficients {
        a,
        b,
        c,
        d: d_term,
        c3,
        sigma,
        dim,
    })
}

fn check_kappa(name: &str, v: f64) -> Result<f64> {
    if !v.is_finite() || v.abs() > 1.0 + 1e-9 {
        return Err(Error::Domain(format!(
            "alignment {name} must lie in [-1, 1], got {v}"
        )));
    }
    Ok(v.clamp(-1.0, 1.0))
}

/// Closed-form Gaussian risk on the aligned manifold.
pub fn closed_form_risk_gaussian_manifold(
    kappa0: f64,
    kappa1: f64,
    sigma: f64,
    dim: usize,
    seq_len: usize,
    lambda: f64,
) -> Result<f64> {
    let k0 = check_kappa("kappa0", kappa0)?;
    let k1 = check_kappa("kappa1", kappa1)?;
    let co = coefficients(sigma, dim, seq_len, lambda)?;
    let (q0, q1) = (k0 * k0, k1 * k1);
    Ok(co.a * (q0 * q0 + q1 * q1) + co.b * (q0 + q1) + co.c * q0 * q1 + co.d)
}

/// Gradient of the on-manifold risk in `(kappa0, kappa1)`.
pub fn closed_form_risk_gaussian_manifold_grad(
    kappa0: f64,
    kappa1: f64,
    sigma: f64,
    dim: usize,
    seq_len: usize,
    lambda: f64,
) -> Result<[f64; 2]> {
    let k0 = check_kappa("kappa0", kappa0)?;
    let k1 = check_kappa("kappa1", kappa1)?;
    let co = coefficients(sigma, dim, seq_len, lambda)?;
    Ok([
        4.0 * co.a * k0 * k0 * k0 + 2.0 * co.b * k0 + 2.0 * co.c * k0 * k1 * k1,
        4.0 * co.a * k1 * k1 * k1 + 2.0 * co.b * k1 + 2.0 * co.c * k1 * k0 * k0,
    ])
}

/// Assembles the general risk from the head Gram entries `n[a][b]` and the
/// centroid alignments `s[z][c] = <star_z, mu_c>`, assuming orthonormal
/// centroids. Polynomial in every entry, valid for arbitrary head norms.
fn assemble_general_risk(
    n: [[f64; 2]; 2],
    s: [[f64; 2]; 2],
    sigma: f64,
    dim: f64,
    l: f64,
    lambda: f64,
) -> f64 {
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    let lam2 = lambda * lambda;
    let sum_sq: f64 = s.iter().flatten().map(|v| v * v).sum();
    let head_norms = n[0][0] + n[1][1];

    let p0c = |a: usize, b: usize, z: usize| -> f64 {
        p0_kernel(n[a][a], n[b][b], n[a][b], s[z][a], s[z][b], sigma, dim)
    };
    let p1c = |a: usize, b: usize, z1: usize, z2: usize| -> f64 {
        let sc = if z1 == z2 { 1.0 } else { 0.0 };
        let lead = s[z2][b]
            * p1_0_kernel(
                n[a][a], n[a][b], s[z2][a], s[z2][b], s[z1][a], s[z1][b], sc, sigma,
            );
        let noise = s2
            * p1_0_kernel(
                n[a][a], n[a][b], n[a][b], n[b][b], s[z1][a], s[z1][b], s[z1][b], sigma,
            );
        lead + noise
    };
    let p2c = |a: usize, b: usize, z1: usize, z2: usize| -> f64 {
        p2_0_kernel(s[z1][a], s[z1][b], n[a][b], sigma)
            * p2_1_kernel(s[z2][a], s[z2][b], n[a][b], sigma, dim)
    };
    let p3c = |a: usize, b: usize, z1: usize, z2: usize, z3: usize| -> f64 {
        let s23 = if z2 == z3 { 1.0 } else { 0.0 };
        p2_0_kernel(s[z1][a], s[z1][b], n[a][b], sigma)
            * p3_1_kernel(
                s[z2][a], s[z2][b], s[z3][a], s[z3][b], s23, n[a][b], sigma,
            )
    };

    // Cross terms -2 <X_1, T_1>: the self part (k = 1) and the L-1 others.
    let lin_self = (2.0 * lambda / l)
        * (sum_sq * c2(sigma, dim, 4.0) + 2.0 * s2 * c2(sigma, dim, 2.0) * head_norms);
    let lin_rest =
        (lambda * (l - 1.0) / l) * (sum_sq * (1.0 + 4.0 * s2) + 4.0 * s4 * head_norms);

    // |T_1|^2: self-squared part.
    let mut quad_self = 0.0;
    for z in 0..2 {
        quad_self += p0c(0, 0, z) + 2.0 * p0c(0, 1, z) + p0c(1, 1, z);
    }
    quad_self *= 2.0 * lam2 / (l * l);

    // |T_1|^2: self-vs-rest cross part.
    let mut quad_cross = 0.0;
    for z1 in 0..2 {
        for z2 in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    quad_cross += p1c(a, b, z1, z2);
                }
            }
        }
    }
    quad_cross *= 2.0 * lam2 * (l - 1.0) / (l * l);

    // |T_1|^2: rest diagonal.
    let mut quad_diag = 0.0;
    for z1 in 0..2 {
        for z2 in 0..2 {
            quad_diag += p2c(0, 0, z1, z2) + 2.0 * p2c(0, 1, z1, z2) + p2c(1, 1, z1, z2);
        }
    }
    quad_diag *= lam2 * (l - 1.0) / (l * l);

    // |T_1|^2: rest off-diagonal.
    let mut quad_off = 0.0;
    for a in 0..2 {
        for b in 0..2 {
            for z1 in 0..2 {
                for z2 in 0..2 {
                    for z3 in 0..2 {
                        quad_off += p3c(a, b, z1, z2, z3);
                    }
                }
            }
        }
    }
    quad_off *= lam2 * (l - 1.0) * (l - 2.0) / (2.0 * l * l);

    (1.0 + dim * s2) - lin_self - lin_rest + quad_self + quad_cross + quad_diag + quad_off
}

fn coords_products(coords: [f64; 5]) -> ([[f64; 2]; 2], [[f64; 2]; 2]) {
    let [k0, k1, e0, e1, xi] = coords;
    let n = [[1.0, xi], [xi, 1.0]];
    let s = [[k0, e0], [e1, k1]];
    (n, s)
}

/// General closed-form risk as a function of the five coordinates, for unit
/// heads under orthonormal centroids.
pub fn general_risk_from_coords(
    coords: &ReparamCoords,
    sigma: f64,
    dim: usize,
    seq_len: usize,
    lambda: f64,
) -> Result<f64> {
    let (d, l) = check_risk_params(sigma, dim, seq_len, lambda)?;
    let (n, s) = coords_products(coords.as_array());
    Ok(assemble_general_risk(n, s, sigma, d, l, lambda))
}

/// Gradient of [`general_risk_from_coords`] in the five coordinates, by the
/// five-point central stencil with step `h = 0.05`. The risk is a polynomial
/// of degree at most four in each single coordinate, for which this stencil
/// is exact up to rounding — including at the corners, where the stencil
/// evaluates the polynomial extension outside `[-1, 1]`.
pub fn general_risk_coord_grad(
    coords: &ReparamCoords,
    sigma: f64,
    dim: usize,
    seq_len: usize,
    lambda: f64,
) -> Result<[f64; 5]> {
    let (d, l) = check_risk_params(sigma, dim, seq_len, lambda)?;
    let x = coords.as_array();
    let f = |v: [f64; 5]| -> f64 {
        let (n, s) = coords_products(v);
        assemble_general_risk(n, s, sigma, d, l, lambda)
    };
    let h = 0.05;
    let mut grad = [0.0; 5];
    for (i, g) in grad.iter_mut().enumerate() {
        let mut xp = x;
        let mut xm = x;
        let mut xpp = x;
        let mut xmm = x;
        xp[i] += h;
        xm[i] -= h;
        xpp[i] += 2.0 * h;
        xmm[i] -= 2.0 * h;
        *g = (8.0 * (f(xp) - f(xm)) - (f(xpp) - f(xmm))) / (12.0 * h);
    }
    Ok(grad)
}

/// General closed-form risk of an arbitrary head pair under an orthonormal
/// centroid pair. Head norms need not be one — the Gram entries enter the
/// assembly directly — but the centroids must be orthonormal within `1e-8`.
pub fn closed_form_risk_gaussian_general(
    mu0: ArrayView1<'_, f64>,
    mu1: ArrayView1<'_, f64>,
    star0: ArrayView1<'_, f64>,
    star1: ArrayView1<'_, f64>,
    sigma: f64,
    seq_len: usize,
    lambda: f64,
) -> Result<f64> {
    let dim = mu0.len();
    if mu1.len() != dim || star0.len() != dim || star1.len() != dim {
        return Err(Error::Dimension(format!(
            "risk needs four vectors of one dimension, got {}/{}/{}/{}",
            dim,
            mu1.len(),
            star0.len(),
            star1.len()
        )));
    }
    let (d, l) = check_risk_params(sigma, dim, seq_len, lambda)?;
    for (name, norm) in [("star0", star0.dot(&star0).sqrt()), ("star1", star1.dot(&star1).sqrt())] {
        if (norm - 1.0).abs() > ORTHO_TOL {
            return Err(Error::Domain(format!(
                "centroid {name} has norm {norm}, expected unit norm within {ORTHO_TOL:e}"
            )));
        }
    }
    let cross = star0.dot(&star1);
    if cross.abs() > ORTHO_TOL {
        return Err(Error::Domain(format!(
            "centroids must be orthogonal, got inner product {cross}"
        )));
    }
    let n = [
        [mu0.dot(&mu0), mu0.dot(&mu1)],
        [mu0.dot(&mu1), mu1.dot(&mu1)],
    ];
    let s = [
        [star0.dot(&mu0), star0.dot(&mu1)],
        [star1.dot(&mu0), star1.dot(&mu1)],
    ];
    Ok(assemble_general_risk(n, s, sigma, d, l, lambda))
}

/// Temperature minimizing the on-manifold risk at the aligned corner:
/// `[2L c2(4) + L(L-1) c1(4)] / c3`.
pub fn lambda_star(sigma: f64, dim: usize, seq_len: usize) -> Result<f64> {
    let co = coefficients(sigma, dim, seq_len, 1.0)?;
    let l = seq_len as f64;
    let numerator = 2.0 * l * co.c2(4.0) + l * (l - 1.0) * co.c1(4.0);
    Ok(numerator / co.c3)
}

/// Long-sequence limit of [`lambda_star`]:
/// `(1 + 4 sigma^2) / (1 + 5 sigma^2 + 6 sigma^4)`.
pub fn lambda_star_infinite(sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!(
            "noise scale must be non-negative and finite, got {sigma}"
        )));
    }
    let s2 = sigma * sigma;
    Ok((1.0 + 4.0 * s2) / (1.0 + 5.0 * s2 + 6.0 * s2 * s2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::{exact_risk_dirac, exact_risk_dirac_grad, lambda_star_degenerate};

    #[test]
    fn sigma_zero_collapses_to_noise_free_coefficients() {
        let l = 30;
        let lambda = 0.7;
        let co = coefficients(0.0, 5, l, lambda).unwrap();
        let lf = l as f64;
        assert!((co.a - lambda * lambda * (lf + 3.0) / (2.0 * lf)).abs() < 1e-14);
        assert!((co.b + lambda * (lf + 1.0) / lf).abs() < 1e-14);
        assert_eq!(co.c, 0.0);
        assert_eq!(co.d, 1.0);
    }

    #[test]
    fn manifold_risk_matches_noise_free_risk_at_sigma_zero() {
        let l = 12;
        let lambda = 0.45;
        for (k0, k1) in [(0.0, 0.0), (0.3, -0.8), (1.0, 1.0), (0.6, 0.2)] {
            let coords = ReparamCoords::degenerate(k0, k1, 0.0, 0.0).unwrap();
            let dirac = exact_risk_dirac(&coords, lambda, l).unwrap();
            let gauss = closed_form_risk_gaussian_manifold(k0, k1, 0.0, 4, l, lambda).unwrap();
            assert!((dirac - gauss).abs() < 1e-14, "({k0},{k1}): {dirac} vs {gauss}");
        }
    }

    #[test]
    fn general_assembly_agrees_with_manifold_on_the_manifold() {
        for (sigma, dim, l, lambda) in [
            (0.3, 5, 30, 0.6),
            (1.0, 3, 5, 0.2),
            (0.5, 8, 2, 0.9),
            (0.7, 4, 1, 0.4),
        ] {
            for (k0, k1) in [(0.0, 0.0), (1.0, 1.0), (0.4, -0.9), (-0.2, 0.7)] {
                let coords = ReparamCoords::degenerate(k0, k1, 0.0, 0.0).unwrap();
                let general = general_risk_from_coords(&coords, sigma, dim, l, lambda).unwrap();
                let manifold =
                    closed_form_risk_gaussian_manifold(k0, k1, sigma, dim, l, lambda).unwrap();
                assert!(
                    (general - manifold).abs() < 1e-10,
                    "sigma={sigma} d={dim} L={l}: {general} vs {manifold}"
                );
            }
        }
    }

    #[test]
    fn stencil_gradient_matches_dirac_gradient_at_sigma_zero() {
        let coords = ReparamCoords::new(0.4, -0.3, 0.5, 0.2, 0.1).unwrap();
        let lambda = 0.8;
        let l = 9;
        let g5 = general_risk_coord_grad(&coords, 0.0, 6, l, lambda).unwrap();
        let g4 = exact_risk_dirac_grad(&coords, lambda, l).unwrap();
        for i in 0..4 {
            assert!((g5[i] - g4[i]).abs() < 1e-10, "coord {i}: {} vs {}", g5[i], g4[i]);
        }
        // xi never enters the noise-free risk.
        assert!(g5[4].abs() < 1e-10);
    }

    #[test]
    fn corner_temperature_limits() {
        for l in [2usize, 5, 30, 100] {
            let exact = lambda_star_degenerate(l).unwrap();
            assert_eq!(lambda_star(0.0, 7, l).unwrap(), exact);
        }
        assert!((lambda_star_infinite(1.0).unwrap() - 5.0 / 12.0).abs() < 1e-15);
        let far = lambda_star(0.3, 5, 1_000_000).unwrap();
        let inf = lambda_star_infinite(0.3).unwrap();
        assert!((far - inf).abs() < 1e-4);
    }
}
