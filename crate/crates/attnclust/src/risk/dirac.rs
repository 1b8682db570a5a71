//! Exact risk of the two-head linear predictor on noise-free mixtures.
//!
//! With point-mass clusters the population risk is a quartic in the four
//! alignment coordinates (the head overlap `xi` never enters):
//!
//! ```text
//! R = 1 - lambda (L+1)/L * S
//!       + lambda^2 (L+3)/(2L) * (A0^2 + A1^2)
//!       + lambda^2 (L-1)/L * P^2
//! ```
//!
//! where `S = kappa0^2 + kappa1^2 + eta0^2 + eta1^2`, `A_c` is the squared
//! alignment mass of centroid `c` (`A0 = kappa0^2 + eta0^2`,
//! `A1 = kappa1^2 + eta1^2`) and `P = kappa0 eta1 + kappa1 eta0` is the
//! interference product.

use super::ReparamCoords;
use crate::error::{Error, Result};

fn check_len_lambda(seq_len: usize, lambda: f64) -> Result<f64> {
    if seq_len == 0 {
        return Err(Error::Argument(
            "sequence length must be positive".into(),
        ));
    }
    if !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "temperature must be finite, got {lambda}"
        )));
    }
    Ok(seq_len as f64)
}

/// Exact noise-free risk at the given coordinates and temperature.
pub fn exact_risk_dirac(coords: &ReparamCoords, lambda: f64, seq_len: usize) -> Result<f64> {
    let l = check_len_lambda(seq_len, lambda)?;
    let ReparamCoords {
        kappa0,
        kappa1,
        eta0,
        eta1,
        ..
    } = *coords;
    let s = kappa0 * kappa0 + kappa1 * kappa1 + eta0 * eta0 + eta1 * eta1;
    let a0 = kappa0 * kappa0 + eta0 * eta0;
    let a1 = kappa1 * kappa1 + eta1 * eta1;
    let p = kappa0 * eta1 + kappa1 * eta0;
    Ok(1.0 - lambda * (l + 1.0) / l * s
        + lambda * lambda * (l + 3.0) / (2.0 * l) * (a0 * a0 + a1 * a1)
        + lambda * lambda * (l - 1.0) / l * p * p)
}

/// Gradient of [`exact_risk_dirac`] in `(kappa0, kappa1, eta0, eta1)`.
pub fn exact_risk_dirac_grad(
    coords: &ReparamCoords,
    lambda: f64,
    seq_len: usize,
) -> Result<[f64; 4]> {
    let l = check_len_lambda(seq_len, lambda)?;
    let ReparamCoords {
        kappa0,
        kappa1,
        eta0,
        eta1,
        ..
    } = *coords;
    let a0 = kappa0 * kappa0 + eta0 * eta0;
    let a1 = kappa1 * kappa1 + eta1 * eta1;
    let p = kappa0 * eta1 + kappa1 * eta0;
    let alpha = lambda * (l + 1.0) / l;
    let beta = lambda * lambda * (l + 3.0) / l;
    let delta = 2.0 * lambda * lambda * (l - 1.0) / l;
    Ok([
        -2.0 * alpha * kappa0 + 2.0 * beta * a0 * kappa0 + delta * p * eta1,
        -2.0 * alpha * kappa1 + 2.0 * beta * a1 * kappa1 + delta * p * eta0,
        -2.0 * alpha * eta0 + 2.0 * beta * a0 * eta0 + delta * p * kappa1,
        -2.0 * alpha * eta1 + 2.0 * beta * a1 * eta1 + delta * p * kappa0,
    ])
}

/// Temperature at which the aligned corners become critical points of the
/// noise-free risk: `(L+1)/(L+3)`.
pub fn lambda_star_degenerate(seq_len: usize) -> Result<f64> {
    if seq_len == 0 {
        return Err(Error::Argument(
            "sequence length must be positive".into(),
        ));
    }
    let l = seq_len as f64;
    Ok((l + 1.0) / (l + 3.0))
}

/// The catalogue of critical points of the noise-free risk at the corner
/// temperature `(L+1)/(L+3)`, with representatives sampled from each
/// continuous family and the exact risk level of each class.
#[derive(Clone, Debug)]
pub struct DiracCriticalPoints {
    /// Temperature at which the catalogue is critical.
    pub lambda: f64,
    /// The strict local maximum at the origin.
    pub local_max: ReparamCoords,
    /// Representatives of the two one-head circles
    /// `(cos t, 0, sin t, 0)` and `(0, cos t, 0, sin t)`.
    pub axis_saddles: Vec<ReparamCoords>,
    /// Representatives of the interference circles
    /// `(p, q, s q, s p)` with `p^2 + q^2` equal to
    /// [`circle_radius_sq`](Self::circle_radius_sq), for both signs `s`.
    pub circle_saddles: Vec<ReparamCoords>,
    /// Squared radius `(L+3) / (2 (L+1))` of the interference circles.
    pub circle_radius_sq: f64,
    /// Representatives of the two global-minimum circles
    /// `(cos t, cos t, sin t, -sin t)` and `(cos t, -cos t, sin t, sin t)`,
    /// including all four aligned corners.
    pub minima: Vec<ReparamCoords>,
    /// Risk at the origin (always 1).
    pub risk_local_max: f64,
    /// Risk shared by every axis saddle.
    pub risk_axis_saddle: f64,
    /// Risk shared by every interference-circle saddle.
    pub risk_circle_saddle: f64,
    /// Risk shared by every global minimum.
    pub risk_minimum: f64,
}

/// Enumerates the critical classes of the noise-free risk at the corner
/// temperature for the given sequence length.
pub fn critical_points_dirac(seq_len: usize) -> Result<DiracCriticalPoints> {
    let lambda = lambda_star_degenerate(seq_len)?;
    let l = seq_len as f64;
    let angles = [
        0.0,
        std::f64::consts::FRAC_PI_6,
        std::f64::consts::FRAC_PI_4,
        std::f64::consts::FRAC_PI_3,
        std::f64::consts::FRAC_PI_2,
    ];

    let mut axis_saddles = Vec::new();
    for t in angles {
        let (sin, cos) = t.sin_cos();
        axis_saddles.push(ReparamCoords::degenerate(cos, 0.0, sin, 0.0)?);
        axis_saddles.push(ReparamCoords::degenerate(0.0, cos, 0.0, sin)?);
    }

    let radius_sq = (l + 3.0) / (2.0 * (l + 1.0));
    let r = radius_sq.sqrt();
    let mut circle_saddles = Vec::new();
    for t in angles {
        let (sin, cos) = t.sin_cos();
        let (p, q) = (r * cos, r * sin);
        for s in [1.0, -1.0] {
            circle_saddles.push(ReparamCoords::degenerate(p, q, s * q, s * p)?);
        }
    }

    let mut minima = Vec::new();
    for t in angles {
        let (sin, cos) = t.sin_cos();
        minima.push(ReparamCoords::degenerate(cos, cos, sin, -sin)?);
        minima.push(ReparamCoords::degenerate(cos, -cos, sin, sin)?);
    }
    for (k0, k1) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
        minima.push(ReparamCoords::degenerate(k0, k1, 0.0, 0.0)?);
    }

    let lp1 = l + 1.0;
    let lp3 = l + 3.0;
    Ok(DiracCriticalPoints {
        lambda,
        local_max: ReparamCoords::degenerate(0.0, 0.0, 0.0, 0.0)?,
        axis_saddles,
        circle_saddles,
        circle_radius_sq: radius_sq,
        minima,
        risk_local_max: 1.0,
        risk_axis_saddle: 1.0 - lp1 * lp1 / (2.0 * l * lp3),
        risk_circle_saddle: 1.0 - lp1 / (2.0 * l),
        risk_minimum: 1.0 - lp1 * lp1 / (l * lp3),
    })
}
