//! Statistics of the oracle predictor — heads fixed at the true centroids.
//!
//! Conditionally on the first token's cluster the oracle's first output row
//! is an unbiased direction estimate up to a scalar factor; the functions
//! here give that factor, the temperature that removes it, the conditional
//! second moment and variance at finite `L`, and the long-sequence limits.

use ndarray::{Array2, ArrayView2};

use super::{closed_form_risk_gaussian_manifold, empirical_risk, EmpiricalPredictor};
use crate::attention::{predictor_first_row, HeadBank, PredictorKind};
use crate::error::{Error, Result};
use crate::mixtures::MixtureSpec;
use crate::moments::{monte_carlo_mean, monte_carlo_mean_vec, McEstimate, McVecEstimate};
use crate::rng::SeedStream;

fn check_oracle_params(sigma: f64, seq_len: usize) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!(
            "noise scale must be non-negative and finite, got {sigma}"
        )));
    }
    if seq_len == 0 {
        return Err(Error::Argument("sequence length must be positive".into()));
    }
    Ok(seq_len as f64)
}

fn check_dim(dim: usize) -> Result<f64> {
    if dim < 2 {
        return Err(Error::Dimension(format!(
            "oracle statistics need dim >= 2 to fit an orthonormal centroid pair, got {dim}"
        )));
    }
    Ok(dim as f64)
}

/// Scalar factor of the conditional mean:
/// `E[T_1 | Z_1 = c] = (lambda / L) ((L+1) + 2 (L+3) sigma^2) mu*_c`.
pub fn oracle_mean_factor(sigma: f64, seq_len: usize, lambda: f64) -> Result<f64> {
    let l = check_oracle_params(sigma, seq_len)?;
    if !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "temperature must be finite, got {lambda}"
        )));
    }
    Ok((lambda / l) * ((l + 1.0) + 2.0 * (l + 3.0) * sigma * sigma))
}

/// Temperature making the conditional mean exactly the centroid:
/// `L / ((L+1) + 2 (L+3) sigma^2)`. Tends to `L/(L+1)` at `sigma = 0` and to
/// `1 / (1 + 2 sigma^2)` as `L` grows.
pub fn oracle_unbiasing_lambda(sigma: f64, seq_len: usize) -> Result<f64> {
    let l = check_oracle_params(sigma, seq_len)?;
    Ok(l / ((l + 1.0) + 2.0 * (l + 3.0) * sigma * sigma))
}

/// Temperature minimizing the long-sequence oracle risk: `1 / (1 + 2 sigma^2)`.
pub fn oracle_optimal_lambda(sigma: f64) -> Result<f64> {
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!(
            "noise scale must be non-negative and finite, got {sigma}"
        )));
    }
    Ok(1.0 / (1.0 + 2.0 * sigma * sigma))
}

/// Long-sequence oracle risk at an arbitrary temperature:
/// `1 + d sigma^2 - 2 lambda (1 + 2 sigma^2)^2 + lambda^2 (1 + 2 sigma^2)^3`.
pub fn oracle_asymptotic_risk(sigma: f64, dim: usize, lambda: f64) -> Result<f64> {
    let d = check_dim(dim)?;
    check_oracle_params(sigma, 1)?;
    if !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "temperature must be finite, got {lambda}"
        )));
    }
    let m = 1.0 + 2.0 * sigma * sigma;
    Ok(1.0 + d * sigma * sigma - 2.0 * lambda * m * m + lambda * lambda * m * m * m)
}

/// Long-sequence limits of the oracle predictor.
#[derive(Clone, Copy, Debug)]
pub struct OracleAsymptotics {
    /// Risk at the optimal temperature: `sigma^2 (d - 2)`.
    pub risk_limit: f64,
    /// Trace of the conditional covariance at temperature `lambda`:
    /// `2 lambda^2 sigma^2 (1 + 2 sigma^2)^2`.
    pub variance_limit: f64,
}

/// Long-sequence limits at the given temperature. The risk limit is reported
/// at the optimal temperature; the variance limit at the supplied one.
pub fn oracle_asymptotics(sigma: f64, dim: usize, lambda: f64) -> Result<OracleAsymptotics> {
    let d = check_dim(dim)?;
    check_oracle_params(sigma, 1)?;
    if !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "temperature must be finite, got {lambda}"
        )));
    }
    let s2 = sigma * sigma;
    let m = 1.0 + 2.0 * s2;
    Ok(OracleAsymptotics {
        risk_limit: s2 * (d - 2.0),
        variance_limit: 2.0 * lambda * lambda * s2 * m * m,
    })
}

/// Exact oracle risk at finite `L` — the aligned-corner value of the
/// on-manifold closed form.
pub fn oracle_finite_l_risk(sigma: f64, dim: usize, seq_len: usize, lambda: f64) -> Result<f64> {
    check_dim(dim)?;
    closed_form_risk_gaussian_manifold(1.0, 1.0, sigma, dim, seq_len, lambda)
}

/// Conditional second moment `E[|T_1|^2 | Z_1 = c]` of the oracle at finite
/// `L`.
pub fn oracle_conditional_second_moment(
    sigma: f64,
    dim: usize,
    seq_len: usize,
    lambda: f64,
) -> Result<f64> {
    let d = check_dim(dim)?;
    let l = check_oracle_params(sigma, seq_len)?;
    if !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "temperature must be finite, got {lambda}"
        )));
    }
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    let s6 = s4 * s2;
    let lam2 = lambda * lambda;
    let self_term = (4.0 * lam2 / (l * l))
        * (1.0 + s2 * (d + 16.0) + 8.0 * s4 * (d + 7.0) + 8.0 * s6 * (d + 4.0));
    let cross_term = 2.0 * lam2 * (l - 1.0) / (l * l)
        * (3.0 + s2 * (d + 28.0) + 4.0 * s4 * (d + 16.0) + 4.0 * s6 * (d + 10.0));
    let rest_term = lam2 * (l - 1.0) * (l - 2.0) / (l * l)
        * (1.0 + 6.0 * s2 + 12.0 * s4 + 8.0 * s6);
    Ok(self_term + cross_term + rest_term)
}

/// Trace of the conditional covariance of the oracle's first output row:
/// the conditional second moment minus the squared mean factor.
pub fn oracle_conditional_variance(
    sigma: f64,
    dim: usize,
    seq_len: usize,
    lambda: f64,
) -> Result<f64> {
    let m2 = oracle_conditional_second_moment(sigma, dim, seq_len, lambda)?;
    let f = oracle_mean_factor(sigma, seq_len, lambda)?;
    Ok(m2 - f * f)
}

fn oracle_bank(stars: ArrayView2<'_, f64>, lambda: f64) -> Result<HeadBank> {
    if stars.nrows() != 2 {
        return Err(Error::Argument(format!(
            "oracle statistics are defined for a centroid pair, got {} centroids",
            stars.nrows()
        )));
    }
    HeadBank::new(stars.to_owned(), lambda)
}

/// Monte-Carlo estimate of the oracle's conditional mean `E[T_1 | Z_1 = c]`,
/// coordinate by coordinate, over Gaussian sequences around `stars`.
pub fn oracle_mc_conditional_mean(
    stars: ArrayView2<'_, f64>,
    sigma: f64,
    seq_len: usize,
    lambda: f64,
    label: usize,
    n_samples: u64,
    seeds: &SeedStream,
) -> Result<McVecEstimate> {
    let bank = oracle_bank(stars, lambda)?;
    let spec = MixtureSpec::gaussian(stars.to_owned(), sigma)?;
    check_oracle_params(sigma, seq_len)?;
    if label >= 2 {
        return Err(Error::Argument(format!(
            "cluster label must be 0 or 1, got {label}"
        )));
    }
    Ok(monte_carlo_mean_vec(
        n_samples,
        spec.dim(),
        seeds,
        |rng, out| {
            let seq = spec
                .sample_conditioned(seq_len, label, rng)
                .expect("parameters validated above");
            let t1 =
                predictor_first_row(PredictorKind::LinearMultiHead, &bank, seq.tokens.view())
                    .expect("parameters validated above");
            out.copy_from_slice(t1.as_slice().expect("contiguous"));
        },
    ))
}

/// Monte-Carlo estimate of the trace conditional variance
/// `E[|T_1 - f mu*_c|^2 | Z_1 = c]`, with `f` the closed-form mean factor.
pub fn oracle_mc_conditional_variance(
    stars: ArrayView2<'_, f64>,
    sigma: f64,
    seq_len: usize,
    lambda: f64,
    label: usize,
    n_samples: u64,
    seeds: &SeedStream,
) -> Result<McEstimate> {
    let bank = oracle_bank(stars, lambda)?;
    let spec = MixtureSpec::gaussian(stars.to_owned(), sigma)?;
    let f = oracle_mean_factor(sigma, seq_len, lambda)?;
    if label >= 2 {
        return Err(Error::Argument(format!(
            "cluster label must be 0 or 1, got {label}"
        )));
    }
    let center = stars.row(label).to_owned();
    Ok(monte_carlo_mean(n_samples, seeds, |rng| {
        let seq = spec
            .sample_conditioned(seq_len, label, rng)
            .expect("parameters validated above");
        let t1 = predictor_first_row(PredictorKind::LinearMultiHead, &bank, seq.tokens.view())
            .expect("parameters validated above");
        t1.iter()
            .zip(center.iter())
            .map(|(t, c)| (t - f * c) * (t - f * c))
            .sum()
    }))
}

/// Monte-Carlo oracle risk — a convenience wrapper running
/// [`empirical_risk`] with the heads pinned to the centroids.
pub fn oracle_mc_risk(
    stars: ArrayView2<'_, f64>,
    sigma: f64,
    seq_len: usize,
    lambda: f64,
    n_samples: u64,
    seeds: &SeedStream,
) -> Result<McEstimate> {
    let bank = oracle_bank(stars, lambda)?;
    let spec = MixtureSpec::gaussian(stars.to_owned(), sigma)?;
    empirical_risk(
        &EmpiricalPredictor::Bank {
            kind: PredictorKind::LinearMultiHead,
            bank: &bank,
        },
        &spec,
        seq_len,
        n_samples,
        seeds,
    )
}

/// Canonical orthonormal centroid pair in dimension `dim`, for callers that
/// only need some valid pair.
pub fn canonical_star_pair(dim: usize) -> Result<Array2<f64>> {
    check_dim(dim)?;
    let mut stars = Array2::zeros((2, dim));
    stars[[0, dim - 1]] = 1.0;
    stars[[1, 0]] = -1.0;
    Ok(stars)
}
