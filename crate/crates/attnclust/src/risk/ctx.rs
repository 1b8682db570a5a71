//! Statistics of the head-free Gram predictor on in-context mixtures.
//!
//! Each sequence draws its own orthogonal centroid pair, so no fixed head
//! can track the clusters; the Gram predictor `(2 lambda / L) X X^T X`
//! adapts per sequence. Conditionally on the first token's cluster its first
//! output row is again the drawn centroid up to a scalar factor.

use super::EmpiricalPredictor;
use crate::error::{Error, Result};
use crate::mixtures::MixtureSpec;
use crate::moments::{monte_carlo_mean, McEstimate};
use crate::rng::SeedStream;

fn check_params(sigma: f64, dim: usize, seq_len: usize, lambda: f64) -> Result<(f64, f64)> {
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!(
            "noise scale must be non-negative and finite, got {sigma}"
        )));
    }
    if dim < 2 {
        return Err(Error::Dimension(format!(
            "in-context statistics need dim >= 2, got {dim}"
        )));
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

/// Scalar factor of the conditional mean of the Gram predictor:
/// `E[T_1 | Z_1 = c, centroids] = factor * mu*_c` with
/// `factor = (2 lambda / L) [(1 + (d+2) sigma^2) + (L-1)(1/2 + sigma^2)]`.
pub fn ctx_mean_factor(sigma: f64, dim: usize, seq_len: usize, lambda: f64) -> Result<f64> {
    let (d, l) = check_params(sigma, dim, seq_len, lambda)?;
    let s2 = sigma * sigma;
    Ok((2.0 * lambda / l) * ((1.0 + (d + 2.0) * s2) + (l - 1.0) * (0.5 + s2)))
}

/// Temperature at which the Gram predictor's conditional mean is exactly the
/// drawn centroid.
pub fn ctx_unbiasing_lambda(sigma: f64, dim: usize, seq_len: usize) -> Result<f64> {
    let (d, l) = check_params(sigma, dim, seq_len, 1.0)?;
    let s2 = sigma * sigma;
    Ok((l / 2.0) / ((1.0 + (d + 2.0) * s2) + (l - 1.0) * (0.5 + s2)))
}

/// Conditional second moment `E[|T_1|^2 | Z_1 = c]` of the Gram predictor at
/// finite `L`.
pub fn ctx_conditional_second_moment(
    sigma: f64,
    dim: usize,
    seq_len: usize,
    lambda: f64,
) -> Result<f64> {
    let (d, l) = check_params(sigma, dim, seq_len, lambda)?;
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    let s6 = s4 * s2;
    let lam2 = lambda * lambda;
    let half = s2 + 0.5;
    let self_term = (4.0 * lam2 / (l * l))
        * (1.0
            + 3.0 * (d + 4.0) * s2
            + 3.0 * (d + 2.0) * (d + 4.0) * s4
            + d * (d + 2.0) * (d + 4.0) * s6);
    let cross_term = (12.0 * lam2 / (l * l))
        * (l - 1.0)
        * (0.5 + ((d + 8.0) / 2.0) * s2 + 3.0 * (d + 2.0) * s4 + d * (d + 2.0) * s6);
    let rest_term = (8.0 * lam2 / (l * l))
        * ((l - 1.0) * (l - 2.0) / 2.0)
        * (2.0 * half * half * half + (d - 2.0) * s6);
    Ok(self_term + cross_term + rest_term)
}

/// Trace of the conditional covariance of the Gram predictor's first row.
pub fn ctx_conditional_variance(
    sigma: f64,
    dim: usize,
    seq_len: usize,
    lambda: f64,
) -> Result<f64> {
    let m2 = ctx_conditional_second_moment(sigma, dim, seq_len, lambda)?;
    let f = ctx_mean_factor(sigma, dim, seq_len, lambda)?;
    Ok(m2 - f * f)
}

/// Exact risk of the Gram predictor on in-context mixtures at finite `L`.
pub fn ctx_finite_l_risk(sigma: f64, dim: usize, seq_len: usize, lambda: f64) -> Result<f64> {
    let (d, l) = check_params(sigma, dim, seq_len, lambda)?;
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    let linear_self = (4.0 * lambda / l) * (1.0 + 2.0 * (d + 2.0) * s2 + d * (d + 2.0) * s4);
    let linear_rest = (4.0 * lambda / l) * (l - 1.0) * (0.5 + 2.0 * s2 + d * s4);
    let m2 = ctx_conditional_second_moment(sigma, dim, seq_len, lambda)?;
    Ok(1.0 + s2 * d - linear_self - linear_rest + m2)
}

/// Long-sequence risk of the Gram predictor at an arbitrary temperature.
pub fn ctx_asymptotic_risk(sigma: f64, dim: usize, lambda: f64) -> Result<f64> {
    let (d, _) = check_params(sigma, dim, 1, lambda)?;
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    let s6 = s4 * s2;
    let half = s2 + 0.5;
    Ok((1.0 + s2 * d) - 2.0 * lambda * (1.0 + 4.0 * s2 + 2.0 * d * s4)
        + 4.0 * lambda * lambda * (2.0 * half * half * half + (d - 2.0) * s6))
}

/// Temperature minimizing the long-sequence Gram-predictor risk.
pub fn ctx_optimal_lambda(sigma: f64, dim: usize) -> Result<f64> {
    let (d, _) = check_params(sigma, dim, 1, 1.0)?;
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    let s6 = s4 * s2;
    let half = s2 + 0.5;
    Ok((1.0 + 4.0 * s2 + 2.0 * d * s4) / (4.0 * (2.0 * half * half * half + (d - 2.0) * s6)))
}

/// Long-sequence risk at the optimal temperature:
/// `sigma^2 (d-2) (1 + 2 sigma^2) / (1 + 6 sigma^2 + 12 sigma^4 + 4 d sigma^6)`,
/// never larger than the oracle limit `sigma^2 (d-2)`.
pub fn ctx_asymptotic_risk_at_optimal(sigma: f64, dim: usize) -> Result<f64> {
    let (d, _) = check_params(sigma, dim, 1, 1.0)?;
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    let s6 = s4 * s2;
    Ok(s2 * (d - 2.0) * (1.0 + 2.0 * s2) / (1.0 + 6.0 * s2 + 12.0 * s4 + 4.0 * d * s6))
}

/// Long-sequence trace conditional variance at temperature `lambda`:
/// `2 lambda^2 sigma^2 (1 + 4 sigma^2 + 2 d sigma^4)`.
pub fn ctx_asymptotic_variance(sigma: f64, dim: usize, lambda: f64) -> Result<f64> {
    let (d, _) = check_params(sigma, dim, 1, lambda)?;
    let s2 = sigma * sigma;
    Ok(2.0 * lambda * lambda * s2 * (1.0 + 4.0 * s2 + 2.0 * d * s2 * s2))
}

/// The Gram-predictor statistics bundle for one configuration.
#[derive(Clone, Copy, Debug)]
pub struct CtxStatistics {
    /// Conditional-mean scalar factor at the supplied temperature.
    pub mean_factor: f64,
    /// Temperature that makes the factor one.
    pub unbiasing_lambda: f64,
    /// Long-sequence risk at the supplied temperature.
    pub asymptotic_risk: f64,
    /// Temperature minimizing the long-sequence risk.
    pub optimal_lambda: f64,
    /// Long-sequence trace conditional variance at the supplied temperature.
    pub asymptotic_variance: f64,
}

/// Bundles all Gram-predictor statistics for one configuration.
pub fn ctx_statistics(
    sigma: f64,
    dim: usize,
    seq_len: usize,
    lambda: f64,
) -> Result<CtxStatistics> {
    Ok(CtxStatistics {
        mean_factor: ctx_mean_factor(sigma, dim, seq_len, lambda)?,
        unbiasing_lambda: ctx_unbiasing_lambda(sigma, dim, seq_len)?,
        asymptotic_risk: ctx_asymptotic_risk(sigma, dim, lambda)?,
        optimal_lambda: ctx_optimal_lambda(sigma, dim)?,
        asymptotic_variance: ctx_asymptotic_variance(sigma, dim, lambda)?,
    })
}

/// Monte-Carlo estimate of the conditional-mean factor: the projection of
/// the first output row onto the sequence's own first-cluster centroid.
pub fn ctx_mc_mean_factor(
    sigma: f64,
    dim: usize,
    seq_len: usize,
    lambda: f64,
    n_samples: u64,
    seeds: &SeedStream,
) -> Result<McEstimate> {
    check_params(sigma, dim, seq_len, lambda)?;
    let spec = MixtureSpec::in_context(dim, sigma)?;
    Ok(monte_carlo_mean(n_samples, seeds, |rng| {
        let seq = spec
            .sample_conditioned(seq_len, 0, rng)
            .expect("parameters validated above");
        let l = seq.tokens.nrows() as f64;
        let w = seq.tokens.dot(&seq.tokens.row(0));
        let t1 = seq.tokens.t().dot(&w) * (2.0 * lambda / l);
        t1.dot(&seq.centroids_used.row(0))
    }))
}

/// Monte-Carlo estimate of the trace conditional variance
/// `E |T_1 - f mu*_c|^2` with the closed-form factor `f`.
pub fn ctx_mc_conditional_variance(
    sigma: f64,
    dim: usize,
    seq_len: usize,
    lambda: f64,
    n_samples: u64,
    seeds: &SeedStream,
) -> Result<McEstimate> {
    let f = ctx_mean_factor(sigma, dim, seq_len, lambda)?;
    let spec = MixtureSpec::in_context(dim, sigma)?;
    Ok(monte_carlo_mean(n_samples, seeds, |rng| {
        let seq = spec
            .sample_conditioned(seq_len, 0, rng)
            .expect("parameters validated above");
        let l = seq.tokens.nrows() as f64;
        let w = seq.tokens.dot(&seq.tokens.row(0));
        let t1 = seq.tokens.t().dot(&w) * (2.0 * lambda / l);
        let center = seq.centroids_used.row(0);
        t1.iter()
            .zip(center.iter())
            .map(|(t, c)| (t - f * c) * (t - f * c))
            .sum()
    }))
}

/// Monte-Carlo risk of the Gram predictor on in-context sequences.
pub fn ctx_mc_risk(
    sigma: f64,
    dim: usize,
    seq_len: usize,
    lambda: f64,
    n_samples: u64,
    seeds: &SeedStream,
) -> Result<McEstimate> {
    check_params(sigma, dim, seq_len, lambda)?;
    let spec = MixtureSpec::in_context(dim, sigma)?;
    super::empirical_risk(
        &EmpiricalPredictor::Ctx { lambda },
        &spec,
        seq_len,
        n_samples,
        seeds,
    )
}
