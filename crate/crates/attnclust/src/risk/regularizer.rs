//! Overlap regularizers that break the permutation-symmetric saddles.
//!
//! Unregularized training from a generic initialization tends to collapse
//! several heads onto one centroid. The regularizers penalize a single token
//! being claimed by more than one head: for linear heads via products of
//! squared projections of the first token, for the softmax pair via the
//! distance of both projections from one plus the mutual head overlap.

use ndarray::{ArrayView1, ArrayView2};

use super::ReparamCoords;
use crate::error::{Error, Result};

/// Shape of the multi-head linear overlap penalty.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegForm {
    /// `sum_{i<j} <mu_i, X_1>^2 <mu_j, X_1>^2`.
    Pairwise,
    /// `prod_i <mu_i, X_1>^2` over all heads.
    Product,
}

/// Per-sample linear overlap penalty of a head matrix at the first token.
/// Needs at least two heads; for exactly two the two forms coincide.
pub fn regularizer_linear_sample(
    heads: ArrayView2<'_, f64>,
    x1: ArrayView1<'_, f64>,
    form: RegForm,
) -> Result<f64> {
    let (k, d) = heads.dim();
    if k < 2 {
        return Err(Error::Config(format!(
            "overlap regularizer needs at least two heads, got {k}"
        )));
    }
    if x1.len() != d {
        return Err(Error::Dimension(format!(
            "token has dimension {}, heads have {d}",
            x1.len()
        )));
    }
    let proj_sq: Vec<f64> = heads
        .rows()
        .into_iter()
        .map(|mu| {
            let p = mu.dot(&x1);
            p * p
        })
        .collect();
    Ok(match form {
        RegForm::Pairwise => {
            let mut total = 0.0;
            for i in 0..k {
                for j in (i + 1)..k {
                    total += proj_sq[i] * proj_sq[j];
                }
            }
            total
        }
        RegForm::Product => proj_sq.iter().product(),
    })
}

/// Exact expectation of the two-head penalty over a noise-free balanced
/// mixture: `(kappa0^2 eta0^2 + kappa1^2 eta1^2) / 2`.
pub fn regularizer_linear_dirac_expectation(coords: &ReparamCoords) -> f64 {
    let ReparamCoords {
        kappa0,
        kappa1,
        eta0,
        eta1,
        ..
    } = *coords;
    0.5 * (kappa0 * kappa0 * eta0 * eta0 + kappa1 * kappa1 * eta1 * eta1)
}

/// Per-sample softmax shaping penalty:
/// `(<mu_0, X_1> - 1)^2 (<mu_1, X_1> - 1)^2 + <mu_0, mu_1>^2`.
///
/// The squared overlap keeps the penalty symmetric in the heads' signs, so
/// collapsing onto a shared direction costs the same whether the copies agree
/// or are antipodal; only genuinely orthogonal pairs escape it.
pub fn regularizer_softmax_sample(
    mu0: ArrayView1<'_, f64>,
    mu1: ArrayView1<'_, f64>,
    x1: ArrayView1<'_, f64>,
) -> Result<f64> {
    let d = x1.len();
    if mu0.len() != d || mu1.len() != d {
        return Err(Error::Dimension(format!(
            "heads have dimensions {}/{}, token has {d}",
            mu0.len(),
            mu1.len()
        )));
    }
    let a = mu0.dot(&x1) - 1.0;
    let b = mu1.dot(&x1) - 1.0;
    let overlap = mu0.dot(&mu1);
    Ok(a * a * b * b + overlap * overlap)
}
