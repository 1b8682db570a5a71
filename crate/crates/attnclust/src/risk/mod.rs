//! Risk functionals for the attention predictors.
//!
//! The population risk is `E |X_1 - T(X)_1|^2`, the reconstruction error of
//! the first token (by exchangeability every row has the same law). The
//! module provides a Monte-Carlo estimator for any predictor, exact
//! noise-free (Dirac) and Gaussian closed forms in the five inner-product
//! coordinates, the optimal-temperature calculators, regularizer
//! expectations, and the closed-form statistics of the oracle and in-context
//! predictors.

mod ctx;
mod dirac;
mod gaussian;
mod oracle;
mod regularizer;

pub use ctx::*;
pub use dirac::*;
pub use gaussian::*;
pub use oracle::*;
pub use regularizer::*;

use ndarray::ArrayView1;

use crate::attention::{predictor_first_row, HeadBank, PredictorKind};
use crate::error::{Error, Result};
use crate::mixtures::MixtureSpec;
use crate::moments::{monte_carlo_mean, McEstimate};
use crate::rng::SeedStream;

/// Slack allowed when inner products overshoot `[-1, 1]` by rounding before
/// they are clamped.
const COORD_TOL: f64 = 1e-9;

/// The five inner products that determine the risk of a two-head linear
/// predictor with unit heads under orthonormal centroids `(s_0, s_1)`:
/// `kappa_c = <s_c, mu_c>`, `eta_0 = <s_0, mu_1>`, `eta_1 = <s_1, mu_0>`,
/// `xi = <mu_0, mu_1>`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReparamCoords {
    /// Alignment of head 0 with its own centroid.
    pub kappa0: f64,
    /// Alignment of head 1 with its own centroid.
    pub kappa1: f64,
    /// Cross alignment of head 1 with centroid 0.
    pub eta0: f64,
    /// Cross alignment of head 0 with centroid 1.
    pub eta1: f64,
    /// Overlap between the two heads.
    pub xi: f64,
}

impl ReparamCoords {
    /// Validates every coordinate into `[-1, 1]` (tiny rounding overshoot is
    /// clamped, anything larger is a domain error).
    pub fn new(kappa0: f64, kappa1: f64, eta0: f64, eta1: f64, xi: f64) -> Result<Self> {
        Ok(Self {
            kappa0: clamp_coord("kappa0", kappa0)?,
            kappa1: clamp_coord("kappa1", kappa1)?,
            eta0: clamp_coord("eta0", eta0)?,
            eta1: clamp_coord("eta1", eta1)?,
            xi: clamp_coord("xi", xi)?,
        })
    }

    /// Coordinates with the head overlap defaulted to zero, as in the
    /// noise-free analysis where `xi` never enters.
    pub fn degenerate(kappa0: f64, kappa1: f64, eta0: f64, eta1: f64) -> Result<Self> {
        Self::new(kappa0, kappa1, eta0, eta1, 0.0)
    }

    /// The coordinates as `[kappa0, kappa1, eta0, eta1, xi]`.
    pub fn as_array(&self) -> [f64; 5] {
        [self.kappa0, self.kappa1, self.eta0, self.eta1, self.xi]
    }
}

fn clamp_coord(name: &str, v: f64) -> Result<f64> {
    if !v.is_finite() || v.abs() > 1.0 + COORD_TOL {
        return Err(Error::Domain(format!(
            "coordinate {name} must lie in [-1, 1], got {v}"
        )));
    }
    Ok(v.clamp(-1.0, 1.0))
}

/// Computes the five coordinates of a head pair against a centroid pair.
/// All four vectors must share one dimension; unit norms are the caller's
/// responsibility (the coordinates are clamped into `[-1, 1]`).
pub fn reparam(
    mu0: ArrayView1<'_, f64>,
    mu1: ArrayView1<'_, f64>,
    star0: ArrayView1<'_, f64>,
    star1: ArrayView1<'_, f64>,
) -> Result<ReparamCoords> {
    let d = mu0.len();
    if mu1.len() != d || star0.len() != d || star1.len() != d {
        return Err(Error::Dimension(format!(
            "reparam needs four vectors of one dimension, got {}/{}/{}/{}",
            d,
            mu1.len(),
            star0.len(),
            star1.len()
        )));
    }
    ReparamCoords::new(
        star0.dot(&mu0),
        star1.dot(&mu1),
        star0.dot(&mu1),
        star1.dot(&mu0),
        mu0.dot(&mu1),
    )
}

/// What the Monte-Carlo risk estimator runs: either a head bank under one of
/// the dispatchable forward passes, or the head-free Gram predictor at a raw
/// temperature (which may be zero, giving the trivial predictor `T = 0`...
/// risk `1 + d sigma^2`).
#[derive(Clone, Copy, Debug)]
pub enum EmpiricalPredictor<'a> {
    /// A validated head bank evaluated under `kind`.
    Bank {
        /// Forward pass to use.
        kind: PredictorKind,
        /// Heads and temperature.
        bank: &'a HeadBank,
    },
    /// The Gram predictor at an unconstrained temperature.
    Ctx {
        /// Raw temperature; zero yields the null predictor.
        lambda: f64,
    },
}

/// Monte-Carlo estimate of `E |X_1 - T(X)_1|^2` over fresh sequences from
/// `spec`. Deterministic in `(seeds, n_samples)` regardless of thread count.
pub fn empirical_risk(
    predictor: &EmpiricalPredictor<'_>,
    spec: &MixtureSpec,
    seq_len: usize,
    n_samples: u64,
    seeds: &SeedStream,
) -> Result<McEstimate> {
    if seq_len == 0 {
        return Err(Error::EmptySequence(
            "risk estimation needs at least one token per sequence".into(),
        ));
    }
    if n_samples == 0 {
        return Err(Error::Argument(
            "risk estimation needs at least one sample".into(),
        ));
    }
    if let EmpiricalPredictor::Bank { bank, .. } = predictor {
        if bank.dim() != spec.dim() {
            return Err(Error::Dimension(format!(
                "bank dimension {} does not match mixture dimension {}",
                bank.dim(),
                spec.dim()
            )));
        }
    }
    Ok(monte_carlo_mean(n_samples, seeds, |rng| {
        let seq = spec
            .sample_with(seq_len, rng)
            .expect("sequence parameters validated above");
        let x1 = seq.tokens.row(0);
        let t1 = match predictor {
            EmpiricalPredictor::Bank { kind, bank } => {
                predictor_first_row(*kind, bank, seq.tokens.view())
                    .expect("predictor parameters validated above")
            }
            EmpiricalPredictor::Ctx { lambda } => {
                let l = seq.tokens.nrows() as f64;
                let w = seq.tokens.dot(&x1);
                let mut out = seq.tokens.t().dot(&w);
                out *= 2.0 * lambda / l;
                out
            }
        };
        x1.iter()
            .zip(t1.iter())
            .map(|(x, t)| (x - t) * (x - t))
            .sum()
    }))
}
