//! Attention-based clustering predictors for Gaussian mixture data.
//!
//! The crate implements the full pipeline around a family of simplified
//! attention predictors used as unsupervised quantizers: data generation for
//! Dirac / Gaussian / in-context mixture models ([`mixtures`]), the Gaussian
//! moment calculus behind the exact risk formulas ([`moments`]), the predictor
//! forward passes ([`attention`]), closed-form and Monte-Carlo risks with
//! their optimal-temperature calculators ([`risk`]), sphere-constrained
//! deterministic and stochastic optimizers ([`optimize`]), and
//! centroid-recovery metrics ([`metrics`]).
//!
//! Everything stochastic is driven by splittable [`rng::SeedStream`]s, so any
//! result can be replayed bit-identically regardless of worker scheduling.

pub mod attention;
pub mod error;
pub mod metrics;
pub mod mixtures;
pub mod moments;
pub mod optimize;
pub mod risk;
pub mod rng;

pub use error::{Error, Result};
