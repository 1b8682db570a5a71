//! Named experiment presets with the hyperparameters the reference
//! experiments were run at, so `attnclust train --preset fig-linear-manifold`
//! works without a config file.

use anyhow::{bail, Result};

use crate::config::{
    CentroidConfig, ExperimentConfig, ExperimentKind, InitConfig, MixtureKindConfig,
    PredictorKindConfig, SweepGrid,
};

/// Every preset name, in the order `list` prints them.
pub const PRESET_NAMES: &[&str] = &[
    "fig-linear-manifold",
    "fig-linear-manifold-noisy",
    "fig-linear-sphere",
    "fig-softmax",
    "fig-k3",
    "sweep-reg-dirac",
    "sweep-dim-ctx",
    "embed-oracle",
    "embed-ctx",
];

/// Looks a preset up by name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let config = match name {
        // Manifold-initialized linear training at low interference.
        "fig-linear-manifold" => {
            let mut c = ExperimentConfig::for_kind(ExperimentKind::Train);
            c.mixture.sigma = 0.3;
            c.predictor.lambda = Some(0.6);
            c.optimizer.init = InitConfig::Manifold;
            c
        }
        // Same, at high interference with the temperature turned down.
        "fig-linear-manifold-noisy" => {
            let mut c = ExperimentConfig::for_kind(ExperimentKind::Train);
            c.mixture.sigma = 1.0;
            c.predictor.lambda = Some(0.2);
            c.optimizer.init = InitConfig::Manifold;
            c
        }
        // Sphere-initialized linear training with the overlap penalty.
        "fig-linear-sphere" => {
            let mut c = ExperimentConfig::for_kind(ExperimentKind::Train);
            c.mixture.sigma = 0.3;
            c.predictor.lambda = Some(0.6);
            c.optimizer.init = InitConfig::Sphere;
            c.optimizer.rho = 0.2;
            c
        }
        // Shaped softmax training with trainable temperature and shift.
        "fig-softmax" => {
            let mut c = ExperimentConfig::for_kind(ExperimentKind::Train);
            c.mixture.sigma = 0.3;
            c.predictor.kind = PredictorKindConfig::ShapedSoftmax;
            c.optimizer.rho = 0.5;
            c.optimizer.train_psi = true;
            c.optimizer.train_lambda = true;
            c
        }
        // Three components with the pairwise penalty.
        "fig-k3" => {
            let mut c = ExperimentConfig::for_kind(ExperimentKind::Train);
            c.mixture.dim = 6;
            c.mixture.sigma = 0.3;
            c.mixture.n_components = 3;
            c.mixture.centroids = CentroidConfig::Random;
            c.predictor.lambda = Some(0.6);
            c.optimizer.rho = 0.2;
            c.optimizer.iterations = 20_000;
            c
        }
        // Regularization sweep on noise-free data.
        "sweep-reg-dirac" => {
            let mut c = ExperimentConfig::for_kind(ExperimentKind::SweepReg);
            c.mixture.kind = MixtureKindConfig::Dirac;
            c.mixture.sigma = 0.0;
            c.predictor.lambda = Some(0.6);
            c.optimizer.iterations = 5_000;
            c.sweep = Some(SweepGrid::Range {
                start: 0.0,
                stop: 0.3,
                count: 15,
            });
            c
        }
        // Gram-predictor risk across ambient dimensions.
        "sweep-dim-ctx" => {
            let mut c = ExperimentConfig::for_kind(ExperimentKind::SweepDim);
            c.mixture.kind = MixtureKindConfig::InContext;
            c.mixture.dim = 10;
            c.mixture.seq_len = 500;
            c.predictor.kind = PredictorKindConfig::Ctx;
            c.n_runs = 3;
            c.samples = 20_000;
            c.sweep = Some(SweepGrid::Values {
                values: vec![4.0, 6.0, 8.0, 10.0, 14.0, 20.0],
            });
            c
        }
        // PCA projection of oracle predictions on Gaussian data.
        "embed-oracle" => {
            let mut c = ExperimentConfig::for_kind(ExperimentKind::Embed);
            c.mixture.dim = 10;
            c.mixture.sigma = 0.3;
            c.mixture.seq_len = 500;
            c.predictor.kind = PredictorKindConfig::Oracle;
            c.predictor.lambda = Some(1.0 / (1.0 + 2.0 * 0.3 * 0.3));
            c
        }
        // PCA projection of Gram-predictor outputs on in-context data.
        "embed-ctx" => {
            let mut c = ExperimentConfig::for_kind(ExperimentKind::Embed);
            c.mixture.kind = MixtureKindConfig::InContext;
            c.mixture.dim = 10;
            c.mixture.sigma = 0.3;
            c.mixture.seq_len = 500;
            c.predictor.kind = PredictorKindConfig::Ctx;
            c.predictor.lambda = Some(1.0 / (1.0 + 2.0 * 0.3 * 0.3));
            c
        }
        other => bail!(
            "unknown preset '{other}'; available: {}",
            PRESET_NAMES.join(", ")
        ),
    };
    config.validate()?;
    Ok(config)
}
