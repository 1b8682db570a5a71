//! The `embed` command: project one sequence's tokens and predictor outputs
//! onto the top-2 principal directions of the tokens, per run.
//!
//! The PCA is fitted on the input tokens only (eigendecomposition of the
//! empirical token covariance); the same affine map is applied to the
//! outputs, so the two clouds are directly comparable. The written point
//! file pairs each input with its output, tagged by cluster label.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use attnclust::attention::{ctx_forward, linear_predictor_forward, HeadBank};
use attnclust::rng::SeedStream;
use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{heads_matrix, ExperimentConfig, ExperimentKind, PredictorKindConfig};
use crate::report::write_json;

/// One paired 2D point.
#[derive(Clone, Debug)]
pub struct EmbeddedPoint {
    pub run: usize,
    pub index: usize,
    pub label: usize,
    pub input: [f64; 2],
    pub output: [f64; 2],
}

/// Per-run variance comparison between the projected clouds.
#[derive(Clone, Debug, Serialize)]
pub struct EmbedRunReport {
    pub run: usize,
    /// Total variance of the projected input cloud.
    pub input_variance: f64,
    /// Total variance of the projected output cloud.
    pub output_variance: f64,
    /// Whether the output cloud is tighter than the input cloud.
    pub reduced: bool,
    /// Largest distance from a projected output to its cluster's mean.
    pub within_cluster_spread: f64,
}

/// The embed summary written as JSON.
#[derive(Debug, Serialize)]
pub struct EmbedSummary {
    pub config: ExperimentConfig,
    pub runs: Vec<EmbedRunReport>,
    /// How many runs showed a variance reduction.
    pub n_reduced: usize,
}

/// Files written by the embed command.
#[derive(Debug)]
pub struct EmbedOutput {
    pub points_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: EmbedSummary,
    pub points: Vec<EmbeddedPoint>,
}

/// Top-2 principal directions of the rows of `tokens`, via the symmetric
/// eigendecomposition of the empirical covariance, plus the token mean the
/// projection is centered on.
fn fit_pca(tokens: ArrayView2<'_, f64>) -> (Array1<f64>, Array1<f64>, Array1<f64>) {
    let (l, d) = tokens.dim();
    let mean = tokens.mean_axis(ndarray::Axis(0)).expect("non-empty sequence");
    let mut cov = Array2::<f64>::zeros((d, d));
    for row in tokens.rows() {
        let centered = &row.to_owned() - &mean;
        for i in 0..d {
            for j in 0..d {
                cov[[i, j]] += centered[i] * centered[j];
            }
        }
    }
    cov /= l as f64;
    let eig = DMatrix::from_fn(d, d, |i, j| cov[[i, j]]).symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|a, b| {
        eig.eigenvalues[*b]
            .partial_cmp(&eig.eigenvalues[*a])
            .expect("finite eigenvalues")
    });
    let axis = |k: usize| Array1::from_iter(eig.eigenvectors.column(order[k]).iter().copied());
    (mean, axis(0), axis(1))
}

/// Projects the rows of `points` with the fitted map.
fn project(
    points: ArrayView2<'_, f64>,
    mean: &Array1<f64>,
    v1: &Array1<f64>,
    v2: &Array1<f64>,
) -> Vec<[f64; 2]> {
    points
        .rows()
        .into_iter()
        .map(|row| {
            let centered = &row.to_owned() - mean;
            [centered.dot(v1), centered.dot(v2)]
        })
        .collect()
}

/// Total variance of a 2D cloud around its own mean.
fn cloud_variance(points: &[[f64; 2]]) -> f64 {
    let n = points.len() as f64;
    let mean = points.iter().fold([0.0; 2], |acc, p| {
        [acc[0] + p[0] / n, acc[1] + p[1] / n]
    });
    points
        .iter()
        .map(|p| {
            let dx = p[0] - mean[0];
            let dy = p[1] - mean[1];
            dx * dx + dy * dy
        })
        .sum::<f64>()
        / n
}

/// Largest distance from a projected output to its cluster mean.
fn within_cluster_spread(points: &[[f64; 2]], labels: &[usize]) -> f64 {
    let k = labels.iter().copied().max().map(|m| m + 1).unwrap_or(0);
    let mut spread = 0.0f64;
    for c in 0..k {
        let members: Vec<&[f64; 2]> = points
            .iter()
            .zip(labels)
            .filter(|(_, l)| **l == c)
            .map(|(p, _)| p)
            .collect();
        if members.is_empty() {
            continue;
        }
        let n = members.len() as f64;
        let mean = members.iter().fold([0.0; 2], |acc, p| {
            [acc[0] + p[0] / n, acc[1] + p[1] / n]
        });
        for p in &members {
            let d = ((p[0] - mean[0]).powi(2) + (p[1] - mean[1]).powi(2)).sqrt();
            spread = spread.max(d);
        }
    }
    spread
}

/// One embed run: sample, forward, fit, project.
fn embed_one(config: &ExperimentConfig, run: usize) -> Result<(Vec<EmbeddedPoint>, EmbedRunReport)> {
    let seeds = SeedStream::from_seed(config.seed + run as u64);
    let mut centroid_rng = seeds.derive(u64::MAX).rng();
    let centroids = config.centroid_matrix(&mut centroid_rng)?;
    let spec = config.mixture_spec(centroids.as_ref())?;
    let mut sample_rng = seeds.derive(0).rng();
    let seq = spec.sample_with(config.mixture.seq_len, &mut sample_rng)?;
    let lambda = config.resolved_lambda()?;

    let outputs = match config.predictor.kind {
        PredictorKindConfig::Ctx => ctx_forward(seq.tokens.view(), lambda)?,
        PredictorKindConfig::Oracle => {
            let heads = centroids
                .clone()
                .ok_or_else(|| anyhow::anyhow!("the oracle predictor needs fixed centroids"))?;
            let bank = HeadBank::new(heads, lambda)?;
            linear_predictor_forward(&bank, seq.tokens.view())?
        }
        PredictorKindConfig::Linear => {
            let rows = config.predictor.heads.as_ref().ok_or_else(|| {
                anyhow::anyhow!("embedding a linear predictor needs explicit predictor.heads")
            })?;
            let bank = HeadBank::new(heads_matrix(rows)?, lambda)?;
            linear_predictor_forward(&bank, seq.tokens.view())?
        }
        PredictorKindConfig::ShapedSoftmax => {
            bail!("the embedding command projects linear-family predictors")
        }
    };

    let (mean, v1, v2) = fit_pca(seq.tokens.view());
    let inputs_2d = project(seq.tokens.view(), &mean, &v1, &v2);
    let outputs_2d = project(outputs.view(), &mean, &v1, &v2);

    let points = inputs_2d
        .iter()
        .zip(&outputs_2d)
        .enumerate()
        .map(|(index, (input, output))| EmbeddedPoint {
            run,
            index,
            label: seq.labels[index],
            input: *input,
            output: *output,
        })
        .collect();

    let input_variance = cloud_variance(&inputs_2d);
    let output_variance = cloud_variance(&outputs_2d);
    let report = EmbedRunReport {
        run,
        input_variance,
        output_variance,
        reduced: output_variance < input_variance,
        within_cluster_spread: within_cluster_spread(&outputs_2d, &seq.labels),
    };
    Ok((points, report))
}

/// Runs the embed command and writes `points.csv` plus `summary.json`.
pub fn run_embed(config: &ExperimentConfig, out_dir: &Path) -> Result<EmbedOutput> {
    config.validate()?;
    if config.experiment != ExperimentKind::Embed {
        bail!("run_embed needs an embed config");
    }
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;

    let per_run: Vec<(Vec<EmbeddedPoint>, EmbedRunReport)> = crate::worker_pool()?.install(|| {
        (0..config.n_runs)
            .into_par_iter()
            .map(|run| embed_one(config, run))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut points = Vec::new();
    let mut runs = Vec::new();
    for (run_points, report) in per_run {
        points.extend(run_points);
        runs.push(report);
    }
    let n_reduced = runs.iter().filter(|r| r.reduced).count();

    let points_path = out_dir.join("points.csv");
    let mut writer = csv::Writer::from_path(&points_path)
        .with_context(|| format!("cannot create {}", points_path.display()))?;
    writer.write_record([
        "run", "point", "label", "input_x", "input_y", "output_x", "output_y",
    ])?;
    for p in &points {
        writer.write_record([
            p.run.to_string(),
            p.index.to_string(),
            p.label.to_string(),
            format!("{}", p.input[0]),
            format!("{}", p.input[1]),
            format!("{}", p.output[0]),
            format!("{}", p.output[1]),
        ])?;
    }
    writer.flush()?;

    let summary = EmbedSummary {
        config: config.clone(),
        runs,
        n_reduced,
    };
    let summary_path = out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok(EmbedOutput {
        points_path,
        summary_path,
        summary,
        points,
    })
}
