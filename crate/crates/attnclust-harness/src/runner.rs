//! Executes the run-based experiments: `train`, `sweep-reg`, and
//! `sweep-dim`.
//!
//! Runs are independent and execute on the harness worker pool; their rows
//! are collected in run order afterwards, so the output never depends on
//! scheduling. Run `i` derives everything from seed `base + i`. A run that
//! diverges (or produces a non-finite metric) is flagged in the summary and
//! excluded from the percentile bands; the remaining runs proceed normally.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use attnclust::mixtures::MixtureSpec;
use attnclust::optimize::{psgd_run, psgd_soft_run, TrainTrace};
use attnclust::risk::{
    canonical_star_pair, ctx_finite_l_risk, ctx_mc_risk, ctx_optimal_lambda, oracle_finite_l_risk,
    oracle_mc_risk, oracle_unbiasing_lambda,
};
use attnclust::rng::SeedStream;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, ExperimentKind, PredictorKindConfig};
use crate::report::{summarize, write_json, write_rows, ResultRow, Summary};

/// Seed-stream tag reserved for drawing random centroids, far above the
/// tags the optimizer derives internally.
const CENTROID_TAG: u64 = u64::MAX;

/// Files written by a run-based experiment.
#[derive(Debug)]
pub struct ExperimentOutput {
    pub rows_path: PathBuf,
    pub summary_path: PathBuf,
    pub summary: Summary,
}

/// Dispatches a run-based experiment and writes `rows.csv` plus
/// `summary.json` into `out_dir`.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutput> {
    config.validate()?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;

    let (rows, flagged, sweep_values) = match config.experiment {
        ExperimentKind::Train => train_rows(config)?,
        ExperimentKind::SweepReg => sweep_reg_rows(config)?,
        ExperimentKind::SweepDim => sweep_dim_rows(config)?,
        other => bail!("run_experiment does not handle the {} command", other.name()),
    };

    let summary = summarize(config, &rows, config.n_runs, sweep_values.as_deref(), &flagged);
    let rows_path = out_dir.join("rows.csv");
    let summary_path = out_dir.join("summary.json");
    write_rows(&rows_path, &rows)?;
    write_json(&summary_path, &summary)?;
    Ok(ExperimentOutput {
        rows_path,
        summary_path,
        summary,
    })
}

/// One training run: the trace plus the spec it ran against.
fn train_one(config: &ExperimentConfig, run: usize) -> Result<TrainTrace> {
    let seeds = SeedStream::from_seed(config.seed + run as u64);
    let mut centroid_rng = seeds.derive(CENTROID_TAG).rng();
    let centroids = config.centroid_matrix(&mut centroid_rng)?;
    let spec = config.mixture_spec(centroids.as_ref())?;
    let optimizer = config.optimizer_config()?;
    let trace = match config.predictor.kind {
        PredictorKindConfig::Linear => {
            psgd_run(&spec, config.mixture.seq_len, &optimizer, &seeds)?
        }
        PredictorKindConfig::ShapedSoftmax => {
            psgd_soft_run(&spec, config.mixture.seq_len, &optimizer, &seeds)?
        }
        other => bail!("cannot train the {other:?} predictor"),
    };
    Ok(trace)
}

/// Rows for the `train` experiment: every recorded iteration of every run.
#[allow(clippy::type_complexity)]
fn train_rows(config: &ExperimentConfig) -> Result<(Vec<ResultRow>, Vec<usize>, Option<Vec<f64>>)> {
    let soft = config.predictor.kind == PredictorKindConfig::ShapedSoftmax;
    let traces: Vec<TrainTrace> = crate::worker_pool()?.install(|| {
        (0..config.n_runs)
            .into_par_iter()
            .map(|run| train_one(config, run))
            .collect::<Result<Vec<_>>>()
    })?;

    let mut rows = Vec::new();
    let mut flagged = Vec::new();
    for (run, trace) in traces.iter().enumerate() {
        if trace.diverged {
            flagged.push(run);
        }
        for record in &trace.records {
            rows.push(ResultRow::new(
                run,
                record.iteration,
                "dist_sign_perm",
                record.dist_sign_perm,
            ));
            rows.push(ResultRow::new(
                run,
                record.iteration,
                "dist_signed",
                record.dist_signed,
            ));
            rows.push(ResultRow::new(run, record.iteration, "objective", record.objective));
            if soft {
                rows.push(ResultRow::new(run, record.iteration, "lambda", record.lambda));
                rows.push(ResultRow::new(run, record.iteration, "psi", record.psi));
            }
        }
    }
    Ok((rows, flagged, None))
}

/// Rows for `sweep-reg`: per run and grid point, the penalty weight swept
/// over the shared optimizer config.
#[allow(clippy::type_complexity)]
fn sweep_reg_rows(
    config: &ExperimentConfig,
) -> Result<(Vec<ResultRow>, Vec<usize>, Option<Vec<f64>>)> {
    let grid = config
        .sweep
        .as_ref()
        .expect("validated sweep grid")
        .values();

    let cells: Vec<(usize, usize)> = (0..config.n_runs)
        .flat_map(|run| (0..grid.len()).map(move |j| (run, j)))
        .collect();
    let finals: Vec<(usize, usize, TrainTrace)> = crate::worker_pool()?.install(|| {
        cells
            .into_par_iter()
            .map(|(run, j)| {
                let mut cell = config.clone();
                cell.optimizer.rho = grid[j];
                // Distinct sub-stream per cell; run pairing across cells is
                // not wanted, the grid point is part of the seed.
                let seeds = SeedStream::from_seed(cell.seed + run as u64).derive(1_000_000 + j as u64);
                let mut centroid_rng = seeds.derive(CENTROID_TAG).rng();
                let centroids = cell.centroid_matrix(&mut centroid_rng)?;
                let spec = cell.mixture_spec(centroids.as_ref())?;
                let optimizer = cell.optimizer_config()?;
                let trace = match cell.predictor.kind {
                    PredictorKindConfig::Linear => {
                        psgd_run(&spec, cell.mixture.seq_len, &optimizer, &seeds)?
                    }
                    PredictorKindConfig::ShapedSoftmax => {
                        psgd_soft_run(&spec, cell.mixture.seq_len, &optimizer, &seeds)?
                    }
                    other => bail!("cannot train the {other:?} predictor"),
                };
                Ok((run, j, trace))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut rows = Vec::new();
    let mut flagged = Vec::new();
    for (run, j, trace) in &finals {
        if trace.diverged && !flagged.contains(run) {
            flagged.push(*run);
        }
        rows.push(ResultRow::new(*run, *j, "rho", grid[*j]));
        rows.push(ResultRow::new(*run, *j, "final_dist_sign_perm", trace.final_dist_sign_perm));
        rows.push(ResultRow::new(*run, *j, "final_dist_signed", trace.final_dist_signed));
    }
    rows.sort_by_key(|r| (r.run, r.iteration));
    Ok((rows, flagged, Some(grid)))
}

/// Rows for `sweep-dim`: closed-form and Monte-Carlo risk of the oracle or
/// Gram predictor across ambient dimensions.
#[allow(clippy::type_complexity)]
fn sweep_dim_rows(
    config: &ExperimentConfig,
) -> Result<(Vec<ResultRow>, Vec<usize>, Option<Vec<f64>>)> {
    let grid = config
        .sweep
        .as_ref()
        .expect("validated sweep grid")
        .values();
    let dims: Vec<usize> = grid.iter().map(|v| *v as usize).collect();
    let sigma = config.mixture.sigma;
    let seq_len = config.mixture.seq_len;

    let cells: Vec<(usize, usize)> = (0..config.n_runs)
        .flat_map(|run| (0..dims.len()).map(move |j| (run, j)))
        .collect();
    let results: Vec<(usize, usize, f64, f64, f64)> = crate::worker_pool()?.install(|| {
        cells
            .into_par_iter()
            .map(|(run, j)| {
                let dim = dims[j];
                let seeds =
                    SeedStream::from_seed(config.seed + run as u64).derive(2_000_000 + j as u64);
                let (closed, mc) = match config.predictor.kind {
                    PredictorKindConfig::Ctx => {
                        let lambda = match config.predictor.lambda {
                            Some(l) => l,
                            None => ctx_optimal_lambda(sigma, dim)?,
                        };
                        let closed = ctx_finite_l_risk(sigma, dim, seq_len, lambda)?;
                        let mc = ctx_mc_risk(sigma, dim, seq_len, lambda, config.samples, &seeds)?;
                        (closed, mc)
                    }
                    PredictorKindConfig::Oracle => {
                        let lambda = match config.predictor.lambda {
                            Some(l) => l,
                            None => oracle_unbiasing_lambda(sigma, seq_len)?,
                        };
                        let stars = canonical_star_pair(dim)?;
                        let closed = oracle_finite_l_risk(sigma, dim, seq_len, lambda)?;
                        let mc = oracle_mc_risk(
                            stars.view(),
                            sigma,
                            seq_len,
                            lambda,
                            config.samples,
                            &seeds,
                        )?;
                        (closed, mc)
                    }
                    other => bail!("sweep-dim does not evaluate the {other:?} predictor"),
                };
                Ok((run, j, closed, mc.mean, mc.se))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut rows = Vec::new();
    for (run, j, closed, mc_mean, mc_se) in &results {
        rows.push(ResultRow::new(*run, *j, "dim", dims[*j] as f64));
        rows.push(ResultRow::new(*run, *j, "closed_form_risk", *closed));
        rows.push(ResultRow::with_se(*run, *j, "mc_risk", *mc_mean, *mc_se));
    }
    rows.sort_by_key(|r| (r.run, r.iteration));
    Ok((rows, Vec::new(), Some(grid)))
}

/// MixtureSpec re-export point for integration tests that want to assert
/// against the exact spec a config builds.
pub fn spec_for_tests(config: &ExperimentConfig) -> Result<MixtureSpec> {
    let seeds = SeedStream::from_seed(config.seed);
    let mut rng = seeds.derive(CENTROID_TAG).rng();
    let centroids = config.centroid_matrix(&mut rng)?;
    config.mixture_spec(centroids.as_ref())
}
