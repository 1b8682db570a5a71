//! The `ctx-stats` and `critical-points` commands: closed-form statistics
//! reports with optional Monte-Carlo cross-checks, written as JSON.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use attnclust::risk::{
    critical_points_dirac, ctx_mc_conditional_variance, ctx_mc_mean_factor, ctx_statistics,
    exact_risk_dirac_grad, lambda_star_degenerate, ReparamCoords,
};
use attnclust::rng::SeedStream;
use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::report::write_json;

/// The `ctx-stats` report: closed-form statistics of the Gram predictor at
/// the configured `(sigma, d, L, lambda)`, with Monte-Carlo cross-checks at
/// the configured sample budget.
#[derive(Debug, Serialize)]
pub struct CtxStatsReport {
    pub config: ExperimentConfig,
    pub lambda: f64,
    pub mean_factor: f64,
    pub unbiasing_lambda: f64,
    pub optimal_lambda: f64,
    pub asymptotic_risk: f64,
    pub asymptotic_variance: f64,
    pub mc_mean_factor: f64,
    pub mc_mean_factor_se: f64,
    pub mc_conditional_variance: f64,
    pub mc_conditional_variance_se: f64,
}

/// Runs `ctx-stats` and writes `report.json`.
pub fn run_ctx_stats(config: &ExperimentConfig, out_dir: &Path) -> Result<CtxStatsReport> {
    config.validate()?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let sigma = config.mixture.sigma;
    let dim = config.mixture.dim;
    let seq_len = config.mixture.seq_len;
    let lambda = match config.predictor.lambda {
        Some(l) => l,
        None => attnclust::risk::ctx_unbiasing_lambda(sigma, dim, seq_len)?,
    };
    let stats = ctx_statistics(sigma, dim, seq_len, lambda)?;
    let seeds = SeedStream::from_seed(config.seed);
    let mean = ctx_mc_mean_factor(sigma, dim, seq_len, lambda, config.samples, &seeds.derive(1))?;
    let var = ctx_mc_conditional_variance(
        sigma,
        dim,
        seq_len,
        lambda,
        config.samples,
        &seeds.derive(2),
    )?;
    let report = CtxStatsReport {
        config: config.clone(),
        lambda,
        mean_factor: stats.mean_factor,
        unbiasing_lambda: stats.unbiasing_lambda,
        optimal_lambda: stats.optimal_lambda,
        asymptotic_risk: stats.asymptotic_risk,
        asymptotic_variance: stats.asymptotic_variance,
        mc_mean_factor: mean.mean,
        mc_mean_factor_se: mean.se,
        mc_conditional_variance: var.mean,
        mc_conditional_variance_se: var.se,
    };
    write_json(&out_dir.join("report.json"), &report)?;
    Ok(report)
}

/// One critical-point family in the catalog.
#[derive(Debug, Serialize)]
pub struct FamilyReport {
    pub name: String,
    pub risk: f64,
    pub members: usize,
    pub max_grad_norm: f64,
}

/// The `critical-points` report for the noise-free reduced risk.
#[derive(Debug, Serialize)]
pub struct CriticalPointsReport {
    pub seq_len: usize,
    pub lambda_star: f64,
    pub circle_radius_sq: f64,
    pub families: Vec<FamilyReport>,
    /// Risks ordered max > one-head saddles > interference circle > minima.
    pub ordering_holds: bool,
}

/// Largest gradient norm of the reduced risk over a family of points.
fn family_grad_norm(points: &[ReparamCoords], lambda: f64, seq_len: usize) -> Result<f64> {
    let mut worst = 0.0f64;
    for coords in points {
        let grad = exact_risk_dirac_grad(coords, lambda, seq_len)?;
        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        worst = worst.max(norm);
    }
    Ok(worst)
}

/// Runs `critical-points` and writes `report.json`.
pub fn run_critical_points(config: &ExperimentConfig, out_dir: &Path) -> Result<CriticalPointsReport> {
    config.validate()?;
    fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create {}", out_dir.display()))?;
    let seq_len = config.mixture.seq_len;
    let lambda = lambda_star_degenerate(seq_len)?;
    let catalog = critical_points_dirac(seq_len)?;
    let families = vec![
        (
            "local-max".to_string(),
            catalog.risk_local_max,
            vec![catalog.local_max],
        ),
        (
            "one-head-circle".to_string(),
            catalog.risk_axis_saddle,
            catalog.axis_saddles.clone(),
        ),
        (
            "interference-circle".to_string(),
            catalog.risk_circle_saddle,
            catalog.circle_saddles.clone(),
        ),
        (
            "minima".to_string(),
            catalog.risk_minimum,
            catalog.minima.clone(),
        ),
    ];
    let mut reports = Vec::new();
    for (name, risk, points) in families {
        reports.push(FamilyReport {
            name,
            risk,
            members: points.len(),
            max_grad_norm: family_grad_norm(&points, lambda, seq_len)?,
        });
    }
    let ordering_holds = catalog.risk_local_max > catalog.risk_axis_saddle
        && catalog.risk_axis_saddle > catalog.risk_circle_saddle
        && catalog.risk_circle_saddle > catalog.risk_minimum;
    let report = CriticalPointsReport {
        seq_len,
        lambda_star: lambda,
        circle_radius_sq: catalog.circle_radius_sq,
        families: reports,
        ordering_holds,
    };
    write_json(&out_dir.join("report.json"), &report)?;
    Ok(report)
}

/// Where a report file lands.
pub fn report_path(out_dir: &Path) -> PathBuf {
    out_dir.join("report.json")
}
