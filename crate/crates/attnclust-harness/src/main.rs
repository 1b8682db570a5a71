//! Command-line front end: config- or preset-driven experiment runs.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use attnclust_harness::config::{ExperimentConfig, ExperimentKind};
use attnclust_harness::{embed, presets, runner, stats, verify};
use attnclust::rng::SeedStream;

#[derive(Parser)]
#[command(
    name = "attnclust",
    about = "Train, verify, and inspect attention-based clustering predictors",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand. A config file or preset provides the
/// base experiment; the remaining flags override individual fields.
#[derive(Args)]
struct Common {
    /// Config file (JSON).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named preset to start from.
    #[arg(long)]
    preset: Option<String>,
    /// Base seed override; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of runs override.
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "attnclust-out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Stochastic training runs with percentile bands.
    Train(Common),
    /// Closed-form risks against enumeration and Monte-Carlo references.
    VerifyRisk(Common),
    /// The moment catalog against Monte-Carlo references.
    VerifyMoments(Common),
    /// Final distance across a regularization-strength grid.
    SweepReg(Common),
    /// Predictor risk across ambient dimensions.
    SweepDim(Common),
    /// Closed-form and sampled statistics of the Gram predictor.
    CtxStats(Common),
    /// PCA projection of one sequence and its predictions.
    Embed(Common),
    /// The critical-point catalog of the noise-free risk.
    CriticalPoints(Common),
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Train(_) => ExperimentKind::Train,
            Command::VerifyRisk(_) => ExperimentKind::VerifyRisk,
            Command::VerifyMoments(_) => ExperimentKind::VerifyMoments,
            Command::SweepReg(_) => ExperimentKind::SweepReg,
            Command::SweepDim(_) => ExperimentKind::SweepDim,
            Command::CtxStats(_) => ExperimentKind::CtxStats,
            Command::Embed(_) => ExperimentKind::Embed,
            Command::CriticalPoints(_) => ExperimentKind::CriticalPoints,
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::Train(c)
            | Command::VerifyRisk(c)
            | Command::VerifyMoments(c)
            | Command::SweepReg(c)
            | Command::SweepDim(c)
            | Command::CtxStats(c)
            | Command::Embed(c)
            | Command::CriticalPoints(c) => c,
        }
    }
}

/// Assembles the effective config from preset/config file plus overrides.
fn resolve_config(kind: ExperimentKind, common: &Common) -> Result<ExperimentConfig> {
    let mut config = match (&common.config, &common.preset) {
        (Some(_), Some(_)) => bail!("pass either --config or --preset, not both"),
        (Some(path), None) => ExperimentConfig::load(path)?,
        (None, Some(name)) => presets::preset(name)?,
        (None, None) => ExperimentConfig::for_kind(kind),
    };
    if config.experiment != kind {
        bail!(
            "config describes a {} experiment but the {} command was invoked",
            config.experiment.name(),
            kind.name()
        );
    }
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(runs) = common.runs {
        config.n_runs = runs;
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<bool> {
    let kind = cli.command.kind();
    let common = cli.command.common();
    let config = resolve_config(kind, common)?;
    let out_dir = config.out.clone().unwrap_or_else(|| common.out.clone());

    match kind {
        ExperimentKind::Train | ExperimentKind::SweepReg | ExperimentKind::SweepDim => {
            let output = runner::run_experiment(&config, &out_dir)?;
            let flagged = &output.summary.flagged_runs;
            if !flagged.is_empty() {
                eprintln!("flagged runs (non-finite metrics): {flagged:?}");
            }
            println!(
                "wrote {} and {}",
                output.rows_path.display(),
                output.summary_path.display()
            );
            Ok(true)
        }
        ExperimentKind::VerifyRisk => {
            let report = verify::verify_risk(config.samples, &SeedStream::from_seed(config.seed))?;
            report_outcome(&out_dir, "verify-risk", report)
        }
        ExperimentKind::VerifyMoments => {
            let report =
                verify::verify_moments(config.samples, 10, &SeedStream::from_seed(config.seed))?;
            report_outcome(&out_dir, "verify-moments", report)
        }
        ExperimentKind::CtxStats => {
            let report = stats::run_ctx_stats(&config, &out_dir)?;
            println!(
                "mean factor {:.5} (mc {:.5} +/- {:.5}); wrote {}",
                report.mean_factor,
                report.mc_mean_factor,
                report.mc_mean_factor_se,
                stats::report_path(&out_dir).display()
            );
            Ok(true)
        }
        ExperimentKind::Embed => {
            let output = embed::run_embed(&config, &out_dir)?;
            println!(
                "{} of {} runs reduced the projected variance; wrote {}",
                output.summary.n_reduced,
                output.summary.runs.len(),
                output.points_path.display()
            );
            Ok(true)
        }
        ExperimentKind::CriticalPoints => {
            let report = stats::run_critical_points(&config, &out_dir)?;
            println!(
                "{} families, ordering holds: {}; wrote {}",
                report.families.len(),
                report.ordering_holds,
                stats::report_path(&out_dir).display()
            );
            Ok(true)
        }
    }
}

/// Writes a verification report and prints its verdict; a failed
/// verification is an unsuccessful exit.
fn report_outcome(
    out_dir: &std::path::Path,
    name: &str,
    report: verify::VerifyReport,
) -> Result<bool> {
    std::fs::create_dir_all(out_dir)?;
    let path = out_dir.join("report.json");
    attnclust_harness::report::write_json(&path, &report)?;
    println!(
        "{name}: {}/{} cells pass; wrote {}",
        report.n_pass,
        report.n_cells,
        path.display()
    );
    if !report.pass {
        for cell in &report.worst {
            eprintln!(
                "  worst: {} |closed - ref| = {:.3e} vs tol {:.3e}",
                cell.name, cell.difference, cell.tolerance
            );
        }
    }
    Ok(report.pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
