//! Result files: per-iteration CSV rows and the JSON summary with
//! percentile bands.
//!
//! Row files are plain CSV with the fixed column order
//! `run,iteration,metric,value,se`; summaries echo the full config so every
//! emitted number carries its provenance. Nothing here depends on wall-clock
//! time, so identical configs and seeds produce byte-identical files.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::ExperimentConfig;

/// One recorded metric value.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub run: usize,
    pub iteration: usize,
    pub metric: String,
    pub value: f64,
    pub se: Option<f64>,
}

impl ResultRow {
    pub fn new(run: usize, iteration: usize, metric: &str, value: f64) -> Self {
        ResultRow {
            run,
            iteration,
            metric: metric.to_string(),
            value,
            se: None,
        }
    }

    pub fn with_se(run: usize, iteration: usize, metric: &str, value: f64, se: f64) -> Self {
        ResultRow {
            run,
            iteration,
            metric: metric.to_string(),
            value,
            se: Some(se),
        }
    }
}

/// Writes rows (already sorted by `(run, iteration)`) as CSV.
pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)
        .with_context(|| format!("cannot create {}", path.display()))?;
    writer.write_record(["run", "iteration", "metric", "value", "se"])?;
    for row in rows {
        writer.write_record([
            row.run.to_string(),
            row.iteration.to_string(),
            row.metric.clone(),
            format_float(row.value),
            row.se.map(format_float).unwrap_or_default(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Shortest-round-trip float formatting (`NaN`/`inf` spelled out).
fn format_float(v: f64) -> String {
    format!("{v}")
}

/// One percentile band entry: the 2.5 / 50 / 97.5 percentiles of a metric
/// across runs at one iteration (or one sweep point).
#[derive(Clone, Debug, Serialize)]
pub struct BandPoint {
    /// Iteration for train experiments, grid index for sweeps.
    pub at: usize,
    /// Sweep value when the band is indexed by a grid (`None` for train).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// Number of (unflagged) runs the band is computed over.
    pub n: usize,
    pub p2_5: f64,
    pub p50: f64,
    pub p97_5: f64,
}

/// Percentile with linear interpolation on the sorted sample, `q` in [0,1].
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q * (n as f64 - 1.0);
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let frac = pos - lo as f64;
            sorted[lo] + (sorted[hi] - sorted[lo]) * frac
        }
    }
}

/// Builds a band point from raw per-run values, dropping non-finite entries.
pub fn band_from_values(at: usize, value: Option<f64>, values: &[f64]) -> BandPoint {
    let mut finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    finite.sort_by(|a, b| a.partial_cmp(b).expect("finite values compare"));
    BandPoint {
        at,
        value,
        n: finite.len(),
        p2_5: percentile(&finite, 0.025),
        p50: percentile(&finite, 0.5),
        p97_5: percentile(&finite, 0.975),
    }
}

/// Final state of one run, echoed in the summary for convenience.
#[derive(Clone, Debug, Serialize)]
pub struct RunFinal {
    pub run: usize,
    pub metrics: BTreeMap<String, f64>,
    pub flagged: bool,
}

/// The JSON summary written next to the row file.
#[derive(Debug, Serialize)]
pub struct Summary {
    /// Full config echo: the provenance of every number below.
    pub config: ExperimentConfig,
    /// Runs that produced a non-finite value (they are excluded from bands
    /// but still present in the row file).
    pub flagged_runs: Vec<usize>,
    /// Per-iteration percentile bands across runs, keyed by metric.
    pub bands: BTreeMap<String, Vec<BandPoint>>,
    /// Final recorded metrics per run.
    pub finals: Vec<RunFinal>,
}

/// Assembles the summary from collected rows.
///
/// A run is flagged as soon as any of its values is non-finite (or when the
/// runner already knows it diverged, via `forced_flags`); flagged runs are
/// excluded from every band but keep their rows and their entry in `finals`.
/// For sweep experiments `sweep_values[i]` labels grid index `i`.
pub fn summarize(
    config: &ExperimentConfig,
    rows: &[ResultRow],
    n_runs: usize,
    sweep_values: Option<&[f64]>,
    forced_flags: &[usize],
) -> Summary {
    let flagged: Vec<usize> = (0..n_runs)
        .filter(|run| {
            forced_flags.contains(run)
                || rows
                    .iter()
                    .any(|r| r.run == *run && !r.value.is_finite())
        })
        .collect();

    // metric -> iteration (or grid index) -> per-run values
    let mut grouped: BTreeMap<String, BTreeMap<usize, Vec<f64>>> = BTreeMap::new();
    for row in rows {
        if flagged.contains(&row.run) {
            continue;
        }
        grouped
            .entry(row.metric.clone())
            .or_default()
            .entry(row.iteration)
            .or_default()
            .push(row.value);
    }
    let bands = grouped
        .into_iter()
        .map(|(metric, per_at)| {
            let band = per_at
                .into_iter()
                .map(|(at, values)| {
                    let label = sweep_values.and_then(|s| s.get(at)).copied();
                    band_from_values(at, label, &values)
                })
                .collect();
            (metric, band)
        })
        .collect();

    let mut finals = Vec::with_capacity(n_runs);
    for run in 0..n_runs {
        let mut metrics = BTreeMap::new();
        for row in rows.iter().filter(|r| r.run == run) {
            // Later rows overwrite earlier ones, leaving the final value.
            metrics.insert(row.metric.clone(), row.value);
        }
        finals.push(RunFinal {
            run,
            metrics,
            flagged: flagged.contains(&run),
        });
    }

    Summary {
        config: config.clone(),
        flagged_runs: flagged,
        bands,
        finals,
    }
}

/// Writes any serializable report as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).context("cannot serialize report")?;
    fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}
