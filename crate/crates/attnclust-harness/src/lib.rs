//! Experiment harness around the `attnclust` library: config-driven runs of
//! the training, verification, sweep, embedding, and catalog commands, with
//! CSV row output and JSON summaries carrying percentile bands.
//!
//! Everything the `attnclust` binary does is reachable through this library,
//! so integration tests drive the same code paths as the CLI.

pub mod config;
pub mod embed;
pub mod presets;
pub mod report;
pub mod runner;
pub mod stats;
pub mod verify;

/// Environment variable capping the number of worker threads used for
/// concurrent runs. Unset or unparsable values fall back to the rayon
/// default.
pub const WORKERS_ENV: &str = "ATTNCLUST_WORKERS";

/// Builds the rayon pool the harness executes runs on, honoring
/// [`WORKERS_ENV`]. Results never depend on the pool size — only wall time
/// does.
pub fn worker_pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(raw) = std::env::var(WORKERS_ENV) {
        if let Ok(n) = raw.trim().parse::<usize>() {
            if n > 0 {
                builder = builder.num_threads(n);
            }
        }
    }
    Ok(builder.build()?)
}
