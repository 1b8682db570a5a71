//! Training the shaped softmax pair: heads on the sphere, temperature and
//! centering weight trained jointly by plain gradient steps.
//!
//! Uses a trimmed iteration budget so the example finishes quickly; the
//! distance keeps shrinking if you let it run longer.
//!
//! ```bash
//! cargo run --release -p attnclust --example shaped_softmax_training
//! ```

use attnclust::mixtures::MixtureSpec;
use attnclust::optimize::{psgd_soft_run, OptimizerConfig};
use attnclust::risk::canonical_star_pair;
use attnclust::rng::SeedStream;

fn main() -> attnclust::Result<()> {
    let stars = canonical_star_pair(5)?;
    let spec = MixtureSpec::gaussian(stars, 0.3)?;
    let config = OptimizerConfig {
        iterations: 3000,
        record_every: 500,
        ..OptimizerConfig::shaped_softmax_defaults()
    };

    let trace = psgd_soft_run(&spec, 30, &config, &SeedStream::from_seed(601))?;
    println!("signed distance to the centroids (no sign-flip forgiveness):");
    for rec in &trace.records {
        if rec.iteration % 500 == 0 {
            println!(
                "  it {:4}  distance {:.4}  lambda {:.3}  psi {:.3}",
                rec.iteration, rec.dist_signed, rec.lambda, rec.psi
            );
        }
    }
    println!(
        "final heads:\n{:.4}\ndiverged: {}",
        trace.final_heads, trace.diverged
    );
    Ok(())
}
