//! Sampling from the three mixture models and measuring cluster
//! interference.
//!
//! ```bash
//! cargo run --release -p attnclust --example mixture_sampling
//! ```

use attnclust::mixtures::{interference, MixtureSpec};
use attnclust::risk::canonical_star_pair;
use attnclust::rng::SeedStream;

fn main() -> attnclust::Result<()> {
    let mut rng = SeedStream::from_seed(7).rng();
    let stars = canonical_star_pair(5)?;

    // Noise-free: every token sits exactly on a centroid.
    let dirac = MixtureSpec::dirac(stars.clone())?;
    let seq = dirac.sample_with(12, &mut rng)?;
    println!("dirac sample, L = {}:", seq.len());
    for (row, label) in seq.tokens.rows().into_iter().zip(&seq.labels) {
        println!("  cluster {label}  {row:.2}");
    }

    // Gaussian components around the same centroids.
    for sigma in [0.3, 1.0] {
        let spec = MixtureSpec::gaussian(stars.clone(), sigma)?;
        let seq = spec.sample_with(2000, &mut rng)?;
        let share = seq.labels.iter().filter(|&&c| c == 0).count() as f64 / 2000.0;
        println!(
            "gaussian sigma = {sigma}: cluster-0 share {share:.3}, \
             interference P(cross-misassignment) = {:.4}",
            interference(sigma)?
        );
    }

    // In-context model: the second centroid is redrawn per sequence.
    let ctx = MixtureSpec::in_context(8, 0.3)?;
    let seq = ctx.sample_with(6, &mut rng)?;
    println!(
        "in-context sample: dim {}, first token {:.2}",
        ctx.dim(),
        seq.tokens.row(0)
    );
    Ok(())
}
