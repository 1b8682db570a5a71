//! Forward passes of the four predictors on one small sequence: a single
//! linear head, the two-head linear predictor, the shaped softmax pair, and
//! the Gram (in-context) predictor.
//!
//! ```bash
//! cargo run --release -p attnclust --example forward_passes
//! ```

use attnclust::attention::{
    ctx_forward, linear_head_forward, linear_predictor_forward, shaped_softmax_predictor_forward,
    softmax_attention_matrix, HeadBank,
};
use attnclust::mixtures::MixtureSpec;
use attnclust::risk::canonical_star_pair;
use attnclust::rng::SeedStream;

fn main() -> attnclust::Result<()> {
    let stars = canonical_star_pair(4)?;
    let spec = MixtureSpec::gaussian(stars.clone(), 0.2)?;
    let mut rng = SeedStream::from_seed(2).rng();
    let seq = spec.sample_with(6, &mut rng)?;
    let tokens = seq.tokens.view();

    println!("labels: {:?}", seq.labels);

    // One linear head aligned with the first centroid.
    let single = linear_head_forward(tokens, stars.row(0), 0.8)?;
    println!("single linear head, first output {:.3}", single.row(0));

    // Both heads at once: the spec's two-head linear transformer.
    let bank = HeadBank::new(stars.clone(), 0.8)?;
    let linear = linear_predictor_forward(&bank, tokens)?;
    println!("two-head linear,   first output {:.3}", linear.row(0));

    // Softmax attention concentrates on the tokens aligned with the head.
    let attn = softmax_attention_matrix(tokens, stars.row(0), 3.0)?;
    println!("softmax attention row sums {:.3}", attn.sum_axis(ndarray::Axis(1)));
    println!("attention from token 0: {:.3}", attn.row(0));

    // The shaped pair subtracts psi times the sequence mean.
    let soft_bank = HeadBank::with_psi(stars.clone(), 3.0, 1.0)?;
    let shaped = shaped_softmax_predictor_forward(&soft_bank, tokens)?;
    println!("shaped softmax,    first output {:.3}", shaped.row(0));

    // The Gram predictor needs no learned parameters at all.
    let ctx = ctx_forward(tokens, 0.5)?;
    println!("gram predictor,    first output {:.3}", ctx.row(0));
    Ok(())
}
