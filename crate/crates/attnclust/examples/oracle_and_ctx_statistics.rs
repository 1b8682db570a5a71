//! Statistics of the oracle-head predictor and of the parameter-free Gram
//! predictor: conditional-mean factors, unbiasing temperatures, and risk
//! limits, with Monte-Carlo cross-checks.
//!
//! ```bash
//! cargo run --release -p attnclust --example oracle_and_ctx_statistics
//! ```

use attnclust::risk::{
    canonical_star_pair, ctx_mc_mean_factor, ctx_statistics, oracle_asymptotics,
    oracle_finite_l_risk, oracle_mc_conditional_mean, oracle_mean_factor,
    oracle_unbiasing_lambda,
};
use attnclust::rng::SeedStream;

fn main() -> attnclust::Result<()> {
    let (sigma, dim, l) = (0.3, 5, 30);

    // Oracle heads: the conditional mean is the centroid times a scalar.
    let stars = canonical_star_pair(dim)?;
    let lam = oracle_unbiasing_lambda(sigma, l)?;
    println!("oracle predictor, sigma = {sigma}, L = {l}:");
    println!("  unbiasing lambda       {lam:.5}");
    println!("  factor at that lambda  {:.5}", oracle_mean_factor(sigma, l, lam)?);
    let mc = oracle_mc_conditional_mean(
        stars.view(),
        sigma,
        l,
        lam,
        0,
        100_000,
        &SeedStream::from_seed(5),
    )?;
    let along = mc.mean.dot(&stars.row(0));
    let worst_se = mc.se.iter().cloned().fold(0.0, f64::max);
    println!("  monte-carlo factor     {along:.5} (max coordinate se {worst_se:.5})");
    println!(
        "  finite-L risk          {:.5}",
        oracle_finite_l_risk(sigma, dim, l, lam)?
    );
    let asym = oracle_asymptotics(sigma, dim, lam)?;
    println!(
        "  long-L risk / variance {:.5} / {:.5}",
        asym.risk_limit, asym.variance_limit
    );

    // Gram predictor: everything depends only on (sigma, d, L, lambda).
    let (dim, l) = (10, 500);
    let stats = ctx_statistics(sigma, dim, l, 0.5)?;
    println!("gram predictor, sigma = {sigma}, d = {dim}, L = {l}, lambda = 0.5:");
    println!("  mean factor            {:.5}", stats.mean_factor);
    println!("  unbiasing lambda       {:.5}", stats.unbiasing_lambda);
    println!("  optimal lambda         {:.5}", stats.optimal_lambda);
    println!("  asymptotic risk        {:.5}", stats.asymptotic_risk);
    println!("  asymptotic variance    {:.5}", stats.asymptotic_variance);
    let mc = ctx_mc_mean_factor(sigma, dim, l, 0.5, 50_000, &SeedStream::from_seed(6))?;
    println!(
        "  monte-carlo factor     {:.5} +/- {:.5}",
        mc.mean, mc.se
    );
    Ok(())
}
