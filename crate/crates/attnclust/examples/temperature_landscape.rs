//! Optimal-temperature calculators and the risk-versus-temperature profile
//! at perfect alignment.
//!
//! ```bash
//! cargo run --release -p attnclust --example temperature_landscape
//! ```

use attnclust::risk::{
    closed_form_risk_gaussian_manifold, lambda_star, lambda_star_degenerate, lambda_star_infinite,
};

fn main() -> attnclust::Result<()> {
    // Noise-free: the closed form (L+1)/(L+3).
    println!("noise-free corner temperature:");
    for l in [2, 10, 30, 100] {
        println!("  L = {l:3}: lambda* = {:.6}", lambda_star_degenerate(l)?);
    }

    // With noise the optimum shifts down; long sequences forget L.
    println!("gaussian, d = 5:");
    for sigma in [0.1, 0.3, 1.0] {
        let finite = lambda_star(sigma, 5, 30)?;
        let infinite = lambda_star_infinite(sigma)?;
        println!("  sigma = {sigma}: lambda*(L=30) = {finite:.4}, L->inf limit = {infinite:.4}");
    }

    // Sweep the corner risk in the temperature around its minimum.
    let (sigma, dim, l) = (0.3, 5, 30);
    let star = lambda_star(sigma, dim, l)?;
    println!("corner risk profile, sigma = {sigma}:");
    for step in -3i32..=3 {
        let lam = star * (1.0 + 0.2 * f64::from(step));
        let risk = closed_form_risk_gaussian_manifold(1.0, -1.0, sigma, dim, l, lam)?;
        let mark = if step == 0 { " <- lambda*" } else { "" };
        println!("  lambda = {lam:.4}: risk = {risk:.5}{mark}");
    }
    Ok(())
}
