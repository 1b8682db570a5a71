//! The critical-point families of the noise-free risk at the corner
//! temperature: the origin, the one-head circles, the interference circles,
//! and the global-minimum circles, with their shared risk levels.
//!
//! ```bash
//! cargo run --release -p attnclust --example critical_points_catalog
//! ```

use attnclust::risk::{critical_points_dirac, exact_risk_dirac_grad, ReparamCoords};

fn grad_norm(c: &ReparamCoords, lambda: f64, l: usize) -> f64 {
    let g = exact_risk_dirac_grad(c, lambda, l).unwrap();
    g.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn main() -> attnclust::Result<()> {
    let l = 30;
    let cat = critical_points_dirac(l)?;
    println!("L = {l}, lambda* = {:.6}", cat.lambda);
    println!(
        "interference-circle radius^2 = {:.6} (= (L+3)/(2(L+1)))",
        cat.circle_radius_sq
    );

    let families: [(&str, &[ReparamCoords], f64); 4] = [
        ("origin (local max)", std::slice::from_ref(&cat.local_max), cat.risk_local_max),
        ("one-head circles", &cat.axis_saddles, cat.risk_axis_saddle),
        ("interference circles", &cat.circle_saddles, cat.risk_circle_saddle),
        ("global minima", &cat.minima, cat.risk_minimum),
    ];
    for (name, members, risk) in families {
        let worst = members
            .iter()
            .map(|c| grad_norm(c, cat.lambda, l))
            .fold(0.0, f64::max);
        println!(
            "{name:22} risk = {risk:.6}  members = {:2}  max |grad| = {worst:.2e}",
            members.len()
        );
    }
    println!("ordering: max > one-head > interference > minima");
    Ok(())
}
