//! Exact risk formulas versus Monte-Carlo estimates.
//!
//! Evaluates the noise-free enumeration form, the general Gaussian closed
//! form at an off-manifold head pair, and the matching empirical risks.
//!
//! ```bash
//! cargo run --release -p attnclust --example closed_form_vs_monte_carlo
//! ```

use attnclust::attention::{HeadBank, PredictorKind};
use attnclust::mixtures::MixtureSpec;
use attnclust::risk::{
    canonical_star_pair, closed_form_risk_gaussian_general, empirical_risk, exact_risk_dirac,
    lambda_star_degenerate, reparam, EmpiricalPredictor, ReparamCoords,
};
use attnclust::rng::SeedStream;
use ndarray::Array1;

fn main() -> attnclust::Result<()> {
    let l = 30;
    let lambda = lambda_star_degenerate(l)?;

    // Perfect alignment under the noise-free model.
    let corner = ReparamCoords::degenerate(1.0, -1.0, 0.0, 0.0)?;
    println!(
        "dirac risk at a corner, L = {l}: {:.6} (formula 1 - (L+1)^2 / (L(L+3)))",
        exact_risk_dirac(&corner, lambda, l)?
    );

    // An arbitrary unit pair in d = 5, evaluated off the manifold.
    let stars = canonical_star_pair(5)?;
    let mut mu0: Array1<f64> = Array1::from(vec![0.6, 0.0, 0.3, 0.0, 0.0]);
    let mut mu1: Array1<f64> = Array1::from(vec![-0.2, 0.5, 0.0, 0.4, 0.1]);
    mu0 /= mu0.dot(&mu0).sqrt();
    mu1 /= mu1.dot(&mu1).sqrt();
    let coords = reparam(mu0.view(), mu1.view(), stars.row(0), stars.row(1))?;
    println!(
        "coordinates: kappa = ({:+.3}, {:+.3}), eta = ({:+.3}, {:+.3}), xi = {:+.3}",
        coords.kappa0, coords.kappa1, coords.eta0, coords.eta1, coords.xi
    );

    let sigma = 0.5;
    let closed = closed_form_risk_gaussian_general(
        mu0.view(),
        mu1.view(),
        stars.row(0),
        stars.row(1),
        sigma,
        l,
        lambda,
    )?;

    let mut heads = ndarray::Array2::zeros((2, 5));
    heads.row_mut(0).assign(&mu0);
    heads.row_mut(1).assign(&mu1);
    let bank = HeadBank::new(heads, lambda)?;
    let spec = MixtureSpec::gaussian(stars, sigma)?;
    let mc = empirical_risk(
        &EmpiricalPredictor::Bank {
            kind: PredictorKind::LinearMultiHead,
            bank: &bank,
        },
        &spec,
        l,
        200_000,
        &SeedStream::from_seed(11),
    )?;
    println!("gaussian risk, sigma = {sigma}:");
    println!("  closed form   {closed:.5}");
    println!(
        "  monte carlo   {:.5} +/- {:.5}  ({} samples)",
        mc.mean, mc.se, mc.n
    );
    Ok(())
}
