//! The Gaussian moment identities and the product moments behind the exact
//! risk assembly, cross-checked against direct Monte-Carlo averages.
//!
//! ```bash
//! cargo run --release -p attnclust --example moment_toolkit
//! ```

use attnclust::moments::{isserlis_identity, monte_carlo_mean, p0, MomentContext};
use attnclust::rng::SeedStream;
use ndarray::Array1;
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(dim: usize, sigma: f64, rng: &mut impl Rng) -> Array1<f64> {
    Array1::from_iter((0..dim).map(|_| {
        let z: f64 = rng.sample(StandardNormal);
        sigma * z
    }))
}

fn main() -> attnclust::Result<()> {
    let (sigma, dim) = (0.7, 6);
    let mut setup = SeedStream::from_seed(3).rng();
    let mut a = gaussian(dim, 1.0, &mut setup);
    a /= a.dot(&a).sqrt();
    let mut b = gaussian(dim, 1.0, &mut setup);
    b /= b.dot(&b).sqrt();

    // Identity 5: E <a,G>^2 <b,G>^2 for G ~ N(0, sigma^2 I).
    let ctx = MomentContext::new(sigma, dim).with_a(a.view()).with_b(b.view());
    let closed = isserlis_identity(5, &ctx)?;
    let (av, bv) = (a.clone(), b.clone());
    let mc = monte_carlo_mean(400_000, &SeedStream::from_seed(9), move |rng| {
        let g = gaussian(dim, sigma, rng);
        let (x, y) = (av.dot(&g), bv.dot(&g));
        x * x * y * y
    });
    println!("identity 5:  closed {closed:.6}  mc {:.6} +/- {:.6}", mc.mean, mc.se);

    // p0: the sixth-order alignment moment around a unit mean,
    // E <X,a>^2 <X,b>^2 |X|^2.
    let star = {
        let mut v = Array1::zeros(dim);
        v[0] = 1.0;
        v
    };
    let closed = p0(a.view(), b.view(), star.view(), sigma, dim)?;
    let (av, bv, sv) = (a.clone(), b.clone(), star.clone());
    let mc = monte_carlo_mean(400_000, &SeedStream::from_seed(10), move |rng| {
        let x = &sv + &gaussian(dim, sigma, rng);
        let (p, q) = (av.dot(&x), bv.dot(&x));
        p * p * q * q * x.dot(&x)
    });
    println!("p0:          closed {closed:.6}  mc {:.6} +/- {:.6}", mc.mean, mc.se);
    Ok(())
}
