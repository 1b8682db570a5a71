//! Monte-Carlo oracles for the moment layer: every Isserlis identity and
//! every p-polynomial is re-estimated here from raw Gaussian draws and
//! compared at 4 standard errors, alongside the exact degenerate reductions.

use attnclust::moments::{
    isserlis_identity, monte_carlo_mean, p0, p1, p2, p2_0, p3, p3_0, MomentContext,
};
use attnclust::rng::SeedStream;
use ndarray::Array1;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_unit(dim: usize, rng: &mut impl Rng) -> Array1<f64> {
    loop {
        let v = Array1::<f64>::from_iter((0..dim).map(|_| StandardNormal.sample(rng)));
        let norm = v.dot(&v).sqrt();
        if norm > 1e-6 {
            return v / norm;
        }
    }
}

fn random_vec(dim: usize, rng: &mut impl Rng) -> Array1<f64> {
    Array1::from_iter((0..dim).map(|_| {
        let g: f64 = StandardNormal.sample(rng);
        g
    }))
}

/// Two orthonormal star vectors plus two unconstrained direction vectors.
fn config(dim: usize, seed: u64) -> (Array1<f64>, Array1<f64>, Array1<f64>, Array1<f64>) {
    let mut rng = SeedStream::from_seed(seed).rng();
    let s1 = random_unit(dim, &mut rng);
    let mut s2 = random_unit(dim, &mut rng);
    s2.scaled_add(-s2.dot(&s1), &s1);
    let norm = s2.dot(&s2).sqrt();
    s2 /= norm;
    let a = random_vec(dim, &mut rng);
    let b = random_vec(dim, &mut rng);
    (a, b, s1, s2)
}

fn draw_token(star: &Array1<f64>, sigma: f64, rng: &mut impl Rng) -> Array1<f64> {
    let mut x = star.clone();
    for v in x.iter_mut() {
        let g: f64 = StandardNormal.sample(rng);
        *v += sigma * g;
    }
    x
}

fn assert_mc(closed: f64, mean: f64, se: f64, what: &str) {
    // A zero-variance statistic (sigma = 0) collapses to exact equality.
    let tol = if se > 0.0 { 4.0 * se } else { 1e-12 };
    assert!(
        (closed - mean).abs() <= tol,
        "{what}: closed {closed}, mc {mean}, se {se}"
    );
}

#[test]
fn isserlis_point_values() {
    let ctx = MomentContext::new(1.0, 5);
    assert_eq!(isserlis_identity(1, &ctx).unwrap(), 5.0);

    let mut rng = SeedStream::from_seed(1).rng();
    let a = random_unit(4, &mut rng);
    let mut b = random_unit(4, &mut rng);
    b.scaled_add(-b.dot(&a), &a);
    let norm = b.dot(&b).sqrt();
    b /= norm;
    let ctx = MomentContext::new(0.9, 4).with_a(a.view()).with_b(b.view());
    assert!(isserlis_identity(4, &ctx).unwrap().abs() <= 1e-12);

    let v = random_unit(6, &mut rng);
    let ctx = MomentContext::new(0.5, 6).with_a(v.view()).with_b(v.view());
    assert!((isserlis_identity(5, &ctx).unwrap() - 0.1875).abs() <= 1e-15);

    // A missing vector is an argument error, not a panic.
    assert!(isserlis_identity(6, &MomentContext::new(1.0, 3)).is_err());
    assert!(isserlis_identity(9, &MomentContext::new(1.0, 3)).is_err());
}

#[test]
fn isserlis_identities_match_direct_sampling() {
    let n = 400_000;
    for &(dim, sigma, seed) in &[(4usize, 0.7, 2u64), (7, 1.3, 3)] {
        let (a, b, c, _) = config(dim, seed);
        let ctx = MomentContext::new(sigma, dim)
            .with_a(a.view())
            .with_b(b.view())
            .with_c(c.view());
        for id in 1..=8u8 {
            let closed = isserlis_identity(id, &ctx).unwrap();
            let (aa, bb, cc) = (a.clone(), b.clone(), c.clone());
            let est = monte_carlo_mean(n, &SeedStream::from_seed(seed * 100 + id as u64), |rng| {
                let g = &random_vec(dim, rng) * sigma;
                let (ga, gb, gc) = (g.dot(&aa), g.dot(&bb), g.dot(&cc));
                let g2 = g.dot(&g);
                match id {
                    1 => g2,
                    2 => ga,
                    // E[<a,G> G] = sigma^2 a; projecting on a isolates the
                    // scalar: <a,G>^2 / |a|^2 has mean sigma^2.
                    3 => ga * ga / aa.dot(&aa),
                    4 => ga * gb,
                    5 => ga * ga * gb * gb,
                    6 => ga * gb * gb * gc,
                    7 => ga * gb * g2,
                    8 => ga * ga * gb * gb * g2,
                    _ => unreachable!(),
                }
            });
            assert_mc(closed, est.mean, est.se, &format!("identity {id} (d={dim})"));
        }
    }
}

#[test]
fn p0_degenerate_and_zero_cases() {
    let mut rng = SeedStream::from_seed(4).rng();
    let v = random_unit(5, &mut rng);
    // sigma = 0, all three vectors equal: every inner product is 1.
    let val = p0(v.view(), v.view(), v.view(), 0.0, 5).unwrap();
    assert!((val - 1.0).abs() <= 1e-12);
    // A zero direction annihilates the polynomial.
    let zero = Array1::<f64>::zeros(5);
    let val = p0(zero.view(), v.view(), v.view(), 0.8, 5).unwrap();
    assert!(val.abs() <= 1e-15);
    // Non-unit star is a domain error.
    let stretched = &v * 1.5;
    assert!(p0(v.view(), v.view(), stretched.view(), 0.3, 5).is_err());
}

#[test]
fn p0_matches_its_defining_expectation() {
    // E <X,a>^2 <X,b>^2 |X|^2 with X ~ N(mu*, sigma^2 I).
    for &(dim, sigma, seed) in &[(5usize, 0.3, 10u64), (4, 1.0, 11)] {
        let (a, b, s, _) = config(dim, seed);
        let closed = p0(a.view(), b.view(), s.view(), sigma, dim).unwrap();
        let est = monte_carlo_mean(300_000, &SeedStream::from_seed(seed + 50), |rng| {
            let x = draw_token(&s, sigma, rng);
            let (xa, xb) = (x.dot(&a), x.dot(&b));
            xa * xa * xb * xb * x.dot(&x)
        });
        assert_mc(closed, est.mean, est.se, &format!("p0 (d={dim}, s={sigma})"));
    }
    // The spec's aligned/orthogonal split at sigma = 0.3.
    let mut rng = SeedStream::from_seed(12).rng();
    let s = random_unit(5, &mut rng);
    let mut perp = random_unit(5, &mut rng);
    perp.scaled_add(-perp.dot(&s), &s);
    let norm = perp.dot(&perp).sqrt();
    perp /= norm;
    let closed = p0(s.view(), perp.view(), s.view(), 0.3, 5).unwrap();
    let (sc, pc) = (s.clone(), perp.clone());
    let est = monte_carlo_mean(300_000, &SeedStream::from_seed(77), |rng| {
        let x = draw_token(&sc, 0.3, rng);
        let (xa, xb) = (x.dot(&sc), x.dot(&pc));
        xa * xa * xb * xb * x.dot(&x)
    });
    assert_mc(closed, est.mean, est.se, "p0 aligned/orthogonal");
}

#[test]
fn p0_is_symmetric_in_its_directions() {
    let (a, b, s, _) = config(6, 21);
    let ab = p0(a.view(), b.view(), s.view(), 0.6, 6).unwrap();
    let ba = p0(b.view(), a.view(), s.view(), 0.6, 6).unwrap();
    assert!((ab - ba).abs() <= 1e-12 * ab.abs().max(1.0));
}

#[test]
fn p1_matches_its_defining_expectation() {
    // E <X1,a>^2 <X1,b> <X2,b> <X1,X2> over an independent pair.
    for &(dim, sigma, seed) in &[(4usize, 0.5, 30u64), (5, 1.0, 31)] {
        let (a, b, s1, s2) = config(dim, seed);
        let closed = p1(a.view(), b.view(), s1.view(), s2.view(), sigma, dim).unwrap();
        let est = monte_carlo_mean(400_000, &SeedStream::from_seed(seed + 5), |rng| {
            let x1 = draw_token(&s1, sigma, rng);
            let x2 = draw_token(&s2, sigma, rng);
            let xa = x1.dot(&a);
            xa * xa * x1.dot(&b) * x2.dot(&b) * x1.dot(&x2)
        });
        assert_mc(closed, est.mean, est.se, &format!("p1 (d={dim}, s={sigma})"));
    }
}

#[test]
fn p1_degenerate_cases() {
    let mut rng = SeedStream::from_seed(40).rng();
    let v = random_unit(5, &mut rng);
    let val = p1(v.view(), v.view(), v.view(), v.view(), 0.0, 5).unwrap();
    assert!((val - 1.0).abs() <= 1e-12);
    // b orthogonal to both stars and to a, sigma = 0: every monomial dies.
    let (_, _, s1, s2) = config(6, 41);
    let mut b = random_unit(6, &mut rng);
    for basis in [&s1, &s2] {
        b.scaled_add(-b.dot(basis), basis);
    }
    let norm = b.dot(&b).sqrt();
    b /= norm;
    let a = s1.clone();
    let val = p1(a.view(), b.view(), s1.view(), s2.view(), 0.0, 6).unwrap();
    assert!(val.abs() <= 1e-12);
}

#[test]
fn p2_matches_its_defining_expectation() {
    // E <X1,a><X2,a><X1,b><X2,b>|X2|^2 over an independent pair.
    for &(dim, sigma, seed) in &[(6usize, 1.0, 50u64), (3, 0.4, 51)] {
        let (a, b, s1, s2) = config(dim, seed);
        let closed = p2(a.view(), b.view(), s1.view(), s2.view(), sigma, dim).unwrap();
        let est = monte_carlo_mean(400_000, &SeedStream::from_seed(seed + 7), |rng| {
            let x1 = draw_token(&s1, sigma, rng);
            let x2 = draw_token(&s2, sigma, rng);
            x1.dot(&a) * x2.dot(&a) * x1.dot(&b) * x2.dot(&b) * x2.dot(&x2)
        });
        assert_mc(closed, est.mean, est.se, &format!("p2 (d={dim}, s={sigma})"));
    }
}

#[test]
fn p2_degenerate_cases() {
    let mut rng = SeedStream::from_seed(60).rng();
    let v = random_unit(4, &mut rng);
    let val = p2(v.view(), v.view(), v.view(), v.view(), 0.0, 4).unwrap();
    assert!((val - 1.0).abs() <= 1e-12);
    // p2_0 with a orthogonal to b and star = a: both of its terms vanish.
    let a = random_unit(4, &mut rng);
    let mut b = random_unit(4, &mut rng);
    b.scaled_add(-b.dot(&a), &a);
    let norm = b.dot(&b).sqrt();
    b /= norm;
    let val = p2_0(a.view(), b.view(), a.view(), 0.9, 4).unwrap();
    assert!(val.abs() <= 1e-12);
}

#[test]
fn p3_matches_its_defining_expectation() {
    // E <X1,a><X2,a><X1,b><X3,b><X2,X3> over an independent triple.
    for &(dim, sigma, seed) in &[(5usize, 0.3, 70u64), (4, 0.8, 71)] {
        let (a, b, s1, s2) = config(dim, seed);
        // Third star: alternate between the two mixture centroids.
        let s3 = s1.clone();
        let closed = p3(
            a.view(),
            b.view(),
            s1.view(),
            s2.view(),
            s3.view(),
            sigma,
            dim,
        )
        .unwrap();
        let est = monte_carlo_mean(400_000, &SeedStream::from_seed(seed + 9), |rng| {
            let x1 = draw_token(&s1, sigma, rng);
            let x2 = draw_token(&s2, sigma, rng);
            let x3 = draw_token(&s3, sigma, rng);
            x1.dot(&a) * x2.dot(&a) * x1.dot(&b) * x3.dot(&b) * x2.dot(&x3)
        });
        assert_mc(closed, est.mean, est.se, &format!("p3 (d={dim}, s={sigma})"));
    }
}

#[test]
fn p3_degenerate_cases() {
    let mut rng = SeedStream::from_seed(80).rng();
    let v = random_unit(5, &mut rng);
    let val = p3(v.view(), v.view(), v.view(), v.view(), v.view(), 0.0, 5).unwrap();
    assert!((val - 1.0).abs() <= 1e-12);
    // a orthogonal to the first star at sigma = 0 kills the p3_0 factor.
    let (_, b, s1, s2) = config(5, 81);
    let mut a = random_unit(5, &mut rng);
    a.scaled_add(-a.dot(&s1), &s1);
    let norm = a.dot(&a).sqrt();
    a /= norm;
    assert!(p3_0(a.view(), b.view(), s1.view(), 0.0, 5).unwrap().abs() <= 1e-12);
    let val = p3(a.view(), b.view(), s1.view(), s2.view(), s1.view(), 0.0, 5).unwrap();
    assert!(val.abs() <= 1e-12);
}

#[test]
fn sigma_zero_reduces_every_polynomial_to_inner_products() {
    let (a, b, s1, s2) = config(6, 90);
    let (sa, sb) = (s1.dot(&a), s1.dot(&b));
    let (ta, tb) = (s2.dot(&a), s2.dot(&b));
    let v = p0(a.view(), b.view(), s1.view(), 0.0, 6).unwrap();
    assert!((v - sa * sa * sb * sb).abs() <= 1e-12);
    let v = p1(a.view(), b.view(), s1.view(), s2.view(), 0.0, 6).unwrap();
    assert!((v - sa * sa * sb * tb * s1.dot(&s2)).abs() <= 1e-12);
    let v = p2(a.view(), b.view(), s1.view(), s2.view(), 0.0, 6).unwrap();
    assert!((v - sa * sb * ta * tb).abs() <= 1e-12);
    let v = p3(a.view(), b.view(), s1.view(), s2.view(), s2.view(), 0.0, 6).unwrap();
    assert!((v - sa * sb * ta * tb).abs() <= 1e-12);
}

#[test]
fn mc_estimator_covers_the_truth_across_seeds() {
    // 4-SE coverage should be near-certain; demand 19/20 trials inside.
    let (a, b, s, _) = config(5, 99);
    let closed = p0(a.view(), b.view(), s.view(), 0.5, 5).unwrap();
    let mut hits = 0;
    for trial in 0..20u64 {
        let est = monte_carlo_mean(20_000, &SeedStream::from_seed(7000 + trial), |rng| {
            let x = draw_token(&s, 0.5, rng);
            let (xa, xb) = (x.dot(&a), x.dot(&b));
            xa * xa * xb * xb * x.dot(&x)
        });
        if (est.mean - closed).abs() <= 4.0 * est.se {
            hits += 1;
        }
    }
    assert!(hits >= 19, "only {hits}/20 trials inside 4 SE");
}
