//! Gaussian moment identities and Monte-Carlo estimation.
//!
//! The closed-form risks in [`crate::risk`] reduce to expectations of
//! polynomials in inner products of Gaussian vectors. This module holds the
//! building blocks: the Isserlis-style identities for a centered Gaussian
//! `G ~ N(0, sigma^2 I_d)`, the four moment polynomials `p0..p3` for
//! mean-shifted tokens `X ~ N(mu*, sigma^2 I_d)`, and a deterministic
//! chunk-parallel Monte-Carlo estimator used by every sampling-based check.
//!
//! Probabilistic meaning of the polynomials (tokens drawn independently,
//! `X ~ N(s1, .)`, `Y ~ N(s2, .)`, `Z ~ N(s3, .)`):
//!
//! * `p0(a, b, s1)      = E <X,a>^2 <X,b>^2 |X|^2`
//! * `p1_0(a, b, s1, c) = E <X,a>^2 <X,b> <X,c>`
//! * `p1(a, b, s1, s2)  = E <X,a>^2 <X,b> <Y,b> <X,Y>`
//! * `p2(a, b, s1, s2)  = E <X,a><X,b> * E <Y,a><Y,b>|Y|^2`
//! * `p3(a, b, s1, s2, s3) = E <X,a><X,b> * E <Y,a><Z,b><Y,Z>`

use ndarray::{Array1, ArrayView1};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Unit-norm tolerance for the mean vectors of the moment polynomials.
const STAR_TOL: f64 = 1e-12;

/// Shared context for [`isserlis_identity`]: the noise law plus up to three
/// named direction vectors.
#[derive(Clone, Debug, Default)]
pub struct MomentContext<'a> {
    /// Noise scale of `G ~ N(0, sigma^2 I_d)`.
    pub sigma: f64,
    /// Ambient dimension `d`.
    pub dim: usize,
    /// First direction vector, when the identity uses one.
    pub mu_a: Option<ArrayView1<'a, f64>>,
    /// Second direction vector.
    pub mu_b: Option<ArrayView1<'a, f64>>,
    /// Third direction vector.
    pub mu_c: Option<ArrayView1<'a, f64>>,
}

impl<'a> MomentContext<'a> {
    /// Context with no direction vectors attached.
    pub fn new(sigma: f64, dim: usize) -> Self {
        Self {
            sigma,
            dim,
            mu_a: None,
            mu_b: None,
            mu_c: None,
        }
    }

    /// Attaches the first direction vector.
    pub fn with_a(mut self, v: ArrayView1<'a, f64>) -> Self {
        self.mu_a = Some(v);
        self
    }

    /// Attaches the second direction vector.
    pub fn with_b(mut self, v: ArrayView1<'a, f64>) -> Self {
        self.mu_b = Some(v);
        self
    }

    /// Attaches the third direction vector.
    pub fn with_c(mut self, v: ArrayView1<'a, f64>) -> Self {
        self.mu_c = Some(v);
        self
    }
}

/// Evaluates one of the eight catalogued Gaussian moment identities for
/// `G ~ N(0, sigma^2 I_d)` and unit-free directions `mu_a, mu_b, mu_c`:
///
/// 1. `E |G|^2                     = sigma^2 d`
/// 2. `E <mu_a, G>                 = 0`
/// 3. `E <mu_a, G> G               = sigma^2 mu_a` (returns the coefficient)
/// 4. `E <mu_a, G><mu_b, G>        = sigma^2 <mu_a, mu_b>`
/// 5. `E <mu_a, G>^2 <mu_b, G>^2   = sigma^4 (|mu_a|^2 |mu_b|^2 + 2 <mu_a, mu_b>^2)`
/// 6. `E <mu_a, G><mu_b, G>^2<mu_c, G> = sigma^4 (|mu_b|^2 <mu_a, mu_c> + 2 <mu_a, mu_b><mu_b, mu_c>)`
/// 7. `E <mu_a, G><mu_b, G> |G|^2  = sigma^4 (d + 2) <mu_a, mu_b>`
/// 8. `E <mu_a, G>^2 <mu_b, G>^2 |G|^2 = sigma^6 (d + 4)(|mu_a|^2 |mu_b|^2 + 2 <mu_a, mu_b>^2)`
///
/// Identities that reference a vector absent from the context return an
/// argument error.
pub fn isserlis_identity(id: u8, ctx: &MomentContext) -> Result<f64> {
    check_sigma(ctx.sigma)?;
    let s2 = ctx.sigma * ctx.sigma;
    let d = ctx.dim as f64;
    match id {
        1 => Ok(s2 * d),
        2 => {
            need(&ctx.mu_a, id, "mu_a", ctx.dim)?;
            Ok(0.0)
        }
        3 => {
            need(&ctx.mu_a, id, "mu_a", ctx.dim)?;
            Ok(s2)
        }
        4 => {
            let a = need(&ctx.mu_a, id, "mu_a", ctx.dim)?;
            let b = need(&ctx.mu_b, id, "mu_b", ctx.dim)?;
            Ok(s2 * a.dot(&b))
        }
        5 => {
            let a = need(&ctx.mu_a, id, "mu_a", ctx.dim)?;
            let b = need(&ctx.mu_b, id, "mu_b", ctx.dim)?;
            let ab = a.dot(&b);
            Ok(s2 * s2 * (a.dot(&a) * b.dot(&b) + 2.0 * ab * ab))
        }
        6 => {
            let a = need(&ctx.mu_a, id, "mu_a", ctx.dim)?;
            let b = need(&ctx.mu_b, id, "mu_b", ctx.dim)?;
            let c = need(&ctx.mu_c, id, "mu_c", ctx.dim)?;
            Ok(s2 * s2 * (b.dot(&b) * a.dot(&c) + 2.0 * a.dot(&b) * b.dot(&c)))
        }
        7 => {
            let a = need(&ctx.mu_a, id, "mu_a", ctx.dim)?;
            let b = need(&ctx.mu_b, id, "mu_b", ctx.dim)?;
            Ok(s2 * s2 * (d + 2.0) * a.dot(&b))
        }
        8 => {
            let a = need(&ctx.mu_a, id, "mu_a", ctx.dim)?;
            let b = need(&ctx.mu_b, id, "mu_b", ctx.dim)?;
            let ab = a.dot(&b);
            Ok(s2 * s2 * s2 * (d + 4.0) * (a.dot(&a) * b.dot(&b) + 2.0 * ab * ab))
        }
        _ => Err(Error::Argument(format!(
            "isserlis identity id must be in 1..=8, got {id}"
        ))),
    }
}

fn need<'a>(
    v: &Option<ArrayView1<'a, f64>>,
    id: u8,
    name: &str,
    dim: usize,
) -> Result<ArrayView1<'a, f64>> {
    let v = (*v).ok_or_else(|| {
        Error::Argument(format!("isserlis identity {id} needs vector {name}"))
    })?;
    if v.len() != dim {
        return Err(Error::Dimension(format!(
            "vector {name} has length {}, context dimension is {dim}",
            v.len()
        )));
    }
    Ok(v)
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!(
            "noise scale must be non-negative and finite, got {sigma}"
        )));
    }
    Ok(())
}

fn check_dims(dim: usize, vs: &[(&str, usize)]) -> Result<()> {
    for (name, len) in vs {
        if *len != dim {
            return Err(Error::Dimension(format!(
                "vector {name} has length {len}, expected {dim}"
            )));
        }
    }
    Ok(())
}

fn check_unit(name: &str, v: &ArrayView1<'_, f64>) -> Result<()> {
    let norm = v.dot(v).sqrt();
    if (norm - 1.0).abs() > STAR_TOL {
        return Err(Error::Domain(format!(
            "mean vector {name} has norm {norm}, expected unit norm within {STAR_TOL:e}"
        )));
    }
    Ok(())
}

// --- product-level kernels -------------------------------------------------
//
// The closed-form risk assembly evaluates the same polynomials directly on
// inner products (so it can extend them off the realizable set); the public
// vector functions below compute the products and delegate here.

pub(crate) fn p0_kernel(
    naa: f64,
    nbb: f64,
    nab: f64,
    sa: f64,
    sb: f64,
    sigma: f64,
    d: f64,
) -> f64 {
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    let s6 = s4 * s2;
    sa * sa * sb * sb
        + s2 * (sb * sb * naa + 4.0 * sa * sb * nab + sa * sa * nbb)
        + s2 * (d + 8.0) * sa * sa * sb * sb
        + s4 * (naa * nbb + 2.0 * nab * nab + (d + 6.0) * (naa * sb * sb + nbb * sa * sa))
        + 4.0 * s4 * (d + 6.0) * sa * sb * nab
        + s6 * (d + 4.0) * (naa * nbb + 2.0 * nab * nab)
}

pub(crate) fn p1_0_kernel(
    naa: f64,
    nab: f64,
    nac: f64,
    nbc: f64,
    sa: f64,
    sb: f64,
    sc: f64,
    sigma: f64,
) -> f64 {
    let s2 = sigma * sigma;
    let s4 = s2 * s2;
    sa * sa * sb * sc
        + s2 * (naa * sb * sc + 2.0 * sa * (sc * nab + sb * nac))
        + s2 * sa * sa * nbc
        + s4 * (naa * nbc + 2.0 * nab * nac)
}

pub(crate) fn p2_0_kernel(s1a: f64, s1b: f64, nab: f64, sigma: f64) -> f64 {
    s1a * s1b + sigma * sigma * nab
}

pub(crate) fn p2_1_kernel(s2a: f64, s2b: f64, nab: f64, sigma: f64, d: f64) -> f64 {
    let s2 = sigma * sigma;
    s2a * s2b + s2 * ((d + 4.0) * s2a * s2b + nab) + s2 * s2 * (d + 2.0) * nab
}

pub(crate) fn p3_1_kernel(
    s2a: f64,
    s2b: f64,
    s3a: f64,
    s3b: f64,
    s23: f64,
    nab: f64,
    sigma: f64,
) -> f64 {
    let s2 = sigma * sigma;
    s2a * s3b * s23 + s2 * (s2a * s2b + s3a * s3b) + s2 * s2 * nab
}

// --- public moment polynomials ---------------------------------------------

/// `E <X,a>^2 <X,b>^2 |X|^2` for `X ~ N(mu_star, sigma^2 I_d)` with unit
/// `mu_star`. At `sigma = 0` this collapses to `<s,a>^2 <s,b>^2`.
pub fn p0(
    mu_a: ArrayView1<'_, f64>,
    mu_b: ArrayView1<'_, f64>,
    mu_star: ArrayView1<'_, f64>,
    sigma: f64,
    dim: usize,
) -> Result<f64> {
    check_sigma(sigma)?;
    check_dims(
        dim,
        &[
            ("mu_a", mu_a.len()),
            ("mu_b", mu_b.len()),
            ("mu_star", mu_star.len()),
        ],
    )?;
    check_unit("mu_star", &mu_star)?;
    Ok(p0_kernel(
        mu_a.dot(&mu_a),
        mu_b.dot(&mu_b),
        mu_a.dot(&mu_b),
        mu_star.dot(&mu_a),
        mu_star.dot(&mu_b),
        sigma,
        dim as f64,
    ))
}

/// `E <X,a>^2 <X,b> <X,c>` for `X ~ N(mu_star, sigma^2 I_d)` with unit
/// `mu_star`. Dimension-free; `dim` is only used to validate shapes.
pub fn p1_0(
    mu_a: ArrayView1<'_, f64>,
    mu_b: ArrayView1<'_, f64>,
    mu_star: ArrayView1<'_, f64>,
    mu_c: ArrayView1<'_, f64>,
    sigma: f64,
    dim: usize,
) -> Result<f64> {
    check_sigma(sigma)?;
    check_dims(
        dim,
        &[
            ("mu_a", mu_a.len()),
            ("mu_b", mu_b.len()),
            ("mu_star", mu_star.len()),
            ("mu_c", mu_c.len()),
        ],
    )?;
    check_unit("mu_star", &mu_star)?;
    Ok(p1_0_kernel(
        mu_a.dot(&mu_a),
        mu_a.dot(&mu_b),
        mu_a.dot(&mu_c),
        mu_b.dot(&mu_c),
        mu_star.dot(&mu_a),
        mu_star.dot(&mu_b),
        mu_star.dot(&mu_c),
        sigma,
    ))
}

/// `E <X,a>^2 <X,b> <Y,b> <X,Y>` for independent `X ~ N(mu_star1, .)` and
/// `Y ~ N(mu_star2, .)`: integrating `Y` out gives
/// `<mu_star2, b> * p1_0(a, b, mu_star1, mu_star2) + sigma^2 * p1_0(a, b, mu_star1, b)`.
/// Dimension-free; `dim` is only used to validate shapes.
pub fn p1(
    mu_a: ArrayView1<'_, f64>,
    mu_b: ArrayView1<'_, f64>,
    mu_star1: ArrayView1<'_, f64>,
    mu_star2: ArrayView1<'_, f64>,
    sigma: f64,
    dim: usize,
) -> Result<f64> {
    check_unit("mu_star2", &mu_star2)?;
    let lead = mu_star2.dot(&mu_b) * p1_0(mu_a, mu_b, mu_star1, mu_star2, sigma, dim)?;
    let noise = sigma * sigma * p1_0(mu_a, mu_b, mu_star1, mu_b, sigma, dim)?;
    Ok(lead + noise)
}

/// First factor of [`p2`]: `E <X,a><X,b> = <s1,a><s1,b> + sigma^2 <a,b>`.
pub fn p2_0(
    mu_a: ArrayView1<'_, f64>,
    mu_b: ArrayView1<'_, f64>,
    mu_star: ArrayView1<'_, f64>,
    sigma: f64,
    dim: usize,
) -> Result<f64> {
    check_sigma(sigma)?;
    check_dims(
        dim,
        &[
            ("mu_a", mu_a.len()),
            ("mu_b", mu_b.len()),
            ("mu_star", mu_star.len()),
        ],
    )?;
    check_unit("mu_star", &mu_star)?;
    Ok(p2_0_kernel(
        mu_star.dot(&mu_a),
        mu_star.dot(&mu_b),
        mu_a.dot(&mu_b),
        sigma,
    ))
}

/// Second factor of [`p2`]: `E <Y,a><Y,b>|Y|^2` for `Y ~ N(mu_star, .)`,
/// i.e. the mean-shifted second-moment identity with the `|Y|^2` weight.
pub fn p2_1(
    mu_a: ArrayView1<'_, f64>,
    mu_b: ArrayView1<'_, f64>,
    mu_star: ArrayView1<'_, f64>,
    sigma: f64,
    dim: usize,
) -> Result<f64> {
    check_sigma(sigma)?;
    check_dims(
        dim,
        &[
            ("mu_a", mu_a.len()),
            ("mu_b", mu_b.len()),
            ("mu_star", mu_star.len()),
        ],
    )?;
    check_unit("mu_star", &mu_star)?;
    Ok(p2_1_kernel(
        mu_star.dot(&mu_a),
        mu_star.dot(&mu_b),
        mu_a.dot(&mu_b),
        sigma,
        dim as f64,
    ))
}

/// `p2 = p2_0(a, b, s1) * p2_1(a, b, s2)` — the factorized cross moment
/// `E <X,a><X,b> * E <Y,a><Y,b>|Y|^2` for independent `X ~ N(s1)`, `Y ~ N(s2)`.
pub fn p2(
    mu_a: ArrayView1<'_, f64>,
    mu_b: ArrayView1<'_, f64>,
    mu_star1: ArrayView1<'_, f64>,
    mu_star2: ArrayView1<'_, f64>,
    sigma: f64,
    dim: usize,
) -> Result<f64> {
    Ok(p2_0(mu_a, mu_b, mu_star1, sigma, dim)? * p2_1(mu_a, mu_b, mu_star2, sigma, dim)?)
}

/// First factor of [`p3`]; identical in form to [`p2_0`].
pub fn p3_0(
    mu_a: ArrayView1<'_, f64>,
    mu_b: ArrayView1<'_, f64>,
    mu_star: ArrayView1<'_, f64>,
    sigma: f64,
    dim: usize,
) -> Result<f64> {
    p2_0(mu_a, mu_b, mu_star, sigma, dim)
}

/// Second factor of [`p3`]: `E <Y,a><Z,b><Y,Z>` for independent
/// `Y ~ N(mu_star2, .)`, `Z ~ N(mu_star3, .)`. Dimension-free; `dim` is only
/// used to validate shapes.
pub fn p3_1(
    mu_a: ArrayView1<'_, f64>,
    mu_b: ArrayView1<'_, f64>,
    mu_star2: ArrayView1<'_, f64>,
    mu_star3: ArrayView1<'_, f64>,
    sigma: f64,
    dim: usize,
) -> Result<f64> {
    check_sigma(sigma)?;
    check_dims(
        dim,
        &[
            ("mu_a", mu_a.len()),
            ("mu_b", mu_b.len()),
            ("mu_star2", mu_star2.len()),
            ("mu_star3", mu_star3.len()),
        ],
    )?;
    check_unit("mu_star2", &mu_star2)?;
    check_unit("mu_star3", &mu_star3)?;
    Ok(p3_1_kernel(
        mu_star2.dot(&mu_a),
        mu_star2.dot(&mu_b),
        mu_star3.dot(&mu_a),
        mu_star3.dot(&mu_b),
        mu_star2.dot(&mu_star3),
        mu_a.dot(&mu_b),
        sigma,
    ))
}

/// `p3 = p3_0(a, b, s1) * p3_1(a, b, s2, s3)` — the fully factorized
/// three-token cross moment.
pub fn p3(
    mu_a: ArrayView1<'_, f64>,
    mu_b: ArrayView1<'_, f64>,
    mu_star1: ArrayView1<'_, f64>,
    mu_star2: ArrayView1<'_, f64>,
    mu_star3: ArrayView1<'_, f64>,
    sigma: f64,
    dim: usize,
) -> Result<f64> {
    Ok(p3_0(mu_a, mu_b, mu_star1, sigma, dim)?
        * p3_1(mu_a, mu_b, mu_star2, mu_star3, sigma, dim)?)
}

// --- Monte-Carlo estimation ------------------------------------------------

/// Samples per parallel chunk of the Monte-Carlo estimators.
const MC_CHUNK: u64 = 1 << 14;

/// A Monte-Carlo mean with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    /// Sample mean.
    pub mean: f64,
    /// Standard error of the mean.
    pub se: f64,
    /// Number of samples.
    pub n: u64,
}

/// Averages `n` evaluations of `f`, chunked across the Rayon pool.
///
/// Chunk `c` draws from the child stream `seeds.derive(c)` and accumulates
/// sequentially; chunk results are reduced in index order, so the estimate is
/// bit-identical for a given `(n, seeds)` regardless of thread count.
pub fn monte_carlo_mean<F>(n: u64, seeds: &SeedStream, f: F) -> McEstimate
where
    F: Fn(&mut ChaCha8Rng) -> f64 + Sync,
{
    assert!(n > 0, "monte_carlo_mean needs at least one sample");
    let n_chunks = n.div_ceil(MC_CHUNK);
    let partials: Vec<(f64, f64)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seeds.derive(c).rng();
            let count = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..count {
                let v = f(&mut rng);
                sum += v;
                sumsq += v * v;
            }
            (sum, sumsq)
        })
        .collect();
    let (sum, sumsq) = partials
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let nf = n as f64;
    let mean = sum / nf;
    let var = ((sumsq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    McEstimate {
        mean,
        se: (var / nf).sqrt(),
        n,
    }
}

/// A coordinate-wise Monte-Carlo mean with per-coordinate standard errors.
#[derive(Clone, Debug)]
pub struct McVecEstimate {
    /// Per-coordinate sample means.
    pub mean: Array1<f64>,
    /// Per-coordinate standard errors.
    pub se: Array1<f64>,
    /// Number of samples.
    pub n: u64,
}

/// Vector-valued counterpart of [`monte_carlo_mean`]: `f` fills a length-`dim`
/// scratch slice per sample. Same chunking and determinism guarantees.
pub fn monte_carlo_mean_vec<F>(n: u64, dim: usize, seeds: &SeedStream, f: F) -> McVecEstimate
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    assert!(n > 0, "monte_carlo_mean_vec needs at least one sample");
    let n_chunks = n.div_ceil(MC_CHUNK);
    let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = seeds.derive(c).rng();
            let count = MC_CHUNK.min(n - c * MC_CHUNK);
            let mut sum = vec![0.0; dim];
            let mut sumsq = vec![0.0; dim];
            let mut scratch = vec![0.0; dim];
            for _ in 0..count {
                f(&mut rng, &mut scratch);
                for (i, &v) in scratch.iter().enumerate() {
                    sum[i] += v;
                    sumsq[i] += v * v;
                }
            }
            (sum, sumsq)
        })
        .collect();
    let mut sum = vec![0.0; dim];
    let mut sumsq = vec![0.0; dim];
    for (s, q) in &partials {
        for i in 0..dim {
            sum[i] += s[i];
            sumsq[i] += q[i];
        }
    }
    let nf = n as f64;
    let mean: Array1<f64> = sum.iter().map(|s| s / nf).collect();
    let se: Array1<f64> = sumsq
        .iter()
        .zip(mean.iter())
        .map(|(q, m)| (((q - nf * m * m) / (nf - 1.0)).max(0.0) / nf).sqrt())
        .collect();
    McVecEstimate { mean, se, n }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn isserlis_examples() {
        let ctx = MomentContext::new(1.0, 5);
        assert_eq!(isserlis_identity(1, &ctx).unwrap(), 5.0);

        let a = array![1.0, 0.0, 0.0];
        let b = array![0.0, 1.0, 0.0];
        let ctx = MomentContext::new(0.7, 3).with_a(a.view()).with_b(b.view());
        assert_eq!(isserlis_identity(4, &ctx).unwrap(), 0.0);

        let u = array![0.6, 0.8];
        let ctx = MomentContext::new(0.5, 2).with_a(u.view()).with_b(u.view());
        assert!((isserlis_identity(5, &ctx).unwrap() - 0.1875).abs() < 1e-15);
    }

    #[test]
    fn isserlis_missing_vector_is_an_argument_error() {
        let ctx = MomentContext::new(1.0, 3);
        assert!(matches!(
            isserlis_identity(4, &ctx),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            isserlis_identity(9, &ctx),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn p0_examples() {
        let s = array![1.0, 0.0, 0.0, 0.0];
        // sigma = 0, all vectors equal: products of inner products give 1.
        assert!((p0(s.view(), s.view(), s.view(), 0.0, 4).unwrap() - 1.0).abs() < 1e-15);
        // mu_a = 0 annihilates every term.
        let z = Array1::zeros(4);
        assert_eq!(p0(z.view(), s.view(), s.view(), 0.8, 4).unwrap(), 0.0);
        // non-unit mean vector is rejected.
        let long = array![2.0, 0.0, 0.0, 0.0];
        assert!(matches!(
            p0(s.view(), s.view(), long.view(), 0.5, 4),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn p_functions_are_symmetric_in_a_and_b() {
        let a = array![0.3, -0.2, 0.9, 0.1];
        let b = array![-0.5, 0.4, 0.2, 0.7];
        let s1 = array![1.0, 0.0, 0.0, 0.0];
        let s2 = array![0.0, 1.0, 0.0, 0.0];
        let sigma = 0.6;
        let lhs = p0(a.view(), b.view(), s1.view(), sigma, 4).unwrap();
        let rhs = p0(b.view(), a.view(), s1.view(), sigma, 4).unwrap();
        assert!((lhs - rhs).abs() < 1e-14);
        let lhs = p2(a.view(), b.view(), s1.view(), s2.view(), sigma, 4).unwrap();
        let rhs = p2(b.view(), a.view(), s1.view(), s2.view(), sigma, 4).unwrap();
        assert!((lhs - rhs).abs() < 1e-14);
    }

    #[test]
    fn sigma_zero_reduces_to_inner_products() {
        let a = array![0.3, -0.2, 0.9];
        let b = array![-0.5, 0.4, 0.2];
        let s1 = array![1.0, 0.0, 0.0];
        let s2 = array![0.0, 0.0, 1.0];
        let v = p2(a.view(), b.view(), s1.view(), s2.view(), 0.0, 3).unwrap();
        let direct = s1.dot(&a) * s1.dot(&b) * s2.dot(&a) * s2.dot(&b);
        assert!((v - direct).abs() < 1e-15);
        let v = p1(a.view(), b.view(), s1.view(), s2.view(), 0.0, 3).unwrap();
        let direct = s1.dot(&a) * s1.dot(&a) * s1.dot(&b) * s2.dot(&b) * s1.dot(&s2);
        assert!((v - direct).abs() < 1e-15);
    }

    #[test]
    fn monte_carlo_mean_is_deterministic_and_unbiased() {
        let seeds = SeedStream::from_seed(314);
        let f = |rng: &mut ChaCha8Rng| -> f64 {
            let g: f64 = rng.sample(StandardNormal);
            g * g
        };
        let a = monte_carlo_mean(100_000, &seeds, f);
        let b = monte_carlo_mean(100_000, &seeds, f);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
        assert_eq!(a.se.to_bits(), b.se.to_bits());
        assert!((a.mean - 1.0).abs() < 4.0 * a.se, "mean {} se {}", a.mean, a.se);
        assert!(a.se < 0.01);
    }

    #[test]
    fn monte_carlo_mean_vec_matches_scalar_path() {
        let seeds = SeedStream::from_seed(99);
        let vecs = monte_carlo_mean_vec(50_000, 2, &seeds, |rng, out| {
            let g: f64 = rng.sample(StandardNormal);
            out[0] = g;
            out[1] = g * g;
        });
        assert!(vecs.mean[0].abs() < 4.0 * vecs.se[0]);
        assert!((vecs.mean[1] - 1.0).abs() < 4.0 * vecs.se[1]);
    }
}
