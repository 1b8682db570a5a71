//! Mixture models and token-sequence sampling.
//!
//! A sequence of `L` tokens in `R^d` is drawn i.i.d. from a balanced mixture
//! over `K` unit-norm centroids: token `X_k = mu_{Z_k} + sigma * G_k` with
//! `Z_k` uniform over components and `G_k` standard normal. Three flavours are
//! supported: `Dirac` (no noise), `Gaussian` (fixed centroids), and
//! `InContext`, where each sequence draws its own random orthogonal centroid
//! pair before sampling tokens.
//!
//! Labels for the whole sequence are drawn before any noise, so a Gaussian
//! mixture at `sigma = 0` produces bit-identical tokens to the Dirac mixture
//! with the same centroids and seed.

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// Unit-norm / orthogonality tolerance used when validating centroids.
pub const CENTROID_TOL: f64 = 1e-12;

/// Which sampling law generates the tokens.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MixtureKind {
    /// Point masses on the centroids; `sigma` is forced to zero.
    Dirac,
    /// Isotropic Gaussian noise of scale `sigma` around fixed centroids.
    Gaussian,
    /// Gaussian noise around a fresh random orthogonal centroid pair drawn
    /// per sequence; the spec carries no fixed centroids.
    InContext,
}

/// How [`make_orthonormal_centroids`] chooses its frame.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CentroidMode {
    /// Deterministic signed-axis placement (see [`make_orthonormal_centroids`]).
    Canonical,
    /// Gram-Schmidt orthonormalization of standard Gaussian draws.
    Random,
}

/// A balanced mixture specification: centroids, noise scale, and kind.
#[derive(Clone, Debug)]
pub struct MixtureSpec {
    centroids: Array2<f64>,
    sigma: f64,
    kind: MixtureKind,
    dim: usize,
}

impl MixtureSpec {
    /// Noise-free mixture over the given unit-norm centroids (rows).
    pub fn dirac(centroids: Array2<f64>) -> Result<Self> {
        Self::with_fixed_centroids(centroids, 0.0, MixtureKind::Dirac)
    }

    /// Gaussian mixture with noise scale `sigma >= 0` around fixed centroids.
    pub fn gaussian(centroids: Array2<f64>, sigma: f64) -> Result<Self> {
        Self::with_fixed_centroids(centroids, sigma, MixtureKind::Gaussian)
    }

    /// In-context mixture: each sequence draws its own orthogonal centroid
    /// pair in `R^dim`, then adds Gaussian noise of scale `sigma`.
    pub fn in_context(dim: usize, sigma: f64) -> Result<Self> {
        if dim < 2 {
            return Err(Error::Dimension(format!(
                "in-context mixtures need dim >= 2 to fit an orthogonal centroid pair, got {dim}"
            )));
        }
        check_sigma(sigma)?;
        Ok(Self {
            centroids: Array2::zeros((0, dim)),
            sigma,
            kind: MixtureKind::InContext,
            dim,
        })
    }

    fn with_fixed_centroids(centroids: Array2<f64>, sigma: f64, kind: MixtureKind) -> Result<Self> {
        let (k, dim) = centroids.dim();
        if k == 0 || dim == 0 {
            return Err(Error::Argument(format!(
                "need a non-empty centroid matrix, got {k}x{dim}"
            )));
        }
        check_sigma(sigma)?;
        for (i, row) in centroids.rows().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if (norm - 1.0).abs() > CENTROID_TOL {
                return Err(Error::Domain(format!(
                    "centroid {i} has norm {norm}, expected unit norm within {CENTROID_TOL:e}"
                )));
            }
        }
        Ok(Self {
            centroids,
            sigma,
            kind,
            dim,
        })
    }

    /// The sampling law of this spec.
    pub fn kind(&self) -> MixtureKind {
        self.kind
    }

    /// Noise scale (zero for Dirac).
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Ambient dimension of the tokens.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of mixture components (two for in-context specs).
    pub fn n_components(&self) -> usize {
        match self.kind {
            MixtureKind::InContext => 2,
            _ => self.centroids.nrows(),
        }
    }

    /// Fixed centroids (empty `0 x dim` matrix for in-context specs).
    pub fn centroids(&self) -> ArrayView2<'_, f64> {
        self.centroids.view()
    }

    /// Samples a length-`len` sequence, dispatching on the kind.
    pub fn sample_with<R: Rng>(&self, len: usize, rng: &mut R) -> Result<TokenSequence> {
        match self.kind {
            MixtureKind::InContext => sample_incontext_sequence(self.dim, self.sigma, len, rng),
            _ => sample_sequence(self, len, rng),
        }
    }

    /// Samples a sequence with the first token's label pinned to
    /// `first_label`; the remaining labels stay uniform. Because labels are
    /// i.i.d., this draws exactly from the conditional law given `Z_1`.
    pub fn sample_conditioned<R: Rng>(
        &self,
        len: usize,
        first_label: usize,
        rng: &mut R,
    ) -> Result<TokenSequence> {
        if first_label >= self.n_components() {
            return Err(Error::Argument(format!(
                "first_label {first_label} out of range for {} components",
                self.n_components()
            )));
        }
        let mut seq = self.sample_with(len, rng)?;
        let old = seq.labels[0];
        if old != first_label {
            let delta = &seq.centroids_used.row(first_label).to_owned()
                - &seq.centroids_used.row(old).to_owned();
            seq.labels[0] = first_label;
            let mut tok = seq.tokens.row_mut(0);
            tok += &delta.view();
        }
        Ok(seq)
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma >= 0.0) {
        return Err(Error::Domain(format!(
            "noise scale must be non-negative and finite, got {sigma}"
        )));
    }
    Ok(())
}

/// One sampled sequence: tokens (rows), per-token labels, and the centroids
/// that generated it (a copy of the spec's for fixed kinds, the per-sequence
/// draw for in-context).
#[derive(Clone, Debug)]
pub struct TokenSequence {
    /// `L x d` token matrix; row `k` is token `X_k`.
    pub tokens: Array2<f64>,
    /// Component index of each token.
    pub labels: Vec<usize>,
    /// `K x d` centroid matrix the tokens were drawn around.
    pub centroids_used: Array2<f64>,
}

impl TokenSequence {
    /// Sequence length `L`.
    pub fn len(&self) -> usize {
        self.tokens.nrows()
    }

    /// True when the sequence holds no tokens.
    pub fn is_empty(&self) -> bool {
        self.tokens.nrows() == 0
    }
}

/// Builds `k` orthonormal centroids in `R^dim`.
///
/// Requires `1 <= k <= dim`. `Canonical` mode is deterministic: for `k = 2`
/// it returns `(e_d, -e_1)` (so `d = 5` gives `(0,0,0,0,1)` and
/// `(-1,0,0,0,0)`), otherwise signed axes evenly spread over the coordinate
/// range, `mu_j = e_{1 + round(j (d-1)/(k-1))}`. `Random` mode orthonormalizes
/// standard Gaussian draws by (re-orthogonalized) Gram-Schmidt; the result is
/// a uniformly random k-frame.
pub fn make_orthonormal_centroids<R: Rng>(
    dim: usize,
    k: usize,
    mode: CentroidMode,
    rng: &mut R,
) -> Result<Array2<f64>> {
    if k == 0 {
        return Err(Error::Argument("need at least one centroid".into()));
    }
    if k > dim {
        return Err(Error::Dimension(format!(
            "cannot fit {k} orthonormal centroids in dimension {dim}"
        )));
    }
    Ok(match mode {
        CentroidMode::Canonical => canonical_centroids(dim, k),
        CentroidMode::Random => random_orthonormal(dim, k, rng),
    })
}

fn canonical_centroids(dim: usize, k: usize) -> Array2<f64> {
    let mut out = Array2::zeros((k, dim));
    if k == 2 {
        out[[0, dim - 1]] = 1.0;
        out[[1, 0]] = -1.0;
        return out;
    }
    for j in 0..k {
        let idx = if k == 1 {
            0
        } else {
            ((j * (dim - 1)) as f64 / (k - 1) as f64).round() as usize
        };
        out[[j, idx]] = 1.0;
    }
    out
}

fn random_orthonormal<R: Rng>(dim: usize, k: usize, rng: &mut R) -> Array2<f64> {
    let mut rows: Vec<Array1<f64>> = Vec::with_capacity(k);
    while rows.len() < k {
        let mut v: Array1<f64> = Array1::from_shape_fn(dim, |_| rng.sample(StandardNormal));
        // Twice-is-enough re-orthogonalization keeps the Gram matrix at
        // identity to well below the 1e-12 tolerance.
        for _ in 0..2 {
            for u in &rows {
                let c = v.dot(u);
                v.scaled_add(-c, u);
            }
        }
        let norm = v.dot(&v).sqrt();
        if norm > 1e-8 {
            rows.push(v / norm);
        }
    }
    let mut out = Array2::zeros((k, dim));
    for (i, r) in rows.iter().enumerate() {
        out.row_mut(i).assign(r);
    }
    out
}

/// Samples a length-`len` sequence from a Dirac or Gaussian spec.
///
/// In-context specs are rejected: they need the per-sequence centroid draw of
/// [`sample_incontext_sequence`], which this entry point does not perform.
pub fn sample_sequence<R: Rng>(
    spec: &MixtureSpec,
    len: usize,
    rng: &mut R,
) -> Result<TokenSequence> {
    if spec.kind == MixtureKind::InContext {
        return Err(Error::Argument(
            "in-context specs have no fixed centroids; use sample_incontext_sequence".into(),
        ));
    }
    if len == 0 {
        return Err(Error::EmptySequence(
            "cannot sample a zero-length sequence".into(),
        ));
    }
    Ok(sample_around(
        spec.centroids.clone(),
        spec.sigma,
        spec.kind == MixtureKind::Dirac,
        len,
        rng,
    ))
}

/// Samples an in-context sequence: first a uniform centroid `mu*_0` on the
/// unit sphere and `mu*_1` uniform on the subsphere orthogonal to it, then
/// `len` tokens from the balanced Gaussian mixture around that pair.
pub fn sample_incontext_sequence<R: Rng>(
    dim: usize,
    sigma: f64,
    len: usize,
    rng: &mut R,
) -> Result<TokenSequence> {
    if dim < 2 {
        return Err(Error::Dimension(format!(
            "in-context sampling needs dim >= 2, got {dim}"
        )));
    }
    check_sigma(sigma)?;
    if len == 0 {
        return Err(Error::EmptySequence(
            "cannot sample a zero-length sequence".into(),
        ));
    }
    let mu0 = sample_unit_vector(dim, rng);
    let mu1 = loop {
        let mut g: Array1<f64> = Array1::from_shape_fn(dim, |_| rng.sample(StandardNormal));
        let c = g.dot(&mu0);
        g.scaled_add(-c, &mu0);
        let norm = g.dot(&g).sqrt();
        if norm > 1e-8 {
            break g / norm;
        }
    };
    let mut centroids = Array2::zeros((2, dim));
    centroids.row_mut(0).assign(&mu0);
    centroids.row_mut(1).assign(&mu1);
    Ok(sample_around(centroids, sigma, false, len, rng))
}

fn sample_around<R: Rng>(
    centroids: Array2<f64>,
    sigma: f64,
    skip_noise: bool,
    len: usize,
    rng: &mut R,
) -> TokenSequence {
    let (k, dim) = centroids.dim();
    let labels: Vec<usize> = (0..len).map(|_| rng.gen_range(0..k)).collect();
    let mut tokens = Array2::zeros((len, dim));
    for (i, &z) in labels.iter().enumerate() {
        tokens.row_mut(i).assign(&centroids.row(z));
    }
    if !skip_noise {
        for mut tok in tokens.rows_mut() {
            for t in tok.iter_mut() {
                let g: f64 = rng.sample(StandardNormal);
                *t += sigma * g;
            }
        }
    }
    TokenSequence {
        tokens,
        labels,
        centroids_used: centroids,
    }
}

fn sample_unit_vector<R: Rng>(dim: usize, rng: &mut R) -> Array1<f64> {
    loop {
        let g: Array1<f64> = Array1::from_shape_fn(dim, |_| rng.sample(StandardNormal));
        let norm = g.dot(&g).sqrt();
        if norm > 1e-8 {
            return g / norm;
        }
    }
}

/// Probability that a token drawn around one centroid is closer (along the
/// inter-centroid direction) to the other centroid of an orthonormal pair:
/// `P(N(0, sigma^2) > sqrt(2)/2) = erfc(1/(2 sigma)) / 2`. Zero at
/// `sigma = 0` and strictly increasing toward `1/2`.
pub fn interference(sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if sigma == 0.0 {
        return Ok(0.0);
    }
    Ok(0.5 * erfc(1.0 / (2.0 * sigma)))
}
