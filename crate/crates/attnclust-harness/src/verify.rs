//! Verification suites: closed-form risks against independent references
//! (brute-force enumeration, Monte-Carlo), and the moment catalog against
//! sampling.
//!
//! Every check is reported as a cell with its reference value, difference,
//! and tolerance; a report passes only when every cell does, and the worst
//! cells (by difference over tolerance) are listed first for diagnosis.

use anyhow::Result;
use attnclust::attention::{HeadBank, PredictorKind};
use attnclust::mixtures::MixtureSpec;
use attnclust::moments::{isserlis_identity, monte_carlo_mean, MomentContext};
use attnclust::risk::{
    closed_form_risk_gaussian_general, closed_form_risk_gaussian_manifold, empirical_risk,
    exact_risk_dirac, general_risk_from_coords, lambda_star_degenerate, reparam,
    EmpiricalPredictor, ReparamCoords,
};
use attnclust::rng::SeedStream;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

/// One verified quantity.
#[derive(Clone, Debug, Serialize)]
pub struct Cell {
    pub name: String,
    pub closed_form: f64,
    pub reference: f64,
    pub difference: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Cell {
    fn new(name: String, closed_form: f64, reference: f64, tolerance: f64) -> Self {
        let difference = (closed_form - reference).abs();
        Cell {
            name,
            closed_form,
            reference,
            difference,
            tolerance,
            pass: difference <= tolerance,
        }
    }

    /// How close the cell is to failing (1 = at tolerance).
    fn severity(&self) -> f64 {
        if self.tolerance > 0.0 {
            self.difference / self.tolerance
        } else if self.difference == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    }
}

/// A full verification report.
#[derive(Debug, Serialize)]
pub struct VerifyReport {
    pub n_cells: usize,
    pub n_pass: usize,
    pub pass: bool,
    /// Worst cells first (difference relative to tolerance).
    pub worst: Vec<Cell>,
    pub cells: Vec<Cell>,
}

impl VerifyReport {
    fn from_cells(mut cells: Vec<Cell>) -> Self {
        let n_cells = cells.len();
        let n_pass = cells.iter().filter(|c| c.pass).count();
        let mut worst = cells.clone();
        worst.sort_by(|a, b| b.severity().partial_cmp(&a.severity()).expect("finite severities"));
        worst.truncate(5);
        cells.sort_by(|a, b| a.name.cmp(&b.name));
        VerifyReport {
            n_cells,
            n_pass,
            pass: n_pass == n_cells,
            worst,
            cells,
        }
    }
}

/// Brute-force noise-free risk: averages the first-row squared error of the
/// two-head linear predictor over all `2^L` label patterns of a centroid
/// pair. Independent of every closed form in the library.
pub fn enumerate_risk_dirac<'a>(
    mu0: ArrayView1<'a, f64>,
    mu1: ArrayView1<'a, f64>,
    stars: ArrayView2<'_, f64>,
    lambda: f64,
    seq_len: usize,
) -> f64 {
    let dim = stars.ncols();
    let l = seq_len as f64;
    let mut total = 0.0;
    for pattern in 0u64..(1 << seq_len) {
        let mut tokens = Array2::<f64>::zeros((seq_len, dim));
        for pos in 0..seq_len {
            let label = ((pattern >> pos) & 1) as usize;
            tokens.row_mut(pos).assign(&stars.row(label));
        }
        // T(X)_1 = (2 lambda / L) sum_c sum_k <X_1, mu_c> <X_k, mu_c> X_k.
        let x1 = tokens.row(0);
        let mut pred = Array1::<f64>::zeros(dim);
        for mu in [&mu0, &mu1] {
            let a1 = x1.dot(mu);
            for k in 0..seq_len {
                let ak = tokens.row(k).dot(mu);
                pred.scaled_add(2.0 * lambda / l * a1 * ak, &tokens.row(k));
            }
        }
        let diff = &x1.to_owned() - &pred;
        total += diff.dot(&diff);
    }
    total / (1u64 << seq_len) as f64
}

/// Ambient centroid-pair embedding of reduced coordinates in the star
/// plane: `mu_0 = kappa_0 s_0 + eta_1 s_1`, `mu_1 = eta_0 s_0 + kappa_1 s_1`.
pub fn plane_embedding(
    kappa0: f64,
    kappa1: f64,
    eta0: f64,
    eta1: f64,
    stars: ArrayView2<'_, f64>,
) -> (Array1<f64>, Array1<f64>) {
    let mu0 = &(kappa0 * &stars.row(0).to_owned()) + &(eta1 * &stars.row(1).to_owned());
    let mu1 = &(eta0 * &stars.row(0).to_owned()) + &(kappa1 * &stars.row(1).to_owned());
    (mu0, mu1)
}

/// Unit-norm ambient embedding of a full coordinate tuple in dimension
/// `dim >= 4`, using two spare orthogonal directions. The tuple must come
/// from an actual unit pair (as produced by [`random_unit_coords`]).
pub fn embed_with_coords(coords: &ReparamCoords, dim: usize) -> Result<(Array1<f64>, Array1<f64>)> {
    anyhow::ensure!(dim >= 4, "coordinate embedding needs dimension >= 4");
    let mut mu0 = Array1::<f64>::zeros(dim);
    let mut mu1 = Array1::<f64>::zeros(dim);
    // Stars at e_1 and e_2; spare directions e_3 and e_4.
    mu0[0] = coords.kappa0;
    mu0[1] = coords.eta1;
    let a2 = 1.0 - coords.kappa0 * coords.kappa0 - coords.eta1 * coords.eta1;
    anyhow::ensure!(a2 >= -1e-12, "coordinates do not come from a unit head");
    let a = a2.max(0.0).sqrt();
    mu0[2] = a;
    mu1[0] = coords.eta0;
    mu1[1] = coords.kappa1;
    let planar = coords.kappa0 * coords.eta0 + coords.eta1 * coords.kappa1;
    let b = if a > 1e-9 { (coords.xi - planar) / a } else { 0.0 };
    let c2 = 1.0 - coords.eta0 * coords.eta0 - coords.kappa1 * coords.kappa1 - b * b;
    anyhow::ensure!(c2 >= -1e-12, "coordinates do not come from a unit pair");
    mu1[2] = b;
    mu1[3] = c2.max(0.0).sqrt();
    Ok((mu0, mu1))
}

/// Draws the coordinate tuple of a uniformly random unit head pair in
/// dimension 5 against the canonical stars there.
pub fn random_unit_coords<R: Rng>(rng: &mut R) -> Result<ReparamCoords> {
    let draw = |rng: &mut R| {
        let mut v = Array1::<f64>::zeros(5);
        for x in v.iter_mut() {
            *x = rng.sample::<f64, _>(StandardNormal);
        }
        let norm = v.dot(&v).sqrt();
        v / norm
    };
    let mu0 = draw(rng);
    let mu1 = draw(rng);
    let mut stars = Array2::<f64>::zeros((2, 5));
    stars[[0, 0]] = 1.0;
    stars[[1, 1]] = 1.0;
    Ok(reparam(
        mu0.view(),
        mu1.view(),
        stars.row(0),
        stars.row(1),
    )?)
}

/// The `verify-risk` suite.
///
/// Three sections: noise-free cells against the enumeration oracle (grid of
/// reduced coordinates, tolerance `1e-12`), Gaussian cells against
/// Monte-Carlo (random unit pairs on and off the invariant manifold,
/// tolerance `4 SE`), and the restriction consistency of the general closed
/// form against the manifold form (tolerance `1e-10`).
pub fn verify_risk(samples: u64, seeds: &SeedStream) -> Result<VerifyReport> {
    let mut cells = Vec::new();

    // Noise-free enumeration cells.
    let kappas = [-0.75, -0.375, 0.0, 0.375, 0.75];
    let etas = [-0.5, 0.0, 0.5];
    let mut stars2 = Array2::<f64>::zeros((2, 2));
    stars2[[0, 0]] = 1.0;
    stars2[[1, 1]] = 1.0;
    for seq_len in [2usize, 3, 5] {
        for lambda in [0.3, lambda_star_degenerate(seq_len)?] {
            let mut worst: Option<Cell> = None;
            for &k0 in &kappas {
                for &k1 in &kappas {
                    for &e0 in &etas {
                        for &e1 in &etas {
                            let coords = ReparamCoords::degenerate(k0, k1, e0, e1)?;
                            let closed = exact_risk_dirac(&coords, lambda, seq_len)?;
                            let (mu0, mu1) = plane_embedding(k0, k1, e0, e1, stars2.view());
                            let reference = enumerate_risk_dirac(
                                mu0.view(),
                                mu1.view(),
                                stars2.view(),
                                lambda,
                                seq_len,
                            );
                            let cell = Cell::new(
                                format!(
                                    "dirac L={seq_len} lambda={lambda:.4} k=({k0},{k1}) e=({e0},{e1})"
                                ),
                                closed,
                                reference,
                                1e-12,
                            );
                            let keep = match &worst {
                                Some(w) => cell.severity() > w.severity(),
                                None => true,
                            };
                            if keep {
                                worst = Some(cell);
                            }
                        }
                    }
                }
            }
            // One reported cell per (L, lambda): the worst of the grid.
            cells.push(worst.expect("non-empty grid"));
        }
    }

    // Gaussian Monte-Carlo cells: the 8 (sigma, d, L) combinations with
    // alternating on/off-manifold placement, plus the opposite placement for
    // the four low-noise combinations — 12 cells total.
    let mut placements: Vec<(f64, usize, usize, bool)> = Vec::new();
    let mut combo = 0usize;
    for sigma in [0.3, 1.0] {
        for dim in [3usize, 5] {
            for seq_len in [5usize, 30] {
                let on = combo % 2 == 0;
                placements.push((sigma, dim, seq_len, on));
                if sigma == 0.3 {
                    placements.push((sigma, dim, seq_len, !on));
                }
                combo += 1;
            }
        }
    }
    let mut rng = seeds.derive(1).rng();
    for (cell_index, (sigma, dim, seq_len, on_manifold)) in placements.into_iter().enumerate() {
        let lambda = 0.5;
        let stars = attnclust::risk::canonical_star_pair(dim)?;
        let (mu0, mu1) = if on_manifold {
            manifold_pair(dim, &mut rng, stars.view())
        } else {
            (random_unit(dim, &mut rng), random_unit(dim, &mut rng))
        };
        let closed = closed_form_risk_gaussian_general(
            mu0.view(),
            mu1.view(),
            stars.row(0),
            stars.row(1),
            sigma,
            seq_len,
            lambda,
        )?;
        let mut heads = Array2::zeros((2, dim));
        heads.row_mut(0).assign(&mu0);
        heads.row_mut(1).assign(&mu1);
        let bank = HeadBank::new(heads, lambda)?;
        let spec = MixtureSpec::gaussian(stars.clone(), sigma)?;
        let mc = empirical_risk(
            &EmpiricalPredictor::Bank {
                kind: PredictorKind::LinearMultiHead,
                bank: &bank,
            },
            &spec,
            seq_len,
            samples,
            &seeds.derive(100 + cell_index as u64),
        )?;
        cells.push(Cell::new(
            format!(
                "gaussian sigma={sigma} d={dim} L={seq_len} {}",
                if on_manifold { "manifold" } else { "generic" }
            ),
            closed,
            mc.mean,
            4.0 * mc.se,
        ));
    }

    // Restriction consistency on the invariant manifold.
    for i in 0..10 {
        let k0 = -1.0 + 0.2 * i as f64;
        let k1 = 1.0 - 0.15 * i as f64;
        let coords = ReparamCoords::new(k0, k1, 0.0, 0.0, 0.0)?;
        let general = general_risk_from_coords(&coords, 0.3, 5, 30, 0.6)?;
        let manifold = closed_form_risk_gaussian_manifold(k0, k1, 0.3, 5, 30, 0.6)?;
        cells.push(Cell::new(
            format!("restriction k=({k0:.2},{k1:.2})"),
            general,
            manifold,
            1e-10,
        ));
    }

    Ok(VerifyReport::from_cells(cells))
}

/// A uniformly random unit vector.
fn random_unit<R: Rng>(dim: usize, rng: &mut R) -> Array1<f64> {
    let mut v = Array1::<f64>::zeros(dim);
    for x in v.iter_mut() {
        *x = rng.sample::<f64, _>(StandardNormal);
    }
    let norm = v.dot(&v).sqrt();
    v / norm
}

/// A unit pair on the invariant manifold: each head mixes its own star with
/// directions orthogonal to both stars (and to the other head).
fn manifold_pair<R: Rng>(
    dim: usize,
    rng: &mut R,
    stars: ArrayView2<'_, f64>,
) -> (Array1<f64>, Array1<f64>) {
    let k0: f64 = rng.gen_range(-0.9..0.9);
    let k1: f64 = rng.gen_range(-0.9..0.9);
    let mut mu0 = stars.row(0).to_owned() * k0;
    let mut mu1 = stars.row(1).to_owned() * k1;
    if dim >= 4 {
        // Two spare coordinates exist: stars occupy e_d and -e_1.
        mu0[1] += (1.0 - k0 * k0).sqrt();
        mu1[2] += (1.0 - k1 * k1).sqrt();
    } else {
        // Only one spare direction: put head 0 exactly on its star.
        mu0 = stars.row(0).to_owned();
        mu1[1] += (1.0 - k1 * k1).sqrt();
    }
    (mu0, mu1)
}

/// The `verify-moments` suite: the eight Gaussian moment identities plus the
/// four mixture moment polynomials, against Monte-Carlo sampling with shared
/// tolerances of `4 SE`.
pub fn verify_moments(samples: u64, n_configs: usize, seeds: &SeedStream) -> Result<VerifyReport> {
    let mut cells = Vec::new();
    let mut rng = seeds.derive(0).rng();
    for cfg in 0..n_configs {
        let dim = 3 + (cfg % 3);
        let sigma = [0.25, 0.6, 1.0][cfg % 3];
        let a = random_direction(dim, &mut rng);
        let b = random_direction(dim, &mut rng);
        let c = random_direction(dim, &mut rng);
        let star1 = random_unit(dim, &mut rng);
        let star2 = random_unit(dim, &mut rng);
        let star3 = random_unit(dim, &mut rng);
        let ctx = MomentContext::new(sigma, dim)
            .with_a(a.view())
            .with_b(b.view())
            .with_c(c.view());
        cells.extend(identity_cells(cfg, &ctx, &a, &b, &c, sigma, dim, samples, seeds)?);
        cells.extend(p_cells(
            cfg, &a, &b, &star1, &star2, &star3, sigma, dim, samples, seeds,
        )?);
    }
    Ok(VerifyReport::from_cells(cells))
}

/// A non-unit random direction (the identities are unit-free).
fn random_direction<R: Rng>(dim: usize, rng: &mut R) -> Array1<f64> {
    let mut v = Array1::<f64>::zeros(dim);
    for x in v.iter_mut() {
        *x = rng.sample::<f64, _>(StandardNormal);
    }
    v
}

/// Draws `G ~ N(0, sigma^2 I)` into a buffer.
fn gaussian_sample<R: Rng>(dim: usize, sigma: f64, rng: &mut R) -> Array1<f64> {
    let mut g = Array1::<f64>::zeros(dim);
    for x in g.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *x = sigma * z;
    }
    g
}

#[allow(clippy::too_many_arguments)]
fn identity_cells(
    cfg: usize,
    ctx: &MomentContext,
    a: &Array1<f64>,
    b: &Array1<f64>,
    c: &Array1<f64>,
    sigma: f64,
    dim: usize,
    samples: u64,
    seeds: &SeedStream,
) -> Result<Vec<Cell>> {
    let mut cells = Vec::new();
    for id in 1u8..=8 {
        let closed = isserlis_identity(id, ctx)?;
        let a = a.clone();
        let b = b.clone();
        let c = c.clone();
        let mc = monte_carlo_mean(samples, &seeds.derive(10 + cfg as u64 * 16 + id as u64), {
            move |rng| {
                let g = gaussian_sample(dim, sigma, rng);
                let ga = g.dot(&a);
                let gb = g.dot(&b);
                let gc = g.dot(&c);
                let gg = g.dot(&g);
                match id {
                    1 => gg,
                    2 => ga,
                    // Identity 3 returns the coefficient of mu_a in
                    // E <mu_a, G> G; test it through the projection onto a.
                    3 => ga * ga / a.dot(&a),
                    4 => ga * gb,
                    5 => ga * ga * gb * gb,
                    6 => ga * gb * gb * gc,
                    7 => ga * gb * gg,
                    8 => ga * ga * gb * gb * gg,
                    _ => unreachable!("identity ids are 1..=8"),
                }
            }
        });
        cells.push(Cell::new(
            format!("identity {id} cfg={cfg}"),
            closed,
            mc.mean,
            4.0 * mc.se,
        ));
    }
    Ok(cells)
}

#[allow(clippy::too_many_arguments)]
fn p_cells(
    cfg: usize,
    a: &Array1<f64>,
    b: &Array1<f64>,
    star1: &Array1<f64>,
    star2: &Array1<f64>,
    star3: &Array1<f64>,
    sigma: f64,
    dim: usize,
    samples: u64,
    seeds: &SeedStream,
) -> Result<Vec<Cell>> {
    use attnclust::moments::{p0, p1, p2, p3};
    let mut cells = Vec::new();

    // p0: E <X,a>^2 <X,b>^2 |X|^2 around star1.
    {
        let closed = p0(a.view(), b.view(), star1.view(), sigma, dim)?;
        let (a, b, s) = (a.clone(), b.clone(), star1.clone());
        let mc = monte_carlo_mean(samples, &seeds.derive(500 + cfg as u64 * 8), move |rng| {
            let x = &s + &gaussian_sample(dim, sigma, rng);
            let xa = x.dot(&a);
            let xb = x.dot(&b);
            xa * xa * xb * xb * x.dot(&x)
        });
        cells.push(Cell::new(
            format!("p0 cfg={cfg}"),
            closed,
            mc.mean,
            4.0 * mc.se,
        ));
    }

    // p1: E <X,a>^2 <X,b> <Y,b> <X,Y> for independent X ~ N(star1), Y ~ N(star2).
    {
        let closed = p1(a.view(), b.view(), star1.view(), star2.view(), sigma, dim)?;
        let (a, b, s1, s2) = (a.clone(), b.clone(), star1.clone(), star2.clone());
        let mc = monte_carlo_mean(samples, &seeds.derive(501 + cfg as u64 * 8), move |rng| {
            let x = &s1 + &gaussian_sample(dim, sigma, rng);
            let y = &s2 + &gaussian_sample(dim, sigma, rng);
            let xa = x.dot(&a);
            xa * xa * x.dot(&b) * y.dot(&b) * x.dot(&y)
        });
        cells.push(Cell::new(
            format!("p1 cfg={cfg}"),
            closed,
            mc.mean,
            4.0 * mc.se,
        ));
    }

    // p2: E <X,a><X,b> * E <Y,a><Y,b>|Y|^2 (factorized, independent tokens).
    {
        let closed = p2(a.view(), b.view(), star1.view(), star2.view(), sigma, dim)?;
        let (a2, b2, s1) = (a.clone(), b.clone(), star1.clone());
        let first = monte_carlo_mean(samples, &seeds.derive(502 + cfg as u64 * 8), move |rng| {
            let x = &s1 + &gaussian_sample(dim, sigma, rng);
            x.dot(&a2) * x.dot(&b2)
        });
        let (a3, b3, s2) = (a.clone(), b.clone(), star2.clone());
        let second = monte_carlo_mean(samples, &seeds.derive(503 + cfg as u64 * 8), move |rng| {
            let y = &s2 + &gaussian_sample(dim, sigma, rng);
            y.dot(&a3) * y.dot(&b3) * y.dot(&y)
        });
        // Independent factors: the MC reference is the product of the two
        // estimates, with a first-order propagated standard error.
        let reference = first.mean * second.mean;
        let se = (first.se * second.mean).hypot(second.se * first.mean);
        cells.push(Cell::new(format!("p2 cfg={cfg}"), closed, reference, 4.0 * se));
    }

    // p3: E <X,a><X,b> * E <Y,a><Z,b><Y,Z> (three independent tokens).
    {
        let closed = p3(
            a.view(),
            b.view(),
            star1.view(),
            star2.view(),
            star3.view(),
            sigma,
            dim,
        )?;
        let (a2, b2, s1) = (a.clone(), b.clone(), star1.clone());
        let first = monte_carlo_mean(samples, &seeds.derive(504 + cfg as u64 * 8), move |rng| {
            let x = &s1 + &gaussian_sample(dim, sigma, rng);
            x.dot(&a2) * x.dot(&b2)
        });
        let (a3, b3, s2, s3) = (a.clone(), b.clone(), star2.clone(), star3.clone());
        let second = monte_carlo_mean(samples, &seeds.derive(505 + cfg as u64 * 8), move |rng| {
            let y = &s2 + &gaussian_sample(dim, sigma, rng);
            let z = &s3 + &gaussian_sample(dim, sigma, rng);
            y.dot(&a3) * z.dot(&b3) * y.dot(&z)
        });
        let reference = first.mean * second.mean;
        let se = (first.se * second.mean).hypot(second.se * first.mean);
        cells.push(Cell::new(format!("p3 cfg={cfg}"), closed, reference, 4.0 * se));
    }

    Ok(cells)
}
