//! Deterministic projected gradient descent on the closed-form risks.
//!
//! On the invariant manifold the dynamics close over the two alignment
//! coordinates, so the reduced runner iterates the scalar update map
//! directly; the ambient runner takes full Riemannian steps in head space
//! and exists chiefly to observe that the manifold really is invariant.

use super::steps::riemannian_step;
use super::{
    init_heads, should_record, InitScheme, OptimizerConfig, TraceRecord, TrainTrace,
};
use crate::error::{Error, Result};
use crate::metrics::{dist_signed, dist_up_to_sign_perm};
use crate::risk::{
    canonical_star_pair, closed_form_risk_gaussian_manifold,
    closed_form_risk_gaussian_manifold_grad, coefficients, general_risk_coord_grad,
    general_risk_from_coords, reparam, ReparamCoords,
};
use crate::rng::SeedStream;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// A manifold risk surface: orthonormal reference centroids plus the noise,
/// sequence-length, and temperature parameters of the closed form.
#[derive(Clone, Debug)]
pub struct ManifoldObjective {
    stars: Array2<f64>,
    sigma: f64,
    seq_len: usize,
    lambda: f64,
}

impl ManifoldObjective {
    /// Validates the centroid pair (orthonormal within `1e-8`) and the risk
    /// parameters.
    pub fn new(stars: Array2<f64>, sigma: f64, seq_len: usize, lambda: f64) -> Result<Self> {
        if stars.nrows() != 2 {
            return Err(Error::Argument(format!(
                "the manifold risk needs exactly two centroids, got {}",
                stars.nrows()
            )));
        }
        for (c, row) in stars.rows().into_iter().enumerate() {
            let norm = row.dot(&row).sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return Err(Error::Domain(format!(
                    "centroid {c} has norm {norm}, expected 1"
                )));
            }
        }
        let cross = stars.row(0).dot(&stars.row(1));
        if cross.abs() > 1e-8 {
            return Err(Error::Domain(format!(
                "centroids are not orthogonal: <s0, s1> = {cross}"
            )));
        }
        coefficients(sigma, stars.ncols(), seq_len, lambda)?;
        Ok(ManifoldObjective {
            stars,
            sigma,
            seq_len,
            lambda,
        })
    }

    /// The canonical centroid pair in dimension `dim`.
    pub fn canonical(dim: usize, sigma: f64, seq_len: usize, lambda: f64) -> Result<Self> {
        ManifoldObjective::new(canonical_star_pair(dim)?, sigma, seq_len, lambda)
    }

    /// Reference centroids, one per row.
    pub fn stars(&self) -> ArrayView2<'_, f64> {
        self.stars.view()
    }

    /// Ambient dimension.
    pub fn dim(&self) -> usize {
        self.stars.ncols()
    }

    /// Noise scale.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Sequence length of the risk.
    pub fn seq_len(&self) -> usize {
        self.seq_len
    }

    /// Temperature of the risk.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Closed-form risk at alignment `kappa`.
    pub fn risk(&self, kappa: [f64; 2]) -> Result<f64> {
        closed_form_risk_gaussian_manifold(
            kappa[0],
            kappa[1],
            self.sigma,
            self.dim(),
            self.seq_len,
            self.lambda,
        )
    }

    /// Gradient of the closed-form risk in the alignment coordinates.
    pub fn grad(&self, kappa: [f64; 2]) -> Result<[f64; 2]> {
        closed_form_risk_gaussian_manifold_grad(
            kappa[0],
            kappa[1],
            self.sigma,
            self.dim(),
            self.seq_len,
            self.lambda,
        )
    }
}

/// One snapshot of the reduced two-coordinate dynamics.
#[derive(Clone, Copy, Debug)]
pub struct CoordsRecord {
    /// Completed steps.
    pub iteration: usize,
    /// Alignment coordinates after `iteration` steps.
    pub kappa: [f64; 2],
    /// Closed-form risk at `kappa`.
    pub risk: f64,
}

/// Recorded history of a reduced PGD run.
#[derive(Clone, Debug)]
pub struct CoordsTrace {
    /// Snapshots, always including iteration 0 and the final state.
    pub records: Vec<CoordsRecord>,
    /// Final alignment coordinates.
    pub final_kappa: [f64; 2],
    /// Final risk.
    pub final_risk: f64,
}

fn check_schedule(gamma: f64, record_every: usize) -> Result<()> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::Domain(format!(
            "step size must be finite and non-negative, got {gamma}"
        )));
    }
    if record_every == 0 {
        return Err(Error::Argument("record stride must be positive".into()));
    }
    Ok(())
}

fn clamp_kappa(v: f64) -> Result<f64> {
    if !v.is_finite() {
        return Err(Error::Domain(format!(
            "alignment coordinate must be finite, got {v}"
        )));
    }
    if v.abs() <= 1.0 {
        Ok(v)
    } else if v.abs() <= 1.0 + 1e-9 {
        Ok(v.signum())
    } else {
        Err(Error::Domain(format!(
            "alignment coordinate {v} lies outside [-1, 1]"
        )))
    }
}

/// The scalar update of one Riemannian step expressed in the alignment
/// coordinate: the step moves the head against the tangent-projected
/// gradient and renormalizes, which the alignment sees as this rational map.
fn phi(kappa: f64, g: f64, gamma: f64) -> f64 {
    let t = 1.0 - kappa * kappa;
    let num = kappa - gamma * g * t;
    let den = (1.0 + gamma * gamma * g * g * t).sqrt();
    (num / den).clamp(-1.0, 1.0)
}

/// Iterates the reduced two-coordinate dynamics of Riemannian PGD on the
/// manifold risk.
pub fn pgd_run_coords(
    init: [f64; 2],
    objective: &ManifoldObjective,
    gamma: f64,
    iterations: usize,
    record_every: usize,
) -> Result<CoordsTrace> {
    check_schedule(gamma, record_every)?;
    let mut kappa = [clamp_kappa(init[0])?, clamp_kappa(init[1])?];
    let mut records = vec![CoordsRecord {
        iteration: 0,
        kappa,
        risk: objective.risk(kappa)?,
    }];
    for i in 1..=iterations {
        let g = objective.grad(kappa)?;
        kappa = [phi(kappa[0], g[0], gamma), phi(kappa[1], g[1], gamma)];
        if should_record(i, iterations, record_every) {
            records.push(CoordsRecord {
                iteration: i,
                kappa,
                risk: objective.risk(kappa)?,
            });
        }
    }
    let last = *records.last().expect("at least the initial record");
    Ok(CoordsTrace {
        records,
        final_kappa: last.kappa,
        final_risk: last.risk,
    })
}

fn complement_direction(mu: ArrayView1<'_, f64>, star: ArrayView1<'_, f64>, kappa: f64) -> Array1<f64> {
    let mut w = mu.to_owned();
    w.scaled_add(-kappa, &star);
    let norm = w.dot(&w).sqrt();
    if norm > 1e-9 {
        w / norm
    } else {
        Array1::zeros(mu.len())
    }
}

/// Deterministic Riemannian PGD on the manifold risk. Initialization must
/// lie on the invariant manifold (drawn there for `OnManifold`, checked for
/// `Explicit`); the run then reduces exactly to [`pgd_run_coords`], and the
/// trace reconstructs the ambient heads, whose alignments `<s_c, mu_c>`
/// recover the two coordinates.
pub fn pgd_run(
    objective: &ManifoldObjective,
    config: &OptimizerConfig,
    seeds: &SeedStream,
) -> Result<TrainTrace> {
    config.validate()?;
    if matches!(config.init, InitScheme::UniformSphere) {
        return Err(Error::Config(
            "deterministic manifold descent needs on-manifold or explicit initialization".into(),
        ));
    }
    let stars = objective.stars();
    let heads0 = {
        let mut rng = seeds.rng();
        init_heads(&config.init, 2, objective.dim(), Some(stars), &mut rng)?
    };
    if matches!(config.init, InitScheme::Explicit(_)) {
        let coords = reparam(heads0.row(0), heads0.row(1), stars.row(0), stars.row(1))?;
        if coords.eta0.abs() > 1e-9 || coords.eta1.abs() > 1e-9 || coords.xi.abs() > 1e-9 {
            return Err(Error::Config(
                "explicit initialization must satisfy the manifold orthogonality constraints"
                    .into(),
            ));
        }
    }
    let kappa0 = [
        stars.row(0).dot(&heads0.row(0)),
        stars.row(1).dot(&heads0.row(1)),
    ];
    let dirs = [
        complement_direction(heads0.row(0), stars.row(0), kappa0[0]),
        complement_direction(heads0.row(1), stars.row(1), kappa0[1]),
    ];
    let coords_trace = pgd_run_coords(
        kappa0,
        objective,
        config.gamma,
        config.iterations,
        config.record_every,
    )?;
    let mut records = Vec::with_capacity(coords_trace.records.len());
    for rec in &coords_trace.records {
        let mut heads = Array2::zeros((2, objective.dim()));
        for c in 0..2 {
            let k = rec.kappa[c];
            let normal = (1.0 - k * k).max(0.0).sqrt();
            let mut row = dirs[c].clone();
            row *= normal;
            row.scaled_add(k, &stars.row(c));
            heads.row_mut(c).assign(&row);
        }
        let (dsp, _, _) = dist_up_to_sign_perm(heads.view(), stars)?;
        let ds = dist_signed(heads.view(), stars)?;
        records.push(TraceRecord {
            iteration: rec.iteration,
            heads,
            lambda: objective.lambda(),
            psi: 0.0,
            objective: rec.risk,
            dist_sign_perm: dsp,
            dist_signed: ds,
        });
    }
    Ok(TrainTrace::from_records(records, false))
}

/// One snapshot of an ambient PGD run, reported in the five reparameterized
/// coordinates.
#[derive(Clone, Copy, Debug)]
pub struct AmbientRecord {
    /// Completed steps.
    pub iteration: usize,
    /// Inner-product coordinates of the head pair.
    pub coords: ReparamCoords,
    /// General closed-form risk at those coordinates.
    pub risk: f64,
}

/// Recorded history and final heads of an ambient PGD run.
#[derive(Clone, Debug)]
pub struct AmbientTrace {
    /// Snapshots, always including iteration 0 and the final state.
    pub records: Vec<AmbientRecord>,
    /// Final first head.
    pub mu0: Array1<f64>,
    /// Final second head.
    pub mu1: Array1<f64>,
}

/// Full-space Riemannian PGD on the general closed-form risk, without any
/// manifold reduction: gradients are taken in the five inner-product
/// coordinates and mapped back to ambient head space.
pub fn pgd_run_ambient(
    objective: &ManifoldObjective,
    mu0: ArrayView1<'_, f64>,
    mu1: ArrayView1<'_, f64>,
    gamma: f64,
    iterations: usize,
    record_every: usize,
) -> Result<AmbientTrace> {
    check_schedule(gamma, record_every)?;
    let d = objective.dim();
    for (name, len, norm) in [
        ("mu0", mu0.len(), mu0.dot(&mu0).sqrt()),
        ("mu1", mu1.len(), mu1.dot(&mu1).sqrt()),
    ] {
        if len != d {
            return Err(Error::Dimension(format!(
                "{name} has dimension {len}, centroids have {d}"
            )));
        }
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "{name} has norm {norm}, expected 1"
            )));
        }
    }
    let stars = objective.stars();
    let (s0, s1) = (stars.row(0), stars.row(1));
    let (sigma, seq_len, lambda) = (objective.sigma(), objective.seq_len(), objective.lambda());
    let mut m0 = mu0.to_owned();
    let mut m1 = mu1.to_owned();
    let snapshot = |iteration: usize, m0: &Array1<f64>, m1: &Array1<f64>| -> Result<AmbientRecord> {
        let coords = reparam(m0.view(), m1.view(), s0, s1)?;
        let risk = general_risk_from_coords(&coords, sigma, d, seq_len, lambda)?;
        Ok(AmbientRecord {
            iteration,
            coords,
            risk,
        })
    };
    let mut records = vec![snapshot(0, &m0, &m1)?];
    for i in 1..=iterations {
        let coords = reparam(m0.view(), m1.view(), s0, s1)?;
        let g = general_risk_coord_grad(&coords, sigma, d, seq_len, lambda)?;
        let mut g0 = Array1::zeros(d);
        g0.scaled_add(g[0], &s0);
        g0.scaled_add(g[3], &s1);
        g0.scaled_add(g[4], &m1);
        let mut g1 = Array1::zeros(d);
        g1.scaled_add(g[1], &s1);
        g1.scaled_add(g[2], &s0);
        g1.scaled_add(g[4], &m0);
        let new0 = riemannian_step(m0.view(), g0.view(), gamma)?;
        let new1 = riemannian_step(m1.view(), g1.view(), gamma)?;
        m0 = new0;
        m1 = new1;
        if should_record(i, iterations, record_every) {
            records.push(snapshot(i, &m0, &m1)?);
        }
    }
    Ok(AmbientTrace {
        records,
        mu0: m0,
        mu1: m1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::InitScheme;
    use crate::risk::{lambda_star, lambda_star_degenerate};

    #[test]
    fn origin_and_corners_are_fixed_points() {
        let obj = ManifoldObjective::canonical(5, 0.3, 30, 0.6).unwrap();
        let trace = pgd_run_coords([0.0, 0.0], &obj, 0.01, 100, 1).unwrap();
        assert_eq!(trace.final_kappa, [0.0, 0.0]);
        let trace = pgd_run_coords([1.0, -1.0], &obj, 0.01, 100, 1).unwrap();
        assert_eq!(trace.final_kappa, [1.0, -1.0]);
    }

    #[test]
    fn generic_init_converges_to_a_signed_corner() {
        // At the degenerate-optimal temperature the corner gradient vanishes,
        // so the approach is algebraic: roughly 1/(2 gamma c k) with
        // c = 4*lambda*(L+1)/L, about 1.3e-4 after 1e5 steps.
        let lambda = lambda_star_degenerate(30).unwrap();
        let obj = ManifoldObjective::canonical(5, 0.0, 30, lambda).unwrap();
        let trace = pgd_run_coords([0.1, -0.2], &obj, 0.01, 100_000, 10_000).unwrap();
        let [k0, k1] = trace.final_kappa;
        assert!(k0 > 0.0 && k1 < 0.0, "wrong corner: {k0}, {k1}");
        assert!(1.0 - k0 < 3e-4, "kappa0 = {k0}");
        assert!(1.0 + k1 < 3e-4, "kappa1 = {k1}");
        // Below the critical temperature the corner attracts at a linear
        // rate and the iterates reach it to high accuracy quickly.
        let obj = ManifoldObjective::canonical(5, 0.0, 30, 0.8).unwrap();
        let trace = pgd_run_coords([0.1, -0.2], &obj, 0.01, 10_000, 1000).unwrap();
        let [k0, k1] = trace.final_kappa;
        assert!(1.0 - k0 <= 1e-8, "kappa0 = {k0}");
        assert!(1.0 + k1 <= 1e-8, "kappa1 = {k1}");
    }

    #[test]
    fn risk_is_non_increasing_along_iterates() {
        let lambda = lambda_star_degenerate(30).unwrap();
        let obj = ManifoldObjective::canonical(5, 0.3, 30, lambda).unwrap();
        let trace = pgd_run_coords([0.15, -0.05], &obj, 0.01, 2000, 1).unwrap();
        for pair in trace.records.windows(2) {
            assert!(pair[1].risk <= pair[0].risk + 1e-12);
        }
    }

    #[test]
    fn run_wrapper_reconstructs_unit_heads_and_descends() {
        let lam = lambda_star(0.3, 5, 30).unwrap();
        let obj = ManifoldObjective::canonical(5, 0.3, 30, lam).unwrap();
        let config = OptimizerConfig {
            init: InitScheme::OnManifold,
            iterations: 2000,
            ..OptimizerConfig::default()
        };
        let trace = pgd_run(&obj, &config, &SeedStream::from_seed(42)).unwrap();
        for rec in &trace.records {
            for row in rec.heads.rows() {
                assert!((row.dot(&row).sqrt() - 1.0).abs() < 1e-9);
            }
        }
        let first = &trace.records[0];
        assert!(trace.final_dist_sign_perm < first.dist_sign_perm);
        assert!(trace.final_objective < first.objective);
        assert!(!trace.diverged);
    }

    #[test]
    fn sphere_init_is_rejected_for_the_reduced_dynamics() {
        let obj = ManifoldObjective::canonical(5, 0.3, 30, 0.6).unwrap();
        let config = OptimizerConfig {
            init: InitScheme::UniformSphere,
            ..OptimizerConfig::default()
        };
        let err = pgd_run(&obj, &config, &SeedStream::from_seed(1)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn ambient_run_stays_on_the_manifold() {
        let obj = ManifoldObjective::canonical(5, 0.3, 30, 0.6).unwrap();
        let mut rng = SeedStream::from_seed(7).rng();
        let heads = init_heads(
            &InitScheme::OnManifold,
            2,
            5,
            Some(obj.stars()),
            &mut rng,
        )
        .unwrap();
        let trace =
            pgd_run_ambient(&obj, heads.row(0), heads.row(1), 0.01, 1000, 100).unwrap();
        for rec in &trace.records {
            assert!(rec.coords.eta0.abs() <= 1e-9, "eta0 = {}", rec.coords.eta0);
            assert!(rec.coords.eta1.abs() <= 1e-9, "eta1 = {}", rec.coords.eta1);
            assert!(rec.coords.xi.abs() <= 1e-9, "xi = {}", rec.coords.xi);
        }
        let first = trace.records.first().unwrap().risk;
        let last = trace.records.last().unwrap().risk;
        assert!(last < first);
    }

    #[test]
    fn true_centroids_are_fixed_at_the_optimal_temperature() {
        let lam = lambda_star(0.3, 5, 30).unwrap();
        let obj = ManifoldObjective::canonical(5, 0.3, 30, lam).unwrap();
        let stars = obj.stars().to_owned();
        let trace =
            pgd_run_ambient(&obj, stars.row(0), stars.row(1), 0.01, 10, 1).unwrap();
        for (mu, star) in [(&trace.mu0, stars.row(0)), (&trace.mu1, stars.row(1))] {
            let mut diff = 0.0_f64;
            for (a, b) in mu.iter().zip(star.iter()) {
                diff = diff.max((a - b).abs());
            }
            assert!(diff <= 1e-10, "moved by {diff}");
        }
    }
}
