//! Sphere-constrained optimizers.
//!
//! Deterministic Riemannian projected gradient descent on the closed-form
//! risks (reduced to the two alignment coordinates, or run in ambient space),
//! batched stochastic PGD on sampled sequences with Riemannian or plain
//! Euclidean renormalization, and the shaped-softmax variant with trainable
//! shift and temperature.

pub mod gradients;
pub mod pgd;
pub mod psgd;
pub mod steps;

pub use gradients::{
    linear_grad_raw, linear_loss_grad_raw, linear_loss_raw, per_sample_gradient, per_sample_loss,
    softmax_grad_raw, softmax_loss_grad_raw, softmax_loss_raw, SampleGradient,
};
pub use pgd::{
    pgd_run, pgd_run_ambient, pgd_run_coords, AmbientRecord, AmbientTrace, CoordsRecord,
    CoordsTrace, ManifoldObjective,
};
pub use psgd::{psgd_run, psgd_soft_run};
pub use steps::{euclidean_step, riemannian_step};

use crate::error::{Error, Result};
use crate::risk::RegForm;
use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;

/// Largest step size the descent guarantees are stated for.
pub const GAMMA_CAP: f64 = 0.1;

/// Up to this iteration every step is recorded; beyond it only every
/// `record_every`-th and the final one.
pub(crate) const DENSE_RECORD_LIMIT: usize = 1000;

/// How stochastic steps get projected back to the sphere.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Projection {
    /// Tangent-project the gradient before stepping, then renormalize.
    Riemannian,
    /// Step against the raw gradient, then renormalize.
    Euclidean,
}

/// How the head vectors are initialized.
#[derive(Clone, Debug)]
pub enum InitScheme {
    /// Random unit heads satisfying the three orthogonality constraints of
    /// the invariant manifold (two heads only).
    OnManifold,
    /// Independent uniform draws on the unit sphere.
    UniformSphere,
    /// Caller-supplied head rows (must be unit norm).
    Explicit(Array2<f64>),
}

/// Hyperparameters shared by all optimizer runs.
#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    /// Step size, `0 <= gamma <=` [`GAMMA_CAP`].
    pub gamma: f64,
    /// Number of gradient steps.
    pub iterations: usize,
    /// Sequences per stochastic gradient estimate.
    pub batch_size: usize,
    /// Regularization strength (the softmax runs read it as the shaping
    /// penalty weight).
    pub rho: f64,
    /// Projection used after every head step.
    pub projection: Projection,
    /// Head initialization scheme.
    pub init: InitScheme,
    /// Shape of the multi-head overlap penalty.
    pub reg_form: RegForm,
    /// Update the shift parameter by plain gradient steps (softmax only).
    pub train_psi: bool,
    /// Update the temperature by plain gradient steps (softmax only).
    pub train_lambda: bool,
    /// Fixed temperature for linear runs, initial temperature for softmax.
    pub lambda_init: f64,
    /// Initial shift parameter (softmax only).
    pub psi_init: f64,
    /// Thinning stride for trace records past [`DENSE_RECORD_LIMIT`].
    pub record_every: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            gamma: 0.01,
            iterations: 1000,
            batch_size: 256,
            rho: 0.0,
            projection: Projection::Riemannian,
            init: InitScheme::UniformSphere,
            reg_form: RegForm::Pairwise,
            train_psi: false,
            train_lambda: false,
            lambda_init: 1.0,
            psi_init: 0.0,
            record_every: 10,
        }
    }
}

impl OptimizerConfig {
    /// Defaults for the shaped-softmax runs: temperature 3, shift 2, both
    /// trainable, shaping penalty weight 0.5.
    pub fn shaped_softmax_defaults() -> Self {
        OptimizerConfig {
            rho: 0.5,
            train_psi: true,
            train_lambda: true,
            lambda_init: 3.0,
            psi_init: 2.0,
            ..OptimizerConfig::default()
        }
    }

    /// Checks every field; explicit initial heads are validated where the
    /// target dimension is known.
    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() || self.gamma < 0.0 {
            return Err(Error::Config(format!(
                "step size must be finite and non-negative, got {}",
                self.gamma
            )));
        }
        if self.gamma > GAMMA_CAP {
            return Err(Error::Config(format!(
                "step size {} exceeds the descent cap {GAMMA_CAP}",
                self.gamma
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least one".into()));
        }
        if !self.rho.is_finite() || self.rho < 0.0 {
            return Err(Error::Config(format!(
                "regularization strength must be finite and non-negative, got {}",
                self.rho
            )));
        }
        if !self.lambda_init.is_finite() || self.lambda_init <= 0.0 {
            return Err(Error::Config(format!(
                "initial temperature must be positive and finite, got {}",
                self.lambda_init
            )));
        }
        if !self.psi_init.is_finite() {
            return Err(Error::Config(format!(
                "initial shift must be finite, got {}",
                self.psi_init
            )));
        }
        if self.record_every == 0 {
            return Err(Error::Config("record stride must be positive".into()));
        }
        Ok(())
    }
}

/// One thinned snapshot of an optimizer run.
#[derive(Clone, Debug)]
pub struct TraceRecord {
    /// Number of completed steps at this snapshot.
    pub iteration: usize,
    /// Head rows after `iteration` steps.
    pub heads: Array2<f64>,
    /// Temperature at this snapshot.
    pub lambda: f64,
    /// Shift parameter at this snapshot (zero for linear runs).
    pub psi: f64,
    /// Closed-form risk for deterministic runs, mini-batch loss at this
    /// state for stochastic ones.
    pub objective: f64,
    /// Distance to the reference centroids up to signed permutation.
    pub dist_sign_perm: f64,
    /// Distance up to permutation only.
    pub dist_signed: f64,
}

/// Recorded history and final state of an optimizer run.
#[derive(Clone, Debug)]
pub struct TrainTrace {
    /// Thinned snapshots, always including iteration 0 and the last state.
    pub records: Vec<TraceRecord>,
    /// Head rows at the final recorded state.
    pub final_heads: Array2<f64>,
    /// Final temperature.
    pub final_lambda: f64,
    /// Final shift parameter.
    pub final_psi: f64,
    /// Final objective value.
    pub final_objective: f64,
    /// Final distance up to signed permutation.
    pub final_dist_sign_perm: f64,
    /// Final distance up to permutation only.
    pub final_dist_signed: f64,
    /// True when the run hit a non-finite state and stopped early; the
    /// records end at the last finite state.
    pub diverged: bool,
}

impl TrainTrace {
    pub(crate) fn from_records(records: Vec<TraceRecord>, diverged: bool) -> Self {
        let last = records.last().expect("a trace has at least one record");
        TrainTrace {
            final_heads: last.heads.clone(),
            final_lambda: last.lambda,
            final_psi: last.psi,
            final_objective: last.objective,
            final_dist_sign_perm: last.dist_sign_perm,
            final_dist_signed: last.dist_signed,
            diverged,
            records,
        }
    }
}

/// Recording schedule: dense early, thinned later, final step always kept.
pub(crate) fn should_record(iteration: usize, total: usize, every: usize) -> bool {
    iteration == total || iteration <= DENSE_RECORD_LIMIT || iteration % every == 0
}

fn gaussian_vector<R: Rng>(dim: usize, rng: &mut R) -> Array1<f64> {
    Array1::from_shape_fn(dim, |_| rng.sample::<f64, _>(StandardNormal))
}

/// Draws a unit vector orthogonal to every row of `basis` (rows need not be
/// orthonormal themselves; they are orthonormalized on the fly).
fn draw_unit_orthogonal<R: Rng>(dim: usize, basis: &[Array1<f64>], rng: &mut R) -> Array1<f64> {
    let mut frame: Vec<Array1<f64>> = Vec::with_capacity(basis.len());
    for b in basis {
        let mut v = b.clone();
        for q in &frame {
            let c = v.dot(q);
            v.scaled_add(-c, q);
        }
        let n = v.dot(&v).sqrt();
        if n > 1e-8 {
            frame.push(v / n);
        }
    }
    loop {
        let mut v = gaussian_vector(dim, rng);
        for q in &frame {
            let c = v.dot(q);
            v.scaled_add(-c, q);
        }
        let n = v.dot(&v).sqrt();
        if n > 1e-8 {
            return v / n;
        }
    }
}

/// Materializes initial head rows for `k` heads in dimension `dim`.
pub(crate) fn init_heads<R: Rng>(
    init: &InitScheme,
    k: usize,
    dim: usize,
    stars: Option<ArrayView2<'_, f64>>,
    rng: &mut R,
) -> Result<Array2<f64>> {
    match init {
        InitScheme::Explicit(v) => {
            if v.dim() != (k, dim) {
                return Err(Error::Dimension(format!(
                    "explicit initialization has shape {:?}, expected ({k}, {dim})",
                    v.dim()
                )));
            }
            for (c, row) in v.rows().into_iter().enumerate() {
                let norm = row.dot(&row).sqrt();
                if (norm - 1.0).abs() > 1e-9 {
                    return Err(Error::Domain(format!(
                        "explicit initial head {c} has norm {norm}, expected 1"
                    )));
                }
            }
            Ok(v.clone())
        }
        InitScheme::UniformSphere => {
            let mut heads = Array2::zeros((k, dim));
            for mut row in heads.rows_mut() {
                row.assign(&draw_unit_orthogonal(dim, &[], rng));
            }
            Ok(heads)
        }
        InitScheme::OnManifold => {
            let stars = stars.ok_or_else(|| {
                Error::Config("on-manifold initialization needs reference centroids".into())
            })?;
            if k != 2 || stars.nrows() != 2 {
                return Err(Error::Config(format!(
                    "on-manifold initialization is defined for two heads, got {k}"
                )));
            }
            if dim < 3 {
                return Err(Error::Config(format!(
                    "on-manifold initialization needs dimension at least 3, got {dim}"
                )));
            }
            let s0 = stars.row(0).to_owned();
            let s1 = stars.row(1).to_owned();
            let mu0 = draw_unit_orthogonal(dim, &[s1.clone()], rng);
            let mu1 = draw_unit_orthogonal(dim, &[s0, mu0.clone()], rng);
            let mut heads = Array2::zeros((2, dim));
            heads.row_mut(0).assign(&mu0);
            heads.row_mut(1).assign(&mu1);
            Ok(heads)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    #[test]
    fn config_validation_rejects_bad_fields() {
        let ok = OptimizerConfig::default();
        ok.validate().unwrap();
        let mut bad = ok.clone();
        bad.gamma = 0.2;
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        bad = ok.clone();
        bad.gamma = -0.01;
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        bad = ok.clone();
        bad.batch_size = 0;
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        bad = ok.clone();
        bad.lambda_init = 0.0;
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        bad = ok;
        bad.record_every = 0;
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn on_manifold_init_satisfies_the_constraints() {
        let stars = crate::risk::canonical_star_pair(6).unwrap();
        let mut rng = SeedStream::from_seed(11).rng();
        for _ in 0..20 {
            let heads = init_heads(
                &InitScheme::OnManifold,
                2,
                6,
                Some(stars.view()),
                &mut rng,
            )
            .unwrap();
            let mu0 = heads.row(0);
            let mu1 = heads.row(1);
            assert!((mu0.dot(&mu0) - 1.0).abs() < 1e-12);
            assert!((mu1.dot(&mu1) - 1.0).abs() < 1e-12);
            assert!(mu0.dot(&stars.row(1)).abs() < 1e-12);
            assert!(mu1.dot(&stars.row(0)).abs() < 1e-12);
            assert!(mu0.dot(&mu1).abs() < 1e-12);
        }
    }

    #[test]
    fn explicit_init_must_be_unit_norm() {
        let mut v = Array2::zeros((2, 4));
        v[[0, 0]] = 1.0;
        v[[1, 1]] = 0.9;
        let mut rng = SeedStream::from_seed(3).rng();
        let err = init_heads(&InitScheme::Explicit(v), 2, 4, None, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn record_schedule_is_dense_then_thinned() {
        assert!(should_record(0, 5000, 10));
        assert!(should_record(999, 5000, 10));
        assert!(should_record(1000, 5000, 10));
        assert!(!should_record(1001, 5000, 10));
        assert!(should_record(1010, 5000, 10));
        assert!(should_record(5000, 5000, 7));
    }
}
