//! Batched stochastic projected gradient descent on sampled sequences.
//!
//! Every iteration draws a fresh batch of sequences, averages the analytic
//! per-sample gradients, and steps each head with the configured sphere
//! projection. Batches are drawn from per-iteration child streams of the
//! run's seed, so a run is reproducible independently of how it is
//! scheduled.

use super::gradients::{linear_loss_grad_raw, softmax_loss_grad_raw};
use super::steps::{euclidean_step, riemannian_step};
use super::{
    init_heads, should_record, OptimizerConfig, Projection, TraceRecord, TrainTrace,
};
use crate::attention::PredictorKind;
use crate::error::{Error, Result};
use crate::metrics::{dist_signed, dist_up_to_sign_perm};
use crate::mixtures::{MixtureKind, MixtureSpec};
use crate::risk::RegForm;
use crate::rng::SeedStream;
use ndarray::{Array2, ArrayView2};

#[allow(clippy::too_many_arguments)]
fn batch_eval(
    spec: &MixtureSpec,
    seq_len: usize,
    batch: usize,
    kind: PredictorKind,
    heads: &Array2<f64>,
    lambda: f64,
    psi: f64,
    rho: f64,
    form: RegForm,
    seeds: &SeedStream,
    tag: u64,
) -> Result<(f64, Array2<f64>, f64, f64)> {
    let mut rng = seeds.derive(tag).rng();
    let mut loss_sum = 0.0;
    let mut gh = Array2::zeros(heads.dim());
    let mut gl = 0.0;
    let mut gp = 0.0;
    for _ in 0..batch {
        let seq = spec.sample_with(seq_len, &mut rng)?;
        let (loss, grad) = match kind {
            PredictorKind::LinearMultiHead => {
                linear_loss_grad_raw(heads.view(), lambda, seq.tokens.view(), rho, form)?
            }
            PredictorKind::ShapedSoftmax => {
                softmax_loss_grad_raw(heads.view(), lambda, psi, seq.tokens.view(), rho)?
            }
            PredictorKind::InContext => unreachable!("rejected before the loop"),
        };
        loss_sum += loss;
        gh += &grad.heads;
        gl += grad.lambda;
        gp += grad.psi;
    }
    let inv = 1.0 / batch as f64;
    gh *= inv;
    Ok((loss_sum * inv, gh, gl * inv, gp * inv))
}

fn make_record(
    iteration: usize,
    heads: &Array2<f64>,
    lambda: f64,
    psi: f64,
    objective: f64,
    stars: ArrayView2<'_, f64>,
) -> Result<TraceRecord> {
    let (dsp, _, _) = dist_up_to_sign_perm(heads.view(), stars)?;
    let ds = dist_signed(heads.view(), stars)?;
    Ok(TraceRecord {
        iteration,
        heads: heads.clone(),
        lambda,
        psi,
        objective,
        dist_sign_perm: dsp,
        dist_signed: ds,
    })
}

fn apply_step(
    heads: &Array2<f64>,
    grad: &Array2<f64>,
    gamma: f64,
    projection: Projection,
) -> Result<Array2<f64>> {
    let mut out = Array2::zeros(heads.dim());
    for (c, row) in heads.rows().into_iter().enumerate() {
        let stepped = match projection {
            Projection::Riemannian => riemannian_step(row, grad.row(c), gamma)?,
            Projection::Euclidean => euclidean_step(row, grad.row(c), gamma)?,
        };
        out.row_mut(c).assign(&stepped);
    }
    Ok(out)
}

fn run_stochastic(
    spec: &MixtureSpec,
    seq_len: usize,
    config: &OptimizerConfig,
    seeds: &SeedStream,
    kind: PredictorKind,
) -> Result<TrainTrace> {
    config.validate()?;
    if spec.kind() == MixtureKind::InContext {
        return Err(Error::Argument(
            "stochastic descent needs fixed centroids; the in-context model has none".into(),
        ));
    }
    if seq_len == 0 {
        return Err(Error::Argument("sequence length must be positive".into()));
    }
    let k = spec.n_components();
    if matches!(kind, PredictorKind::ShapedSoftmax) && k != 2 {
        return Err(Error::Config(format!(
            "the shaped softmax loss needs exactly two heads, got {k}"
        )));
    }
    let stars = spec.centroids();
    let mut heads = {
        let mut rng = seeds.derive(0).rng();
        init_heads(&config.init, k, spec.dim(), Some(stars), &mut rng)?
    };
    let soft = matches!(kind, PredictorKind::ShapedSoftmax);
    let mut lambda = config.lambda_init;
    let mut psi = if soft { config.psi_init } else { 0.0 };
    let mut records: Vec<TraceRecord> = Vec::new();
    let mut last_recorded: Option<usize> = None;
    let mut diverged = false;
    for i in 1..=config.iterations {
        let (loss, gh, gl, gp) = batch_eval(
            spec,
            seq_len,
            config.batch_size,
            kind,
            &heads,
            lambda,
            psi,
            config.rho,
            config.reg_form,
            seeds,
            i as u64,
        )?;
        let eval_finite = loss.is_finite()
            && gh.iter().all(|v| v.is_finite())
            && gl.is_finite()
            && gp.is_finite();
        if should_record(i - 1, config.iterations, config.record_every) || !eval_finite {
            records.push(make_record(i - 1, &heads, lambda, psi, loss, stars)?);
            last_recorded = Some(i - 1);
        }
        if !eval_finite {
            diverged = true;
            break;
        }
        let stepped = apply_step(&heads, &gh, config.gamma, config.projection);
        let next = stepped.and_then(|h| {
            let mut nl = lambda;
            let mut np = psi;
            if soft {
                if config.train_lambda {
                    nl -= config.gamma * gl;
                }
                if config.train_psi {
                    np -= config.gamma * gp;
                }
            }
            let fine = h.iter().all(|v| v.is_finite())
                && nl.is_finite()
                && np.is_finite()
                && (!soft || nl > 0.0);
            if fine {
                Ok((h, nl, np))
            } else {
                Err(Error::Step("non-finite or out-of-domain update".into()))
            }
        });
        match next {
            Ok((h, nl, np)) => {
                heads = h;
                lambda = nl;
                psi = np;
            }
            Err(_) => {
                if last_recorded != Some(i - 1) {
                    records.push(make_record(i - 1, &heads, lambda, psi, loss, stars)?);
                }
                diverged = true;
                break;
            }
        }
    }
    if !diverged {
        let probe_tag = config.iterations as u64 + 1;
        let (loss, _, _, _) = batch_eval(
            spec,
            seq_len,
            config.batch_size,
            kind,
            &heads,
            lambda,
            psi,
            config.rho,
            config.reg_form,
            seeds,
            probe_tag,
        )?;
        records.push(make_record(
            config.iterations,
            &heads,
            lambda,
            psi,
            loss,
            stars,
        )?);
    }
    Ok(TrainTrace::from_records(records, diverged))
}

/// Stochastic PGD on the multi-head linear per-sample loss with the overlap
/// penalty. The temperature is fixed at `config.lambda_init`.
pub fn psgd_run(
    spec: &MixtureSpec,
    seq_len: usize,
    config: &OptimizerConfig,
    seeds: &SeedStream,
) -> Result<TrainTrace> {
    run_stochastic(spec, seq_len, config, seeds, PredictorKind::LinearMultiHead)
}

/// Stochastic descent on the shaped softmax per-sample loss: heads take
/// sphere-projected steps, while the shift and temperature (when flagged
/// trainable) take plain gradient steps.
pub fn psgd_soft_run(
    spec: &MixtureSpec,
    seq_len: usize,
    config: &OptimizerConfig,
    seeds: &SeedStream,
) -> Result<TrainTrace> {
    run_stochastic(spec, seq_len, config, seeds, PredictorKind::ShapedSoftmax)
}
