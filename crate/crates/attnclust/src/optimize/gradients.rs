//! Analytic per-sample losses and gradients for the stochastic optimizers.
//!
//! The raw entry points take head rows as plain views without unit-norm
//! checks, so the losses are well-defined off the sphere — finite-difference
//! probes rely on that. The `per_sample_*` wrappers dispatch on the predictor
//! kind of a validated [`HeadBank`].

use crate::attention::{HeadBank, PredictorKind};
use crate::error::{Error, Result};
use crate::risk::{regularizer_linear_sample, regularizer_softmax_sample, RegForm};
use ndarray::{Array1, Array2, ArrayView2, Axis};

/// Gradient of one per-sample loss with respect to every trainable
/// parameter. Linear losses do not depend on the shift, so `psi` is zero
/// there; `lambda` always carries the true temperature derivative.
#[derive(Clone, Debug)]
pub struct SampleGradient {
    /// One row per head.
    pub heads: Array2<f64>,
    /// Derivative with respect to the temperature.
    pub lambda: f64,
    /// Derivative with respect to the shift parameter.
    pub psi: f64,
}

fn check_common(
    heads: &ArrayView2<'_, f64>,
    lambda: f64,
    psi: f64,
    tokens: &ArrayView2<'_, f64>,
    rho: f64,
) -> Result<()> {
    if tokens.nrows() == 0 {
        return Err(Error::EmptySequence(
            "per-sample loss needs at least one token".into(),
        ));
    }
    if heads.nrows() == 0 {
        return Err(Error::Argument("head bank is empty".into()));
    }
    if heads.ncols() != tokens.ncols() {
        return Err(Error::Dimension(format!(
            "heads have dimension {}, tokens have {}",
            heads.ncols(),
            tokens.ncols()
        )));
    }
    if !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "temperature must be finite, got {lambda}"
        )));
    }
    if !psi.is_finite() {
        return Err(Error::Domain(format!("shift must be finite, got {psi}")));
    }
    if !rho.is_finite() || rho < 0.0 {
        return Err(Error::Domain(format!(
            "regularization strength must be finite and non-negative, got {rho}"
        )));
    }
    Ok(())
}

fn check_softmax_heads(heads: &ArrayView2<'_, f64>) -> Result<()> {
    if heads.nrows() != 2 {
        return Err(Error::Config(format!(
            "the shaped softmax loss needs exactly two heads, got {}",
            heads.nrows()
        )));
    }
    Ok(())
}

struct LinearParts {
    b: Array2<f64>,
    a: Array1<f64>,
    w: Array1<f64>,
    r: Array1<f64>,
}

fn linear_parts(
    heads: &ArrayView2<'_, f64>,
    lambda: f64,
    tokens: &ArrayView2<'_, f64>,
) -> LinearParts {
    let l = tokens.nrows() as f64;
    let b = tokens.dot(&heads.t());
    let a = b.row(0).to_owned();
    let w = b.dot(&a);
    let mut pred = tokens.t().dot(&w);
    pred *= 2.0 * lambda / l;
    let r = tokens.row(0).to_owned() - pred;
    LinearParts { b, a, w, r }
}

/// Per-sample first-row loss of the multi-head linear predictor plus the
/// overlap penalty `rho * r`.
pub fn linear_loss_raw(
    heads: ArrayView2<'_, f64>,
    lambda: f64,
    tokens: ArrayView2<'_, f64>,
    rho: f64,
    form: RegForm,
) -> Result<f64> {
    check_common(&heads, lambda, 0.0, &tokens, rho)?;
    let parts = linear_parts(&heads, lambda, &tokens);
    let mut loss = parts.r.dot(&parts.r);
    if rho > 0.0 {
        loss += rho * regularizer_linear_sample(heads, tokens.row(0), form)?;
    }
    Ok(loss)
}

fn linear_grad_from_parts(
    parts: &LinearParts,
    heads: &ArrayView2<'_, f64>,
    lambda: f64,
    tokens: &ArrayView2<'_, f64>,
    rho: f64,
    form: RegForm,
) -> Result<SampleGradient> {
    let (k, d) = heads.dim();
    let l = tokens.nrows() as f64;
    let t = tokens.dot(&parts.r);
    let s = parts.b.t().dot(&t);
    let u = tokens.t().dot(&t);
    let x1 = tokens.row(0);
    let coef = -4.0 * lambda / l;
    let mut gh = Array2::zeros((k, d));
    for c in 0..k {
        let (sc, ac) = (s[c], parts.a[c]);
        for (j, g) in gh.row_mut(c).iter_mut().enumerate() {
            *g = coef * (sc * x1[j] + ac * u[j]);
        }
    }
    if rho > 0.0 {
        if k < 2 {
            return Err(Error::Config(format!(
                "overlap regularizer needs at least two heads, got {k}"
            )));
        }
        for c in 0..k {
            let factor = match form {
                RegForm::Pairwise => (0..k)
                    .filter(|&j| j != c)
                    .map(|j| parts.a[j] * parts.a[j])
                    .sum::<f64>(),
                RegForm::Product => (0..k)
                    .filter(|&j| j != c)
                    .map(|j| parts.a[j] * parts.a[j])
                    .product::<f64>(),
            };
            let scale = 2.0 * rho * parts.a[c] * factor;
            for (j, g) in gh.row_mut(c).iter_mut().enumerate() {
                *g += scale * x1[j];
            }
        }
    }
    let dlambda = -(4.0 / l) * parts.w.dot(&t);
    Ok(SampleGradient {
        heads: gh,
        lambda: dlambda,
        psi: 0.0,
    })
}

/// Analytic gradient of [`linear_loss_raw`] with respect to the head rows
/// and the temperature.
pub fn linear_grad_raw(
    heads: ArrayView2<'_, f64>,
    lambda: f64,
    tokens: ArrayView2<'_, f64>,
    rho: f64,
    form: RegForm,
) -> Result<SampleGradient> {
    check_common(&heads, lambda, 0.0, &tokens, rho)?;
    let parts = linear_parts(&heads, lambda, &tokens);
    linear_grad_from_parts(&parts, &heads, lambda, &tokens, rho, form)
}

/// Loss and gradient of the linear per-sample objective in one pass.
pub fn linear_loss_grad_raw(
    heads: ArrayView2<'_, f64>,
    lambda: f64,
    tokens: ArrayView2<'_, f64>,
    rho: f64,
    form: RegForm,
) -> Result<(f64, SampleGradient)> {
    check_common(&heads, lambda, 0.0, &tokens, rho)?;
    let parts = linear_parts(&heads, lambda, &tokens);
    let mut loss = parts.r.dot(&parts.r);
    if rho > 0.0 {
        loss += rho * regularizer_linear_sample(heads, tokens.row(0), form)?;
    }
    let grad = linear_grad_from_parts(&parts, &heads, lambda, &tokens, rho, form)?;
    Ok((loss, grad))
}

struct SoftmaxParts {
    /// Per head: token projections `b` and the full row-stochastic attention
    /// matrix of the scores `lambda * b_l * b_k`.
    per_head: Vec<(Array1<f64>, Array2<f64>)>,
    mean: Array1<f64>,
    /// Residual of every sequence row under the shaped predictor.
    resid: Array2<f64>,
}

/// Row-softmax of the score matrix `lambda * b b^T`, with per-row max
/// subtraction for overflow safety.
fn full_softmax(b: &Array1<f64>, lambda: f64) -> Array2<f64> {
    let n = b.len();
    let mut a = Array2::zeros((n, n));
    for (l, mut row) in a.rows_mut().into_iter().enumerate() {
        let mut max = f64::NEG_INFINITY;
        for k in 0..n {
            let s = lambda * b[l] * b[k];
            row[k] = s;
            if s > max {
                max = s;
            }
        }
        let mut total = 0.0;
        for k in 0..n {
            row[k] = (row[k] - max).exp();
            total += row[k];
        }
        row /= total;
    }
    a
}

fn softmax_parts(
    heads: &ArrayView2<'_, f64>,
    lambda: f64,
    psi: f64,
    tokens: &ArrayView2<'_, f64>,
) -> SoftmaxParts {
    let mut pred = Array2::zeros(tokens.raw_dim());
    let mut per_head = Vec::with_capacity(heads.nrows());
    for head in heads.rows() {
        let b = tokens.dot(&head);
        let p = full_softmax(&b, lambda);
        pred += &p.dot(tokens);
        per_head.push((b, p));
    }
    let mean = tokens.mean_axis(Axis(0)).expect("tokens are non-empty");
    let mut resid = tokens.to_owned() - &pred;
    for mut row in resid.rows_mut() {
        row.scaled_add(psi, &mean);
    }
    SoftmaxParts {
        per_head,
        mean,
        resid,
    }
}

/// Per-sample loss of the shaped softmax predictor averaged over all
/// sequence rows, plus the shaping penalty `rho0 * r0`.
pub fn softmax_loss_raw(
    heads: ArrayView2<'_, f64>,
    lambda: f64,
    psi: f64,
    tokens: ArrayView2<'_, f64>,
    rho0: f64,
) -> Result<f64> {
    check_common(&heads, lambda, psi, &tokens, rho0)?;
    check_softmax_heads(&heads)?;
    let parts = softmax_parts(&heads, lambda, psi, &tokens);
    let mut loss = parts.resid.iter().map(|v| v * v).sum::<f64>() / tokens.nrows() as f64;
    if rho0 > 0.0 {
        loss += rho0 * regularizer_softmax_sample(heads.row(0), heads.row(1), tokens.row(0))?;
    }
    Ok(loss)
}

fn softmax_grad_from_parts(
    parts: &SoftmaxParts,
    heads: &ArrayView2<'_, f64>,
    lambda: f64,
    tokens: &ArrayView2<'_, f64>,
    rho0: f64,
) -> SampleGradient {
    let (_, d) = heads.dim();
    let l = tokens.nrows();
    let linv = 1.0 / l as f64;
    // t[(l, k)] = <R_l, X_k>; the score of row l only enters through it.
    let t = parts.resid.dot(&tokens.t());
    let x1 = tokens.row(0);
    let mut gh = Array2::zeros((2, d));
    let mut dlambda = 0.0;
    for (c, (b, p)) in parts.per_head.iter().enumerate() {
        // coeff_{lk} = p_{lk} (t_{lk} - tbar_l) is the softmax-Jacobian
        // contraction of row l; the two b-slots of the score lambda b_l b_k
        // route it into the head and temperature gradients.
        let mut v = Array1::<f64>::zeros(l);
        let mut w = Array1::<f64>::zeros(l);
        for li in 0..l {
            let prow = p.row(li);
            let trow = t.row(li);
            let tbar = prow.dot(&trow);
            let bl = b[li];
            let mut cb = 0.0;
            for k in 0..l {
                let coeff = prow[k] * (trow[k] - tbar);
                cb += coeff * b[k];
                w[k] += coeff * bl;
                dlambda -= 2.0 * linv * coeff * bl * b[k];
            }
            v[li] = cb;
        }
        v += &w;
        let gr = tokens.t().dot(&v);
        for (j, g) in gh.row_mut(c).iter_mut().enumerate() {
            *g = -2.0 * lambda * linv * gr[j];
        }
    }
    let dpsi = 2.0 * linv * parts.resid.dot(&parts.mean).sum();
    if rho0 > 0.0 {
        let a0 = heads.row(0).dot(&x1);
        let a1 = heads.row(1).dot(&x1);
        let f0 = 2.0 * (a0 - 1.0) * (a1 - 1.0) * (a1 - 1.0);
        let f1 = 2.0 * (a1 - 1.0) * (a0 - 1.0) * (a0 - 1.0);
        let overlap2 = 2.0 * heads.row(0).dot(&heads.row(1));
        for j in 0..d {
            gh[[0, j]] += rho0 * (f0 * x1[j] + overlap2 * heads[[1, j]]);
            gh[[1, j]] += rho0 * (f1 * x1[j] + overlap2 * heads[[0, j]]);
        }
    }
    SampleGradient {
        heads: gh,
        lambda: dlambda,
        psi: dpsi,
    }
}

/// Analytic gradient of [`softmax_loss_raw`] with respect to both heads, the
/// temperature, and the shift.
pub fn softmax_grad_raw(
    heads: ArrayView2<'_, f64>,
    lambda: f64,
    psi: f64,
    tokens: ArrayView2<'_, f64>,
    rho0: f64,
) -> Result<SampleGradient> {
    check_common(&heads, lambda, psi, &tokens, rho0)?;
    check_softmax_heads(&heads)?;
    let parts = softmax_parts(&heads, lambda, psi, &tokens);
    Ok(softmax_grad_from_parts(&parts, &heads, lambda, &tokens, rho0))
}

/// Loss and gradient of the shaped softmax objective in one pass.
pub fn softmax_loss_grad_raw(
    heads: ArrayView2<'_, f64>,
    lambda: f64,
    psi: f64,
    tokens: ArrayView2<'_, f64>,
    rho0: f64,
) -> Result<(f64, SampleGradient)> {
    check_common(&heads, lambda, psi, &tokens, rho0)?;
    check_softmax_heads(&heads)?;
    let parts = softmax_parts(&heads, lambda, psi, &tokens);
    let mut loss = parts.resid.iter().map(|v| v * v).sum::<f64>() / tokens.nrows() as f64;
    if rho0 > 0.0 {
        loss += rho0 * regularizer_softmax_sample(heads.row(0), heads.row(1), tokens.row(0))?;
    }
    let grad = softmax_grad_from_parts(&parts, &heads, lambda, &tokens, rho0);
    Ok((loss, grad))
}

/// Per-sample training loss for a validated bank, dispatching on the
/// predictor kind. `form` only matters for the linear kinds; the softmax
/// loss always uses its own shaping penalty.
pub fn per_sample_loss(
    kind: PredictorKind,
    bank: &HeadBank,
    tokens: ArrayView2<'_, f64>,
    rho: f64,
    form: RegForm,
) -> Result<f64> {
    match kind {
        PredictorKind::LinearMultiHead => {
            linear_loss_raw(bank.heads(), bank.lambda(), tokens, rho, form)
        }
        PredictorKind::ShapedSoftmax => {
            softmax_loss_raw(bank.heads(), bank.lambda(), bank.psi(), tokens, rho)
        }
        PredictorKind::InContext => Err(Error::Argument(
            "the in-context predictor has no trainable heads".into(),
        )),
    }
}

/// Analytic gradient of [`per_sample_loss`] for every trainable parameter.
pub fn per_sample_gradient(
    kind: PredictorKind,
    bank: &HeadBank,
    tokens: ArrayView2<'_, f64>,
    rho: f64,
    form: RegForm,
) -> Result<SampleGradient> {
    match kind {
        PredictorKind::LinearMultiHead => {
            linear_grad_raw(bank.heads(), bank.lambda(), tokens, rho, form)
        }
        PredictorKind::ShapedSoftmax => {
            softmax_grad_raw(bank.heads(), bank.lambda(), bank.psi(), tokens, rho)
        }
        PredictorKind::InContext => Err(Error::Argument(
            "the in-context predictor has no trainable heads".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixtures::{make_orthonormal_centroids, CentroidMode, MixtureSpec};
    use crate::rng::SeedStream;
    use ndarray::{array, Array2};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn random_tokens<R: Rng>(l: usize, d: usize, rng: &mut R) -> Array2<f64> {
        Array2::from_shape_fn((l, d), |_| rng.sample::<f64, _>(StandardNormal))
    }

    fn random_unit_heads<R: Rng>(k: usize, d: usize, rng: &mut R) -> Array2<f64> {
        let mut h = random_tokens(k, d, rng);
        for mut row in h.rows_mut() {
            let n = row.dot(&row).sqrt();
            row /= n;
        }
        h
    }

    #[test]
    fn orthogonal_tokens_give_zero_head_gradient() {
        // Heads along e1/e2, tokens in span{e3, e4}.
        let heads = array![[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]];
        let tokens = array![
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
            [0.0, 0.0, 0.5, -0.5]
        ];
        let g = linear_grad_raw(heads.view(), 0.7, tokens.view(), 0.0, RegForm::Pairwise).unwrap();
        assert!(g.heads.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn regularizer_vanishes_when_a_head_is_orthogonal_to_the_first_token() {
        let mut rng = SeedStream::from_seed(5).rng();
        let tokens = random_tokens(6, 4, &mut rng);
        let mut heads = random_unit_heads(2, 4, &mut rng);
        // Make head 0 orthogonal to X1.
        let x1 = tokens.row(0).to_owned();
        let x1n = (x1.dot(&x1)).sqrt();
        let mut h0 = heads.row(0).to_owned();
        let c = h0.dot(&x1) / (x1n * x1n);
        h0.scaled_add(-c, &x1);
        let n = h0.dot(&h0).sqrt();
        heads.row_mut(0).assign(&(h0 / n));
        let with = linear_grad_raw(heads.view(), 0.9, tokens.view(), 0.8, RegForm::Pairwise)
            .unwrap();
        let without =
            linear_grad_raw(heads.view(), 0.9, tokens.view(), 0.0, RegForm::Pairwise).unwrap();
        // <mu0, X1> = 0 kills both regularizer gradients.
        for j in 0..4 {
            assert!((with.heads[[1, j]] - without.heads[[1, j]]).abs() < 1e-12);
            assert!((with.heads[[0, j]] - without.heads[[0, j]]).abs() < 1e-12);
        }
    }

    fn fd_check_linear(k: usize, rho: f64, form: RegForm, seed: u64) {
        let mut rng = SeedStream::from_seed(seed).rng();
        let (l, d) = (8, 5);
        let tokens = random_tokens(l, d, &mut rng);
        let heads = random_unit_heads(k, d, &mut rng);
        let lambda = 0.8;
        let grad = linear_grad_raw(heads.view(), lambda, tokens.view(), rho, form).unwrap();
        let h = 1e-5;
        for c in 0..k {
            for j in 0..d {
                let mut hp = heads.clone();
                let mut hm = heads.clone();
                hp[[c, j]] += h;
                hm[[c, j]] -= h;
                let fp = linear_loss_raw(hp.view(), lambda, tokens.view(), rho, form).unwrap();
                let fm = linear_loss_raw(hm.view(), lambda, tokens.view(), rho, form).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                let an = grad.heads[[c, j]];
                assert!(
                    (fd - an).abs() <= 1e-5 * an.abs().max(1.0),
                    "head ({c},{j}): fd={fd} analytic={an}"
                );
            }
        }
        let fp = linear_loss_raw(heads.view(), lambda + h, tokens.view(), rho, form).unwrap();
        let fm = linear_loss_raw(heads.view(), lambda - h, tokens.view(), rho, form).unwrap();
        let fd = (fp - fm) / (2.0 * h);
        assert!((fd - grad.lambda).abs() <= 1e-5 * grad.lambda.abs().max(1.0));
    }

    #[test]
    fn linear_gradient_matches_finite_differences() {
        fd_check_linear(2, 0.0, RegForm::Pairwise, 101);
        fd_check_linear(2, 0.3, RegForm::Pairwise, 102);
        fd_check_linear(3, 0.2, RegForm::Pairwise, 103);
        fd_check_linear(3, 0.2, RegForm::Product, 104);
    }

    #[test]
    fn softmax_gradient_matches_finite_differences() {
        let mut rng = SeedStream::from_seed(77).rng();
        let (l, d) = (8, 5);
        let tokens = random_tokens(l, d, &mut rng);
        let heads = random_unit_heads(2, d, &mut rng);
        let (lambda, psi, rho0) = (3.0, 2.0, 0.5);
        let grad = softmax_grad_raw(heads.view(), lambda, psi, tokens.view(), rho0).unwrap();
        let h = 1e-5;
        for c in 0..2 {
            for j in 0..d {
                let mut hp = heads.clone();
                let mut hm = heads.clone();
                hp[[c, j]] += h;
                hm[[c, j]] -= h;
                let fp = softmax_loss_raw(hp.view(), lambda, psi, tokens.view(), rho0).unwrap();
                let fm = softmax_loss_raw(hm.view(), lambda, psi, tokens.view(), rho0).unwrap();
                let fd = (fp - fm) / (2.0 * h);
                let an = grad.heads[[c, j]];
                assert!(
                    (fd - an).abs() <= 1e-4 * an.abs().max(1.0),
                    "head ({c},{j}): fd={fd} analytic={an}"
                );
            }
        }
        let fp = softmax_loss_raw(heads.view(), lambda + h, psi, tokens.view(), rho0).unwrap();
        let fm = softmax_loss_raw(heads.view(), lambda - h, psi, tokens.view(), rho0).unwrap();
        let fd = (fp - fm) / (2.0 * h);
        assert!((fd - grad.lambda).abs() <= 1e-4 * grad.lambda.abs().max(1.0));
        let fp = softmax_loss_raw(heads.view(), lambda, psi + h, tokens.view(), rho0).unwrap();
        let fm = softmax_loss_raw(heads.view(), lambda, psi - h, tokens.view(), rho0).unwrap();
        let fd = (fp - fm) / (2.0 * h);
        assert!((fd - grad.psi).abs() <= 1e-4 * grad.psi.abs().max(1.0));
    }

    #[test]
    fn in_context_kind_has_no_gradient() {
        let mut rng = SeedStream::from_seed(9).rng();
        let stars = make_orthonormal_centroids(4, 2, CentroidMode::Canonical, &mut rng).unwrap();
        let spec = MixtureSpec::dirac(stars.clone()).unwrap();
        let seq = spec.sample_with(5, &mut rng).unwrap();
        let bank = HeadBank::new(stars, 0.5).unwrap();
        let err = per_sample_gradient(
            PredictorKind::InContext,
            &bank,
            seq.tokens.view(),
            0.0,
            RegForm::Pairwise,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
    }

    #[test]
    fn wrapper_agrees_with_the_raw_entry_points() {
        let mut rng = SeedStream::from_seed(14).rng();
        let tokens = random_tokens(7, 4, &mut rng);
        let heads = random_unit_heads(2, 4, &mut rng);
        let bank = HeadBank::with_psi(heads.clone(), 2.5, 1.5).unwrap();
        let a = per_sample_loss(
            PredictorKind::ShapedSoftmax,
            &bank,
            tokens.view(),
            0.4,
            RegForm::Pairwise,
        )
        .unwrap();
        let b = softmax_loss_raw(heads.view(), 2.5, 1.5, tokens.view(), 0.4).unwrap();
        assert_eq!(a, b);
    }
}
