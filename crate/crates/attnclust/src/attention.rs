//! Attention forward passes: linear multi-head, shaped softmax, in-context.
//!
//! All predictors map an `L x d` token matrix to an `L x d` prediction
//! matrix. Scores are rank-one products `<X_l, mu><X_k, mu>` through a unit
//! head `mu`, which makes every forward pass invariant to the sign of each
//! head. The forwards themselves do not validate head norms — finite
//! difference probes deliberately step off the sphere — normalization is
//! enforced when heads enter a [`HeadBank`].

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Unit-norm tolerance for heads stored in a [`HeadBank`].
pub const HEAD_TOL: f64 = 1e-9;

/// A set of `K` unit-norm attention heads with a shared inverse temperature
/// `lambda > 0` and a shaping offset `psi` (used only by the shaped softmax).
#[derive(Clone, Debug)]
pub struct HeadBank {
    heads: Array2<f64>,
    lambda: f64,
    psi: f64,
}

impl HeadBank {
    /// Bank with `psi = 0`. Heads are rows and must be unit norm within
    /// [`HEAD_TOL`]; `lambda` must be positive and finite.
    pub fn new(heads: Array2<f64>, lambda: f64) -> Result<Self> {
        Self::with_psi(heads, lambda, 0.0)
    }

    /// Bank with an explicit shaping offset.
    pub fn with_psi(heads: Array2<f64>, lambda: f64, psi: f64) -> Result<Self> {
        check_heads(&heads)?;
        check_lambda(lambda)?;
        check_psi(psi)?;
        Ok(Self { heads, lambda, psi })
    }

    /// Head matrix, one unit row per head.
    pub fn heads(&self) -> ArrayView2<'_, f64> {
        self.heads.view()
    }

    /// Inverse temperature.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Shaping offset.
    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// Number of heads `K`.
    pub fn n_heads(&self) -> usize {
        self.heads.nrows()
    }

    /// Ambient dimension `d`.
    pub fn dim(&self) -> usize {
        self.heads.ncols()
    }

    /// Swaps in a new head matrix, revalidating unit norms.
    pub fn replace_heads(&mut self, heads: Array2<f64>) -> Result<()> {
        check_heads(&heads)?;
        self.heads = heads;
        Ok(())
    }

    /// Updates the inverse temperature (must stay positive).
    pub fn set_lambda(&mut self, lambda: f64) -> Result<()> {
        check_lambda(lambda)?;
        self.lambda = lambda;
        Ok(())
    }

    /// Updates the shaping offset (must stay finite).
    pub fn set_psi(&mut self, psi: f64) -> Result<()> {
        check_psi(psi)?;
        self.psi = psi;
        Ok(())
    }
}

fn check_heads(heads: &Array2<f64>) -> Result<()> {
    let (k, d) = heads.dim();
    if k == 0 || d == 0 {
        return Err(Error::Argument(format!(
            "need a non-empty head matrix, got {k}x{d}"
        )));
    }
    for (i, row) in heads.rows().into_iter().enumerate() {
        let norm = row.dot(&row).sqrt();
        if (norm - 1.0).abs() > HEAD_TOL {
            return Err(Error::Domain(format!(
                "head {i} has norm {norm}, expected unit norm within {HEAD_TOL:e}"
            )));
        }
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain(format!(
            "inverse temperature must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

fn check_psi(psi: f64) -> Result<()> {
    if !psi.is_finite() {
        return Err(Error::Domain(format!(
            "shaping offset must be finite, got {psi}"
        )));
    }
    Ok(())
}

fn check_tokens(tokens: &ArrayView2<'_, f64>, dim: usize) -> Result<()> {
    if tokens.nrows() == 0 {
        return Err(Error::EmptySequence(
            "forward pass needs at least one token".into(),
        ));
    }
    if tokens.ncols() != dim {
        return Err(Error::Dimension(format!(
            "tokens have dimension {}, expected {dim}",
            tokens.ncols()
        )));
    }
    Ok(())
}

/// Which forward pass [`predictor_forward`] dispatches to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PredictorKind {
    /// Sum of rank-one linear heads, `(2 lambda / L) sum_k w_k X_k` per row.
    LinearMultiHead,
    /// Two softmax heads plus a `-(psi / L) sum_k X_k` shaping term.
    ShapedSoftmax,
    /// Gram-matrix predictor `(2 lambda / L) X X^T X`; ignores the heads.
    InContext,
}

/// Single linear head: row `l` is `(2 lambda / L) sum_k <X_l,mu><X_k,mu> X_k`.
pub fn linear_head_forward(
    tokens: ArrayView2<'_, f64>,
    mu: ArrayView1<'_, f64>,
    lambda: f64,
) -> Result<Array2<f64>> {
    check_tokens(&tokens, mu.len())?;
    let l = tokens.nrows() as f64;
    let b = tokens.dot(&mu);
    // sum_k b_k X_k, shared by every output row.
    let v = tokens.t().dot(&b);
    let mut out = Array2::zeros(tokens.raw_dim());
    for (mut row, &bl) in out.rows_mut().into_iter().zip(b.iter()) {
        row.assign(&v);
        row *= 2.0 * lambda * bl / l;
    }
    Ok(out)
}

/// Sum of the bank's linear heads at the bank's temperature.
pub fn linear_predictor_forward(
    bank: &HeadBank,
    tokens: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    check_tokens(&tokens, bank.dim())?;
    let l = tokens.nrows() as f64;
    // B = X H^T holds <X_l, mu_c>; W = B B^T holds the summed scores.
    let b = tokens.dot(&bank.heads.t());
    let w = b.dot(&b.t());
    let mut out = w.dot(&tokens);
    out *= 2.0 * bank.lambda / l;
    Ok(out)
}

/// Row-stochastic attention matrix of one softmax head:
/// `A_{lk} = softmax_k(lambda <X_l,mu><X_k,mu>)`, computed with per-row
/// max subtraction.
pub fn softmax_attention_matrix(
    tokens: ArrayView2<'_, f64>,
    mu: ArrayView1<'_, f64>,
    lambda: f64,
) -> Result<Array2<f64>> {
    check_tokens(&tokens, mu.len())?;
    let b = tokens.dot(&mu);
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
    Ok(a)
}

/// Single softmax head: the attention matrix applied to the tokens.
pub fn softmax_head_forward(
    tokens: ArrayView2<'_, f64>,
    mu: ArrayView1<'_, f64>,
    lambda: f64,
) -> Result<Array2<f64>> {
    let a = softmax_attention_matrix(tokens, mu, lambda)?;
    Ok(a.dot(&tokens))
}

/// Shaped softmax predictor for a two-head bank:
/// `H_soft(mu_0) + H_soft(mu_1) - (psi / L) * sum_k X_k` in every row.
/// Banks with `K != 2` are rejected.
pub fn shaped_softmax_predictor_forward(
    bank: &HeadBank,
    tokens: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    if bank.n_heads() != 2 {
        return Err(Error::Config(format!(
            "shaped softmax needs exactly two heads, bank has {}",
            bank.n_heads()
        )));
    }
    check_tokens(&tokens, bank.dim())?;
    let mut out = softmax_head_forward(tokens, bank.heads.row(0), bank.lambda)?;
    out += &softmax_head_forward(tokens, bank.heads.row(1), bank.lambda)?;
    let mean = tokens.mean_axis(Axis(0)).expect("non-empty tokens");
    for mut row in out.rows_mut() {
        row.scaled_add(-bank.psi, &mean);
    }
    Ok(out)
}

/// Head-free Gram predictor: row `l` is `(2 lambda / L) sum_k <X_l,X_k> X_k`.
pub fn ctx_forward(tokens: ArrayView2<'_, f64>, lambda: f64) -> Result<Array2<f64>> {
    if tokens.nrows() == 0 {
        return Err(Error::EmptySequence(
            "forward pass needs at least one token".into(),
        ));
    }
    let l = tokens.nrows() as f64;
    let w = tokens.dot(&tokens.t());
    let mut out = w.dot(&tokens);
    out *= 2.0 * lambda / l;
    Ok(out)
}

/// Dispatches on the predictor kind. `InContext` uses only the bank's
/// temperature and ignores its heads.
pub fn predictor_forward(
    kind: PredictorKind,
    bank: &HeadBank,
    tokens: ArrayView2<'_, f64>,
) -> Result<Array2<f64>> {
    match kind {
        PredictorKind::LinearMultiHead => linear_predictor_forward(bank, tokens),
        PredictorKind::ShapedSoftmax => shaped_softmax_predictor_forward(bank, tokens),
        PredictorKind::InContext => ctx_forward(tokens, bank.lambda),
    }
}

/// First output row only, avoiding the `L x L` intermediates. Matches row 0
/// of [`predictor_forward`] up to floating-point summation order.
pub fn predictor_first_row(
    kind: PredictorKind,
    bank: &HeadBank,
    tokens: ArrayView2<'_, f64>,
) -> Result<Array1<f64>> {
    match kind {
        PredictorKind::LinearMultiHead => {
            check_tokens(&tokens, bank.dim())?;
            let l = tokens.nrows() as f64;
            let b1 = bank.heads.dot(&tokens.row(0));
            // w_k = sum_c <X_1,mu_c><X_k,mu_c> = <X_k, H^T b1>.
            let v = bank.heads.t().dot(&b1);
            let w = tokens.dot(&v);
            let mut out = tokens.t().dot(&w);
            out *= 2.0 * bank.lambda / l;
            Ok(out)
        }
        PredictorKind::ShapedSoftmax => {
            if bank.n_heads() != 2 {
                return Err(Error::Config(format!(
                    "shaped softmax needs exactly two heads, bank has {}",
                    bank.n_heads()
                )));
            }
            check_tokens(&tokens, bank.dim())?;
            let l = tokens.nrows() as f64;
            let mut out = Array1::zeros(bank.dim());
            for head in bank.heads.rows() {
                let b = tokens.dot(&head);
                let p = softmax_row(&b, bank.lambda);
                out += &tokens.t().dot(&p);
            }
            let sum = tokens.sum_axis(Axis(0));
            out.scaled_add(-bank.psi / l, &sum);
            Ok(out)
        }
        PredictorKind::InContext => {
            if tokens.nrows() == 0 {
                return Err(Error::EmptySequence(
                    "forward pass needs at least one token".into(),
                ));
            }
            let l = tokens.nrows() as f64;
            let w = tokens.dot(&tokens.row(0));
            let mut out = tokens.t().dot(&w);
            out *= 2.0 * bank.lambda / l;
            Ok(out)
        }
    }
}

/// Softmax weights of the first row given the head projections `b`.
pub(crate) fn softmax_row(b: &Array1<f64>, lambda: f64) -> Array1<f64> {
    let b1 = b[0];
    let mut p = Array1::zeros(b.len());
    let mut max = f64::NEG_INFINITY;
    for (k, &bk) in b.iter().enumerate() {
        let s = lambda * b1 * bk;
        p[k] = s;
        if s > max {
            max = s;
        }
    }
    let mut total = 0.0;
    for v in p.iter_mut() {
        *v = (*v - max).exp();
        total += *v;
    }
    p /= total;
    p
}
