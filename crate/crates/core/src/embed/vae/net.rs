//! Network, loss and analytic gradients of the single-hidden-layer VAE.

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::data::FeatureKind;
use crate::error::{Error, Result};
use crate::seed::Rng;

/// Encoder `x -> relu(W1 x + b1) -> (mu, logvar)` and decoder
/// `z -> relu(W2 z + b2) -> W_out h + b_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct VaeParams {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w_mu: DMatrix<f64>,
    pub b_mu: DVector<f64>,
    pub w_logvar: DMatrix<f64>,
    pub b_logvar: DVector<f64>,
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
    pub w_out: DMatrix<f64>,
    pub b_out: DVector<f64>,
}

/// Negative ELBO split into its two terms, averaged over a batch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboParts {
    pub reconstruction: f64,
    pub kl: f64,
    pub total: f64,
}

impl VaeParams {
    pub fn zeros(p: usize, hidden: usize, d: usize) -> Self {
        VaeParams {
            w1: DMatrix::zeros(hidden, p),
            b1: DVector::zeros(hidden),
            w_mu: DMatrix::zeros(d, hidden),
            b_mu: DVector::zeros(d),
            w_logvar: DMatrix::zeros(d, hidden),
            b_logvar: DVector::zeros(d),
            w2: DMatrix::zeros(hidden, d),
            b2: DVector::zeros(hidden),
            w_out: DMatrix::zeros(p, hidden),
            b_out: DVector::zeros(p),
        }
    }

    /// Uniform `(-1/sqrt(fan_in), 1/sqrt(fan_in))` for every weight and bias.
    pub fn init(p: usize, hidden: usize, d: usize, rng: &mut Rng) -> Self {
        let mut params = VaeParams::zeros(p, hidden, d);
        let fan_ins = [p, p, hidden, hidden, hidden, hidden, d, d, hidden, hidden];
        for (t, fan_in) in params.tensors_mut().into_iter().zip(fan_ins) {
            let bound = 1.0 / (fan_in as f64).sqrt();
            t.iter_mut().for_each(|v| *v = rng.random_range(-bound..bound));
        }
        params
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.nrows()
    }

    pub fn latent_dim(&self) -> usize {
        self.w_mu.nrows()
    }

    pub fn tensors(&self) -> [&[f64]; 10] {
        [
            self.w1.as_slice(),
            self.b1.as_slice(),
            self.w_mu.as_slice(),
            self.b_mu.as_slice(),
            self.w_logvar.as_slice(),
            self.b_logvar.as_slice(),
            self.w2.as_slice(),
            self.b2.as_slice(),
            self.w_out.as_slice(),
            self.b_out.as_slice(),
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut [f64]; 10] {
        [
            self.w1.as_mut_slice(),
            self.b1.as_mut_slice(),
            self.w_mu.as_mut_slice(),
            self.b_mu.as_mut_slice(),
            self.w_logvar.as_mut_slice(),
            self.b_logvar.as_mut_slice(),
            self.w2.as_mut_slice(),
            self.b2.as_mut_slice(),
            self.w_out.as_mut_slice(),
            self.b_out.as_mut_slice(),
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

fn affine(w: &DMatrix<f64>, x: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let mut a = w * x;
    for mut col in a.column_iter_mut() {
        col += b;
    }
    a
}

fn relu(a: &DMatrix<f64>) -> DMatrix<f64> {
    a.map(|v| v.max(0.0))
}

fn relu_backward(grad: &mut DMatrix<f64>, pre: &DMatrix<f64>) {
    grad.zip_apply(pre, |g, a| {
        if a <= 0.0 {
            *g = 0.0
        }
    });
}

fn row_sums(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_iterator(m.nrows(), m.row_iter().map(|r| r.sum()))
}

/// `log(1 + exp(l))` without overflow.
pub fn softplus(l: f64) -> f64 {
    l.max(0.0) + (-l.abs()).exp().ln_1p()
}

pub fn sigmoid(l: f64) -> f64 {
    if l >= 0.0 {
        1.0 / (1.0 + (-l).exp())
    } else {
        let e = l.exp();
        e / (1.0 + e)
    }
}

/// Bernoulli cross-entropy `-(x log s(l) + (1-x) log(1 - s(l)))` from a logit.
pub fn bernoulli_nll(x: f64, logit: f64) -> f64 {
    softplus(logit) - x * logit
}

/// KL(N(mu, exp(logvar)) || N(0, 1)) for one latent coordinate.
pub fn gaussian_kl(mu: f64, logvar: f64) -> f64 {
    0.5 * (mu * mu + logvar.exp_m1() - logvar)
}

/// Encoder means for rows (n x p) -> n x d.
pub fn encode_mean(params: &VaeParams, rows: &DMatrix<f64>) -> DMatrix<f64> {
    let x = rows.transpose();
    let h1 = relu(&affine(&params.w1, &x, &params.b1));
    affine(&params.w_mu, &h1, &params.b_mu).transpose()
}

/// Loss of a batch (rows are samples) with externally supplied standard
/// normal draws (batch x d), and optionally its gradient.
pub fn loss_and_grad(
    params: &VaeParams,
    batch: &DMatrix<f64>,
    kind: FeatureKind,
    noise: &DMatrix<f64>,
    want_grad: bool,
) -> (ElboParts, Option<VaeParams>) {
    let b = batch.nrows() as f64;
    let x = batch.transpose();
    let eps = noise.transpose();

    let a1 = affine(&params.w1, &x, &params.b1);
    let h1 = relu(&a1);
    let mu = affine(&params.w_mu, &h1, &params.b_mu);
    let lv = affine(&params.w_logvar, &h1, &params.b_logvar);
    let sd = lv.map(|v| (0.5 * v).exp());
    let z = &mu + sd.component_mul(&eps);
    let a2 = affine(&params.w2, &z, &params.b2);
    let h2 = relu(&a2);
    let out = affine(&params.w_out, &h2, &params.b_out);

    let recon_sum: f64 = match kind {
        FeatureKind::ImagePixelsUnitInterval => x.iter().zip(out.iter()).map(|(&xi, &o)| bernoulli_nll(xi, o)).sum(),
        FeatureKind::TabularStandardized => 0.5 * x.iter().zip(out.iter()).map(|(&xi, &o)| (xi - o).powi(2)).sum::<f64>(),
    };
    let kl_sum: f64 = mu.iter().zip(lv.iter()).map(|(&m, &l)| gaussian_kl(m, l)).sum();
    let parts = ElboParts {
        reconstruction: recon_sum / b,
        kl: kl_sum / b,
        total: (recon_sum + kl_sum) / b,
    };
    if !want_grad {
        return (parts, None);
    }

    let mut d_out = match kind {
        FeatureKind::ImagePixelsUnitInterval => out.zip_map(&x, |o, xi| sigmoid(o) - xi),
        FeatureKind::TabularStandardized => &out - &x,
    };
    d_out /= b;
    let d_w_out = &d_out * h2.transpose();
    let d_b_out = row_sums(&d_out);
    let mut d_h2 = params.w_out.transpose() * &d_out;
    relu_backward(&mut d_h2, &a2);
    let d_w2 = &d_h2 * z.transpose();
    let d_b2 = row_sums(&d_h2);
    let d_z = params.w2.transpose() * &d_h2;
    let d_mu = &d_z + &mu / b;
    let mut d_lv = d_z.component_mul(&eps).component_mul(&sd) * 0.5;
    d_lv.zip_apply(&lv, |g, l| *g += 0.5 * l.exp_m1() / b);
    let d_w_mu = &d_mu * h1.transpose();
    let d_b_mu = row_sums(&d_mu);
    let d_w_lv = &d_lv * h1.transpose();
    let d_b_lv = row_sums(&d_lv);
    let mut d_h1 = params.w_mu.transpose() * &d_mu + params.w_logvar.transpose() * &d_lv;
    relu_backward(&mut d_h1, &a1);
    let d_w1 = &d_h1 * x.transpose();
    let d_b1 = row_sums(&d_h1);

    let grads = VaeParams {
        w1: d_w1,
        b1: d_b1,
        w_mu: d_w_mu,
        b_mu: d_b_mu,
        w_logvar: d_w_lv,
        b_logvar: d_b_lv,
        w2: d_w2,
        b2: d_b2,
        w_out: d_w_out,
        b_out: d_b_out,
    };
    (parts, Some(grads))
}

/// Batch loss, failing on non-finite values or negative KL.
pub fn vae_loss(params: &VaeParams, batch: &DMatrix<f64>, kind: FeatureKind, noise: &DMatrix<f64>) -> Result<ElboParts> {
    crate::error::check_width(params.input_dim(), batch.ncols())?;
    if noise.shape() != (batch.nrows(), params.latent_dim()) {
        return Err(Error::Shape {
            expected: batch.nrows() * params.latent_dim(),
            actual: noise.len(),
        });
    }
    let (parts, _) = loss_and_grad(params, batch, kind, noise, false);
    check_parts(&parts, 0)?;
    Ok(parts)
}

pub(crate) fn check_parts(parts: &ElboParts, batch_index: usize) -> Result<()> {
    if !parts.total.is_finite() {
        return Err(Error::Numeric(format!("non-finite VAE loss at batch {batch_index}")));
    }
    if parts.kl < 0.0 {
        return Err(Error::Numeric(format!("negative KL {} at batch {batch_index}", parts.kl)));
    }
    Ok(())
}
