//! Variational autoencoder embedding (one ReLU hidden layer per side, Gaussian latent).

mod net;
mod train;

pub use net::{bernoulli_nll, encode_mean, gaussian_kl, loss_and_grad, sigmoid, softplus, vae_loss, ElboParts, VaeParams};
pub use train::{dataset_loss, vae_fit_matrix, EpochLoss, VaeFit, VaeTrainConfig};

use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::error::{check_width, Result};

pub fn vae_fit(ds: &Dataset, d: usize, cfg: &VaeTrainConfig) -> Result<VaeFit> {
    vae_fit_matrix(ds.features(), ds.feature_kind(), d, cfg)
}

/// Encoder means; no sampling.
pub fn vae_encode(params: &VaeParams, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_width(params.input_dim(), rows.ncols())?;
    Ok(encode_mean(params, rows))
}
