//! Unsupervised embeddings fitted on an unlabeled pool and applied to new rows.

pub mod isomap;
pub mod pca;
pub mod vae;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{Dataset, EmbedderKind};
use crate::error::{check_width, Result};

pub use isomap::{DistanceMatrix, isomap_fit, isomap_fit_matrix, isomap_transform, IsomapConfig, IsomapModel};
pub use pca::{pca_fit, pca_fit_matrix, pca_inverse, pca_transform, PcaModel, PcaSolver};
pub use vae::{vae_encode, vae_fit, vae_fit_matrix, VaeFit, VaeParams, VaeTrainConfig};

/// A fitted embedding of any kind. `Raw` passes features through unchanged.
#[derive(Debug, Clone)]
pub enum EmbeddingModel {
    Pca(PcaModel),
    Isomap(IsomapModel),
    Vae { params: VaeParams, config: VaeTrainConfig },
    Raw { width: usize },
}

impl EmbeddingModel {
    pub fn kind(&self) -> EmbedderKind {
        match self {
            EmbeddingModel::Pca(_) => EmbedderKind::Pca,
            EmbeddingModel::Isomap(_) => EmbedderKind::Isomap,
            EmbeddingModel::Vae { .. } => EmbedderKind::Vae,
            EmbeddingModel::Raw { .. } => EmbedderKind::Raw,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            EmbeddingModel::Pca(m) => m.width(),
            EmbeddingModel::Isomap(m) => m.width(),
            EmbeddingModel::Vae { params, .. } => params.input_dim(),
            EmbeddingModel::Raw { width } => *width,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            EmbeddingModel::Pca(m) => m.dim(),
            EmbeddingModel::Isomap(m) => m.dim(),
            EmbeddingModel::Vae { params, .. } => params.latent_dim(),
            EmbeddingModel::Raw { width } => *width,
        }
    }

    pub fn transform(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            EmbeddingModel::Pca(m) => pca_transform(m, rows),
            EmbeddingModel::Isomap(m) => isomap_transform(m, rows),
            EmbeddingModel::Vae { params, .. } => vae_encode(params, rows),
            EmbeddingModel::Raw { width } => {
                check_width(*width, rows.ncols())?;
                Ok(rows.clone())
            }
        }
    }
}

/// Hyperparameters of the embedders that have any.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedderSettings {
    pub isomap: IsomapConfig,
    pub vae: VaeTrainConfig,
}

#[derive(Debug, Clone)]
pub struct FittedEmbedding {
    pub model: EmbeddingModel,
    /// Fit diagnostics for result metadata.
    pub info: serde_json::Value,
    /// VAE training curve, if any.
    pub curve: Option<VaeFit>,
}

/// Fits `kind` on every row of `pool`. `seed` drives the VAE; the other
/// embedders are deterministic. The VAE batch size is capped at the pool size.
pub fn fit_embedding(
    kind: EmbedderKind,
    pool: &Dataset,
    d: usize,
    settings: &EmbedderSettings,
    seed: u64,
) -> Result<FittedEmbedding> {
    let fitted = match kind {
        EmbedderKind::Pca => {
            let m = pca_fit(pool, d)?;
            let info = json!({ "explained_variance_total": m.explained_variance.iter().sum::<f64>() });
            FittedEmbedding {
                model: EmbeddingModel::Pca(m),
                info,
                curve: None,
            }
        }
        EmbedderKind::Isomap => {
            let m = isomap_fit_matrix(pool.features(), d, &settings.isomap)?;
            let info = json!({
                "k": m.k,
                "graph_augmentations": m.augmentations,
                "positive_eigenvalues": m.positive,
                "dimension_deficit": m.deficit(),
            });
            FittedEmbedding {
                model: EmbeddingModel::Isomap(m),
                info,
                curve: None,
            }
        }
        EmbedderKind::Vae => {
            let config = VaeTrainConfig {
                seed,
                batch_size: settings.vae.batch_size.min(pool.n()),
                ..settings.vae.clone()
            };
            let fit = vae_fit(pool, d, &config)?;
            let info = json!({
                "seed": seed,
                "batch_size": config.batch_size,
                "epochs_run": fit.curve.len(),
                "best_epoch": fit.best_epoch,
                "best_loss": fit.best_epoch.map(|e| fit.curve[e].total),
                "stopped_early": fit.stopped_early,
            });
            FittedEmbedding {
                model: EmbeddingModel::Vae {
                    params: fit.params.clone(),
                    config,
                },
                info,
                curve: Some(fit),
            }
        }
        EmbedderKind::Raw => FittedEmbedding {
            model: EmbeddingModel::Raw { width: pool.p() },
            info: json!({}),
            curve: None,
        },
    };
    Ok(fitted)
}

impl EmbeddingModel {
    /// Rough heap footprint, used to bound caches.
    pub fn approx_bytes(&self) -> usize {
        let floats = match self {
            EmbeddingModel::Pca(m) => m.components.len() + m.mean.len() + m.explained_variance.len(),
            EmbeddingModel::Isomap(m) => {
                let n = m.geodesic.len();
                n * n + n * m.width() + 2 * n * m.dim() + n
            }
            EmbeddingModel::Vae { params, .. } => params.tensors().iter().map(|t| t.len()).sum(),
            EmbeddingModel::Raw { .. } => 0,
        };
        floats * 8
    }
}
