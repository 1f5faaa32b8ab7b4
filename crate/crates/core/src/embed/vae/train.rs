//! Adam training loop with seeded shuffling and best-epoch snapshots.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::net::{check_parts, loss_and_grad, ElboParts, VaeParams};
use crate::data::FeatureKind;
use crate::error::{Error, Result};
use crate::seed::{self, Part};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VaeTrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for VaeTrainConfig {
    fn default() -> Self {
        VaeTrainConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            batch_size: 100,
            epochs: 200,
            patience: 20,
            hidden: 200,
            seed: 0,
        }
    }
}

impl VaeTrainConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        let positive = [self.learning_rate, self.beta1, self.beta2, self.epsilon];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(crate::error::config("VAE optimizer constants must be positive and finite"));
        }
        if self.beta1 >= 1.0 || self.beta2 >= 1.0 {
            return Err(crate::error::config("Adam betas must lie in (0, 1)"));
        }
        if self.batch_size == 0 || self.hidden == 0 || self.patience == 0 {
            return Err(crate::error::config("batch_size, hidden and patience must be positive"));
        }
        if self.batch_size > n {
            return Err(crate::error::config(format!(
                "batch_size {} exceeds training set size {n}",
                self.batch_size
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub reconstruction: f64,
    pub kl: f64,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub struct VaeFit {
    pub params: VaeParams,
    pub curve: Vec<EpochLoss>,
    /// Epoch whose end-of-epoch parameters were kept; `None` keeps the initialization.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl VaeFit {
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("epoch,reconstruction,kl,total\n");
        for e in &self.curve {
            out.push_str(&format!("{},{},{},{}\n", e.epoch, e.reconstruction, e.kl, e.total));
        }
        out
    }
}

struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    t: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    fn new(cfg: &VaeTrainConfig, params: &VaeParams) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Adam {
            lr: cfg.learning_rate,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            epsilon: cfg.epsilon,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    fn step(&mut self, params: &mut VaeParams, grads: &VaeParams) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for (k, (p, g)) in params.tensors_mut().into_iter().zip(grads.tensors()).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                p[i] -= self.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + self.epsilon);
            }
        }
    }
}

/// Train on the rows of `x` (n x p).
pub fn vae_fit_matrix(x: &DMatrix<f64>, kind: FeatureKind, d: usize, cfg: &VaeTrainConfig) -> Result<VaeFit> {
    let (n, p) = x.shape();
    cfg.validate(n)?;
    if d == 0 {
        return Err(crate::error::config("latent dimension must be positive"));
    }
    let mut init_rng = seed::stream(cfg.seed, &[Part::Tag("vae/init")]);
    let mut params = VaeParams::init(p, cfg.hidden, d, &mut init_rng);
    let mut noise_rng = seed::stream(cfg.seed, &[Part::Tag("vae/noise")]);
    let mut adam = Adam::new(cfg, &params);

    let mut best = params.clone();
    let mut best_total = f64::INFINITY;
    let mut best_epoch = None;
    let mut curve = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch_index = 0usize;
    let mut stopped_early = false;

    for epoch in 0..cfg.epochs {
        let mut shuffle_rng = seed::stream(cfg.seed, &[Part::Tag("vae/shuffle"), Part::Num(epoch as u64)]);
        order.sort_unstable();
        order.shuffle(&mut shuffle_rng);
        let mut sums = (0.0, 0.0, 0.0);
        for chunk in order.chunks(cfg.batch_size) {
            let batch = x.select_rows(chunk.iter());
            let noise = DMatrix::from_fn(chunk.len(), d, |_, _| StandardNormal.sample(&mut noise_rng));
            let (parts, grads) = loss_and_grad(&params, &batch, kind, &noise, true);
            if let Err(e) = check_parts(&parts, batch_index) {
                let last = curve.last().map_or("none".to_string(), |e: &EpochLoss| e.epoch.to_string());
                return Err(Error::Numeric(format!("{e}; last finite epoch: {last}")));
            }
            adam.step(&mut params, &grads.expect("gradient requested"));
            let w = chunk.len() as f64;
            sums.0 += w * parts.reconstruction;
            sums.1 += w * parts.kl;
            sums.2 += w * parts.total;
            batch_index += 1;
        }
        if !params.is_finite() {
            return Err(Error::Numeric(format!(
                "VAE parameters diverged in epoch {epoch} (batch {})",
                batch_index - 1
            )));
        }
        let nf = n as f64;
        let row = EpochLoss {
            epoch,
            reconstruction: sums.0 / nf,
            kl: sums.1 / nf,
            total: sums.2 / nf,
        };
        curve.push(row);
        log::debug!("vae epoch {epoch}: total {:.6}", row.total);
        if row.total < best_total {
            best_total = row.total;
            best = params.clone();
            best_epoch = Some(epoch);
        } else if best_epoch.is_some_and(|b| epoch - b >= cfg.patience) {
            stopped_early = true;
            break;
        }
    }
    if cfg.epochs > 0 {
        params = best;
    }
    Ok(VaeFit {
        params,
        curve,
        best_epoch,
        stopped_early,
    })
}

/// Average loss over the whole matrix with a fixed noise stream, used to compare parameter sets.
pub fn dataset_loss(params: &VaeParams, x: &DMatrix<f64>, kind: FeatureKind, noise_seed: u64) -> ElboParts {
    let mut rng = seed::stream(noise_seed, &[Part::Tag("vae/eval")]);
    let noise = DMatrix::from_fn(x.nrows(), params.latent_dim(), |_, _| StandardNormal.sample(&mut rng));
    loss_and_grad(params, x, kind, &noise, false).0
}
