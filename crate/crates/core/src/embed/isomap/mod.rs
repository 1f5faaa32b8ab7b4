//! Isomap: k-nearest-neighbor graph, shortest-path geodesics and classical
//! MDS, with a Nystrom-style extension for rows outside the fitting set.

mod geodesic;
pub use geodesic::{geodesic_distances, DistanceMatrix};
mod graph;
mod mds;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};


pub use graph::{knn_graph, NeighborGraph};
pub use mds::{classical_mds, squared_column_means, MdsResult};

use crate::data::Dataset;
use crate::error::{check_width, config, Result};
use crate::linalg::{nearest_k, Rows};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IsomapConfig {
    pub k: usize,
    /// Refuse fits whose m x m geodesic matrix would exceed this many bytes.
    pub max_geodesic_bytes: Option<u64>,
}

impl Default for IsomapConfig {
    fn default() -> Self {
        IsomapConfig {
            k: 5,
            max_geodesic_bytes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsomapModel {
    pub train: Rows,
    pub k: usize,
    pub geodesic: DistanceMatrix,
    /// Non-increasing; zero where the MDS eigenvalue was not positive.
    pub eigenvalues: Vec<f64>,
    /// m x d.
    pub vectors: DMatrix<f64>,
    /// Column means of the squared geodesic matrix.
    pub sq_col_means: Vec<f64>,
    /// Embedding of the fitting rows, m x d.
    pub embedding: DMatrix<f64>,
    pub augmentations: usize,
    pub positive: usize,
}

impl IsomapModel {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn width(&self) -> usize {
        self.train.width()
    }

    pub fn deficit(&self) -> usize {
        self.dim() - self.positive
    }
}

pub fn isomap_fit(ds: &Dataset, d: usize, k: usize) -> Result<IsomapModel> {
    isomap_fit_matrix(ds.features(), d, &IsomapConfig { k, ..Default::default() })
}

pub fn isomap_fit_matrix(x: &DMatrix<f64>, d: usize, cfg: &IsomapConfig) -> Result<IsomapModel> {
    let m = x.nrows();
    if let Some(budget) = cfg.max_geodesic_bytes {
        let need = (m as u64) * (m as u64) * 8;
        if need > budget {
            return Err(config(format!(
                "geodesic matrix for {m} rows needs {need} bytes, over the budget of {budget}"
            )));
        }
    }
    if d == 0 || d > m {
        return Err(config(format!("Isomap dimension {d} must be in 1..={m}")));
    }
    let train = Rows::new(x);
    let graph = knn_graph(&train, cfg.k)?;
    let geodesic = geodesic_distances(&graph)?;
    let mds = classical_mds(&geodesic, d)?;
    let sq_col_means = squared_column_means(&geodesic);
    Ok(IsomapModel {
        train,
        k: cfg.k,
        geodesic,
        eigenvalues: mds.eigenvalues,
        vectors: mds.vectors,
        sq_col_means,
        embedding: mds.embedding,
        augmentations: graph.augmentations.len(),
        positive: mds.positive,
    })
}

const TRANSFORM_BLOCK: usize = 256;

/// Embeds new rows. Squared geodesics from a query to every fitting row are
/// approximated through its `k` nearest fitting rows,
/// `g2_j = min_c (|x - c| + D[c][j])^2`, and projected with
/// `y_i = sum_j V_i[j] (mean_col(D^2)_j - g2_j) / (2 sqrt(lambda_i))`.
pub fn isomap_transform(model: &IsomapModel, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_width(model.width(), rows.ncols())?;
    let m = model.train.len();
    let d = model.dim();
    let queries = Rows::new(rows);
    let anchors = nearest_k(&model.train, &queries, model.k, false);
    // offset_i = sum_j V_i[j] * mean_col(D^2)_j
    let offsets: Vec<f64> = (0..d)
        .map(|i| {
            model
                .vectors
                .column(i)
                .iter()
                .zip(&model.sq_col_means)
                .map(|(v, c)| v * c)
                .sum()
        })
        .collect();
    let mut out = DMatrix::zeros(rows.nrows(), d);
    let mut start = 0;
    while start < rows.nrows() {
        let end = (start + TRANSFORM_BLOCK).min(rows.nrows());
        let mut g2 = DMatrix::<f64>::zeros(end - start, m);
        for (bi, q) in (start..end).enumerate() {
            let mut best = vec![f64::INFINITY; m];
            for &(c, dist) in &anchors[q] {
                for (b, dc) in best.iter_mut().zip(model.geodesic.row(c)) {
                    let via = dist + dc;
                    if via < *b {
                        *b = via;
                    }
                }
            }
            for (j, b) in best.iter().enumerate() {
                g2[(bi, j)] = b * b;
            }
        }
        let proj = g2 * &model.vectors;
        for bi in 0..end - start {
            for i in 0..d {
                let lam = model.eigenvalues[i];
                if lam > 0.0 {
                    out[(start + bi, i)] = (offsets[i] - proj[(bi, i)]) / (2.0 * lam.sqrt());
                }
            }
        }
        start = end;
    }
    Ok(out)
}
