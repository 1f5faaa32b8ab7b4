use nalgebra::DMatrix;

use super::geodesic::DistanceMatrix;
use crate::error::Result;
use crate::linalg::{lanczos_top, symmetric_top_dense};

/// Above this size the centered Gram matrix is never formed; its top
/// eigenpairs come from Lanczos on a matrix-free operator.
const DENSE_LIMIT: usize = 400;
const LANCZOS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct MdsResult {
    /// Top-`d` eigenvalues of the double-centered matrix, non-increasing,
    /// with non-positive values clamped to zero.
    pub eigenvalues: Vec<f64>,
    /// m x d eigenvectors; columns for clamped eigenvalues are zero.
    pub vectors: DMatrix<f64>,
    /// m x d coordinates, column i = sqrt(eigenvalue i) * vector i.
    pub embedding: DMatrix<f64>,
    /// Number of strictly positive eigenvalues among the top `d`.
    pub positive: usize,
}

impl MdsResult {
    pub fn deficit(&self) -> usize {
        self.eigenvalues.len() - self.positive
    }
}

/// Classical multidimensional scaling of a symmetric distance matrix:
/// top eigenpairs of `B = -1/2 J (D o D) J`, `J = I - 11^T / m`.
pub fn classical_mds(d: &DistanceMatrix, dim: usize) -> Result<MdsResult> {
    let m = d.len();
    let dim = dim.min(m);
    let (values, vectors) = if m <= DENSE_LIMIT {
        symmetric_top_dense(double_centered(d), dim)
    } else {
        lanczos_top(m, dim, LANCZOS_TOL, |x, y| apply_centered(d, x, y))?
    };
    let top = values.first().copied().unwrap_or(0.0).abs();
    let cutoff = 1e-10 * top;
    let mut eigenvalues = Vec::with_capacity(dim);
    let mut vecs = DMatrix::zeros(m, dim);
    let mut embedding = DMatrix::zeros(m, dim);
    let mut positive = 0;
    for (i, &lam) in values.iter().enumerate() {
        if lam > cutoff && lam > 0.0 {
            positive += 1;
            eigenvalues.push(lam);
            vecs.set_column(i, &vectors.column(i));
            embedding.set_column(i, &(vectors.column(i) * lam.sqrt()));
        } else {
            eigenvalues.push(0.0);
        }
    }
    if positive < dim {
        log::info!("classical MDS: only {positive} of {dim} eigenvalues are positive");
    }
    Ok(MdsResult {
        eigenvalues,
        vectors: vecs,
        embedding,
        positive,
    })
}

/// Column means of the squared distances (equal to row means by symmetry).
pub fn squared_column_means(d: &DistanceMatrix) -> Vec<f64> {
    let m = d.len();
    let mut means = vec![0.0; m];
    for i in 0..m {
        for (acc, v) in means.iter_mut().zip(d.row(i)) {
            *acc += v * v;
        }
    }
    means.iter_mut().for_each(|v| *v /= m as f64);
    means
}

fn double_centered(d: &DistanceMatrix) -> DMatrix<f64> {
    let m = d.len();
    let means = squared_column_means(d);
    let grand = means.iter().sum::<f64>() / m as f64;
    DMatrix::from_fn(m, m, |i, j| {
        let d2 = d.get(i, j) * d.get(i, j);
        -0.5 * (d2 - means[i] - means[j] + grand)
    })
}

/// y = B x without materializing B.
fn apply_centered(d: &DistanceMatrix, x: &[f64], y: &mut [f64]) {
    let m = d.len();
    let mean_x = x.iter().sum::<f64>() / m as f64;
    let centered: Vec<f64> = x.iter().map(|v| v - mean_x).collect();
    for (i, yi) in y.iter_mut().enumerate() {
        *yi = d.row(i).iter().zip(&centered).map(|(dij, c)| dij * dij * c).sum();
    }
    let mean_y = y.iter().sum::<f64>() / m as f64;
    y.iter_mut().for_each(|v| *v = -0.5 * (*v - mean_y));
}
