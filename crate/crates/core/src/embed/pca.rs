//! Principal component analysis fitted on an unlabeled pool.

use nalgebra::{DMatrix, DVector};

use crate::data::Dataset;
use crate::error::{check_width, config, Result};
use crate::linalg::{canonicalize_sign, symmetric_top_dense};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// d x p, orthonormal rows.
    pub components: DMatrix<f64>,
    /// Non-increasing, non-negative.
    pub explained_variance: Vec<f64>,
}

/// Which eigenproblem the fit solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PcaSolver {
    /// Covariance when p <= n, Gram matrix otherwise.
    Auto,
    /// p x p sample covariance.
    Covariance,
    /// n x n Gram matrix of the centered rows.
    Gram,
}

pub fn pca_fit(ds: &Dataset, d: usize) -> Result<PcaModel> {
    pca_fit_matrix(ds.features(), d, PcaSolver::Auto)
}

pub fn pca_fit_matrix(x: &DMatrix<f64>, d: usize, solver: PcaSolver) -> Result<PcaModel> {
    let (n, p) = x.shape();
    if n < 2 {
        return Err(config(format!("PCA needs at least 2 rows, got {n}")));
    }
    if d == 0 || d > (n - 1).min(p) {
        return Err(config(format!(
            "PCA dimension {d} must be in 1..={} for {n} rows and {p} columns",
            (n - 1).min(p)
        )));
    }
    let mean: Vec<f64> = x.column_iter().map(|c| c.mean()).collect();
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-mean[j]);
    }
    let scale = 1.0 / (n - 1) as f64;
    let use_cov = match solver {
        PcaSolver::Auto => p <= n,
        PcaSolver::Covariance => true,
        PcaSolver::Gram => false,
    };

    let (values, components) = if use_cov {
        let cov = (xc.transpose() * &xc) * scale;
        let (values, vecs) = symmetric_top_dense(cov, d);
        (values, vecs.transpose())
    } else {
        let gram = (&xc * xc.transpose()) * scale;
        let (values, u) = symmetric_top_dense(gram, d);
        let tiny = 1e-12 * values[0].abs().max(f64::MIN_POSITIVE);
        let mut comps = DMatrix::zeros(d, p);
        for i in 0..d {
            let mut v: Vec<f64> = if values[i] > tiny {
                let c = xc.transpose() * u.column(i);
                let norm = ((n - 1) as f64 * values[i]).sqrt();
                c.iter().map(|x| x / norm).collect()
            } else {
                complete_basis(&comps, i, p)
            };
            canonicalize_sign(&mut v);
            comps.row_mut(i).copy_from_slice(&v);
        }
        (values, comps)
    };
    let explained_variance = values.into_iter().map(|v| v.max(0.0)).collect();
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

/// A unit vector orthogonal to the first `filled` rows of `comps`.
fn complete_basis(comps: &DMatrix<f64>, filled: usize, p: usize) -> Vec<f64> {
    for j in 0..p {
        let mut v = DVector::zeros(p);
        v[j] = 1.0;
        for _ in 0..2 {
            for r in 0..filled {
                let row = comps.row(r).transpose();
                let c = row.dot(&v);
                v -= row * c;
            }
        }
        let nv = v.norm();
        if nv > 1e-6 {
            return (v / nv).iter().copied().collect();
        }
    }
    unreachable!("a p-dimensional basis always has room for fewer than p vectors")
}

/// `(x - mean) components^T`.
pub fn pca_transform(model: &PcaModel, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_width(model.mean.len(), rows.ncols())?;
    let mut xc = rows.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-model.mean[j]);
    }
    Ok(xc * model.components.transpose())
}

/// `y components + mean`; exact inverse of the transform when d = p.
pub fn pca_inverse(model: &PcaModel, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_width(model.components.nrows(), y.ncols())?;
    let mut x = y * &model.components;
    for (j, mut col) in x.column_iter_mut().enumerate() {
        col.add_scalar_mut(model.mean[j]);
    }
    Ok(x)
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.components.nrows()
    }

    pub fn width(&self) -> usize {
        self.mean.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
    }

    fn col_var(m: &DMatrix<f64>, j: usize) -> f64 {
        let c = m.column(j);
        let mu = c.mean();
        c.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (m.nrows() - 1) as f64
    }

    #[test]
    fn points_on_the_x_axis() {
        let x = DMatrix::from_row_slice(4, 2, &[-2.0, 0.0, -1.0, 0.0, 1.0, 0.0, 2.0, 0.0]);
        let m = pca_fit_matrix(&x, 1, PcaSolver::Auto).unwrap();
        assert!((m.components[(0, 0)] - 1.0).abs() < 1e-12);
        assert!(m.components[(0, 1)].abs() < 1e-12);
        assert!((m.explained_variance[0] - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn isotropic_variance_is_one() {
        let x = gaussian(10_000, 2, 5);
        let m = pca_fit_matrix(&x, 2, PcaSolver::Auto).unwrap();
        for v in &m.explained_variance {
            assert!((v - 1.0).abs() < 0.05, "{v}");
        }
    }

    #[test]
    fn full_rank_preserves_trace_and_round_trips() {
        let mut x = gaussian(40, 6, 1);
        for i in 0..40 {
            x[(i, 2)] = 3.0 * x[(i, 2)] + x[(i, 0)];
        }
        let m = pca_fit_matrix(&x, 6, PcaSolver::Auto).unwrap();
        let total: f64 = (0..6).map(|j| col_var(&x, j)).sum();
        let ev: f64 = m.explained_variance.iter().sum();
        assert!((total - ev).abs() < 1e-8);
        let y = pca_transform(&m, &x).unwrap();
        let back = pca_inverse(&m, &y).unwrap();
        assert!((back - &x).abs().max() < 1e-8);
    }

    #[test]
    fn mean_row_maps_to_zero() {
        let x = gaussian(30, 4, 2);
        let m = pca_fit_matrix(&x, 3, PcaSolver::Auto).unwrap();
        let mean = DMatrix::from_row_slice(1, 4, &m.mean);
        assert!(pca_transform(&m, &mean).unwrap().abs().max() < 1e-14);
    }

    #[test]
    fn scores_are_decorrelated_with_matching_variance() {
        let mut x = gaussian(200, 5, 3);
        for i in 0..200 {
            x[(i, 1)] += 0.8 * x[(i, 0)];
            x[(i, 4)] -= 0.5 * x[(i, 3)];
        }
        let m = pca_fit_matrix(&x, 4, PcaSolver::Auto).unwrap();
        let y = pca_transform(&m, &x).unwrap();
        let cov = (y.transpose() * &y) / 199.0;
        for a in 0..4 {
            assert!((cov[(a, a)] - m.explained_variance[a]).abs() < 1e-8);
            for b in 0..4 {
                if a != b {
                    assert!(cov[(a, b)].abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn gram_and_covariance_paths_agree() {
        for (n, p) in [(30, 12), (12, 30)] {
            let x = gaussian(n, p, (n * p) as u64);
            let d = 8;
            let a = pca_fit_matrix(&x, d, PcaSolver::Covariance).unwrap();
            let b = pca_fit_matrix(&x, d, PcaSolver::Gram).unwrap();
            for i in 0..d {
                assert!((a.explained_variance[i] - b.explained_variance[i]).abs() < 1e-8);
            }
            let pa = a.components.transpose() * &a.components;
            let pb = b.components.transpose() * &b.components;
            assert!((pa - pb).abs().max() < 1e-8);
            assert!((a.components.clone() - b.components.clone()).abs().max() < 1e-8);
        }
    }

    #[test]
    fn rank_deficient_gram_still_orthonormal() {
        // 5 rows in 8 dims, asking for all 4 non-trivial directions plus duplicates.
        let base = gaussian(3, 8, 4);
        let x = DMatrix::from_fn(6, 8, |i, j| base[(i % 3, j)]);
        let m = pca_fit_matrix(&x, 5, PcaSolver::Gram).unwrap();
        let g = &m.components * m.components.transpose();
        assert!((g - DMatrix::identity(5, 5)).abs().max() < 1e-8);
        assert!(m.explained_variance[3].abs() < 1e-10);
    }

    #[test]
    fn dimension_checks() {
        let x = gaussian(5, 3, 1);
        assert!(pca_fit_matrix(&x, 4, PcaSolver::Auto).is_err());
        assert!(pca_fit_matrix(&x, 0, PcaSolver::Auto).is_err());
        let m = pca_fit_matrix(&x, 2, PcaSolver::Auto).unwrap();
        assert!(pca_transform(&m, &gaussian(2, 4, 1)).is_err());
    }
}
