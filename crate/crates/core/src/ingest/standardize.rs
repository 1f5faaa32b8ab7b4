use nalgebra::DMatrix;

use crate::data::{Dataset, FeatureKind};
use crate::error::{check_width, config, Result};

/// Per-column mean and sample standard deviation of a fitting set.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Column means and sample standard deviations (divisor n - 1). Columns
/// with zero spread get a standard deviation of 1.
pub fn standardize_fit(ds: &Dataset) -> Result<Standardizer> {
    let n = ds.n();
    if n < 2 {
        return Err(config(format!("standardization needs at least 2 rows, got {n}")));
    }
    let x = ds.features();
    let mut means = Vec::with_capacity(ds.p());
    let mut stds = Vec::with_capacity(ds.p());
    for col in x.column_iter() {
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        means.push(mean);
        stds.push(if sd > 0.0 { sd } else { 1.0 });
    }
    Ok(Standardizer { means, stds })
}

/// `(x - mean) / std` column-wise.
pub fn standardize_apply(ds: &Dataset, means: &[f64], stds: &[f64]) -> Result<Dataset> {
    check_width(ds.p(), means.len())?;
    check_width(ds.p(), stds.len())?;
    let x = ds.features();
    let z = DMatrix::from_fn(ds.n(), ds.p(), |i, j| (x[(i, j)] - means[j]) / stds[j]);
    ds.with_features(z, FeatureKind::TabularStandardized)
}

impl Standardizer {
    pub fn fit(ds: &Dataset) -> Result<Self> {
        standardize_fit(ds)
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        standardize_apply(ds, &self.means, &self.stds)
    }

    pub fn inverse(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_width(self.means.len(), z.ncols())?;
        Ok(DMatrix::from_fn(z.nrows(), z.ncols(), |i, j| z[(i, j)] * self.stds[j] + self.means[j]))
    }
}
