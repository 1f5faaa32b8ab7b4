//! Downstream classifiers and accuracy.

pub mod forest;
pub mod logreg;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use forest::{dump_trees, forest_fit, forest_predict, gini, ForestConfig, ForestModel, MaxFeatures, Node, Tree};
pub use logreg::{logreg_fit, logreg_predict, logreg_probabilities, LogRegModel};

use crate::data::ClassifierKind;
use crate::error::{config, Error, Result};

/// Fraction of positions where prediction and truth agree.
pub fn accuracy(predicted: &[usize], truth: &[usize]) -> Result<f64> {
    if predicted.is_empty() {
        return Err(config("accuracy of an empty prediction"));
    }
    if predicted.len() != truth.len() {
        return Err(Error::Shape {
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    let hits = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / predicted.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSettings {
    pub logreg_lambda: f64,
    pub forest: ForestConfig,
}

impl Default for ClassifierSettings {
    fn default() -> Self {
        ClassifierSettings {
            logreg_lambda: 1.0,
            forest: ForestConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Classifier {
    LogReg(LogRegModel),
    Forest(ForestModel),
}

impl Classifier {
    /// Fit the requested kind; `seed` replaces the forest seed in `settings`.
    pub fn fit(
        kind: ClassifierKind,
        x: &DMatrix<f64>,
        y: &[usize],
        classes: usize,
        settings: &ClassifierSettings,
        seed: u64,
    ) -> Result<Classifier> {
        match kind {
            ClassifierKind::Logreg => Ok(Classifier::LogReg(logreg_fit(x, y, settings.logreg_lambda, classes)?)),
            ClassifierKind::RandomForest => {
                let cfg = ForestConfig {
                    seed,
                    ..settings.forest.clone()
                };
                Ok(Classifier::Forest(forest_fit(x, y, classes, &cfg)?))
            }
        }
    }

    pub fn kind(&self) -> ClassifierKind {
        match self {
            Classifier::LogReg(_) => ClassifierKind::Logreg,
            Classifier::Forest(_) => ClassifierKind::RandomForest,
        }
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<usize>> {
        match self {
            Classifier::LogReg(m) => logreg_predict(m, x),
            Classifier::Forest(m) => forest_predict(m, x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 1]).unwrap(), 0.5);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 2]).is_err());
    }
}
