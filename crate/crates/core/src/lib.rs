//! Semisupervised sample-complexity benchmarking: unsupervised embeddings
//! (PCA, Isomap, VAE) fitted on unlabeled pools, downstream classifiers
//! trained on small labeled subsets, and the bookkeeping to sweep, resume
//! and summarize the resulting grids.

pub mod classify;
pub mod container;
pub mod data;
pub mod embed;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod linalg;
pub mod report;
pub mod seed;

pub use data::{
    binarize_target, split_train_test, subsample, subsample_positions, ClassifierKind, Dataset, EmbedderKind,
    ExperimentPlan, FeatureKind, ResultRecord, SplitSpec, Target,
};
pub use embed::EmbeddingModel;
pub use error::{Error, Location, Result};
