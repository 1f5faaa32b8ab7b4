//! Readers for the benchmark's input formats, feature standardization, and
//! the synthetic stand-in for restricted imaging-phenotype tables.

mod idx;
mod standardize;
mod surrogate;
mod table;

pub use idx::{parse_idx_images, parse_idx_labels, read_idx_pair, write_idx_pair, IdxHeader, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use standardize::{standardize_apply, standardize_fit, Standardizer};
pub use surrogate::{generate_surrogate, generate_surrogate_with_latents, Interaction, Mixing, Modality, SurrogateSpec, TargetDef};
pub use table::{parse_table, read_table, TableRead};
