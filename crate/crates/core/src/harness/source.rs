//! Resolution of a plan's `dataset_id` to a dataset.

use std::path::{Path, PathBuf};

use crate::container::{dataset_from_container, Container};
use crate::data::Dataset;
use crate::error::{config, Result};
use crate::ingest::{generate_surrogate, read_idx_pair, Modality, SurrogateSpec};

/// Accepted forms:
/// - `surrogate:<t1|rfmri|dmri>[@seed]`: the built-in imaging-shaped surrogate;
/// - a directory holding one `*idx3-ubyte` image file and one `*idx1-ubyte` label file;
/// - a dataset container written by `latentbench ingest` or `latentbench surrogate`.
///
/// Relative paths are taken relative to `base`.
pub fn resolve_dataset(id: &str, base: Option<&Path>) -> Result<Dataset> {
    if let Some(rest) = id.strip_prefix("surrogate:") {
        let (name, seed) = match rest.split_once('@') {
            Some((name, seed)) => (
                name,
                seed.parse::<u64>()
                    .map_err(|_| config(format!("bad surrogate seed in '{id}'")))?,
            ),
            None => (rest, 0),
        };
        let modality = Modality::parse(name)?;
        return generate_surrogate(&SurrogateSpec::ukbb_like(modality, seed));
    }
    let mut path = PathBuf::from(id);
    if path.is_relative() {
        if let Some(base) = base {
            path = base.join(path);
        }
    }
    if path.is_dir() {
        let (images, labels) = find_idx_pair(&path)?;
        return read_idx_pair(&images, &labels);
    }
    if path.is_file() {
        return dataset_from_container(&Container::read(&path)?);
    }
    Err(config(format!("dataset '{id}' is neither a surrogate id nor an existing path")))
}

fn find_idx_pair(dir: &Path) -> Result<(PathBuf, PathBuf)> {
    let mut images = Vec::new();
    let mut labels = Vec::new();
    let entries = std::fs::read_dir(dir).map_err(|e| crate::error::Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| crate::error::Error::io(dir, e))?.path();
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        if name.ends_with("idx3-ubyte") {
            images.push(path);
        } else if name.ends_with("idx1-ubyte") {
            labels.push(path);
        }
    }
    match (images.as_slice(), labels.as_slice()) {
        ([i], [l]) => Ok((i.clone(), l.clone())),
        _ => Err(config(format!(
            "{} must contain exactly one *idx3-ubyte and one *idx1-ubyte file",
            dir.display()
        ))),
    }
}
