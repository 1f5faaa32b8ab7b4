//! Shared dataset, plan and result types, plus deterministic splitting,
//! subsampling and target recoding.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config, Error, Result};
use crate::seed::{self, Part, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Pixel intensities scaled into [0, 1].
    ImagePixelsUnitInterval,
    /// Real-valued columns, z-scored before use.
    TabularStandardized,
}

/// One categorical prediction target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub name: String,
    pub values: Vec<usize>,
    pub class_count: usize,
}

impl Target {
    pub fn new(name: impl Into<String>, values: Vec<usize>, class_count: usize) -> Result<Self> {
        let name = name.into();
        if class_count == 0 {
            return Err(config(format!("target {name}: class_count must be positive")));
        }
        if let Some(bad) = values.iter().find(|&&v| v >= class_count) {
            return Err(config(format!(
                "target {name}: value {bad} out of range for {class_count} classes"
            )));
        }
        Ok(Target {
            name,
            values,
            class_count,
        })
    }

    pub fn class_frequencies(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for &v in &self.values {
            counts[v] += 1;
        }
        counts
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().map(|&v| v as f64).sum::<f64>() / self.values.len().max(1) as f64
    }
}

/// Feature matrix (n samples x p features) with optional targets.
///
/// `row_ids` records, for every row, its index in the dataset the rows were
/// originally loaded from. Splits and subsamples carry it along so the
/// harness can prove which rows a statistic was fitted on.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: DMatrix<f64>,
    targets: Vec<Target>,
    feature_kind: FeatureKind,
    column_names: Option<Vec<String>>,
    row_ids: Vec<usize>,
}

impl Dataset {
    pub fn new(features: DMatrix<f64>, feature_kind: FeatureKind) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(config(format!(
                "dataset must be non-empty, got {}x{}",
                features.nrows(),
                features.ncols()
            )));
        }
        if let Some(pos) = features.iter().position(|v| !v.is_finite()) {
            let n = features.nrows();
            return Err(Error::Numeric(format!(
                "non-finite feature at row {}, column {}",
                pos % n,
                pos / n
            )));
        }
        let row_ids = (0..features.nrows()).collect();
        Ok(Dataset {
            features,
            targets: Vec::new(),
            feature_kind,
            column_names: None,
            row_ids,
        })
    }

    pub fn with_target(mut self, target: Target) -> Result<Self> {
        if target.values.len() != self.n() {
            return Err(Error::Shape {
                expected: self.n(),
                actual: target.values.len(),
            });
        }
        if self.targets.iter().any(|t| t.name == target.name) {
            return Err(config(format!("duplicate target name {}", target.name)));
        }
        self.targets.push(target);
        Ok(self)
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p() {
            return Err(Error::Shape {
                expected: self.p(),
                actual: names.len(),
            });
        }
        self.column_names = Some(names);
        Ok(self)
    }

    pub fn with_row_ids(mut self, row_ids: Vec<usize>) -> Result<Self> {
        if row_ids.len() != self.n() {
            return Err(Error::Shape {
                expected: self.n(),
                actual: row_ids.len(),
            });
        }
        self.row_ids = row_ids;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn p(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn feature_kind(&self) -> FeatureKind {
        self.feature_kind
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.column_names.as_deref()
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn targets(&self) -> &[Target] {
        &self.targets
    }

    /// The active target: the first one attached.
    pub fn target(&self) -> Result<&Target> {
        self.targets
            .first()
            .ok_or_else(|| Error::Usage("dataset has no targets".into()))
    }

    pub fn target_named(&self, name: &str) -> Result<&Target> {
        self.targets
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| config(format!("no target named {name:?}")))
    }

    /// Keeps only the named target, making it the active one.
    pub fn focus_target(&self, name: &str) -> Result<Dataset> {
        let t = self.target_named(name)?.clone();
        let mut out = self.clone();
        out.targets = vec![t];
        Ok(out)
    }

    pub fn without_targets(&self) -> Dataset {
        let mut out = self.clone();
        out.targets.clear();
        out
    }

    /// Same rows, new feature matrix (e.g. after standardization or embedding).
    pub fn with_features(&self, features: DMatrix<f64>, feature_kind: FeatureKind) -> Result<Dataset> {
        if features.nrows() != self.n() {
            return Err(Error::Shape {
                expected: self.n(),
                actual: features.nrows(),
            });
        }
        let mut out = Dataset::new(features, feature_kind)?;
        out.targets = self.targets.clone();
        out.row_ids = self.row_ids.clone();
        Ok(out)
    }

    /// Rows at the given positions, in the given order.
    pub fn select_rows(&self, positions: &[usize]) -> Dataset {
        let features = self.features.select_rows(positions);
        let targets = self
            .targets
            .iter()
            .map(|t| Target {
                name: t.name.clone(),
                values: positions.iter().map(|&i| t.values[i]).collect(),
                class_count: t.class_count,
            })
            .collect();
        Dataset {
            features,
            targets,
            feature_kind: self.feature_kind,
            column_names: self.column_names.clone(),
            row_ids: positions.iter().map(|&i| self.row_ids[i]).collect(),
        }
    }

    /// Row-wise concatenation; both sides must share p, kind and target names.
    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.p() != other.p() {
            return Err(Error::Shape {
                expected: self.p(),
                actual: other.p(),
            });
        }
        let n = self.n() + other.n();
        let features = DMatrix::from_fn(n, self.p(), |i, j| {
            if i < self.n() {
                self.features[(i, j)]
            } else {
                other.features[(i - self.n(), j)]
            }
        });
        let mut targets = Vec::new();
        for t in &self.targets {
            let o = other.target_named(&t.name)?;
            let mut values = t.values.clone();
            values.extend_from_slice(&o.values);
            targets.push(Target {
                name: t.name.clone(),
                values,
                class_count: t.class_count.max(o.class_count),
            });
        }
        let mut row_ids = self.row_ids.clone();
        row_ids.extend_from_slice(&other.row_ids);
        Ok(Dataset {
            features,
            targets,
            feature_kind: self.feature_kind,
            column_names: self.column_names.clone(),
            row_ids,
        })
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        self.features.row(i).iter().copied().collect()
    }
}

/// Which rows go to train and test for one repetition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_size: usize,
    pub test_size: usize,
    pub repetition_index: usize,
    pub master_seed: u64,
}

/// Random disjoint train/test split. The permutation depends only on
/// `(master_seed, repetition_index)`; rows within each side keep their
/// original relative order.
pub fn split_train_test(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    ds.target()?;
    if spec.train_size == 0 || spec.test_size == 0 {
        return Err(config("train_size and test_size must be positive"));
    }
    if spec.train_size + spec.test_size > ds.n() {
        return Err(config(format!(
            "train_size {} + test_size {} exceeds dataset size {}",
            spec.train_size,
            spec.test_size,
            ds.n()
        )));
    }
    let mut rng = seed::stream(
        spec.master_seed,
        &[Part::Tag("split"), Part::Num(spec.repetition_index as u64)],
    );
    let mut perm: Vec<usize> = (0..ds.n()).collect();
    perm.shuffle(&mut rng);
    let mut train: Vec<usize> = perm[..spec.train_size].to_vec();
    let mut test: Vec<usize> = perm[spec.train_size..spec.train_size + spec.test_size].to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.select_rows(&train), ds.select_rows(&test)))
}

/// Recodes the active target to "above the reference mean" (1) versus
/// "at or below" (0). A target that is already binary is returned unchanged.
pub fn binarize_target(ds: &Dataset, reference_mean: f64) -> Result<Dataset> {
    let t = ds.target()?;
    if t.class_count == 2 {
        return Ok(ds.clone());
    }
    let values = t
        .values
        .iter()
        .map(|&v| usize::from(v as f64 > reference_mean))
        .collect();
    let mut out = ds.clone();
    out.targets[0] = Target {
        name: t.name.clone(),
        values,
        class_count: 2,
    };
    Ok(out)
}

/// Positions of a random subsample of `size` rows, sorted ascending.
///
/// With `stratify` and an active target, rows are allocated to classes in
/// proportion to their frequency (largest remainder, ties to the lower class)
/// with at least one row for every class present. When `size` is smaller
/// than the number of classes present the draw falls back to plain random.
pub fn subsample_positions(ds: &Dataset, size: usize, rng: &mut Rng, stratify: bool) -> Result<Vec<usize>> {
    if size == 0 || size > ds.n() {
        return Err(config(format!(
            "subsample size {size} must be in 1..={}",
            ds.n()
        )));
    }
    let target = if stratify { ds.targets.first() } else { None };
    let mut picked = match target {
        Some(t) => match stratified_allocation(&t.class_frequencies(), size) {
            Some(alloc) => {
                let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); t.class_count];
                for (i, &v) in t.values.iter().enumerate() {
                    by_class[v].push(i);
                }
                let mut picked = Vec::with_capacity(size);
                for (rows, &take) in by_class.iter_mut().zip(&alloc) {
                    let (chosen, _) = rows.partial_shuffle(rng, take);
                    picked.extend_from_slice(chosen);
                }
                picked
            }
            None => {
                log::warn!(
                    "subsample of {size} rows cannot cover every class of {}; drawing without stratification",
                    t.name
                );
                plain_draw(ds.n(), size, rng)
            }
        },
        None => plain_draw(ds.n(), size, rng),
    };
    picked.sort_unstable();
    Ok(picked)
}

fn plain_draw(n: usize, size: usize, rng: &mut Rng) -> Vec<usize> {
    let mut all: Vec<usize> = (0..n).collect();
    let (chosen, _) = all.partial_shuffle(rng, size);
    chosen.to_vec()
}

/// Per-class sample counts for a stratified draw, or `None` when `size`
/// cannot give every present class at least one row.
pub(crate) fn stratified_allocation(counts: &[usize], size: usize) -> Option<Vec<usize>> {
    let total: usize = counts.iter().sum();
    let present = counts.iter().filter(|&&c| c > 0).count();
    if size < present || size > total {
        return None;
    }
    let quotas: Vec<f64> = counts.iter().map(|&c| size as f64 * c as f64 / total as f64).collect();
    let mut alloc: Vec<usize> = counts
        .iter()
        .zip(&quotas)
        .map(|(&c, &q)| if c == 0 { 0 } else { (q.floor() as usize).clamp(1, c) })
        .collect();
    let remainder = |c: usize| quotas[c] - quotas[c].floor();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    // Largest remainder first; ties to the lower class index.
    order.sort_by(|&a, &b| remainder(b).total_cmp(&remainder(a)).then(a.cmp(&b)));
    let mut given: usize = alloc.iter().sum();
    while given < size {
        let c = order.iter().copied().find(|&c| alloc[c] < counts[c])?;
        alloc[c] += 1;
        given += 1;
        order.retain(|&o| o != c);
        order.push(c);
    }
    while given > size {
        // Take back from the class with the most rows above its floor, smallest remainder first.
        let c = order
            .iter()
            .rev()
            .copied()
            .filter(|&c| alloc[c] > 1)
            .max_by(|&a, &b| alloc[a].cmp(&alloc[b]).then(b.cmp(&a)))?;
        alloc[c] -= 1;
        given -= 1;
    }
    Some(alloc)
}

/// Random subsample of `size` rows; see [`subsample_positions`].
pub fn subsample(ds: &Dataset, size: usize, rng: &mut Rng, stratify: bool) -> Result<Dataset> {
    let pos = subsample_positions(ds, size, rng, stratify)?;
    Ok(ds.select_rows(&pos))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedderKind {
    Pca,
    Isomap,
    Vae,
    Raw,
}

impl EmbedderKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EmbedderKind::Pca => "pca",
            EmbedderKind::Isomap => "isomap",
            EmbedderKind::Vae => "vae",
            EmbedderKind::Raw => "raw",
        }
    }

    pub fn all() -> [EmbedderKind; 4] {
        [
            EmbedderKind::Pca,
            EmbedderKind::Isomap,
            EmbedderKind::Vae,
            EmbedderKind::Raw,
        ]
    }
}

impl fmt::Display for EmbedderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for EmbedderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(EmbedderKind::Pca),
            "isomap" => Ok(EmbedderKind::Isomap),
            "vae" => Ok(EmbedderKind::Vae),
            "raw" => Ok(EmbedderKind::Raw),
            _ => Err(config(format!("unknown embedder {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    Logreg,
    RandomForest,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Logreg => "logreg",
            ClassifierKind::RandomForest => "random_forest",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ClassifierKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "logreg" => Ok(ClassifierKind::Logreg),
            "random_forest" => Ok(ClassifierKind::RandomForest),
            _ => Err(config(format!("unknown classifier {s:?}"))),
        }
    }
}

fn default_latent_dim() -> usize {
    50
}

fn default_repetitions() -> usize {
    25
}

/// Declarative description of one benchmark sweep.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub dataset_id: String,
    pub target_name: String,
    pub embedder: EmbedderKind,
    pub classifier: ClassifierKind,
    #[serde(default = "default_latent_dim")]
    pub latent_dim: usize,
    pub labeled_sizes: Vec<usize>,
    pub unlabeled_sizes: Vec<usize>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    pub master_seed: u64,
    pub binarize: bool,
}

impl ExperimentPlan {
    pub fn from_json(text: &str) -> Result<Self> {
        let plan: ExperimentPlan = serde_json::from_str(text).map_err(|e| config(format!("plan: {e}")))?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.labeled_sizes.is_empty() || self.unlabeled_sizes.is_empty() {
            return Err(config("labeled_sizes and unlabeled_sizes must be non-empty"));
        }
        if self.labeled_sizes.contains(&0) || self.unlabeled_sizes.contains(&0) {
            return Err(config("sample sizes must be positive"));
        }
        if self.repetitions == 0 || self.latent_dim == 0 {
            return Err(config("repetitions and latent_dim must be positive"));
        }
        if self.embedder != EmbedderKind::Raw {
            let min_u = *self.unlabeled_sizes.iter().min().unwrap();
            if self.latent_dim > min_u {
                return Err(config(format!(
                    "latent_dim {} exceeds the smallest unlabeled size {min_u}",
                    self.latent_dim
                )));
            }
        }
        Ok(())
    }

    /// Stable hash of the plan's canonical JSON.
    pub fn fingerprint(&self) -> String {
        fingerprint_of(&[&serde_json::to_string(self).expect("plan serializes")])
    }
}

pub(crate) fn fingerprint_of(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    h.finalize()[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// One measured sweep cell as stored in the results file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRecord {
    pub fingerprint: String,
    pub dataset_id: String,
    pub target: String,
    pub embedder: EmbedderKind,
    pub classifier: ClassifierKind,
    pub repetition: usize,
    pub labeled_size: usize,
    pub unlabeled_size: usize,
    /// `None` when the cell failed; the reason is in the metadata.
    pub accuracy: Option<f64>,
    pub wall_time_s: f64,
    pub metadata_json: String,
}

impl ResultRecord {
    pub fn key(&self) -> (String, usize, usize, usize) {
        (
            self.fingerprint.clone(),
            self.repetition,
            self.labeled_size,
            self.unlabeled_size,
        )
    }
}

/// Class frequencies as a name-keyed map, for metadata.
pub fn class_frequency_map(t: &Target) -> BTreeMap<usize, usize> {
    t.class_frequencies().into_iter().enumerate().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn labelled(n: usize, classes: usize) -> Dataset {
        let x = DMatrix::from_fn(n, 2, |i, j| (i * 2 + j) as f64);
        Dataset::new(x, FeatureKind::TabularStandardized)
            .unwrap()
            .with_target(Target::new("y", (0..n).map(|i| i % classes).collect(), classes).unwrap())
            .unwrap()
    }

    fn spec(train: usize, test: usize, rep: usize, seed: u64) -> SplitSpec {
        SplitSpec {
            train_size: train,
            test_size: test,
            repetition_index: rep,
            master_seed: seed,
        }
    }

    #[test]
    fn split_sizes_and_disjointness() {
        let ds = labelled(7500, 5);
        let (tr, te) = split_train_test(&ds, &spec(7000, 500, 0, 1)).unwrap();
        assert_eq!(tr.n(), 7000);
        assert_eq!(te.n(), 500);
        let a: HashSet<_> = tr.row_ids().iter().collect();
        assert!(te.row_ids().iter().all(|r| !a.contains(r)));
    }

    #[test]
    fn two_row_split() {
        let ds = labelled(2, 2);
        for seed in 0..5 {
            let (tr, te) = split_train_test(&ds, &spec(1, 1, 0, seed)).unwrap();
            let mut ids = vec![tr.row_ids()[0], te.row_ids()[0]];
            ids.sort();
            assert_eq!(ids, vec![0, 1]);
        }
    }

    #[test]
    fn split_is_a_function_of_seed_and_repetition() {
        let ds = labelled(100, 3);
        let (a, _) = split_train_test(&ds, &spec(60, 20, 3, 42)).unwrap();
        let (b, _) = split_train_test(&ds, &spec(60, 20, 3, 42)).unwrap();
        let (c, _) = split_train_test(&ds, &spec(60, 20, 4, 42)).unwrap();
        assert_eq!(a.row_ids(), b.row_ids());
        assert_ne!(a.row_ids(), c.row_ids());
    }

    #[test]
    fn split_overflow_names_sizes() {
        let ds = labelled(10, 2);
        let err = split_train_test(&ds, &spec(8, 3, 0, 0)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains('8') && msg.contains('3') && msg.contains("10"), "{msg}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn split_keeps_targets_aligned() {
        let ds = labelled(50, 5);
        let (tr, _) = split_train_test(&ds, &spec(30, 10, 0, 9)).unwrap();
        for (row, &id) in tr.row_ids().iter().enumerate() {
            assert_eq!(tr.target().unwrap().values[row], id % 5);
            assert_eq!(tr.features()[(row, 0)], (id * 2) as f64);
        }
    }

    fn with_values(values: Vec<usize>, classes: usize) -> Dataset {
        let n = values.len();
        Dataset::new(DMatrix::zeros(n, 1), FeatureKind::TabularStandardized)
            .unwrap()
            .with_target(Target::new("t", values, classes).unwrap())
            .unwrap()
    }

    #[test]
    fn binarize_examples() {
        let ds = with_values(vec![1, 2, 3, 4, 5], 6);
        let b = binarize_target(&ds, 2.8).unwrap();
        assert_eq!(b.target().unwrap().values, vec![0, 0, 1, 1, 1]);
        assert_eq!(b.target().unwrap().class_count, 2);

        let ds = with_values(vec![3, 3, 3], 5);
        let b = binarize_target(&ds, 3.0).unwrap();
        assert_eq!(b.target().unwrap().values, vec![0, 0, 0]);

        let ds = with_values(vec![0, 1], 2);
        let b = binarize_target(&ds, 0.5).unwrap();
        assert_eq!(b.target().unwrap().values, vec![0, 1]);
    }

    #[test]
    fn binarize_without_targets_is_usage_error() {
        let ds = Dataset::new(DMatrix::zeros(2, 1), FeatureKind::TabularStandardized).unwrap();
        assert!(matches!(binarize_target(&ds, 0.0), Err(Error::Usage(_))));
    }

    #[test]
    fn subsample_full_size_is_identity_set() {
        let ds = labelled(7000, 5);
        let mut rng = seed::stream(1, &[Part::Tag("t")]);
        let s = subsample(&ds, 7000, &mut rng, true).unwrap();
        assert_eq!(s.row_ids(), ds.row_ids());
    }

    #[test]
    fn subsample_stratifies_two_per_class() {
        let ds = labelled(10, 2);
        let mut rng = seed::stream(3, &[Part::Tag("t")]);
        let s = subsample(&ds, 4, &mut rng, true).unwrap();
        assert_eq!(s.target().unwrap().class_frequencies(), vec![2, 2]);
    }

    #[test]
    fn subsample_repeats_for_same_stream() {
        let ds = labelled(100, 4);
        let a = subsample(&ds, 30, &mut seed::stream(5, &[Part::Tag("s")]), true).unwrap();
        let b = subsample(&ds, 30, &mut seed::stream(5, &[Part::Tag("s")]), true).unwrap();
        assert_eq!(a.row_ids(), b.row_ids());
    }

    #[test]
    fn subsample_too_small_for_classes_falls_back() {
        let ds = labelled(20, 5);
        let s = subsample(&ds, 3, &mut seed::stream(1, &[]), true).unwrap();
        assert_eq!(s.n(), 3);
        assert!(subsample(&ds, 21, &mut seed::stream(1, &[]), true).is_err());
    }

    #[test]
    fn allocation_is_proportional_with_floor_of_one() {
        assert_eq!(stratified_allocation(&[5, 5], 4), Some(vec![2, 2]));
        assert_eq!(stratified_allocation(&[90, 10], 10), Some(vec![9, 1]));
        assert_eq!(stratified_allocation(&[98, 1, 1], 5), Some(vec![3, 1, 1]));
        assert_eq!(stratified_allocation(&[3, 0, 3], 2), Some(vec![1, 0, 1]));
        assert_eq!(stratified_allocation(&[3, 3, 3], 2), None);
    }

    #[test]
    fn plan_json_is_strict() {
        let text = r#"{"dataset_id":"d","target_name":"sex","embedder":"isomap","classifier":"logreg",
            "labeled_sizes":[100],"unlabeled_sizes":[100,500],"master_seed":1,"binarize":false}"#;
        let plan = ExperimentPlan::from_json(text).unwrap();
        assert_eq!(plan.latent_dim, 50);
        assert_eq!(plan.repetitions, 25);
        let again = ExperimentPlan::from_json(&plan.to_json()).unwrap();
        assert_eq!(plan, again);
        assert_eq!(plan.fingerprint(), again.fingerprint());

        let typo = text.replace("\"binarize\"", "\"binarise\"");
        assert!(ExperimentPlan::from_json(&typo).is_err());
        let extra = text.replace("\"binarize\":false", "\"binarize\":false,\"extra\":1");
        assert!(ExperimentPlan::from_json(&extra).is_err());
    }

    #[test]
    fn plan_rejects_latent_dim_above_pool() {
        let text = r#"{"dataset_id":"d","target_name":"sex","embedder":"pca","classifier":"logreg",
            "latent_dim":200,"labeled_sizes":[100],"unlabeled_sizes":[100],"master_seed":1,"binarize":false}"#;
        assert!(ExperimentPlan::from_json(text).is_err());
    }

    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn split_is_disjoint_for_any_seed(seed in any::<u64>(), rep in 0usize..25) {
            let ds = labelled(120, 3);
            let (tr, te) = split_train_test(&ds, &spec(70, 30, rep, seed)).unwrap();
            let a: HashSet<_> = tr.row_ids().iter().copied().collect();
            prop_assert_eq!(a.len() + te.n(), 100);
            prop_assert!(te.row_ids().iter().all(|r| !a.contains(r)));
        }

        #[test]
        fn binarize_twice_equals_once(values in proptest::collection::vec(0usize..5, 1..40), mean in -1.0f64..6.0) {
            let ds = with_values(values, 5);
            let once = binarize_target(&ds, mean).unwrap();
            let twice = binarize_target(&once, mean).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
