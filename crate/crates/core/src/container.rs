//! Binary container shared by datasets and fitted models.
//!
//! Layout (all integers little-endian):
//! `b"LTBC"`, u32 version, string kind, u32 section count, sections, 32-byte SHA-256
//! of everything before it. A string is a u32 byte length plus UTF-8. A section is a
//! string tag, a u8 payload type and the payload: matrices are u64 rows, u64 cols and
//! row-major f64 values; JSON is a u64 length plus UTF-8; index lists are a u64 count
//! plus u64 values.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classify::{Classifier, ForestModel, LogRegModel};
use crate::data::{Dataset, FeatureKind, Target};
use crate::embed::{DistanceMatrix, EmbeddingModel, IsomapModel, PcaModel, VaeParams, VaeTrainConfig};
use crate::error::{Error, Result};
use crate::linalg::Rows;

pub const MAGIC: &[u8; 4] = b"LTBC";
pub const VERSION: u32 = 1;

const MATRIX: u8 = 0;
const JSON: u8 = 1;
const INDICES: u8 = 2;

#[derive(Debug, Clone, PartialEq)]
pub enum Section {
    Matrix(DMatrix<f64>),
    Json(String),
    Indices(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: String,
    pub sections: Vec<(String, Section)>,
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn fail(&self, message: impl Into<String>) -> Error {
        Error::parse_at_byte(self.path, self.pos as u64, message)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.fail(format!("truncated: need {n} more bytes")));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self, count: u64, unit: usize) -> Result<usize> {
        let remaining = (self.bytes.len() - self.pos) as u64;
        match count.checked_mul(unit as u64) {
            Some(total) if total <= remaining => Ok(count as usize),
            _ => Err(self.fail(format!("length {count} exceeds the remaining {remaining} bytes"))),
        }
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as u64;
        let n = self.len(n, 1)?;
        let start = self.pos;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::parse_at_byte(self.path, start as u64, "invalid UTF-8"))
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend((s.len() as u32).to_le_bytes());
    out.extend(s.as_bytes());
}

impl Container {
    pub fn new(kind: impl Into<String>) -> Self {
        Container {
            kind: kind.into(),
            sections: Vec::new(),
        }
    }

    pub fn push(&mut self, tag: impl Into<String>, section: Section) -> &mut Self {
        self.sections.push((tag.into(), section));
        self
    }

    pub fn push_matrix(&mut self, tag: &str, m: &DMatrix<f64>) -> &mut Self {
        self.push(tag, Section::Matrix(m.clone()))
    }

    pub fn push_vector(&mut self, tag: &str, v: &[f64]) -> &mut Self {
        self.push(tag, Section::Matrix(DMatrix::from_row_slice(1, v.len(), v)))
    }

    pub fn push_json<T: Serialize>(&mut self, tag: &str, value: &T) -> &mut Self {
        let text = serde_json::to_string(value).expect("serializable section");
        self.push(tag, Section::Json(text))
    }

    pub fn push_indices(&mut self, tag: &str, values: &[usize]) -> &mut Self {
        self.push(tag, Section::Indices(values.iter().map(|&v| v as u64).collect()))
    }

    fn section(&self, tag: &str) -> Result<&Section> {
        self.sections
            .iter()
            .find(|(t, _)| t == tag)
            .map(|(_, s)| s)
            .ok_or_else(|| Error::Integrity(format!("{} container has no section '{tag}'", self.kind)))
    }

    pub fn matrix(&self, tag: &str) -> Result<&DMatrix<f64>> {
        match self.section(tag)? {
            Section::Matrix(m) => Ok(m),
            _ => Err(Error::Integrity(format!("section '{tag}' is not a matrix"))),
        }
    }

    pub fn vector(&self, tag: &str) -> Result<Vec<f64>> {
        let m = self.matrix(tag)?;
        if m.nrows() != 1 && m.ncols() != 1 && !m.is_empty() {
            return Err(Error::Integrity(format!("section '{tag}' is not a vector")));
        }
        Ok(m.iter().copied().collect())
    }

    pub fn json<T: DeserializeOwned>(&self, tag: &str) -> Result<T> {
        match self.section(tag)? {
            Section::Json(text) => Ok(serde_json::from_str(text)?),
            _ => Err(Error::Integrity(format!("section '{tag}' is not JSON"))),
        }
    }

    pub fn indices(&self, tag: &str) -> Result<Vec<usize>> {
        match self.section(tag)? {
            Section::Indices(v) => Ok(v.iter().map(|&x| x as usize).collect()),
            _ => Err(Error::Integrity(format!("section '{tag}' is not an index list"))),
        }
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::Integrity(format!("expected a {kind} container, found {}", self.kind)))
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(MAGIC);
        out.extend(VERSION.to_le_bytes());
        put_str(&mut out, &self.kind);
        out.extend((self.sections.len() as u32).to_le_bytes());
        for (tag, section) in &self.sections {
            put_str(&mut out, tag);
            match section {
                Section::Matrix(m) => {
                    out.push(MATRIX);
                    out.extend((m.nrows() as u64).to_le_bytes());
                    out.extend((m.ncols() as u64).to_le_bytes());
                    out.reserve(m.len() * 8);
                    for row in m.row_iter() {
                        for v in row.iter() {
                            out.extend(v.to_le_bytes());
                        }
                    }
                }
                Section::Json(text) => {
                    out.push(JSON);
                    out.extend((text.len() as u64).to_le_bytes());
                    out.extend(text.as_bytes());
                }
                Section::Indices(v) => {
                    out.push(INDICES);
                    out.extend((v.len() as u64).to_le_bytes());
                    for x in v {
                        out.extend(x.to_le_bytes());
                    }
                }
            }
        }
        let digest = Sha256::digest(&out);
        out.extend(digest.as_slice());
        out
    }

    /// `path` is only used to label errors.
    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Container> {
        if bytes.len() < MAGIC.len() + 4 + 32 {
            return Err(Error::parse_at_byte(path, bytes.len() as u64, "file too short for a container"));
        }
        let body_len = bytes.len() - 32;
        let mut r = Reader {
            bytes: &bytes[..body_len],
            pos: 0,
            path,
        };
        if r.take(4)? != MAGIC {
            return Err(Error::parse_at_byte(path, 0, "not a latentbench container (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::parse_at_byte(path, 4, format!("unsupported container version {version}")));
        }
        if Sha256::digest(&bytes[..body_len]).as_slice() != &bytes[body_len..] {
            return Err(Error::parse_at_byte(path, body_len as u64, "checksum mismatch (corrupt or truncated)"));
        }
        let kind = r.string()?;
        let count = r.u32()?;
        let mut c = Container::new(kind);
        for _ in 0..count {
            let tag = r.string()?;
            let type_pos = r.pos;
            let section = match r.u8()? {
                MATRIX => {
                    let rows = r.u64()?;
                    let cols = r.u64()?;
                    let cells = rows
                        .checked_mul(cols)
                        .ok_or_else(|| r.fail("matrix dimensions overflow"))?;
                    let cells = r.len(cells, 8)?;
                    let raw = r.take(cells * 8)?;
                    let values: Vec<f64> = raw
                        .chunks_exact(8)
                        .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                        .collect();
                    Section::Matrix(DMatrix::from_row_slice(rows as usize, cols as usize, &values))
                }
                JSON => {
                    let n = r.u64()?;
                    let n = r.len(n, 1)?;
                    let start = r.pos;
                    let raw = r.take(n)?;
                    Section::Json(
                        String::from_utf8(raw.to_vec())
                            .map_err(|_| Error::parse_at_byte(path, start as u64, "invalid UTF-8"))?,
                    )
                }
                INDICES => {
                    let n = r.u64()?;
                    let n = r.len(n, 8)?;
                    let mut v = Vec::with_capacity(n);
                    for _ in 0..n {
                        v.push(r.u64()?);
                    }
                    Section::Indices(v)
                }
                other => {
                    return Err(Error::parse_at_byte(path, type_pos as u64, format!("unknown section type {other}")))
                }
            };
            c.sections.push((tag, section));
        }
        if r.pos != body_len {
            return Err(r.fail("trailing bytes after the last section"));
        }
        Ok(c)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Container> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Container::from_bytes(&bytes, path)
    }
}

#[derive(Serialize, Deserialize)]
struct DatasetMeta {
    feature_kind: FeatureKind,
    column_names: Option<Vec<String>>,
    targets: Vec<TargetMeta>,
}

#[derive(Serialize, Deserialize)]
struct TargetMeta {
    name: String,
    class_count: usize,
}

pub fn dataset_to_container(ds: &Dataset) -> Container {
    let mut c = Container::new("dataset");
    let meta = DatasetMeta {
        feature_kind: ds.feature_kind(),
        column_names: ds.column_names().map(|c| c.to_vec()),
        targets: ds
            .targets()
            .iter()
            .map(|t| TargetMeta {
                name: t.name.clone(),
                class_count: t.class_count,
            })
            .collect(),
    };
    c.push_json("meta", &meta);
    c.push_matrix("features", ds.features());
    c.push_indices("row_ids", ds.row_ids());
    for t in ds.targets() {
        c.push_indices(&format!("target/{}", t.name), &t.values);
    }
    c
}

pub fn dataset_from_container(c: &Container) -> Result<Dataset> {
    c.expect_kind("dataset")?;
    let meta: DatasetMeta = c.json("meta")?;
    let mut ds = Dataset::new(c.matrix("features")?.clone(), meta.feature_kind)?.with_row_ids(c.indices("row_ids")?)?;
    if let Some(names) = meta.column_names {
        ds = ds.with_column_names(names)?;
    }
    for t in meta.targets {
        let values = c.indices(&format!("target/{}", t.name))?;
        ds = ds.with_target(Target::new(t.name, values, t.class_count)?)?;
    }
    Ok(ds)
}

#[derive(Serialize, Deserialize)]
struct IsomapMeta {
    k: usize,
    augmentations: usize,
    positive: usize,
}

pub fn embedding_to_container(model: &EmbeddingModel) -> Container {
    match model {
        EmbeddingModel::Pca(m) => {
            let mut c = Container::new("pca");
            c.push_vector("mean", &m.mean)
                .push_matrix("components", &m.components)
                .push_vector("explained_variance", &m.explained_variance);
            c
        }
        EmbeddingModel::Isomap(m) => {
            let mut c = Container::new("isomap");
            let n = m.geodesic.len();
            c.push_json(
                "meta",
                &IsomapMeta {
                    k: m.k,
                    augmentations: m.augmentations,
                    positive: m.positive,
                },
            )
            .push_matrix("train", &m.train.to_matrix())
            .push_matrix("geodesic", &DMatrix::from_row_slice(n, n, m.geodesic.as_slice()))
            .push_vector("eigenvalues", &m.eigenvalues)
            .push_matrix("vectors", &m.vectors)
            .push_vector("sq_col_means", &m.sq_col_means)
            .push_matrix("embedding", &m.embedding);
            c
        }
        EmbeddingModel::Vae { params, config } => {
            let mut c = Container::new("vae");
            c.push_json("config", config)
                .push_matrix("w1", &params.w1)
                .push_vector("b1", params.b1.as_slice())
                .push_matrix("w_mu", &params.w_mu)
                .push_vector("b_mu", params.b_mu.as_slice())
                .push_matrix("w_logvar", &params.w_logvar)
                .push_vector("b_logvar", params.b_logvar.as_slice())
                .push_matrix("w2", &params.w2)
                .push_vector("b2", params.b2.as_slice())
                .push_matrix("w_out", &params.w_out)
                .push_vector("b_out", params.b_out.as_slice());
            c
        }
        EmbeddingModel::Raw { width } => {
            let mut c = Container::new("raw");
            c.push_json("width", width);
            c
        }
    }
}

fn dvec(c: &Container, tag: &str) -> Result<DVector<f64>> {
    Ok(DVector::from_vec(c.vector(tag)?))
}

pub fn embedding_from_container(c: &Container) -> Result<EmbeddingModel> {
    let model = match c.kind.as_str() {
        "pca" => EmbeddingModel::Pca(PcaModel {
            mean: c.vector("mean")?,
            components: c.matrix("components")?.clone(),
            explained_variance: c.vector("explained_variance")?,
        }),
        "isomap" => {
            let meta: IsomapMeta = c.json("meta")?;
            let g = c.matrix("geodesic")?;
            let mut row_major = Vec::with_capacity(g.len());
            for row in g.row_iter() {
                row_major.extend(row.iter());
            }
            EmbeddingModel::Isomap(IsomapModel {
                train: Rows::new(c.matrix("train")?),
                k: meta.k,
                geodesic: DistanceMatrix::from_row_major(g.nrows(), row_major)?,
                eigenvalues: c.vector("eigenvalues")?,
                vectors: c.matrix("vectors")?.clone(),
                sq_col_means: c.vector("sq_col_means")?,
                embedding: c.matrix("embedding")?.clone(),
                augmentations: meta.augmentations,
                positive: meta.positive,
            })
        }
        "vae" => {
            let config: VaeTrainConfig = c.json("config")?;
            let params = VaeParams {
                w1: c.matrix("w1")?.clone(),
                b1: dvec(c, "b1")?,
                w_mu: c.matrix("w_mu")?.clone(),
                b_mu: dvec(c, "b_mu")?,
                w_logvar: c.matrix("w_logvar")?.clone(),
                b_logvar: dvec(c, "b_logvar")?,
                w2: c.matrix("w2")?.clone(),
                b2: dvec(c, "b2")?,
                w_out: c.matrix("w_out")?.clone(),
                b_out: dvec(c, "b_out")?,
            };
            let (p, h, d) = (params.input_dim(), params.hidden_dim(), params.latent_dim());
            let consistent = params.b1.len() == h
                && params.w_logvar.shape() == (d, h)
                && params.b_mu.len() == d
                && params.b_logvar.len() == d
                && params.w2.shape() == (h, d)
                && params.b2.len() == h
                && params.w_out.shape() == (p, h)
                && params.b_out.len() == p;
            if !consistent || !params.is_finite() {
                return Err(Error::Integrity("VAE container has inconsistent or non-finite tensors".into()));
            }
            EmbeddingModel::Vae { params, config }
        }
        "raw" => EmbeddingModel::Raw { width: c.json("width")? },
        other => return Err(Error::Integrity(format!("{other} container is not an embedding"))),
    };
    Ok(model)
}

#[derive(Serialize, Deserialize)]
struct LogRegMeta {
    lambda: f64,
    converged: bool,
    iterations: usize,
}

pub fn classifier_to_container(model: &Classifier) -> Container {
    match model {
        Classifier::LogReg(m) => {
            let mut c = Container::new("logreg");
            c.push_json(
                "meta",
                &LogRegMeta {
                    lambda: m.lambda,
                    converged: m.converged,
                    iterations: m.iterations,
                },
            )
            .push_matrix("weights", &m.weights)
            .push_vector("biases", m.biases.as_slice());
            c
        }
        Classifier::Forest(m) => {
            let mut c = Container::new("random_forest");
            c.push_json("forest", m);
            c
        }
    }
}

pub fn classifier_from_container(c: &Container) -> Result<Classifier> {
    match c.kind.as_str() {
        "logreg" => {
            let meta: LogRegMeta = c.json("meta")?;
            Ok(Classifier::LogReg(LogRegModel {
                weights: c.matrix("weights")?.clone(),
                biases: dvec(c, "biases")?,
                lambda: meta.lambda,
                converged: meta.converged,
                iterations: meta.iterations,
            }))
        }
        "random_forest" => Ok(Classifier::Forest(c.json::<ForestModel>("forest")?)),
        other => Err(Error::Integrity(format!("{other} container is not a classifier"))),
    }
}
