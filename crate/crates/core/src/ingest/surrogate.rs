//! Synthetic stand-in for imaging-phenotype tables.
//!
//! Latent factors `z ~ N(0, I_k)` are mixed into `p` features through a
//! matrix with orthonormal columns and corrupted with Gaussian noise. Each
//! target scores `w.z` (plus an optional pairwise interaction term), passes
//! the score and standard logistic noise through the logistic function, and
//! cuts the result into equally populated classes.

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureKind, Target};
use crate::error::{config, Result};
use crate::seed::{self, Part};

/// Multiplicative term `strength * (first . z) * (second . z)`; with
/// orthogonal directions it makes the target XOR-like in latent space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub first: Vec<f64>,
    pub second: Vec<f64>,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetDef {
    pub name: String,
    pub class_count: usize,
    pub weights: Vec<f64>,
    #[serde(default)]
    pub interaction: Option<Interaction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mixing {
    RandomOrthonormal,
    /// Requires `k_latent == p`.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateSpec {
    pub n: usize,
    pub p: usize,
    pub k_latent: usize,
    pub noise_sigma: f64,
    pub targets: Vec<TargetDef>,
    pub seed: u64,
    pub mixing: Mixing,
}

/// Imaging modalities with the feature counts of the reference tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    T1,
    Rfmri,
    Dmri,
}

impl Modality {
    pub fn feature_count(self) -> usize {
        match self {
            Modality::T1 => 164,
            Modality::Rfmri => 210,
            Modality::Dmri => 432,
        }
    }

    /// How strongly the latent factors drive the targets.
    fn signal(self) -> f64 {
        match self {
            Modality::T1 => 1.0,
            Modality::Rfmri => 0.4,
            Modality::Dmri => 0.7,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::T1 => "t1",
            Modality::Rfmri => "rfmri",
            Modality::Dmri => "dmri",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "t1" => Ok(Modality::T1),
            "rfmri" => Ok(Modality::Rfmri),
            "dmri" => Ok(Modality::Dmri),
            _ => Err(config(format!("unknown modality {s:?}"))),
        }
    }
}

const UKBB_LATENT: usize = 10;

fn axis(k: usize, i: usize, scale: f64) -> Vec<f64> {
    let mut v = vec![0.0; k];
    v[i] = scale;
    v
}

fn combo(k: usize, parts: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; k];
    for &(i, s) in parts {
        v[i] += s;
    }
    v
}

impl SurrogateSpec {
    /// 7500 subjects with the six demographic, lifestyle and health targets
    /// (2, 5, 4, 5, 5, 5 classes). Sex and age are linear in the latent
    /// factors; income and household size carry XOR-like interactions.
    pub fn ukbb_like(modality: Modality, seed: u64) -> SurrogateSpec {
        let k = UKBB_LATENT;
        let s = modality.signal();
        let targets = vec![
            TargetDef {
                name: "sex".into(),
                class_count: 2,
                weights: axis(k, 0, 4.0 * s),
                interaction: None,
            },
            TargetDef {
                name: "age".into(),
                class_count: 5,
                weights: combo(k, &[(1, 2.5 * s), (2, 1.5 * s)]),
                interaction: None,
            },
            TargetDef {
                name: "smoking".into(),
                class_count: 4,
                weights: combo(k, &[(3, 1.5 * s), (1, 0.5 * s)]),
                interaction: None,
            },
            TargetDef {
                name: "work_satisfaction".into(),
                class_count: 5,
                weights: combo(k, &[(4, 1.2 * s), (2, 0.4 * s)]),
                interaction: None,
            },
            TargetDef {
                name: "income".into(),
                class_count: 5,
                weights: combo(k, &[(5, 1.5 * s)]),
                interaction: Some(Interaction {
                    first: axis(k, 6, 1.0),
                    second: axis(k, 7, 1.0),
                    strength: 2.0 * s,
                }),
            },
            TargetDef {
                name: "household_size".into(),
                class_count: 5,
                weights: combo(k, &[(8, 0.5 * s)]),
                interaction: Some(Interaction {
                    first: axis(k, 8, 1.0),
                    second: axis(k, 9, 1.0),
                    strength: 3.0 * s,
                }),
            },
        ];
        SurrogateSpec {
            n: 7500,
            p: modality.feature_count(),
            k_latent: k,
            noise_sigma: 0.5,
            targets,
            seed,
            mixing: Mixing::RandomOrthonormal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.p == 0 || self.k_latent == 0 {
            return Err(config("surrogate n, p and k_latent must be positive"));
        }
        if self.k_latent > self.p {
            return Err(config(format!("k_latent {} exceeds p {}", self.k_latent, self.p)));
        }
        if self.mixing == Mixing::Identity && self.k_latent != self.p {
            return Err(config("identity mixing requires k_latent == p"));
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(config("noise_sigma must be finite and non-negative"));
        }
        for t in &self.targets {
            if t.class_count < 2 {
                return Err(config(format!("target {} needs at least 2 classes", t.name)));
            }
            let mut dims = vec![t.weights.len()];
            if let Some(ix) = &t.interaction {
                dims.push(ix.first.len());
                dims.push(ix.second.len());
            }
            if dims.iter().any(|&d| d != self.k_latent) {
                return Err(config(format!("target {} weights must have length k_latent", t.name)));
            }
        }
        Ok(())
    }
}

pub fn generate_surrogate(spec: &SurrogateSpec) -> Result<Dataset> {
    generate_surrogate_with_latents(spec).map(|(ds, _)| ds)
}

/// Generates the dataset together with the latent factors (n x k) behind it.
pub fn generate_surrogate_with_latents(spec: &SurrogateSpec) -> Result<(Dataset, DMatrix<f64>)> {
    spec.validate()?;
    let (n, p, k) = (spec.n, spec.p, spec.k_latent);
    let mut rng = seed::stream(spec.seed, &[Part::Tag("surrogate/latent")]);
    let z = DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(&mut rng));

    let mixing = match spec.mixing {
        Mixing::Identity => DMatrix::identity(p, k),
        Mixing::RandomOrthonormal => {
            let mut rng = seed::stream(spec.seed, &[Part::Tag("surrogate/mixing")]);
            let g = DMatrix::from_fn(p, k, |_, _| StandardNormal.sample(&mut rng));
            let qr = g.qr();
            let (q, r) = (qr.q(), qr.r());
            // Fix the QR sign ambiguity so the basis is a function of `g`.
            let mut q = q.columns(0, k).into_owned();
            for j in 0..k {
                if r[(j, j)] < 0.0 {
                    q.column_mut(j).neg_mut();
                }
            }
            q
        }
    };
    let mut x: DMatrix<f64> = &z * mixing.transpose();
    if spec.noise_sigma > 0.0 {
        let mut rng = seed::stream(spec.seed, &[Part::Tag("surrogate/noise")]);
        for v in x.iter_mut() {
            let e: f64 = StandardNormal.sample(&mut rng);
            *v += spec.noise_sigma * e;
        }
    }

    let names = (0..p).map(|j| format!("idp_{j:03}")).collect();
    let mut ds = Dataset::new(x, FeatureKind::TabularStandardized)?.with_column_names(names)?;
    for (ti, def) in spec.targets.iter().enumerate() {
        let mut rng = seed::stream(spec.seed, &[Part::Tag("surrogate/target"), Part::Num(ti as u64)]);
        let scores: Vec<f64> = (0..n)
            .map(|i| {
                let zi = z.row(i);
                let dot = |w: &[f64]| w.iter().enumerate().map(|(j, wj)| wj * zi[j]).sum::<f64>();
                let mut s = dot(&def.weights);
                if let Some(ix) = &def.interaction {
                    s += ix.strength * dot(&ix.first) * dot(&ix.second);
                }
                let u: f64 = rng.random_range(f64::EPSILON..1.0);
                let noise = (u / (1.0 - u)).ln();
                logistic(s + noise)
            })
            .collect();
        ds = ds.with_target(Target::new(def.name.clone(), equiprobable_bins(&scores, def.class_count), def.class_count)?)?;
    }
    Ok((ds, z))
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Class index of every score when cutting at the empirical quantiles;
/// ties resolved by position.
fn equiprobable_bins(scores: &[f64], classes: usize) -> Vec<usize> {
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    let mut out = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        out[i] = rank * classes / n;
    }
    out
}
