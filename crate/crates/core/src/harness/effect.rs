//! Semisupervision effect and cross-target averages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::ResultRecord;
use crate::error::{config, Result};

/// Below this floor-to-ceiling gap the effect is undefined.
pub const MIN_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EffectBaseline {
    /// Floor and ceiling run through the same embedder and classifier.
    #[default]
    Pipeline,
    /// Floor and ceiling come from raw features with the same classifier.
    Raw,
}

/// Which cells play floor, semisupervised and ceiling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectEndpoints {
    /// Labeled size of the floor and the semisupervised cell (floor uses U = L).
    pub l_ref: usize,
    /// Unlabeled size of the semisupervised cell.
    pub u_max: usize,
    /// Labeled (and unlabeled) size of the ceiling cell.
    pub l_ceiling: usize,
}

impl Default for EffectEndpoints {
    fn default() -> Self {
        EffectEndpoints {
            l_ref: 100,
            u_max: 7000,
            l_ceiling: 7000,
        }
    }
}

/// Mean, sample standard deviation (divisor n - 1, 0 when n = 1) and count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(MeanStd { mean, std, n })
    }
}

impl std::fmt::Display for MeanStd {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.4} ± {:.4} (n={})", self.mean, self.std, self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemisupEffect {
    /// Aggregate over repetitions with a defined effect; `None` if there are none.
    pub value: Option<MeanStd>,
    pub floor_accuracy: MeanStd,
    pub semi_accuracy: MeanStd,
    pub ceiling_accuracy: MeanStd,
    /// Per repetition, `None` where the gap was below the guard.
    pub per_repetition: BTreeMap<usize, Option<f64>>,
    pub undefined: usize,
}

/// `(semi - floor) / (ceiling - floor)`, or `None` when the gap vanishes.
pub fn effect_value(floor: f64, semi: f64, ceiling: f64) -> Option<f64> {
    let gap = ceiling - floor;
    (gap.abs() >= MIN_GAP).then(|| (semi - floor) / gap)
}

fn accuracies_at(records: &[ResultRecord], l: usize, u: usize) -> BTreeMap<usize, f64> {
    records
        .iter()
        .filter(|r| r.labeled_size == l && r.unlabeled_size == u)
        .filter_map(|r| r.accuracy.map(|a| (r.repetition, a)))
        .collect()
}

/// Per-repetition effect, then mean and sample std over repetitions.
/// `cells` hold one embedder/classifier/target; with `EffectBaseline::Raw`
/// the floor and ceiling are read from `baseline` instead.
pub fn semisupervision_effect(
    cells: &[ResultRecord],
    baseline: Option<&[ResultRecord]>,
    endpoints: &EffectEndpoints,
) -> Result<SemisupEffect> {
    let ends = baseline.unwrap_or(cells);
    let floor = accuracies_at(ends, endpoints.l_ref, endpoints.l_ref);
    let semi = accuracies_at(cells, endpoints.l_ref, endpoints.u_max);
    let ceiling = accuracies_at(ends, endpoints.l_ceiling, endpoints.l_ceiling);
    let mut per_repetition = BTreeMap::new();
    let (mut f, mut s, mut c) = (Vec::new(), Vec::new(), Vec::new());
    for (rep, &sv) in &semi {
        let (Some(&fv), Some(&cv)) = (floor.get(rep), ceiling.get(rep)) else {
            continue;
        };
        f.push(fv);
        s.push(sv);
        c.push(cv);
        per_repetition.insert(*rep, effect_value(fv, sv, cv));
    }
    if per_repetition.is_empty() {
        return Err(config(format!(
            "no repetition has floor (L={0}, U={0}), semi (L={0}, U={1}) and ceiling (L={2}, U={2}) cells",
            endpoints.l_ref, endpoints.u_max, endpoints.l_ceiling
        )));
    }
    let defined: Vec<f64> = per_repetition.values().flatten().copied().collect();
    Ok(SemisupEffect {
        value: MeanStd::of(&defined),
        floor_accuracy: MeanStd::of(&f).expect("non-empty"),
        semi_accuracy: MeanStd::of(&s).expect("non-empty"),
        ceiling_accuracy: MeanStd::of(&c).expect("non-empty"),
        undefined: per_repetition.len() - defined.len(),
        per_repetition,
    })
}

/// Weighted mean; `None` weights mean uniform.
pub fn weighted_mean(values: &[f64], weights: Option<&[f64]>) -> Result<f64> {
    if values.is_empty() {
        return Err(config("weighted mean of no values"));
    }
    let uniform = vec![1.0; values.len()];
    let w = weights.unwrap_or(&uniform);
    if w.len() != values.len() {
        return Err(config(format!("{} weights for {} values", w.len(), values.len())));
    }
    if w.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
        return Err(config("weights must be non-negative and finite"));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(config("weights sum to zero"));
    }
    Ok(values.iter().zip(w).map(|(v, x)| v * x).sum::<f64>() / total)
}

/// `per_target[t]` maps repetition -> accuracy. For each repetition present
/// in every target the weighted mean across targets is taken; the result is
/// the mean and sample std of those per-repetition averages.
pub fn weighted_cross_target_accuracy(
    per_target: &[BTreeMap<usize, f64>],
    weights: Option<&[f64]>,
) -> Result<MeanStd> {
    let Some(first) = per_target.first() else {
        return Err(config("no targets"));
    };
    let mut averages = Vec::new();
    for rep in first.keys() {
        let values: Option<Vec<f64>> = per_target.iter().map(|t| t.get(rep).copied()).collect();
        if let Some(values) = values {
            averages.push(weighted_mean(&values, weights)?);
        }
    }
    MeanStd::of(&averages).ok_or_else(|| config("no repetition is shared by every target"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ClassifierKind, EmbedderKind};

    fn cell(rep: usize, l: usize, u: usize, acc: f64) -> ResultRecord {
        ResultRecord {
            fingerprint: "f".into(),
            dataset_id: "d".into(),
            target: "t".into(),
            embedder: EmbedderKind::Pca,
            classifier: ClassifierKind::Logreg,
            repetition: rep,
            labeled_size: l,
            unlabeled_size: u,
            accuracy: Some(acc),
            wall_time_s: 0.0,
            metadata_json: "{}".into(),
        }
    }

    #[test]
    fn closed_form_endpoints() {
        assert_eq!(effect_value(0.5, 0.9, 0.9), Some(1.0));
        assert_eq!(effect_value(0.5, 0.5, 0.9), Some(0.0));
        assert_eq!(effect_value(0.5, 0.7, 0.5), None);
    }

    #[test]
    fn per_repetition_then_aggregate() {
        let cells = vec![
            cell(0, 100, 100, 0.5),
            cell(0, 100, 7000, 0.7),
            cell(0, 7000, 7000, 0.9),
            cell(1, 100, 100, 0.6),
            cell(1, 100, 7000, 0.8),
            cell(1, 7000, 7000, 0.8),
            cell(2, 100, 100, 0.6),
            cell(2, 100, 7000, 0.7),
            cell(2, 7000, 7000, 0.6),
        ];
        let e = semisupervision_effect(&cells, None, &EffectEndpoints::default()).unwrap();
        let v = e.value.unwrap();
        assert_eq!(v.n, 2);
        assert!((v.mean - 0.75).abs() < 1e-12);
        assert!((v.std - 0.125f64.sqrt()).abs() < 1e-12);
        assert_eq!(e.undefined, 1);
        assert_eq!(e.per_repetition[&2], None);
    }

    #[test]
    fn raw_baseline_reads_endpoints_elsewhere() {
        let cells = vec![cell(0, 100, 7000, 0.7)];
        let raw = vec![cell(0, 100, 100, 0.6), cell(0, 7000, 7000, 0.8)];
        let e = semisupervision_effect(&cells, Some(&raw), &EffectEndpoints::default()).unwrap();
        assert!((e.value.unwrap().mean - 0.5).abs() < 1e-12);
        assert!(semisupervision_effect(&cells, None, &EffectEndpoints::default()).is_err());
    }

    #[test]
    fn weighted_means() {
        assert_eq!(weighted_mean(&[0.6], None).unwrap(), 0.6);
        assert!((weighted_mean(&[0.6, 0.7], None).unwrap() - 0.65).abs() < 1e-15);
        assert_eq!(weighted_mean(&[1.0, 0.0], Some(&[3.0, 1.0])).unwrap(), 0.75);
        assert!(weighted_mean(&[1.0], Some(&[0.0])).is_err());
        let t1: BTreeMap<usize, f64> = [(0, 0.6), (1, 0.8)].into();
        let t2: BTreeMap<usize, f64> = [(0, 0.7), (1, 0.6)].into();
        let m = weighted_cross_target_accuracy(&[t1, t2], None).unwrap();
        assert!((m.mean - 0.675).abs() < 1e-12);
        assert_eq!(m.n, 2);
    }

    #[test]
    fn sample_std_two_points() {
        let m = MeanStd::of(&[0.4, 0.6]).unwrap();
        assert!((m.mean - 0.5).abs() < 1e-15);
        assert!((m.std - 0.02f64.sqrt()).abs() < 1e-12);
        assert_eq!(MeanStd::of(&[0.3]).unwrap().std, 0.0);
    }
}
