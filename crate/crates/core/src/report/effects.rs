//! Cross-target semisupervision-effect summaries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{by_series, AggregateRow};
use crate::data::{ClassifierKind, EmbedderKind, ResultRecord};
use crate::error::{config, Result};
use crate::harness::{semisupervision_effect, weighted_mean, EffectBaseline, EffectEndpoints, MeanStd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SummaryConfig {
    pub l_ceiling: usize,
    /// Unlabeled size of the semisupervised cell; `None` takes the largest U run for each L.
    pub u_max: Option<usize>,
    pub baseline: EffectBaseline,
    /// Per-target weights; `None` is uniform.
    pub weights: Option<BTreeMap<String, f64>>,
}

impl Default for SummaryConfig {
    fn default() -> Self {
        SummaryConfig {
            l_ceiling: 7000,
            u_max: None,
            baseline: EffectBaseline::Pipeline,
            weights: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectGroup {
    pub dataset_id: String,
    pub embedder: EmbedderKind,
    pub classifier: ClassifierKind,
    pub labeled_size: usize,
    pub unlabeled_size: usize,
    pub targets: Vec<String>,
    pub weights: Vec<f64>,
    /// Each target's own effect over its repetitions.
    pub per_target: BTreeMap<String, Option<MeanStd>>,
    /// Weighted mean across targets per repetition, then mean and std over repetitions.
    pub effect: Option<MeanStd>,
    /// (target, repetition) pairs whose gap was below the guard.
    pub undefined: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSummary {
    pub spread: String,
    pub config: SummaryConfig,
    pub groups: Vec<EffectGroup>,
}

impl EffectSummary {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }

    pub fn to_text(&self) -> String {
        let header = ["dataset", "embedder", "classifier", "L", "U", "targets", "effect", "undefined"];
        let mut rows: Vec<[String; 8]> = vec![header.map(String::from)];
        for g in &self.groups {
            rows.push([
                g.dataset_id.clone(),
                g.embedder.to_string(),
                g.classifier.to_string(),
                g.labeled_size.to_string(),
                g.unlabeled_size.to_string(),
                g.targets.len().to_string(),
                g.effect.map(|e| e.to_string()).unwrap_or_else(|| "undefined".into()),
                g.undefined.to_string(),
            ]);
        }
        let mut widths = [0usize; 8];
        for r in &rows {
            for (w, c) in widths.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = format!("# {}\n", self.spread);
        for r in &rows {
            let cells: Vec<String> = r
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
        }
        out
    }
}

fn weight_of(cfg: &SummaryConfig, target: &str) -> Result<f64> {
    match &cfg.weights {
        None => Ok(1.0),
        Some(w) => w
            .get(target)
            .copied()
            .ok_or_else(|| config(format!("no weight given for target {target:?}"))),
    }
}

struct Candidate {
    dataset_id: String,
    embedder: EmbedderKind,
    classifier: ClassifierKind,
    labeled_size: usize,
}

/// One group per (dataset, embedder, classifier, L) with L below the ceiling.
/// Groups whose floor, semisupervised or ceiling cells are missing for some
/// target are skipped with a warning.
pub fn summarize_effects(records: &[ResultRecord], cfg: &SummaryConfig) -> Result<EffectSummary> {
    super::aggregate(records)?;
    let series = by_series(records);
    let mut candidates: BTreeMap<(String, EmbedderKind, ClassifierKind, usize), Candidate> = BTreeMap::new();
    for ((dataset, _, embedder, classifier), recs) in &series {
        if cfg.baseline == EffectBaseline::Raw && *embedder == EmbedderKind::Raw {
            continue;
        }
        for r in recs.iter().filter(|r| r.labeled_size < cfg.l_ceiling) {
            candidates
                .entry((dataset.clone(), *embedder, *classifier, r.labeled_size))
                .or_insert_with(|| Candidate {
                    dataset_id: dataset.clone(),
                    embedder: *embedder,
                    classifier: *classifier,
                    labeled_size: r.labeled_size,
                });
        }
    }
    let mut groups = Vec::new();
    'group: for c in candidates.values() {
        let targets: Vec<&String> = series
            .keys()
            .filter(|(d, _, e, k)| *d == c.dataset_id && *e == c.embedder && *k == c.classifier)
            .map(|(_, t, _, _)| t)
            .collect();
        let u_max = match cfg.u_max {
            Some(u) => u,
            None => targets
                .iter()
                .flat_map(|t| &series[&(c.dataset_id.clone(), (*t).clone(), c.embedder, c.classifier)])
                .filter(|r| r.labeled_size == c.labeled_size)
                .map(|r| r.unlabeled_size)
                .max()
                .expect("candidate has records"),
        };
        let endpoints = EffectEndpoints {
            l_ref: c.labeled_size,
            u_max,
            l_ceiling: cfg.l_ceiling,
        };
        let mut per_target = BTreeMap::new();
        let mut per_rep: Vec<BTreeMap<usize, Option<f64>>> = Vec::new();
        let mut weights = Vec::new();
        let mut undefined = 0;
        for t in &targets {
            let cells = &series[&(c.dataset_id.clone(), (*t).clone(), c.embedder, c.classifier)];
            let baseline = match cfg.baseline {
                EffectBaseline::Pipeline => None,
                EffectBaseline::Raw => {
                    match series.get(&(c.dataset_id.clone(), (*t).clone(), EmbedderKind::Raw, c.classifier)) {
                        Some(b) => Some(b.as_slice()),
                        None => {
                            log::warn!("no raw baseline for {}/{t}/{}; group skipped", c.dataset_id, c.classifier);
                            continue 'group;
                        }
                    }
                }
            };
            let effect = match semisupervision_effect(cells, baseline, &endpoints) {
                Ok(e) => e,
                Err(e) => {
                    log::warn!(
                        "{}/{}/{}/L={}: target {t}: {e}; group skipped",
                        c.dataset_id, c.embedder, c.classifier, c.labeled_size
                    );
                    continue 'group;
                }
            };
            undefined += effect.undefined;
            per_target.insert((*t).clone(), effect.value);
            per_rep.push(effect.per_repetition);
            weights.push(weight_of(cfg, t)?);
        }
        // Repetitions where every target has a defined effect.
        let shared: BTreeSet<usize> = per_rep[0]
            .keys()
            .copied()
            .filter(|rep| per_rep.iter().all(|m| matches!(m.get(rep), Some(Some(_)))))
            .collect();
        let mut averages = Vec::with_capacity(shared.len());
        for rep in &shared {
            let values: Vec<f64> = per_rep.iter().map(|m| m[rep].expect("defined")).collect();
            averages.push(weighted_mean(&values, Some(&weights))?);
        }
        groups.push(EffectGroup {
            dataset_id: c.dataset_id.clone(),
            embedder: c.embedder,
            classifier: c.classifier,
            labeled_size: c.labeled_size,
            unlabeled_size: u_max,
            targets: targets.into_iter().cloned().collect(),
            weights,
            per_target,
            effect: MeanStd::of(&averages),
            undefined,
        });
    }
    if groups.is_empty() {
        return Err(config(format!(
            "no group has floor, semisupervised and ceiling (L=U={}) cells for every target",
            cfg.l_ceiling
        )));
    }
    Ok(EffectSummary {
        spread: "± is the sample standard deviation across repetitions (divisor n-1); n = repetitions".into(),
        config: cfg.clone(),
        groups,
    })
}

/// Writes each target's mean effect onto the row of its semisupervised cell.
pub fn attach_effects(rows: &mut [AggregateRow], records: &[ResultRecord], cfg: &SummaryConfig) -> Result<()> {
    let summary = summarize_effects(records, cfg)?;
    for g in &summary.groups {
        for row in rows.iter_mut() {
            let k = &row.key;
            if k.dataset_id == g.dataset_id
                && k.embedder == g.embedder
                && k.classifier == g.classifier
                && k.labeled_size == g.labeled_size
                && k.unlabeled_size == g.unlabeled_size
            {
                if let Some(Some(e)) = g.per_target.get(&k.target) {
                    row.effect = Some(e.mean);
                }
            }
        }
    }
    Ok(())
}
