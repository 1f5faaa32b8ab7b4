//! The sample-complexity protocol: per repetition split, draw labeled and
//! unlabeled sets, fit the embedding on the unlabeled pool, train on the
//! embedded labeled rows and score the embedded test rows.

mod cache;
mod effect;
mod results;
mod source;
mod sweep;

use std::collections::HashSet;
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use cache::EmbeddingCache;
pub use effect::{
    effect_value, semisupervision_effect, weighted_cross_target_accuracy, weighted_mean, EffectBaseline,
    EffectEndpoints, MeanStd, SemisupEffect,
};
pub use results::{read_results, write_results, ResultsFile, RESULT_COLUMNS};
pub use source::resolve_dataset;
pub use sweep::{plan_cells, run_sweep, SweepOptions, SweepSummary};

use crate::classify::{accuracy, Classifier, ClassifierSettings};
use crate::data::{
    binarize_target, class_frequency_map, fingerprint_of, split_train_test, subsample_positions, ClassifierKind,
    Dataset, EmbedderKind, ExperimentPlan, FeatureKind, ResultRecord, SplitSpec,
};
use crate::embed::{fit_embedding, EmbedderSettings, FittedEmbedding};
use crate::error::{config, Error, Result};
use crate::ingest::Standardizer;
use crate::seed::{self, Part};

/// Everything about a run that the plan itself does not fix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineSettings {
    pub train_size: usize,
    pub test_size: usize,
    pub stratify: bool,
    pub embedding: EmbedderSettings,
    pub classifier: ClassifierSettings,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        PipelineSettings {
            train_size: 7000,
            test_size: 500,
            stratify: true,
            embedding: EmbedderSettings::default(),
            classifier: ClassifierSettings::default(),
        }
    }
}

impl PipelineSettings {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config(format!("settings: {e}")))
    }
}

/// Plan fingerprint extended with the pipeline settings.
pub fn run_fingerprint(plan: &ExperimentPlan, settings: &PipelineSettings) -> String {
    let plan_json = serde_json::to_string(plan).expect("plan serializes");
    let settings_json = serde_json::to_string(settings).expect("settings serialize");
    fingerprint_of(&[&plan_json, &settings_json])
}

/// One evaluated cell of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunCell {
    pub repetition: usize,
    pub labeled_size: usize,
    pub unlabeled_size: usize,
    pub embedder: EmbedderKind,
    pub classifier: ClassifierKind,
    /// `None` when the embedding or classifier failed numerically.
    pub test_accuracy: Option<f64>,
    pub wall_time_s: f64,
    pub metadata: Value,
}

impl RunCell {
    pub fn into_record(self, fingerprint: &str, plan: &ExperimentPlan) -> ResultRecord {
        ResultRecord {
            fingerprint: fingerprint.to_string(),
            dataset_id: plan.dataset_id.clone(),
            target: plan.target_name.clone(),
            embedder: self.embedder,
            classifier: self.classifier,
            repetition: self.repetition,
            labeled_size: self.labeled_size,
            unlabeled_size: self.unlabeled_size,
            accuracy: self.test_accuracy,
            wall_time_s: self.wall_time_s,
            metadata_json: serde_json::to_string(&self.metadata).expect("metadata serializes"),
        }
    }
}

/// A plan bound to its dataset, settings and embedding cache.
pub struct Experiment<'a> {
    pub plan: ExperimentPlan,
    pub settings: PipelineSettings,
    /// Focused on the plan's target.
    dataset: &'a Dataset,
    focused: Dataset,
    cache: &'a EmbeddingCache,
    pub record_timing: bool,
    /// Identifies the dataset in cache keys.
    dataset_key: String,
}

impl<'a> Experiment<'a> {
    pub fn new(
        plan: ExperimentPlan,
        settings: PipelineSettings,
        dataset: &'a Dataset,
        cache: &'a EmbeddingCache,
    ) -> Result<Self> {
        plan.validate()?;
        let focused = dataset.focus_target(&plan.target_name)?;
        if settings.train_size + settings.test_size > dataset.n() {
            return Err(config(format!(
                "train_size {} + test_size {} exceeds dataset size {}",
                settings.train_size,
                settings.test_size,
                dataset.n()
            )));
        }
        let dataset_key = fingerprint_of(&[&plan.dataset_id, &format!("{}x{}", dataset.n(), dataset.p())]);
        Ok(Experiment {
            plan,
            settings,
            dataset,
            focused,
            cache,
            record_timing: true,
            dataset_key,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        self.dataset
    }

    pub fn fingerprint(&self) -> String {
        run_fingerprint(&self.plan, &self.settings)
    }

    fn embedding(&self, pool: &Dataset, seed: u64, full_pool: bool) -> Result<Arc<FittedEmbedding>> {
        let fit = || fit_embedding(self.plan.embedder, pool, self.plan.latent_dim, &self.settings.embedding, seed);
        // Only the full training split recurs across cells (every L at U = train size,
        // and every target of the same dataset), so only those fits are cached.
        if !full_pool || self.plan.embedder == EmbedderKind::Raw {
            return fit().map(Arc::new);
        }
        let ids: Vec<String> = pool.row_ids().iter().map(|i| i.to_string()).collect();
        let key = fingerprint_of(&[
            &self.dataset_key,
            self.plan.embedder.as_str(),
            &self.plan.latent_dim.to_string(),
            &serde_json::to_string(&self.settings.embedding).expect("settings serialize"),
            &seed.to_string(),
            &ids.join(","),
        ]);
        if let Some(hit) = self.cache.get(&key) {
            return Ok(hit);
        }
        let fitted = Arc::new(fit()?);
        self.cache.insert(key, Arc::clone(&fitted));
        Ok(fitted)
    }

    /// Evaluates one (repetition, L, U) cell.
    pub fn run_cell(&self, repetition: usize, l: usize, u: usize) -> Result<RunCell> {
        let start = Instant::now();
        let plan = &self.plan;
        let s = &self.settings;
        let master = plan.master_seed;
        if l > u {
            return Err(config(format!("labeled size {l} exceeds unlabeled size {u}")));
        }
        if plan.embedder != EmbedderKind::Raw && plan.latent_dim > u {
            return Err(config(format!("latent_dim {} exceeds unlabeled size {u}", plan.latent_dim)));
        }
        if repetition >= plan.repetitions {
            return Err(config(format!("repetition {repetition} outside 0..{}", plan.repetitions)));
        }
        let (train, test) = split_train_test(
            &self.focused,
            &SplitSpec {
                train_size: s.train_size,
                test_size: s.test_size,
                repetition_index: repetition,
                master_seed: master,
            },
        )?;
        if u > train.n() {
            return Err(config(format!("unlabeled size {u} exceeds the train split of {}", train.n())));
        }

        let mut labeled_rng = seed::stream(
            master,
            &[Part::Tag("labeled"), Part::Num(repetition as u64), Part::Num(l as u64)],
        );
        let labeled_pos = subsample_positions(&train, l, &mut labeled_rng, s.stratify)?;
        let in_labeled: HashSet<usize> = labeled_pos.iter().copied().collect();
        let mut rest: Vec<usize> = (0..train.n()).filter(|i| !in_labeled.contains(i)).collect();
        let mut extra_rng = seed::stream(
            master,
            &[Part::Tag("unlabeled"), Part::Num(repetition as u64), Part::Num(l as u64)],
        );
        rest.shuffle(&mut extra_rng);
        let mut pool_pos = labeled_pos.clone();
        pool_pos.extend_from_slice(&rest[..u - l]);
        pool_pos.sort_unstable();

        let labeled = train.select_rows(&labeled_pos);
        let pool = train.select_rows(&pool_pos).without_targets();
        let mut guard = LeakageGuard::new(&test);

        guard.check("standardization", &pool)?;
        let (pool, labeled, test) = match test.feature_kind() {
            FeatureKind::TabularStandardized => {
                let st = Standardizer::fit(&pool)?;
                (st.apply(&pool)?, st.apply(&labeled)?, st.apply(&test)?)
            }
            FeatureKind::ImagePixelsUnitInterval => (pool, labeled, test),
        };

        guard.check("embedding", &pool)?;
        let embed_seed = seed::derive_seed(
            master,
            &[Part::Tag("embed"), Part::Num(repetition as u64), Part::Num(u as u64)],
        );
        let mut meta = json!({
            "status": "ok",
            "pool_policy": "labeled_union_additional",
            "split_policy": "resplit_per_repetition",
            "train_size": s.train_size,
            "test_size": s.test_size,
            "latent_dim": plan.latent_dim,
            "binarize": plan.binarize,
            "labeled_class_frequencies": class_frequency_map(labeled.target()?),
            "test_class_frequencies": class_frequency_map(test.target()?),
        });
        let failed = |mut meta: Value, stage: &str, e: &Error| -> RunCell {
            meta["status"] = json!("failed");
            meta["failure_stage"] = json!(stage);
            meta["reason"] = json!(e.to_string());
            log::warn!("cell rep={repetition} L={l} U={u} failed in {stage}: {e}");
            RunCell {
                repetition,
                labeled_size: l,
                unlabeled_size: u,
                embedder: plan.embedder,
                classifier: plan.classifier,
                test_accuracy: None,
                wall_time_s: 0.0,
                metadata: meta,
            }
        };
        let finish = |mut cell: RunCell| -> RunCell {
            if self.record_timing {
                cell.wall_time_s = start.elapsed().as_secs_f64();
            }
            cell
        };

        let fitted = match self.embedding(&pool, embed_seed, u == train.n()) {
            Ok(f) => f,
            Err(e) if recoverable(&e) => return Ok(finish(failed(meta, "embedding", &e))),
            Err(e) => return Err(e),
        };
        meta["embedding"] = fitted.info.clone();
        let embedded = fitted
            .model
            .transform(labeled.features())
            .and_then(|zl| Ok((zl, fitted.model.transform(test.features())?)));
        let (zl, zt) = match embedded {
            Ok((zl, zt)) if zl.iter().chain(zt.iter()).all(|v| v.is_finite()) => (zl, zt),
            Ok(_) => {
                let e = Error::Numeric("embedding produced non-finite coordinates".into());
                return Ok(finish(failed(meta, "transform", &e)));
            }
            Err(e) if recoverable(&e) => return Ok(finish(failed(meta, "transform", &e))),
            Err(e) => return Err(e),
        };

        let (labeled, test) = if plan.binarize {
            guard.check("binarization", &labeled)?;
            let mean = labeled.target()?.mean();
            meta["binarize_reference_mean"] = json!(mean);
            (binarize_target(&labeled, mean)?, binarize_target(&test, mean)?)
        } else {
            (labeled, test)
        };
        let yl = &labeled.target()?.values;
        let yt = &test.target()?.values;
        let classes = labeled.target()?.class_count;

        guard.check("classifier", &labeled)?;
        let clf_seed = seed::derive_seed(
            master,
            &[
                Part::Tag("classifier"),
                Part::Num(repetition as u64),
                Part::Num(l as u64),
                Part::Num(u as u64),
            ],
        );
        let clf = match Classifier::fit(plan.classifier, &zl, yl, classes, &s.classifier, clf_seed) {
            Ok(c) => c,
            Err(e) if recoverable(&e) => return Ok(finish(failed(meta, "classifier", &e))),
            Err(e) => return Err(e),
        };
        meta["classifier"] = match &clf {
            Classifier::LogReg(m) => json!({
                "lambda": m.lambda,
                "converged": m.converged,
                "iterations": m.iterations,
            }),
            Classifier::Forest(m) => json!({
                "trees": m.config.trees,
                "max_features": m.config.max_features,
                "min_leaf": m.config.min_leaf,
                "seed": m.config.seed,
                "oob_accuracy": m.oob_accuracy,
            }),
        };
        let predicted = clf.predict(&zt)?;
        let acc = accuracy(&predicted, yt)?;
        meta["leakage_checks"] = json!(guard.checks);
        Ok(finish(RunCell {
            repetition,
            labeled_size: l,
            unlabeled_size: u,
            embedder: plan.embedder,
            classifier: plan.classifier,
            test_accuracy: Some(acc),
            wall_time_s: 0.0,
            metadata: meta,
        }))
    }
}

fn recoverable(e: &Error) -> bool {
    matches!(e, Error::Numeric(_) | Error::Integrity(_))
}

/// Asserts that nothing fitted in a cell has seen a test row.
struct LeakageGuard {
    test_ids: HashSet<usize>,
    checks: usize,
}

impl LeakageGuard {
    fn new(test: &Dataset) -> Self {
        LeakageGuard {
            test_ids: test.row_ids().iter().copied().collect(),
            checks: 0,
        }
    }

    fn check(&mut self, stage: &str, fit_rows: &Dataset) -> Result<()> {
        self.checks += 1;
        if let Some(id) = fit_rows.row_ids().iter().find(|id| self.test_ids.contains(id)) {
            return Err(Error::Leakage(format!("{stage} would be fitted on test row {id}")));
        }
        Ok(())
    }
}
