//! Aggregation of results into mean/std tables, figure tables and effect summaries.

mod effects;
mod table;

use std::collections::{BTreeMap, BTreeSet};

pub use effects::{attach_effects, summarize_effects, EffectGroup, EffectSummary, SummaryConfig};
pub use table::{emit_figure_table, TABLE_COLUMNS, parse_table, write_aggregate_table, Figure, FigureTable};

use crate::data::{ClassifierKind, EmbedderKind, ResultRecord};
use crate::error::{config, Error, Result};
use crate::harness::MeanStd;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupKey {
    pub dataset_id: String,
    pub target: String,
    pub embedder: EmbedderKind,
    pub classifier: ClassifierKind,
    pub labeled_size: usize,
    pub unlabeled_size: usize,
}

impl GroupKey {
    pub fn of(r: &ResultRecord) -> GroupKey {
        GroupKey {
            dataset_id: r.dataset_id.clone(),
            target: r.target.clone(),
            embedder: r.embedder,
            classifier: r.classifier,
            labeled_size: r.labeled_size,
            unlabeled_size: r.unlabeled_size,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub key: GroupKey,
    pub fingerprint: String,
    pub mean: f64,
    /// Sample standard deviation across repetitions (0 for a single one).
    pub std: f64,
    pub count: usize,
    /// Repetitions whose cell failed and were left out.
    pub failed: usize,
    /// Semisupervision effect, on the row of the semisupervised cell.
    pub effect: Option<f64>,
}

/// Groups records by (dataset, target, embedder, classifier, L, U) in
/// lexicographic key order. Failed cells are counted but not averaged;
/// groups without any successful cell are dropped with a warning.
pub fn aggregate(records: &[ResultRecord]) -> Result<Vec<AggregateRow>> {
    if records.is_empty() {
        return Err(config("no records to aggregate"));
    }
    let mut groups: BTreeMap<GroupKey, Vec<&ResultRecord>> = BTreeMap::new();
    for r in records {
        groups.entry(GroupKey::of(r)).or_default().push(r);
    }
    let mut rows = Vec::with_capacity(groups.len());
    for (key, members) in groups {
        let fingerprints: BTreeSet<&str> = members.iter().map(|r| r.fingerprint.as_str()).collect();
        if fingerprints.len() > 1 {
            return Err(Error::Integrity(format!(
                "group {key:?} mixes plan fingerprints {fingerprints:?}"
            )));
        }
        let mut reps = BTreeSet::new();
        if let Some(dup) = members.iter().find(|r| !reps.insert(r.repetition)) {
            return Err(Error::Integrity(format!(
                "group {key:?} has repetition {} more than once",
                dup.repetition
            )));
        }
        // Sorted by repetition so the sums do not depend on input order.
        let mut values: Vec<(usize, f64)> = members
            .iter()
            .filter_map(|r| r.accuracy.map(|a| (r.repetition, a)))
            .collect();
        values.sort_by_key(|v| v.0);
        let accs: Vec<f64> = values.iter().map(|v| v.1).collect();
        let failed = members.len() - accs.len();
        let Some(ms) = MeanStd::of(&accs) else {
            log::warn!("every cell of {key:?} failed; group omitted");
            continue;
        };
        rows.push(AggregateRow {
            fingerprint: fingerprints.into_iter().next().expect("non-empty").to_string(),
            key,
            mean: ms.mean,
            std: ms.std,
            count: ms.n,
            failed,
            effect: None,
        });
    }
    Ok(rows)
}

/// Records split by (dataset, target, embedder, classifier).
pub(crate) fn by_series(records: &[ResultRecord]) -> BTreeMap<(String, String, EmbedderKind, ClassifierKind), Vec<ResultRecord>> {
    let mut out: BTreeMap<_, Vec<ResultRecord>> = BTreeMap::new();
    for r in records {
        out.entry((r.dataset_id.clone(), r.target.clone(), r.embedder, r.classifier))
            .or_default()
            .push(r.clone());
    }
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn rec(target: &str, embedder: EmbedderKind, rep: usize, l: usize, u: usize, acc: f64) -> ResultRecord {
        ResultRecord {
            fingerprint: format!("fp-{target}-{embedder}"),
            dataset_id: "surrogate:t1".into(),
            target: target.into(),
            embedder,
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
    fn single_record_and_two_point_std() {
        let rows = aggregate(&[rec("a", EmbedderKind::Pca, 0, 100, 100, 0.7)]).unwrap();
        assert_eq!((rows[0].mean, rows[0].std, rows[0].count), (0.7, 0.0, 1));
        let rows = aggregate(&[
            rec("a", EmbedderKind::Pca, 0, 100, 100, 0.4),
            rec("a", EmbedderKind::Pca, 1, 100, 100, 0.6),
        ])
        .unwrap();
        assert!((rows[0].mean - 0.5).abs() < 1e-15);
        assert!((rows[0].std - 0.1414).abs() < 1e-4);
    }

    #[test]
    fn mixed_fingerprints_are_rejected() {
        let mut b = rec("a", EmbedderKind::Pca, 1, 100, 100, 0.6);
        b.fingerprint = "other".into();
        let err = aggregate(&[rec("a", EmbedderKind::Pca, 0, 100, 100, 0.4), b]).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    #[test]
    fn failed_cells_are_counted() {
        let mut b = rec("a", EmbedderKind::Pca, 1, 100, 100, 0.6);
        b.accuracy = None;
        let rows = aggregate(&[rec("a", EmbedderKind::Pca, 0, 100, 100, 0.4), b.clone()]).unwrap();
        assert_eq!((rows[0].count, rows[0].failed), (1, 1));
        assert!(aggregate(&[b]).unwrap().is_empty());
    }

    #[test]
    fn ordering_is_lexicographic_with_numeric_sizes() {
        let rows = aggregate(&[
            rec("b", EmbedderKind::Pca, 0, 100, 1000, 0.5),
            rec("a", EmbedderKind::Vae, 0, 100, 200, 0.5),
            rec("a", EmbedderKind::Pca, 0, 100, 500, 0.5),
            rec("a", EmbedderKind::Pca, 0, 100, 100, 0.5),
        ])
        .unwrap();
        let keys: Vec<(&str, EmbedderKind, usize)> = rows
            .iter()
            .map(|r| (r.key.target.as_str(), r.key.embedder, r.key.unlabeled_size))
            .collect();
        assert_eq!(
            keys,
            vec![
                ("a", EmbedderKind::Pca, 100),
                ("a", EmbedderKind::Pca, 500),
                ("a", EmbedderKind::Vae, 200),
                ("b", EmbedderKind::Pca, 1000)
            ]
        );
    }

    proptest::proptest! {
        #[test]
        fn aggregation_ignores_record_order(seed in proptest::prelude::any::<u64>()) {
            use rand::seq::SliceRandom;
            let mut records = Vec::new();
            for (i, t) in ["a", "b"].iter().enumerate() {
                for rep in 0..4 {
                    for u in [100, 500] {
                        let acc = ((rep * 7 + u / 100 + i) % 10) as f64 / 10.0 + 0.013;
                        records.push(rec(t, EmbedderKind::Isomap, rep, 100, u, acc));
                    }
                }
            }
            let reference = aggregate(&records).unwrap();
            records.shuffle(&mut crate::seed::stream(seed, &[]));
            proptest::prop_assert_eq!(aggregate(&records).unwrap(), reference);
        }
    }
}
