//! Tab-separated tables with a comment header; every table parses back into its rows.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use super::{AggregateRow, GroupKey};
use crate::data::{ClassifierKind, EmbedderKind};
use crate::error::{config, Error, Result};

pub const TABLE_COLUMNS: [&str; 13] = [
    "dataset_id",
    "target",
    "embedder",
    "classifier",
    "labeled_size",
    "unlabeled_size",
    "mean",
    "std",
    "count",
    "failed",
    "effect",
    "fingerprint",
    "status",
];

const SPREAD_NOTE: &str =
    "# spread: std is the sample standard deviation across repetitions (divisor count-1); count = repetitions";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Accuracy against unlabeled size at one labeled size.
    F1UnlabeledCurves,
    /// Targets by embedders, curves over U for every L.
    F2EmbedderGrid,
    /// Bars per modality, target and classifier, one per L.
    F3ModalityBars,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::F1UnlabeledCurves => "f1_unlabeled_curves",
            Figure::F2EmbedderGrid => "f2_embedder_grid",
            Figure::F3ModalityBars => "f3_modality_bars",
        }
    }
}

impl std::str::FromStr for Figure {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "f1" | "f1_unlabeled_curves" => Ok(Figure::F1UnlabeledCurves),
            "f2" | "f2_embedder_grid" => Ok(Figure::F2EmbedderGrid),
            "f3" | "f3_modality_bars" => Ok(Figure::F3ModalityBars),
            _ => Err(config(format!("unknown figure {s:?} (expected f1, f2 or f3)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureTable {
    pub text: String,
    /// Keys the figure expects but the results lack.
    pub absent: Vec<GroupKey>,
}

enum Line<'a> {
    Row(&'a AggregateRow),
    Absent(GroupKey),
}

fn header(name: &str, rows: &[AggregateRow], extra: &[String]) -> String {
    let fps: BTreeSet<&str> = rows.iter().map(|r| r.fingerprint.as_str()).collect();
    let mut out = format!("# latentbench table: {name}\n");
    let _ = writeln!(out, "# fingerprints: {}", fps.into_iter().collect::<Vec<_>>().join(","));
    let _ = writeln!(out, "{SPREAD_NOTE}");
    for e in extra {
        let _ = writeln!(out, "# {e}");
    }
    out.push_str(&TABLE_COLUMNS.join("\t"));
    out.push('\n');
    out
}

fn key_cells(k: &GroupKey) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}",
        k.dataset_id, k.target, k.embedder, k.classifier, k.labeled_size, k.unlabeled_size
    )
}

fn render(lines: &[Line<'_>]) -> String {
    let mut out = String::new();
    for line in lines {
        match line {
            Line::Row(r) => {
                let effect = r.effect.map(|e| e.to_string()).unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\tok",
                    key_cells(&r.key),
                    r.mean,
                    r.std,
                    r.count,
                    r.failed,
                    effect,
                    r.fingerprint
                );
            }
            Line::Absent(k) => {
                let _ = writeln!(out, "{}\t\t\t\t\t\t\tabsent", key_cells(k));
            }
        }
    }
    out
}

/// All aggregate rows in key order.
pub fn write_aggregate_table(rows: &[AggregateRow]) -> String {
    let lines: Vec<Line<'_>> = rows.iter().map(Line::Row).collect();
    header("aggregate", rows, &[]) + &render(&lines)
}

/// Rows of a table written by this module; `absent` lines are skipped.
pub fn parse_table(text: &str, path: &Path) -> Result<Vec<AggregateRow>> {
    let mut rows = Vec::new();
    let mut saw_header = false;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split('\t').collect();
        if !saw_header {
            if cells != TABLE_COLUMNS {
                return Err(Error::parse_at_line(path, n, "unexpected table header"));
            }
            saw_header = true;
            continue;
        }
        if cells.len() != TABLE_COLUMNS.len() {
            return Err(Error::parse_at_line(path, n, format!("expected {} cells", TABLE_COLUMNS.len())));
        }
        if cells[12] == "absent" {
            continue;
        }
        let bad = |what: &str| Error::parse_at_line(path, n, format!("invalid {what}"));
        let int = |k: usize, what: &str| cells[k].parse::<usize>().map_err(|_| bad(what));
        let real = |k: usize, what: &str| cells[k].parse::<f64>().map_err(|_| bad(what));
        rows.push(AggregateRow {
            key: GroupKey {
                dataset_id: cells[0].to_string(),
                target: cells[1].to_string(),
                embedder: cells[2].parse::<EmbedderKind>().map_err(|_| bad("embedder"))?,
                classifier: cells[3].parse::<ClassifierKind>().map_err(|_| bad("classifier"))?,
                labeled_size: int(4, "labeled_size")?,
                unlabeled_size: int(5, "unlabeled_size")?,
            },
            mean: real(6, "mean")?,
            std: real(7, "std")?,
            count: int(8, "count")?,
            failed: int(9, "failed")?,
            effect: if cells[10].is_empty() { None } else { Some(real(10, "effect")?) },
            fingerprint: cells[11].to_string(),
        });
    }
    if !saw_header {
        return Err(Error::parse_at_line(path, 1, "missing table header"));
    }
    Ok(rows)
}

type Series = (String, String, EmbedderKind, ClassifierKind);

fn series(k: &GroupKey) -> Series {
    (k.dataset_id.clone(), k.target.clone(), k.embedder, k.classifier)
}

fn key(s: &Series, l: usize, u: usize) -> GroupKey {
    GroupKey {
        dataset_id: s.0.clone(),
        target: s.1.clone(),
        embedder: s.2,
        classifier: s.3,
        labeled_size: l,
        unlabeled_size: u,
    }
}

/// Builds the table for one figure. `labeled` fixes L for f1 (default: the
/// smallest L present). Missing cells become `absent` lines and are listed
/// in the header and in the returned `absent` keys.
pub fn emit_figure_table(rows: &[AggregateRow], figure: Figure, labeled: Option<usize>) -> Result<FigureTable> {
    if rows.is_empty() {
        return Err(config("no aggregate rows"));
    }
    let index: BTreeMap<&GroupKey, &AggregateRow> = rows.iter().map(|r| (&r.key, r)).collect();
    let mut wanted: BTreeSet<GroupKey> = BTreeSet::new();
    let mut extra = Vec::new();
    match figure {
        Figure::F1UnlabeledCurves => {
            let l = labeled.unwrap_or_else(|| rows.iter().map(|r| r.key.labeled_size).min().expect("non-empty"));
            extra.push(format!("labeled_size: {l}"));
            let at_l: Vec<&AggregateRow> = rows.iter().filter(|r| r.key.labeled_size == l).collect();
            if at_l.is_empty() {
                return Err(config(format!("no rows with labeled size {l}")));
            }
            let curves: BTreeSet<Series> = at_l.iter().map(|r| series(&r.key)).collect();
            let us: BTreeSet<usize> = at_l.iter().map(|r| r.key.unlabeled_size).collect();
            for s in &curves {
                for &u in &us {
                    wanted.insert(key(s, l, u));
                }
            }
        }
        Figure::F2EmbedderGrid => {
            let mut embedders: BTreeSet<EmbedderKind> = [EmbedderKind::Pca, EmbedderKind::Isomap, EmbedderKind::Vae].into();
            embedders.extend(rows.iter().map(|r| r.key.embedder));
            let cells: BTreeSet<(String, String, ClassifierKind)> = rows
                .iter()
                .map(|r| (r.key.dataset_id.clone(), r.key.target.clone(), r.key.classifier))
                .collect();
            let sizes: BTreeSet<(usize, usize)> =
                rows.iter().map(|r| (r.key.labeled_size, r.key.unlabeled_size)).collect();
            for (d, t, c) in &cells {
                for &e in &embedders {
                    for &(l, u) in &sizes {
                        wanted.insert(key(&(d.clone(), t.clone(), e, *c), l, u));
                    }
                }
            }
            extra.push(format!(
                "grid columns: {}",
                embedders.iter().map(|e| e.as_str()).collect::<Vec<_>>().join(",")
            ));
        }
        Figure::F3ModalityBars => {
            // One bar per L: the cell with the largest U for that L.
            let mut best: BTreeMap<(Series, usize), usize> = BTreeMap::new();
            for r in rows {
                let e = best.entry((series(&r.key), r.key.labeled_size)).or_insert(0);
                *e = (*e).max(r.key.unlabeled_size);
            }
            let groups: BTreeSet<Series> = best.keys().map(|(s, _)| s.clone()).collect();
            let ls: BTreeSet<usize> = best.keys().map(|(_, l)| *l).collect();
            for s in &groups {
                for &l in &ls {
                    match best.get(&(s.clone(), l)) {
                        Some(&u) => wanted.insert(key(s, l, u)),
                        None => wanted.insert(key(s, l, 0)),
                    };
                }
            }
            extra.push("bars: largest unlabeled size per labeled size; unlabeled_size 0 marks a missing bar".into());
        }
    }
    let mut lines = Vec::with_capacity(wanted.len());
    let mut absent = Vec::new();
    for k in wanted {
        match index.get(&k) {
            Some(r) => lines.push(Line::Row(r)),
            None => {
                absent.push(k.clone());
                lines.push(Line::Absent(k));
            }
        }
    }
    if !absent.is_empty() {
        log::warn!(
            "{}: {} expected cells are absent: {}",
            figure.name(),
            absent.len(),
            absent
                .iter()
                .map(|k| format!("{}/{}/{}/{}/L={}/U={}", k.dataset_id, k.target, k.embedder, k.classifier, k.labeled_size, k.unlabeled_size))
                .collect::<Vec<_>>()
                .join(", ")
        );
        extra.push(format!("absent: {}", absent.len()));
    }
    let text = header(figure.name(), rows, &extra) + &render(&lines);
    Ok(FigureTable { text, absent })
}

#[cfg(test)]
mod tests {
    use super::super::aggregate;
    use super::super::tests::rec;
    use super::*;

    fn sample_rows() -> Vec<AggregateRow> {
        let mut records = Vec::new();
        for rep in 0..3 {
            for (u, base) in [(100, 0.5), (500, 0.6), (2000, 0.7)] {
                records.push(rec("sex", EmbedderKind::Pca, rep, 100, u, base + 0.01 * rep as f64 + 1e-3 / 3.0));
            }
        }
        aggregate(&records).unwrap()
    }

    #[test]
    fn tables_round_trip_exactly() {
        let mut rows = sample_rows();
        rows[1].effect = Some(0.1 + 0.2);
        let text = write_aggregate_table(&rows);
        assert!(text.contains("sample standard deviation"));
        assert_eq!(parse_table(&text, Path::new("t")).unwrap(), rows);
        for fig in [Figure::F1UnlabeledCurves, Figure::F2EmbedderGrid, Figure::F3ModalityBars] {
            let t = emit_figure_table(&rows, fig, None).unwrap();
            let parsed = parse_table(&t.text, Path::new("t")).unwrap();
            assert!(parsed.iter().all(|p| rows.contains(p)));
        }
    }

    #[test]
    fn single_cell_gives_single_point_curve() {
        let rows = aggregate(&[rec("sex", EmbedderKind::Isomap, 0, 100, 100, 0.8)]).unwrap();
        let t = emit_figure_table(&rows, Figure::F1UnlabeledCurves, None).unwrap();
        assert!(t.absent.is_empty());
        assert_eq!(parse_table(&t.text, Path::new("t")).unwrap(), rows);
    }

    #[test]
    fn grid_flags_missing_embedders() {
        let rows = sample_rows();
        let t = emit_figure_table(&rows, Figure::F2EmbedderGrid, None).unwrap();
        let missing: BTreeSet<EmbedderKind> = t.absent.iter().map(|k| k.embedder).collect();
        assert_eq!(missing, [EmbedderKind::Isomap, EmbedderKind::Vae].into());
        assert_eq!(t.absent.len(), 6);
        assert!(t.text.contains("# absent: 6"));
        assert_eq!(parse_table(&t.text, Path::new("t")).unwrap(), rows);
    }

    #[test]
    fn bars_take_the_largest_unlabeled_size() {
        let rows = sample_rows();
        let t = emit_figure_table(&rows, Figure::F3ModalityBars, None).unwrap();
        let parsed = parse_table(&t.text, Path::new("t")).unwrap();
        assert_eq!(parsed.len(), 1);
        assert_eq!(parsed[0].key.unlabeled_size, 2000);
    }

    #[test]
    fn malformed_tables_are_rejected() {
        assert!(parse_table("a\tb\n", Path::new("t")).is_err());
        let text = write_aggregate_table(&sample_rows()).replace("\tok", "\tok\textra");
        assert!(parse_table(&text, Path::new("t")).is_err());
        assert!("f4".parse::<Figure>().is_err());
    }
}
