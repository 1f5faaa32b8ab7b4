use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::{Dataset, FeatureKind, Target};
use crate::error::{Error, Result};

/// Result of reading a delimited table.
#[derive(Debug, Clone)]
pub struct TableRead {
    pub dataset: Dataset,
    /// Rows dropped because a cell did not parse as a number (or a target
    /// cell was not a non-negative integer).
    pub dropped_rows: usize,
}

/// Reads a UTF-8 delimited table with a header row. Named target columns
/// become integer targets; every other column is a feature.
pub fn read_table(path: &Path, delimiter: char, target_columns: &[&str]) -> Result<TableRead> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_table(&text, path, delimiter, target_columns)
}

pub fn parse_table(text: &str, path: &Path, delimiter: char, target_columns: &[&str]) -> Result<TableRead> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::parse_at_line(path, 1, "empty table"))?;
    let names: Vec<String> = header.split(delimiter).map(|s| s.trim().to_string()).collect();
    let mut target_idx = Vec::with_capacity(target_columns.len());
    for t in target_columns {
        let i = names
            .iter()
            .position(|n| n == t)
            .ok_or_else(|| Error::parse_at_line(path, 1, format!("missing target column {t:?}")))?;
        target_idx.push(i);
    }
    let feature_idx: Vec<usize> = (0..names.len()).filter(|i| !target_idx.contains(i)).collect();
    if feature_idx.is_empty() {
        return Err(Error::parse_at_line(path, 1, "no feature columns"));
    }

    let mut feats: Vec<f64> = Vec::new();
    let mut targets: Vec<Vec<usize>> = vec![Vec::new(); target_idx.len()];
    let mut dropped = 0;
    let mut n = 0;
    for (lineno, line) in lines {
        let cells: Vec<&str> = line.split(delimiter).map(str::trim).collect();
        if cells.len() != names.len() {
            return Err(Error::parse_at_line(
                path,
                lineno + 1,
                format!("expected {} cells, found {}", names.len(), cells.len()),
            ));
        }
        let row: Option<Vec<f64>> = feature_idx
            .iter()
            .map(|&i| cells[i].parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        let labels: Option<Vec<usize>> = target_idx.iter().map(|&i| parse_class(cells[i])).collect();
        match (row, labels) {
            (Some(row), Some(labels)) => {
                feats.extend(row);
                for (t, l) in targets.iter_mut().zip(labels) {
                    t.push(l);
                }
                n += 1;
            }
            _ => dropped += 1,
        }
    }
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} rows with unparseable cells", path.display());
    }
    if n == 0 {
        return Err(Error::parse_at_line(path, 1, "no parseable data rows"));
    }
    let x = DMatrix::from_row_slice(n, feature_idx.len(), &feats);
    let mut ds = Dataset::new(x, FeatureKind::TabularStandardized)?
        .with_column_names(feature_idx.iter().map(|&i| names[i].clone()).collect())?;
    for (name, values) in target_columns.iter().zip(targets) {
        let class_count = values.iter().copied().max().unwrap_or(0) + 1;
        ds = ds.with_target(Target::new(*name, values, class_count)?)?;
    }
    Ok(TableRead {
        dataset: ds,
        dropped_rows: dropped,
    })
}

fn parse_class(cell: &str) -> Option<usize> {
    let v: f64 = cell.parse().ok()?;
    (v >= 0.0 && v.fract() == 0.0 && v < 1e9).then_some(v as usize)
}
