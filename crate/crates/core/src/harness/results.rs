//! The results CSV: one line per cell, appended as cells finish.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::Path;

use crate::data::ResultRecord;
use crate::error::{Error, Result};

pub const RESULT_COLUMNS: [&str; 11] = [
    "fingerprint",
    "dataset_id",
    "target",
    "embedder",
    "classifier",
    "repetition",
    "labeled_size",
    "unlabeled_size",
    "accuracy",
    "wall_time_s",
    "metadata_json",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ResultsFile {
    pub records: Vec<ResultRecord>,
    /// Bytes of complete lines; a partially written last line is not counted.
    pub complete_len: u64,
    pub truncated_tail: bool,
}

pub(crate) fn header_line() -> String {
    format!("{}\n", RESULT_COLUMNS.join(","))
}

pub(crate) fn record_line(r: &ResultRecord) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    let accuracy = r.accuracy.map(|a| a.to_string()).unwrap_or_default();
    w.write_record([
        r.fingerprint.as_str(),
        &r.dataset_id,
        &r.target,
        r.embedder.as_str(),
        r.classifier.as_str(),
        &r.repetition.to_string(),
        &r.labeled_size.to_string(),
        &r.unlabeled_size.to_string(),
        &accuracy,
        &r.wall_time_s.to_string(),
        &r.metadata_json,
    ])
    .expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
}

/// Reads a results file, ignoring a final line cut off by an interrupted write.
pub fn read_results(path: &Path) -> Result<ResultsFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_results(&bytes, path)
}

pub(crate) fn parse_results(bytes: &[u8], path: &Path) -> Result<ResultsFile> {
    let complete_len = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let truncated_tail = complete_len < bytes.len();
    if truncated_tail {
        log::warn!("{}: ignoring an incomplete final line", path.display());
    }
    let body = &bytes[..complete_len];
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(body);
    let header = reader.headers().map_err(|e| Error::parse_at_line(path, 1, e.to_string()))?.clone();
    if !body.is_empty() && header.iter().ne(RESULT_COLUMNS.iter().copied()) {
        return Err(Error::parse_at_line(path, 1, "unexpected results header"));
    }
    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| Error::parse_at_line(path, line, e.to_string()))?;
        let bad = |what: &str| Error::parse_at_line(path, line, format!("invalid {what}"));
        let num = |k: usize, what: &str| row[k].parse::<usize>().map_err(|_| bad(what));
        let accuracy = match &row[8] {
            "" => None,
            a => {
                let v: f64 = a.parse().map_err(|_| bad("accuracy"))?;
                if !(0.0..=1.0).contains(&v) {
                    return Err(bad("accuracy"));
                }
                Some(v)
            }
        };
        records.push(ResultRecord {
            fingerprint: row[0].to_string(),
            dataset_id: row[1].to_string(),
            target: row[2].to_string(),
            embedder: row[3].parse().map_err(|_| bad("embedder"))?,
            classifier: row[4].parse().map_err(|_| bad("classifier"))?,
            repetition: num(5, "repetition")?,
            labeled_size: num(6, "labeled_size")?,
            unlabeled_size: num(7, "unlabeled_size")?,
            accuracy,
            wall_time_s: row[9].parse().map_err(|_| bad("wall_time_s"))?,
            metadata_json: row[10].to_string(),
        });
    }
    Ok(ResultsFile {
        records,
        complete_len: complete_len as u64,
        truncated_tail,
    })
}

/// Writes a complete results file (header plus records).
pub fn write_results(path: &Path, records: &[ResultRecord]) -> Result<()> {
    let mut text = header_line();
    for r in records {
        text.push_str(&record_line(r));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Appender that flushes each line as soon as it is written.
pub(crate) struct Appender {
    file: fs::File,
    path: std::path::PathBuf,
}

impl Appender {
    pub(crate) fn open(path: &Path, fresh: bool) -> Result<Appender> {
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut a = Appender {
            file,
            path: path.to_path_buf(),
        };
        if fresh {
            a.write_raw(&header_line())?;
        }
        Ok(a)
    }

    fn write_raw(&mut self, text: &str) -> Result<()> {
        self.file
            .write_all(text.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub(crate) fn append(&mut self, r: &ResultRecord) -> Result<()> {
        self.write_raw(&record_line(r))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{ClassifierKind, EmbedderKind};

    fn rec(rep: usize, acc: Option<f64>) -> ResultRecord {
        ResultRecord {
            fingerprint: "abc".into(),
            dataset_id: "surrogate:t1".into(),
            target: "sex".into(),
            embedder: EmbedderKind::Isomap,
            classifier: ClassifierKind::RandomForest,
            repetition: rep,
            labeled_size: 100,
            unlabeled_size: 500,
            accuracy: acc,
            wall_time_s: 1.25,
            metadata_json: r#"{"reason":"a, \"quoted\" value"}"#.into(),
        }
    }

    #[test]
    fn round_trip_and_truncated_tail() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let records = vec![rec(0, Some(0.1 + 0.2)), rec(1, None)];
        write_results(&path, &records).unwrap();
        let back = read_results(&path).unwrap();
        assert_eq!(back.records, records);
        assert!(!back.truncated_tail);

        let mut bytes = fs::read(&path).unwrap();
        let full = bytes.len();
        bytes.extend_from_slice(record_line(&rec(2, Some(0.5))).as_bytes());
        bytes.truncate(full + 10);
        let parsed = parse_results(&bytes, &path).unwrap();
        assert_eq!(parsed.records, records);
        assert!(parsed.truncated_tail);
        assert_eq!(parsed.complete_len as usize, full);
    }

    #[test]
    fn bad_rows_report_their_line() {
        let text = format!("{}abc,d,t,pca,logreg,x,1,1,0.5,0,{{}}\n", header_line());
        let err = parse_results(text.as_bytes(), Path::new("f.csv")).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        let text = format!("{}abc,d,t,pca,logreg,0,1,1,1.5,0,{{}}\n", header_line());
        assert!(parse_results(text.as_bytes(), Path::new("f.csv")).is_err());
    }
}
