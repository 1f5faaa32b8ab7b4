//! Cartesian sweeps with an append-only, resumable results file.

use std::collections::HashSet;
use std::fs::OpenOptions;
use std::path::Path;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;

use super::results::{read_results, Appender};
use super::{Experiment, RunCell};
use crate::data::{ExperimentPlan, ResultRecord};
use crate::error::{config, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOptions {
    pub workers: usize,
    pub resume: bool,
    /// Stop after executing this many cells (used to exercise resumption).
    pub stop_after: Option<usize>,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            workers: 1,
            resume: false,
            stop_after: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSummary {
    pub executed: usize,
    pub skipped: usize,
    pub failed: usize,
    /// Every record of this run's fingerprint now in the results file.
    pub records: Vec<ResultRecord>,
}

/// Cells in execution order: repetition, then labeled size, then unlabeled
/// size, keeping only pairs with U >= L.
pub fn plan_cells(plan: &ExperimentPlan) -> Vec<(usize, usize, usize)> {
    let mut cells = Vec::new();
    for rep in 0..plan.repetitions {
        for &l in &plan.labeled_sizes {
            for &u in &plan.unlabeled_sizes {
                if u >= l {
                    cells.push((rep, l, u));
                }
            }
        }
    }
    cells
}

pub fn run_sweep(exp: &Experiment<'_>, out: &Path, opts: &SweepOptions) -> Result<SweepSummary> {
    let fingerprint = exp.fingerprint();
    let existing_len = std::fs::metadata(out).map(|m| m.len()).unwrap_or(0);
    let mut done = HashSet::new();
    let fresh = existing_len == 0;
    if !fresh {
        if !opts.resume {
            return Err(config(format!(
                "{} already exists; pass --resume to continue it",
                out.display()
            )));
        }
        let file = read_results(out)?;
        if file.truncated_tail {
            OpenOptions::new()
                .write(true)
                .open(out)
                .and_then(|f| f.set_len(file.complete_len))
                .map_err(|e| Error::io(out, e))?;
        }
        for r in file.records.iter().filter(|r| r.fingerprint == fingerprint) {
            done.insert((r.repetition, r.labeled_size, r.unlabeled_size));
        }
    }
    let cells = plan_cells(&exp.plan);
    let mut todo: Vec<(usize, usize, usize)> = cells.iter().copied().filter(|c| !done.contains(c)).collect();
    let skipped = cells.len() - todo.len();
    if let Some(limit) = opts.stop_after {
        todo.truncate(limit);
    }
    let mut appender = Appender::open(out, fresh)?;
    let mut executed = 0;
    let mut failed = 0;
    let mut record = |cell: RunCell| -> Result<()> {
        if cell.test_accuracy.is_none() {
            failed += 1;
        }
        executed += 1;
        appender.append(&cell.into_record(&fingerprint, &exp.plan))
    };

    let workers = opts.workers.max(1).min(todo.len().max(1));
    if workers == 1 {
        for &(rep, l, u) in &todo {
            log::info!("cell rep={rep} L={l} U={u}");
            record(exp.run_cell(rep, l, u)?)?;
        }
    } else {
        let next = AtomicUsize::new(0);
        let abort = AtomicBool::new(false);
        let (tx, rx) = mpsc::channel::<Result<RunCell>>();
        let mut first_error = None;
        std::thread::scope(|scope| {
            for _ in 0..workers {
                let tx = tx.clone();
                let (next, abort, todo) = (&next, &abort, &todo);
                scope.spawn(move || loop {
                    if abort.load(Ordering::SeqCst) {
                        break;
                    }
                    let i = next.fetch_add(1, Ordering::SeqCst);
                    let Some(&(rep, l, u)) = todo.get(i) else { break };
                    if tx.send(exp.run_cell(rep, l, u)).is_err() {
                        break;
                    }
                });
            }
            drop(tx);
            for result in rx {
                let outcome = result.and_then(&mut record);
                if let Err(e) = outcome {
                    abort.store(true, Ordering::SeqCst);
                    first_error.get_or_insert(e);
                }
            }
        });
        if let Some(e) = first_error {
            return Err(e);
        }
    }
    let records = read_results(out)?
        .records
        .into_iter()
        .filter(|r| r.fingerprint == fingerprint)
        .collect();
    Ok(SweepSummary {
        executed,
        skipped,
        failed,
        records,
    })
}
