//! Report emission and the independent audit of a persisted event log.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{RunOutput, RunReport};
use crate::accountant::Accountant;
use crate::error::{Error, Result};
use crate::schedule::{audit, compare_summaries, AuditReport, GroupLedger};

/// Allowed difference between the replayed log and a run's own accounting.
pub const REPORT_TOLERANCE: f64 = 1e-9;

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Csv { path: path.display().to_string(), line: 0, message: e.to_string() }
}

/// Writes `report.json`, `trajectory.csv`, `phases.csv` and `events.jsonl`
/// into `dir` and returns their paths.
pub fn emit_report(output: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let report = &output.report;
    let json = dir.join("report.json");
    serde_json::to_writer_pretty(BufWriter::new(File::create(&json)?), report)?;

    let traj = dir.join("trajectory.csv");
    let mut w = csv::Writer::from_path(&traj).map_err(|e| csv_err(&traj, e))?;
    w.write_record(["group", "size", "phase", "selection_epsilon", "training_epsilon", "total_epsilon"])
        .map_err(|e| csv_err(&traj, e))?;
    for g in &report.accounting.groups {
        for p in &g.trajectory {
            w.write_record([
                g.group.to_string(),
                g.size.to_string(),
                p.phase.to_string(),
                p.selection_epsilon.to_string(),
                p.training_epsilon.to_string(),
                p.total_epsilon.to_string(),
            ])
            .map_err(|e| csv_err(&traj, e))?;
        }
    }
    w.flush()?;

    let phases = dir.join("phases.csv");
    let mut w = csv::Writer::from_path(&phases).map_err(|e| csv_err(&phases, e))?;
    w.write_record([
        "phase",
        "train_size",
        "test_accuracy",
        "query_size",
        "mechanism",
        "selection_epsilon",
        "selection_accuracy",
        "selection_iou",
        "selection_mse",
    ])
    .map_err(|e| csv_err(&phases, e))?;
    for p in &report.phases {
        let sel = p.selection.as_ref();
        let metric = |f: fn(&crate::selection::SelectionMetrics) -> f64| {
            sel.and_then(|s| s.metrics.as_ref()).map_or(String::new(), |m| f(m).to_string())
        };
        w.write_record([
            p.phase.to_string(),
            p.train_size.to_string(),
            p.test_accuracy.to_string(),
            sel.map_or(String::new(), |s| s.k.to_string()),
            sel.map_or(String::new(), |s| s.mechanism.clone()),
            sel.map_or(String::new(), |s| s.eps.to_string()),
            metric(|m| m.accuracy),
            metric(|m| m.iou),
            metric(|m| m.mse),
        ])
        .map_err(|e| csv_err(&phases, e))?;
    }
    w.flush()?;

    let events = dir.join("events.jsonl");
    output.ledger.write_jsonl(BufWriter::new(File::create(&events)?))?;
    Ok(vec![json, traj, phases, events])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditOutcome {
    pub audit: AuditReport,
    /// Differences against the run report, when one was supplied.
    pub mismatches: Vec<String>,
    pub passed: bool,
}

/// Replays the event log at `log` from scratch. With a report, the
/// replayed per-group losses must also match the run's own accounting.
pub fn audit_log(log: &Path, report: Option<&Path>) -> Result<AuditOutcome> {
    let ledger = GroupLedger::read_jsonl(BufReader::new(File::open(log)?))?;
    let audit = audit(&ledger, &Accountant::default())?;
    let mismatches = match report {
        Some(path) => {
            let reported: RunReport = serde_json::from_reader(BufReader::new(File::open(path)?))?;
            compare_summaries(&audit.summary, &reported.accounting, REPORT_TOLERANCE)
        }
        None => Vec::new(),
    };
    let passed = audit.passed && mismatches.is_empty();
    Ok(AuditOutcome { audit, mismatches, passed })
}
