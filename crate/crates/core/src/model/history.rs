use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::Monitor;
use crate::error::{Error, Result};

pub const HISTORY_HEADER: [&str; 5] = ["epoch", "train_loss", "train_accuracy", "val_loss", "val_accuracy"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

impl EpochRecord {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        let loss = |v: f64| v.is_finite() && v >= 0.0;
        if self.epoch == 0 {
            return Err(Error::Consistency("epoch numbers start at 1".into()));
        }
        if !unit(self.train_accuracy) || !unit(self.val_accuracy) {
            return Err(Error::Consistency(format!("epoch {}: accuracy outside [0, 1]", self.epoch)));
        }
        if !loss(self.train_loss) || !loss(self.val_loss) {
            return Err(Error::Consistency(format!("epoch {}: loss is negative or not finite", self.epoch)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingHistory {
    pub records: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub stopped_epoch: usize,
}

impl TrainingHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.records.iter().find(|r| r.epoch == self.best_epoch)
    }
}

/// Best epoch under `monitor`, earliest on ties, and whether `patience`
/// epochs have passed since it.
pub fn should_stop(records: &[EpochRecord], patience: usize, monitor: Monitor) -> (bool, usize) {
    let Some(last) = records.last() else {
        return (false, 0);
    };
    let mut best = &records[0];
    for r in &records[1..] {
        if monitor.score(r) > monitor.score(best) {
            best = r;
        }
    }
    (last.epoch - best.epoch >= patience, best.epoch)
}

pub fn history_to_csv(records: &[EpochRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HISTORY_HEADER)?;
    for r in records {
        w.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.train_accuracy.to_string(),
            r.val_loss.to_string(),
            r.val_accuracy.to_string(),
        ])?;
    }
    w.into_inner().map_err(|e| Error::Training(format!("writing history: {e}")))
}

pub fn write_history_csv(path: &Path, records: &[EpochRecord]) -> Result<()> {
    crate::fsutil::write_atomic(path, &history_to_csv(records)?)
}

pub fn read_history_csv(path: &Path) -> Result<Vec<EpochRecord>> {
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_history_csv(&text).map_err(|e| match e {
        Error::Parse { line, column, message, .. } => Error::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message,
        },
        other => other,
    })
}

/// Parses history CSV text; errors name the offending row.
pub fn parse_history_csv(text: &str) -> Result<Vec<EpochRecord>> {
    let bad = |line: usize, message: String| Error::Parse {
        path: "<history>".into(),
        line,
        column: 0,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(text.as_bytes());
    let mut rows = rdr.records();
    let header = rows
        .next()
        .ok_or_else(|| bad(1, "empty history file".into()))?
        .map_err(|e| bad(1, e.to_string()))?;
    if header.iter().map(str::trim).ne(HISTORY_HEADER) {
        return Err(bad(1, format!("expected header `{}`", HISTORY_HEADER.join(","))));
    }
    let mut out: Vec<EpochRecord> = Vec::new();
    for (i, row) in rows.enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| bad(line, format!("row {}: {e}", i + 1)))?;
        if row.len() != 5 {
            return Err(bad(line, format!("row {}: expected 5 fields, found {}", i + 1, row.len())));
        }
        let field = |k: usize| -> Result<f64> {
            row[k]
                .trim()
                .parse::<f64>()
                .map_err(|_| bad(line, format!("row {}: `{}` is not a number in column {}", i + 1, &row[k], HISTORY_HEADER[k])))
        };
        let epoch = row[0]
            .trim()
            .parse::<usize>()
            .map_err(|_| bad(line, format!("row {}: `{}` is not an epoch number", i + 1, &row[0])))?;
        let rec = EpochRecord {
            epoch,
            train_loss: field(1)?,
            train_accuracy: field(2)?,
            val_loss: field(3)?,
            val_accuracy: field(4)?,
        };
        rec.validate().map_err(|e| bad(line, format!("row {}: {e}", i + 1)))?;
        if out.last().is_some_and(|p| p.epoch >= rec.epoch) {
            return Err(bad(line, format!("row {}: epochs must increase", i + 1)));
        }
        out.push(rec);
    }
    if out.is_empty() {
        return Err(bad(1, "history has no rows".into()));
    }
    Ok(out)
}
