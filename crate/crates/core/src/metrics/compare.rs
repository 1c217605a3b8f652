use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::report::EvaluationReport;
use crate::error::{Error, Result};

/// Per-class signed change, `b - a`. `None` where either side is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDelta {
    pub class: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDelta {
    pub classes: Vec<String>,
    pub accuracy: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub per_class: Vec<ClassDelta>,
}

/// Signed differences `b - a`. Reports over different class sets are
/// brought onto a common set with `mapping` (fine class → coarse class),
/// applied to whichever side uses the fine classes.
pub fn compare_reports(a: &EvaluationReport, b: &EvaluationReport, mapping: Option<&BTreeMap<String, String>>) -> Result<ReportDelta> {
    let same_set = |x: &EvaluationReport, y: &EvaluationReport| {
        let mut p = x.classes.clone();
        let mut q = y.classes.clone();
        p.sort();
        q.sort();
        p == q
    };
    let (a, b) = if same_set(a, b) {
        (a.clone(), b.clone())
    } else {
        let mapping = mapping.ok_or_else(|| {
            Error::Argument(format!("cannot compare {:?} with {:?} without a class mapping", a.classes, b.classes))
        })?;
        let collapse = |fine: &EvaluationReport, coarse: &EvaluationReport| -> Result<EvaluationReport> {
            let cm = fine.confusion_matrix()?.collapse(mapping, &coarse.classes)?;
            EvaluationReport::from_confusion(&cm)
        };
        let covers = |r: &EvaluationReport| r.classes.iter().all(|c| mapping.contains_key(c));
        if covers(a) {
            (collapse(a, b)?, b.clone())
        } else if covers(b) {
            (a.clone(), collapse(b, a)?)
        } else {
            return Err(Error::Argument("class mapping covers neither report".into()));
        }
    };

    let diff = |x: Option<f64>, y: Option<f64>| x.zip(y).map(|(x, y)| y - x);
    let per_class = b
        .classes
        .iter()
        .map(|c| {
            let (ma, mb) = (a.class_metrics(c), b.class_metrics(c));
            ClassDelta {
                class: c.clone(),
                precision: diff(ma.and_then(|m| m.precision), mb.and_then(|m| m.precision)),
                recall: diff(ma.and_then(|m| m.recall), mb.and_then(|m| m.recall)),
            }
        })
        .collect();
    Ok(ReportDelta {
        classes: b.classes.clone(),
        accuracy: b.accuracy - a.accuracy,
        macro_precision: b.macro_precision - a.macro_precision,
        macro_recall: b.macro_recall - a.macro_recall,
        per_class,
    })
}

impl ReportDelta {
    pub fn class(&self, class: &str) -> Option<&ClassDelta> {
        self.per_class.iter().find(|d| d.class == class)
    }

    /// Deltas in signed percentage points.
    pub fn render(&self) -> String {
        let pp = |v: Option<f64>| v.map(|v| format!("{:+.2} pp", v * 100.0)).unwrap_or_else(|| "n/a".into());
        let mut out = String::new();
        let _ = writeln!(out, "{:<14}{:>13}{:>13}", "class", "precision", "recall");
        for d in &self.per_class {
            let _ = writeln!(out, "{:<14}{:>13}{:>13}", d.class, pp(d.precision), pp(d.recall));
        }
        let _ = writeln!(out, "{:<14}{:>13}{:>13}", "macro", pp(Some(self.macro_precision)), pp(Some(self.macro_recall)));
        let _ = writeln!(out, "accuracy {}", pp(Some(self.accuracy)));
        out
    }
}
