//! Reading a confusion matrix as the output stream of a sorter.
//!
//! The predicted-target column is the physical stream that lands in the
//! target bin: its purity is the target precision and its recovery the
//! target recall. Every other class found in that stream is a contaminant
//! with a domain severity.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::confusion::ConfusionMatrix;
use super::report::format_percent;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    /// Contaminant does not impair recycling of the target stream.
    Benign,
    /// Contaminant's own valuables are lost in the target route.
    ValueLoss,
    /// Contaminant hinders processing of the target stream.
    Hindrance,
}

pub type SeverityMap = BTreeMap<String, Severity>;

/// Severities for contaminants of the battery stream. `other` is the
/// collapsed non-battery class and takes the worst of its members.
pub fn default_severity_map() -> SeverityMap {
    BTreeMap::from([
        ("metal_piece".to_string(), Severity::Benign),
        ("pcb".to_string(), Severity::ValueLoss),
        ("glass".to_string(), Severity::Hindrance),
        ("battery".to_string(), Severity::ValueLoss),
        ("other".to_string(), Severity::Hindrance),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContaminantFinding {
    pub class: String,
    pub count: u64,
    pub severity: Severity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialFlowReport {
    pub target_class: String,
    /// Actual class → count, over everything predicted as the target.
    pub stream_composition: BTreeMap<String, u64>,
    pub purity: Option<f64>,
    pub recovery: Option<f64>,
    pub contaminant_findings: Vec<ContaminantFinding>,
}

pub fn material_flow(cm: &ConfusionMatrix, target_class: &str, severity: &SeverityMap) -> Result<MaterialFlowReport> {
    let t = cm.index_of(target_class)?;
    let mut stream_composition = BTreeMap::new();
    let mut contaminant_findings = Vec::new();
    for (i, class) in cm.classes().iter().enumerate() {
        let count = cm.counts()[i][t];
        stream_composition.insert(class.clone(), count);
        if i == t {
            continue;
        }
        let sev = *severity
            .get(class)
            .ok_or_else(|| Error::Argument(format!("severity map has no entry for class `{class}`")))?;
        if count > 0 {
            contaminant_findings.push(ContaminantFinding {
                class: class.clone(),
                count,
                severity: sev,
            });
        }
    }
    Ok(MaterialFlowReport {
        target_class: target_class.to_string(),
        stream_composition,
        purity: cm.precision(target_class)?,
        recovery: cm.recall(target_class)?,
        contaminant_findings,
    })
}

impl MaterialFlowReport {
    pub fn stream_total(&self) -> u64 {
        self.stream_composition.values().sum()
    }

    pub fn summary(&self) -> String {
        let pct = |v: Option<f64>| v.map(format_percent).unwrap_or_else(|| "undefined".into());
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} stream: {} items, purity {}, recovery {}",
            self.target_class,
            self.stream_total(),
            pct(self.purity),
            pct(self.recovery)
        );
        let _ = writeln!(
            out,
            "  composition: {}",
            self.stream_composition
                .iter()
                .map(|(c, n)| format!("{c}={n}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
        if self.contaminant_findings.is_empty() {
            let _ = writeln!(out, "  no contaminants");
        }
        for f in &self.contaminant_findings {
            let what = match f.severity {
                Severity::Benign => "benign, does not impair recycling",
                Severity::ValueLoss => "value loss, its materials are not recovered",
                Severity::Hindrance => "hinders processing of the stream",
            };
            let _ = writeln!(out, "  contaminant {} x{}: {what}", f.class, f.count);
        }
        out
    }
}
