//! Accuracy, per-class precision/recall, macro means and the sorting-stream
//! reading of a confusion matrix.

mod compare;
mod confusion;
mod flow;
pub mod published;
mod report;

pub use compare::{compare_reports, ClassDelta, ReportDelta};
pub use confusion::ConfusionMatrix;
pub use flow::{default_severity_map, material_flow, ContaminantFinding, MaterialFlowReport, Severity, SeverityMap};
pub use report::{format_percent, macro_means, ClassMetrics, Discrepancy, EvaluationReport, ReportedMetrics};

/// Tolerance, in percentage points, for matching two-decimal published figures.
pub const PUBLISHED_TOLERANCE_PP: f64 = 0.01;
