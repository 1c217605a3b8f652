use serde::{Deserialize, Serialize};

use super::confusion::ConfusionMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// A computed value that disagrees with an externally reported one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub metric: String,
    /// Reported value, percent.
    pub reported: f64,
    /// Value computed from the confusion matrix, percent.
    pub computed: f64,
}

/// Percent figures quoted alongside a confusion matrix, used to cross-check it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportedMetrics {
    /// `(class, precision %, recall %)`
    pub per_class: Vec<(String, Option<f64>, Option<f64>)>,
    pub accuracy: Option<f64>,
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub classes: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub discrepancies: Vec<Discrepancy>,
}

/// Unweighted means over the classes whose metric is defined.
pub fn macro_means(per_class: &[ClassMetrics]) -> Result<(f64, f64)> {
    let mean = |vals: Vec<f64>, what: &str| {
        if vals.is_empty() {
            Err(Error::UndefinedMetric(format!("macro {what}: no class has a defined {what}")))
        } else {
            Ok(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    let p = mean(per_class.iter().filter_map(|m| m.precision).collect(), "precision")?;
    let r = mean(per_class.iter().filter_map(|m| m.recall).collect(), "recall")?;
    Ok((p, r))
}

impl EvaluationReport {
    pub fn from_confusion(cm: &ConfusionMatrix) -> Result<Self> {
        let accuracy = cm.accuracy()?;
        let per_class = cm
            .classes()
            .iter()
            .map(|c| {
                Ok(ClassMetrics {
                    class: c.clone(),
                    precision: cm.precision(c)?,
                    recall: cm.recall(c)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let (macro_precision, macro_recall) = macro_means(&per_class)?;
        Ok(EvaluationReport {
            classes: cm.classes().to_vec(),
            confusion: cm.counts().to_vec(),
            accuracy,
            per_class,
            macro_precision,
            macro_recall,
            discrepancies: Vec::new(),
        })
    }

    pub fn confusion_matrix(&self) -> Result<ConfusionMatrix> {
        ConfusionMatrix::new(self.classes.clone(), self.confusion.clone())
    }

    pub fn class_metrics(&self, class: &str) -> Option<&ClassMetrics> {
        self.per_class.iter().find(|m| m.class == class)
    }

    /// Compares against reported percentages and records every value that
    /// differs by more than `tolerance_pp` percentage points.
    pub fn reconcile(&mut self, reported: &ReportedMetrics, tolerance_pp: f64) -> &[Discrepancy] {
        let mut found = Vec::new();
        let mut check = |metric: String, reported: Option<f64>, computed: Option<f64>| {
            if let (Some(r), Some(c)) = (reported, computed.map(|v| v * 100.0)) {
                if (r - c).abs() > tolerance_pp {
                    found.push(Discrepancy {
                        metric,
                        reported: r,
                        computed: c,
                    });
                }
            }
        };
        check("accuracy".into(), reported.accuracy, Some(self.accuracy));
        check("macro_precision".into(), reported.macro_precision, Some(self.macro_precision));
        check("macro_recall".into(), reported.macro_recall, Some(self.macro_recall));
        for (class, p, r) in &reported.per_class {
            let m = self.class_metrics(class);
            check(format!("{class}.precision"), *p, m.and_then(|m| m.precision));
            check(format!("{class}.recall"), *r, m.and_then(|m| m.recall));
        }
        self.discrepancies = found;
        &self.discrepancies
    }

    /// Text table with two-decimal percentages.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<14}{:>11}{:>11}\n", "class", "precision", "recall"));
        for m in &self.per_class {
            out.push_str(&format!(
                "{:<14}{:>11}{:>11}\n",
                m.class,
                format_optional_percent(m.precision),
                format_optional_percent(m.recall)
            ));
        }
        out.push_str(&format!(
            "{:<14}{:>11}{:>11}\n",
            "macro",
            format_percent(self.macro_precision),
            format_percent(self.macro_recall)
        ));
        out.push_str(&format!("accuracy {}\n", format_percent(self.accuracy)));
        for d in &self.discrepancies {
            out.push_str(&format!(
                "note: {} computes to {:.2}% but was reported as {:.2}%\n",
                d.metric, d.computed, d.reported
            ));
        }
        out
    }
}

/// Fraction rendered as a percentage with two decimals, rounding halves up.
pub fn format_percent(fraction: f64) -> String {
    let hundredths = (fraction * 10_000.0 + 0.5 + 1e-9).floor() as i64;
    format!("{}.{:02}%", hundredths.div_euclid(100), hundredths.rem_euclid(100))
}

fn format_optional_percent(v: Option<f64>) -> String {
    v.map(format_percent).unwrap_or_else(|| "n/a".into())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_half_up() {
        assert_eq!(format_percent(0.12345), "12.35%");
        assert_eq!(format_percent(0.9032258), "90.32%");
        assert_eq!(format_percent(1.0), "100.00%");
        assert_eq!(format_percent(0.0), "0.00%");
        assert_eq!(format_percent(0.5), "50.00%");
    }

    #[test]
    fn single_class_macro() {
        let m = [ClassMetrics {
            class: "a".into(),
            precision: Some(0.5),
            recall: Some(0.25),
        }];
        assert_eq!(macro_means(&m).unwrap(), (0.5, 0.25));
    }

    #[test]
    fn macro_skips_undefined() {
        let m = [
            ClassMetrics { class: "a".into(), precision: Some(0.5), recall: Some(1.0) },
            ClassMetrics { class: "b".into(), precision: None, recall: Some(0.0) },
        ];
        assert_eq!(macro_means(&m).unwrap(), (0.5, 0.5));
        let none = [ClassMetrics { class: "a".into(), precision: None, recall: None }];
        assert!(matches!(macro_means(&none), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn undefined_serialises_as_null() {
        let cm = ConfusionMatrix::new(vec!["a".into(), "b".into()], vec![vec![2, 0], vec![1, 0]]).unwrap();
        let report = EvaluationReport::from_confusion(&cm).unwrap();
        let json = serde_json::to_value(&report).unwrap();
        assert!(json["per_class"][1]["precision"].is_null());
        assert_eq!(json["per_class"][1]["recall"], 0.0);
        assert!(json.get("discrepancies").is_none());
        let back: EvaluationReport = serde_json::from_value(json).unwrap();
        assert_eq!(back, report);
    }
}
