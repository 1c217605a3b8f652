//! Test-set confusion matrices and figures published for the original
//! pyrolyzed-component classifier (111 test crops), kept as fixtures for
//! regression checks and ablation comparisons.

use super::confusion::ConfusionMatrix;
use super::report::ReportedMetrics;

#[derive(Debug, Clone)]
pub struct PublishedResult {
    pub name: &'static str,
    pub matrix: ConfusionMatrix,
    pub reported: ReportedMetrics,
}

fn four_classes() -> Vec<String> {
    ["metal_piece", "battery", "pcb", "glass"].map(String::from).to_vec()
}

fn per_class(rows: &[(&str, f64, f64)]) -> Vec<(String, Option<f64>, Option<f64>)> {
    rows.iter().map(|&(c, p, r)| (c.to_string(), Some(p), Some(r))).collect()
}

/// Pretrained backbone, four classes.
pub fn four_class_pretrained() -> PublishedResult {
    PublishedResult {
        name: "four_class",
        matrix: ConfusionMatrix::new(
            four_classes(),
            vec![vec![13, 2, 6, 0], vec![0, 28, 2, 0], vec![5, 1, 17, 1], vec![4, 0, 2, 30]],
        )
        .expect("valid fixture"),
        reported: ReportedMetrics {
            per_class: per_class(&[
                ("metal_piece", 59.09, 61.90),
                ("battery", 90.32, 93.33),
                ("pcb", 62.96, 70.83),
                ("glass", 96.77, 83.33),
            ]),
            accuracy: Some(79.28),
            macro_precision: Some(77.29),
            macro_recall: Some(77.35),
        },
    }
}

/// Randomly initialised backbone, four classes.
///
/// The quoted macro precision (38.71%) does not match the mean of the
/// quoted per-class precisions (35.71%); reconciliation flags it.
pub fn four_class_scratch() -> PublishedResult {
    PublishedResult {
        name: "scratch",
        matrix: ConfusionMatrix::new(
            four_classes(),
            vec![vec![0, 7, 3, 11], vec![1, 14, 6, 9], vec![3, 3, 7, 11], vec![1, 1, 3, 31]],
        )
        .expect("valid fixture"),
        reported: ReportedMetrics {
            per_class: per_class(&[
                ("metal_piece", 0.00, 0.00),
                ("battery", 56.00, 46.67),
                ("pcb", 36.84, 29.17),
                ("glass", 50.00, 86.11),
            ]),
            accuracy: None,
            macro_precision: Some(38.71),
            macro_recall: Some(40.49),
        },
    }
}

/// Pretrained backbone, battery vs other.
pub fn binary_pretrained() -> PublishedResult {
    PublishedResult {
        name: "binary",
        matrix: ConfusionMatrix::new(vec!["battery".into(), "other".into()], vec![vec![26, 4], vec![0, 81]])
            .expect("valid fixture"),
        reported: ReportedMetrics {
            per_class: per_class(&[("battery", 100.00, 86.67), ("other", 95.29, 100.00)]),
            accuracy: None,
            macro_precision: None,
            macro_recall: None,
        },
    }
}
