use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are actual classes, columns are predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    counts: Vec<Vec<u64>>,
}

#[derive(Deserialize)]
struct RawMatrix {
    classes: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl TryFrom<RawMatrix> for ConfusionMatrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        ConfusionMatrix::new(raw.classes, raw.counts)
    }
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self> {
        let k = classes.len();
        if k == 0 {
            return Err(Error::Argument("confusion matrix needs at least one class".into()));
        }
        let mut sorted = classes.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != k {
            return Err(Error::Argument(format!("duplicate class names in {classes:?}")));
        }
        if counts.len() != k || counts.iter().any(|row| row.len() != k) {
            return Err(Error::Argument(format!("confusion counts must be {k}x{k}")));
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn zeros(classes: Vec<String>) -> Result<Self> {
        let k = classes.len();
        ConfusionMatrix::new(classes, vec![vec![0; k]; k])
    }

    pub fn from_predictions<A: AsRef<str>, P: AsRef<str>>(actual: &[A], predicted: &[P], classes: &[String]) -> Result<Self> {
        if actual.len() != predicted.len() {
            return Err(Error::Argument(format!(
                "{} actual labels vs {} predictions",
                actual.len(),
                predicted.len()
            )));
        }
        let mut cm = ConfusionMatrix::zeros(classes.to_vec())?;
        for (a, p) in actual.iter().zip(predicted) {
            let (i, j) = (cm.index_of(a.as_ref())?, cm.index_of(p.as_ref())?);
            cm.counts[i][j] += 1;
        }
        Ok(cm)
    }

    pub fn from_indices(actual: &[usize], predicted: &[usize], classes: &[String]) -> Result<Self> {
        let k = classes.len();
        if actual.len() != predicted.len() {
            return Err(Error::Argument("length mismatch between actual and predicted".into()));
        }
        let mut cm = ConfusionMatrix::zeros(classes.to_vec())?;
        for (&a, &p) in actual.iter().zip(predicted) {
            if a >= k || p >= k {
                return Err(Error::Argument(format!("class index out of range for {k} classes")));
            }
            cm.counts[a][p] += 1;
        }
        Ok(cm)
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn index_of(&self, class: &str) -> Result<usize> {
        self.classes
            .iter()
            .position(|c| c == class)
            .ok_or_else(|| Error::Argument(format!("unknown class `{class}` (expected one of {:?})", self.classes)))
    }

    pub fn true_positives(&self, i: usize) -> u64 {
        self.counts[i][i]
    }

    /// Column total minus the diagonal.
    pub fn false_positives(&self, i: usize) -> u64 {
        self.predicted_total(i) - self.counts[i][i]
    }

    /// Row total minus the diagonal.
    pub fn false_negatives(&self, i: usize) -> u64 {
        self.actual_total(i) - self.counts[i][i]
    }

    pub fn actual_total(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn predicted_total(&self, j: usize) -> u64 {
        self.counts.iter().map(|row| row[j]).sum()
    }

    pub fn correct(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Correct predictions over all predictions.
    pub fn accuracy(&self) -> Result<f64> {
        match self.total() {
            0 => Err(Error::UndefinedMetric("accuracy of an empty confusion matrix".into())),
            n => Ok(self.correct() as f64 / n as f64),
        }
    }

    /// TP / (TP + FP); `None` when the class was never predicted.
    pub fn precision(&self, class: &str) -> Result<Option<f64>> {
        let i = self.index_of(class)?;
        Ok(ratio(self.true_positives(i), self.true_positives(i) + self.false_positives(i)))
    }

    /// TP / (TP + FN); `None` when the class never occurs.
    pub fn recall(&self, class: &str) -> Result<Option<f64>> {
        let i = self.index_of(class)?;
        Ok(ratio(self.true_positives(i), self.true_positives(i) + self.false_negatives(i)))
    }

    /// Merges classes through `mapping` (old name → new name) into `new_classes`.
    pub fn collapse(&self, mapping: &BTreeMap<String, String>, new_classes: &[String]) -> Result<ConfusionMatrix> {
        let mut out = ConfusionMatrix::zeros(new_classes.to_vec())?;
        let target = |c: &String| -> Result<usize> {
            let name = mapping
                .get(c)
                .ok_or_else(|| Error::Argument(format!("class mapping has no entry for `{c}`")))?;
            out.index_of(name)
        };
        let idx: Vec<usize> = self.classes.iter().map(target).collect::<Result<_>>()?;
        for (i, row) in self.counts.iter().enumerate() {
            for (j, &n) in row.iter().enumerate() {
                out.counts[idx[i]][idx[j]] += n;
            }
        }
        Ok(out)
    }

    /// Reorders classes; `order` lists the new class sequence by name.
    pub fn reorder(&self, order: &[String]) -> Result<ConfusionMatrix> {
        if order.len() != self.classes.len() {
            return Err(Error::Argument("reorder must list every class once".into()));
        }
        let idx: Vec<usize> = order.iter().map(|c| self.index_of(c)).collect::<Result<_>>()?;
        let counts = idx
            .iter()
            .map(|&i| idx.iter().map(|&j| self.counts[i][j]).collect())
            .collect();
        ConfusionMatrix::new(order.to_vec(), counts)
    }

    /// Fixed-width text rendering, rows actual and columns predicted.
    pub fn render(&self) -> String {
        let width = self.classes.iter().map(|c| c.len()).max().unwrap_or(0).max(6) + 2;
        let mut out = format!("{:>width$}", "actual\\pred");
        for c in &self.classes {
            out.push_str(&format!("{c:>width$}"));
        }
        out.push('\n');
        for (c, row) in self.classes.iter().zip(&self.counts) {
            out.push_str(&format!("{c:>width$}"));
            for n in row {
                out.push_str(&format!("{n:>width$}"));
            }
            out.push('\n');
        }
        out
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn perfect_predictions_are_diagonal() {
        let classes = names(&["a", "b", "c"]);
        let labels = ["a", "c", "c", "b", "a"];
        let cm = ConfusionMatrix::from_predictions(&labels, &labels, &classes).unwrap();
        assert_eq!(cm.counts(), &[vec![2, 0, 0], vec![0, 1, 0], vec![0, 0, 2]]);
        assert_eq!(cm.accuracy().unwrap(), 1.0);
    }

    #[test]
    fn empty_sequences_give_zero_matrix() {
        let classes = names(&["a", "b"]);
        let empty: [&str; 0] = [];
        let cm = ConfusionMatrix::from_predictions(&empty, &empty, &classes).unwrap();
        assert_eq!(cm.counts(), &[vec![0, 0], vec![0, 0]]);
        assert!(matches!(cm.accuracy(), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn argument_errors() {
        let classes = names(&["a", "b"]);
        assert!(ConfusionMatrix::from_predictions(&["a"], &["a", "b"], &classes).is_err());
        assert!(ConfusionMatrix::from_predictions(&["a"], &["z"], &classes).is_err());
        let cm = ConfusionMatrix::zeros(classes).unwrap();
        assert!(cm.precision("z").is_err());
        assert!(ConfusionMatrix::new(names(&["a", "a"]), vec![vec![0; 2]; 2]).is_err());
        assert!(ConfusionMatrix::new(names(&["a", "b"]), vec![vec![0; 2]; 3]).is_err());
    }

    #[test]
    fn undefined_not_zero() {
        // class b never predicted, class c never present
        let cm = ConfusionMatrix::new(names(&["a", "b", "c"]), vec![vec![3, 0, 1], vec![2, 0, 0], vec![0, 0, 0]]).unwrap();
        assert_eq!(cm.precision("b").unwrap(), None);
        assert_eq!(cm.recall("b").unwrap(), Some(0.0));
        assert_eq!(cm.recall("c").unwrap(), None);
        assert_eq!(cm.precision("c").unwrap(), Some(0.0));
    }

    #[test]
    fn collapse_sums_blocks() {
        let cm = ConfusionMatrix::new(names(&["a", "b", "c"]), vec![vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 9]]).unwrap();
        let mapping = BTreeMap::from([
            ("a".to_string(), "x".to_string()),
            ("b".to_string(), "y".to_string()),
            ("c".to_string(), "y".to_string()),
        ]);
        let out = cm.collapse(&mapping, &names(&["x", "y"])).unwrap();
        assert_eq!(out.counts(), &[vec![1, 5], vec![11, 28]]);
    }

    #[test]
    fn json_shape() {
        let cm: ConfusionMatrix = serde_json::from_str(r#"{"classes": ["a", "b"], "counts": [[1, 2], [3, 4]]}"#).unwrap();
        assert_eq!(cm.total(), 10);
        assert!(serde_json::from_str::<ConfusionMatrix>(r#"{"classes": ["a"], "counts": [[1, 2]]}"#).is_err());
    }
}
