//! Confusion matrices (rows = ground truth, columns = prediction) and
//! accuracy.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<u64>>,
    /// Row-normalized counts. Rows without support are all zero.
    pub normalized: Vec<Vec<f64>>,
    /// Indices of classes that never occur in the ground truth.
    pub zero_support: Vec<usize>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    /// Recall of one class, `None` without support.
    pub fn recall(&self, class: usize) -> Option<f64> {
        let s = self.support(class);
        (s > 0).then(|| self.counts[class][class] as f64 / s as f64)
    }
}

pub fn confusion<S: AsRef<str>>(preds: &[S], truths: &[S], classes: &[S]) -> Result<ConfusionMatrix> {
    if preds.len() != truths.len() {
        return Err(Error::input(format!(
            "{} predictions but {} ground-truth labels",
            preds.len(),
            truths.len()
        )));
    }
    let classes: Vec<String> = classes.iter().map(|c| c.as_ref().to_owned()).collect();
    let lookup = |label: &str, what: &str, k: usize| {
        classes
            .iter()
            .position(|c| c == label)
            .ok_or_else(|| Error::input(format!("unknown {what} label {label:?} at index {k}")))
    };

    let n = classes.len();
    let mut counts = vec![vec![0u64; n]; n];
    for (k, (p, t)) in preds.iter().zip(truths).enumerate() {
        let row = lookup(t.as_ref(), "ground-truth", k)?;
        let col = lookup(p.as_ref(), "predicted", k)?;
        counts[row][col] += 1;
    }

    let mut zero_support = Vec::new();
    let normalized = counts
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let s: u64 = row.iter().sum();
            if s == 0 {
                zero_support.push(i);
                vec![0.0; n]
            } else {
                row.iter().map(|&c| c as f64 / s as f64).collect()
            }
        })
        .collect();

    Ok(ConfusionMatrix {
        classes,
        counts,
        normalized,
        zero_support,
    })
}

/// Fraction of samples on the diagonal.
pub fn accuracy(matrix: &ConfusionMatrix) -> Result<f64> {
    let total = matrix.total();
    if total == 0 {
        return Err(Error::input("accuracy of an empty confusion matrix"));
    }
    let diag: u64 = (0..matrix.classes.len()).map(|i| matrix.counts[i][i]).sum();
    Ok(diag as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    const DS: [&str; 4] = ["DS0", "DS1", "DS2", "DS3"];

    #[test]
    fn perfect_predictions_are_diagonal() {
        let labels = ["DS0", "DS1", "DS3", "DS3", "DS2"];
        let m = confusion(&labels, &labels, &DS).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert_eq!(m.counts[i][j], 0);
                }
            }
        }
        assert_eq!(accuracy(&m).unwrap(), 1.0);
    }

    #[test]
    fn collapse_fixture_row() {
        let classes = ["collapse", "no-collapse"];
        let mut truths = vec!["collapse"; 20];
        let mut preds = vec!["collapse"; 19];
        preds.push("no-collapse");
        truths.extend(["no-collapse"; 10]);
        preds.extend(["no-collapse"; 10]);
        let m = confusion(&preds, &truths, &classes).unwrap();
        assert!((m.normalized[0][0] - 0.95).abs() < 1e-12);
        assert!((accuracy(&m).unwrap() - 29.0 / 30.0).abs() < 1e-15);
    }

    #[test]
    fn four_class_hand_tally() {
        let truths = ["DS0", "DS0", "DS1", "DS1", "DS1", "DS2", "DS2", "DS3", "DS3", "DS3"];
        let preds = ["DS0", "DS1", "DS1", "DS1", "DS2", "DS2", "DS3", "DS2", "DS3", "DS3"];
        let m = confusion(&preds, &truths, &DS).unwrap();
        assert_eq!(
            m.counts,
            vec![vec![1, 1, 0, 0], vec![0, 2, 1, 0], vec![0, 0, 1, 1], vec![0, 0, 1, 2]]
        );
        assert_eq!(accuracy(&m).unwrap(), 0.6);
        for row in &m.normalized {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn uniform_two_class() {
        let m = confusion(&["a", "b", "a", "b"], &["a", "a", "b", "b"], &["a", "b"]).unwrap();
        assert_eq!(accuracy(&m).unwrap(), 0.5);
    }

    #[test]
    fn zero_support_rows_flagged() {
        let m = confusion(&["DS1"], &["DS1"], &DS).unwrap();
        assert_eq!(m.zero_support, vec![0, 2, 3]);
        assert_eq!(m.normalized[0], vec![0.0; 4]);
    }

    #[test]
    fn errors() {
        let e = confusion(&["DS9"], &["DS1"], &DS).unwrap_err();
        assert!(e.to_string().contains("DS9"));
        assert!(confusion(&["DS1"], &[], &DS).is_err());
        let empty = confusion::<&str>(&[], &[], &DS).unwrap();
        assert!(accuracy(&empty).is_err());
    }
}
