//! Confusion matrices and multiclass precision, recall and F1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<u32>,
    /// `counts[i][j]`: true class `i` predicted as `j`.
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    /// Classes are the sorted union of `truth` and `predicted` plus `classes`.
    pub fn from_predictions(classes: &[u32], truth: &[u32], predicted: &[u32]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::InvalidParameter(format!(
                "{} true labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut all: Vec<u32> = classes.iter().chain(truth).chain(predicted).copied().collect();
        all.sort_unstable();
        all.dedup();
        let k = all.len();
        let mut counts = vec![vec![0; k]; k];
        for (t, p) in truth.iter().zip(predicted) {
            let i = all.binary_search(t).expect("class listed");
            let j = all.binary_search(p).expect("class listed");
            counts[i][j] += 1;
        }
        Ok(Self { classes: all, counts })
    }

    pub fn from_counts(classes: Vec<u32>, counts: Vec<Vec<usize>>) -> Result<Self> {
        if counts.len() != classes.len() || counts.iter().any(|r| r.len() != classes.len()) {
            return Err(Error::InvalidParameter("confusion matrix must be K×K".into()));
        }
        Ok(Self { classes, counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, i: usize) -> usize {
        self.counts[i].iter().sum()
    }

    pub fn predicted(&self, j: usize) -> usize {
        self.counts.iter().map(|r| r[j]).sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Pooled recall over all classes (`Σ TP / Σ (TP + FN)`).
    pub fn micro_recall(&self) -> Result<f64> {
        let total = self.total();
        if total == 0 {
            return Err(Error::EmptyInput("confusion matrix"));
        }
        let tp = self.trace();
        let fn_: usize = (0..self.classes.len())
            .map(|i| self.support(i) - self.counts[i][i])
            .sum();
        Ok(tp as f64 / (tp + fn_) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    /// Unweighted mean over classes with support.
    #[default]
    Macro,
    /// Support-weighted mean.
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub averaging: Averaging,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Classes that were never predicted (precision set to 0).
    pub never_predicted: Vec<u32>,
    /// Classes without support, left out of the averages.
    pub no_support: Vec<u32>,
    pub confusion: ConfusionMatrix,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn metrics(confusion: &ConfusionMatrix, averaging: Averaging) -> Result<Metrics> {
    let total = confusion.total();
    if total == 0 {
        return Err(Error::EmptyInput("confusion matrix"));
    }
    let mut per_class = Vec::new();
    let mut never_predicted = Vec::new();
    let mut no_support = Vec::new();
    for (i, &class) in confusion.classes.iter().enumerate() {
        let tp = confusion.counts[i][i];
        let support = confusion.support(i);
        let predicted = confusion.predicted(i);
        if predicted == 0 {
            never_predicted.push(class);
        }
        if support == 0 {
            no_support.push(class);
        }
        let precision = ratio(tp, predicted);
        let recall = ratio(tp, support);
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.push(ClassMetrics {
            class,
            precision,
            recall,
            f1,
            support,
            predicted,
        });
    }
    let scored: Vec<&ClassMetrics> = per_class.iter().filter(|c| c.support > 0).collect();
    let weight = |c: &ClassMetrics| match averaging {
        Averaging::Macro => 1.0,
        Averaging::Weighted => c.support as f64,
    };
    let wsum: f64 = scored.iter().map(|c| weight(c)).sum();
    let avg = |f: fn(&ClassMetrics) -> f64| scored.iter().map(|c| weight(c) * f(c)).sum::<f64>() / wsum;
    Ok(Metrics {
        accuracy: confusion.trace() as f64 / total as f64,
        averaging,
        precision: avg(|c| c.precision),
        recall: avg(|c| c.recall),
        f1: avg(|c| c.f1),
        per_class,
        never_predicted,
        no_support,
        confusion: confusion.clone(),
    })
}

/// Confusion matrix and metrics straight from label vectors.
pub fn score(classes: &[u32], truth: &[u32], predicted: &[u32], averaging: Averaging) -> Result<Metrics> {
    metrics(
        &ConfusionMatrix::from_predictions(classes, truth, predicted)?,
        averaging,
    )
}
