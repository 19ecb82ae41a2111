//! Naive Bayes for mixed data: Laplace-smoothed frequency tables for
//! categorical features and per-class Gaussians for numeric ones.

use serde::{Deserialize, Serialize};

use super::{check_fit_input, class_index, normalized_weights, Classifier};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NbParams {
    /// Laplace smoothing strength.
    pub alpha: f64,
    /// Lower bound on every Gaussian variance.
    pub var_floor: f64,
}

impl Default for NbParams {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            var_floor: 1e-9,
        }
    }
}

/// Normal density with the given mean and variance.
pub fn gaussian_density(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoricalTable {
    pub feature: usize,
    /// Distinct training values, ascending.
    pub values: Vec<f64>,
    /// `[class][value]` weighted counts.
    pub counts: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianFeature {
    pub feature: usize,
    /// Per class.
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaiveBayes {
    pub classes: Vec<u32>,
    pub priors: Vec<f64>,
    /// Weighted row count per class.
    pub class_weight: Vec<f64>,
    pub alpha: f64,
    pub categorical: Vec<CategoricalTable>,
    pub numeric: Vec<GaussianFeature>,
}

impl NaiveBayes {
    pub fn fit(
        x: &Matrix,
        y: &[u32],
        weights: Option<&[f64]>,
        categorical: &[usize],
        params: &NbParams,
    ) -> Result<Self> {
        check_fit_input(x, y, "naive bayes")?;
        if !(params.alpha > 0.0) || !(params.var_floor > 0.0) {
            return Err(Error::InvalidParameter("alpha and var_floor must be positive".into()));
        }
        if let Some(&f) = categorical.iter().find(|&&f| f >= x.n_cols()) {
            return Err(Error::InvalidParameter(format!("categorical feature {f} out of range")));
        }
        let (classes, idx) = class_index(y);
        let w = normalized_weights(weights, y.len())?;
        let k = classes.len();
        let mut class_weight = vec![0.0; k];
        for (&c, &wi) in idx.iter().zip(&w) {
            class_weight[c] += wi;
        }
        let total: f64 = class_weight.iter().sum();
        let priors = class_weight.iter().map(|c| c / total).collect();

        let mut is_cat = vec![false; x.n_cols()];
        for &f in categorical {
            is_cat[f] = true;
        }
        let mut tables = Vec::new();
        let mut numeric = Vec::new();
        for (j, &cat) in is_cat.iter().enumerate() {
            let col = x.column(j);
            if cat {
                let mut values = col.clone();
                values.sort_by(f64::total_cmp);
                values.dedup();
                let mut counts = vec![vec![0.0; values.len()]; k];
                for ((v, &c), &wi) in col.iter().zip(&idx).zip(&w) {
                    let pos = values.binary_search_by(|p| p.total_cmp(v)).expect("value seen");
                    counts[c][pos] += wi;
                }
                tables.push(CategoricalTable {
                    feature: j,
                    values,
                    counts,
                });
            } else {
                let mut sum = vec![0.0; k];
                for ((v, &c), &wi) in col.iter().zip(&idx).zip(&w) {
                    sum[c] += wi * v;
                }
                let means: Vec<f64> = sum.iter().zip(&class_weight).map(|(s, n)| s / n).collect();
                let mut sq = vec![0.0; k];
                for ((v, &c), &wi) in col.iter().zip(&idx).zip(&w) {
                    sq[c] += wi * (v - means[c]) * (v - means[c]);
                }
                let variances = sq
                    .iter()
                    .zip(&class_weight)
                    .map(|(s, n)| (s / n).max(params.var_floor))
                    .collect();
                numeric.push(GaussianFeature {
                    feature: j,
                    means,
                    variances,
                });
            }
        }
        Ok(Self {
            classes,
            priors,
            class_weight,
            alpha: params.alpha,
            categorical: tables,
            numeric,
        })
    }

    /// Smoothed `P(feature = value | class)`; unseen values get `α/(n_c + αV)`.
    pub fn categorical_likelihood(&self, table: &CategoricalTable, class: usize, value: f64) -> f64 {
        let count = table
            .values
            .binary_search_by(|p| p.total_cmp(&value))
            .map_or(0.0, |pos| table.counts[class][pos]);
        let v = table.values.len() as f64;
        (count + self.alpha) / (self.class_weight[class] + self.alpha * v)
    }

    fn log_joint(&self, row: &[f64]) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| {
                let mut lp = self.priors[c].ln();
                for t in &self.categorical {
                    lp += self.categorical_likelihood(t, c, row[t.feature]).ln();
                }
                for g in &self.numeric {
                    let var = g.variances[c];
                    let d = row[g.feature] - g.means[c];
                    lp += -0.5 * (2.0 * std::f64::consts::PI * var).ln() - d * d / (2.0 * var);
                }
                lp
            })
            .collect()
    }
}

impl Classifier for NaiveBayes {
    fn classes(&self) -> &[u32] {
        &self.classes
    }

    fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        x.rows()
            .map(|r| {
                let lj = self.log_joint(r);
                let max = lj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = lj.iter().map(|v| (v - max).exp()).collect();
                let total: f64 = e.iter().sum();
                e.into_iter().map(|v| v / total).collect()
            })
            .collect()
    }
}
