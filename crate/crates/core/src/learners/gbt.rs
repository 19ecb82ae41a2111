//! Multiclass gradient boosting on softmax cross-entropy with squared-error
//! regression trees and one-step Newton leaf values.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::{NodeContext, RankedColumns, SquaredErrorCriterion};
use super::tree::{descend, grow, split_gains, Node, TreeParams};
use super::{check_fit_input, class_index, normalized_weights, Classifier};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive, seeded};

pub type RegressionNode = Node<f64>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<RegressionNode>,
}

impl RegressionTree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        *descend(&self.nodes, x)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GbtParams {
    pub iterations: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// Fraction of rows drawn without replacement for each iteration.
    pub subsample: f64,
    pub seed: u64,
}

impl Default for GbtParams {
    fn default() -> Self {
        Self {
            iterations: 300,
            learning_rate: 0.1,
            max_depth: 3,
            min_samples_leaf: 1,
            subsample: 1.0,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientBoosting {
    pub classes: Vec<u32>,
    pub n_features: usize,
    pub learning_rate: f64,
    /// Log class priors.
    pub initial_scores: Vec<f64>,
    /// One tree per class per iteration.
    pub stages: Vec<Vec<RegressionTree>>,
    /// Weighted mean training log-loss after each iteration.
    pub train_loss: Vec<f64>,
}

pub(crate) fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = e.iter().sum();
    e.into_iter().map(|v| v / total).collect()
}

fn log_loss(scores: &[Vec<f64>], idx: &[usize], w: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut weight = 0.0;
    for ((s, &c), &wi) in scores.iter().zip(idx).zip(w) {
        let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + s.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        total += wi * (lse - s[c]);
        weight += wi;
    }
    total / weight
}

impl GradientBoosting {
    pub fn fit(x: &Matrix, y: &[u32], weights: Option<&[f64]>, params: &GbtParams) -> Result<Self> {
        check_fit_input(x, y, "gradient boosting")?;
        if !(params.learning_rate >= 0.0 && params.learning_rate <= 1.0) {
            return Err(Error::InvalidParameter("learning_rate must lie in [0, 1]".into()));
        }
        if !(params.subsample > 0.0 && params.subsample <= 1.0) {
            return Err(Error::InvalidParameter("subsample must lie in (0, 1]".into()));
        }
        let (classes, idx) = class_index(y);
        if classes.len() < 2 {
            return Err(Error::SingleClass);
        }
        let tree_params = TreeParams {
            max_depth: Some(params.max_depth),
            min_samples_split: 2,
            min_samples_leaf: params.min_samples_leaf,
            features_per_split: None,
            seed: 0,
        };
        tree_params.validate()?;
        let w = normalized_weights(weights, y.len())?;
        let cols = RankedColumns::new(x)?;
        let n = y.len();
        let k = classes.len();

        let mut prior = vec![0.0; k];
        for (&c, &wi) in idx.iter().zip(&w) {
            prior[c] += wi;
        }
        let total: f64 = prior.iter().sum();
        let initial_scores: Vec<f64> = prior.iter().map(|p| (p / total).max(f64::MIN_POSITIVE).ln()).collect();

        let mut scores = vec![initial_scores.clone(); n];
        let n_sub = ((params.subsample * n as f64).round() as usize).clamp(1, n);
        let newton_scale = (k as f64 - 1.0) / k as f64;
        let mut stages = Vec::with_capacity(params.iterations);
        let mut train_loss = Vec::with_capacity(params.iterations);

        for it in 0..params.iterations {
            let probs: Vec<Vec<f64>> = scores.iter().map(|s| softmax(s)).collect();
            let rows: Vec<usize> = if n_sub < n {
                let mut rng = seeded(derive(params.seed, it as u64));
                let mut r = sample(&mut rng, n, n_sub).into_vec();
                r.sort_unstable();
                r
            } else {
                (0..n).collect()
            };

            let stage: Vec<RegressionTree> = (0..k)
                .into_par_iter()
                .map(|c| {
                    let residuals: Vec<f64> = (0..n).map(|i| (idx[i] == c) as u8 as f64 - probs[i][c]).collect();
                    let crit = SquaredErrorCriterion {
                        targets: &residuals,
                        weights: &w,
                    };
                    let ctx = NodeContext {
                        cols: &cols,
                        criterion: &crit,
                        min_samples_leaf: params.min_samples_leaf,
                        zero_gain_splits: false,
                    };
                    let mut rng = seeded(0);
                    let nodes = grow(
                        &ctx,
                        rows.clone(),
                        &tree_params,
                        &mut rng,
                        |_| false,
                        |leaf_rows, _| {
                            let mut num = 0.0;
                            let mut den = 0.0;
                            for &i in leaf_rows {
                                let r = residuals[i];
                                num += w[i] * r;
                                den += w[i] * r.abs() * (1.0 - r.abs());
                            }
                            if den.abs() < 1e-150 {
                                0.0
                            } else {
                                newton_scale * num / den
                            }
                        },
                    );
                    RegressionTree { nodes }
                })
                .collect();

            for (i, s) in scores.iter_mut().enumerate() {
                for (c, t) in stage.iter().enumerate() {
                    s[c] += params.learning_rate * t.predict_row(x.row(i));
                }
            }
            train_loss.push(log_loss(&scores, &idx, &w));
            stages.push(stage);
        }

        Ok(Self {
            classes,
            n_features: x.n_cols(),
            learning_rate: params.learning_rate,
            initial_scores,
            stages,
            train_loss,
        })
    }

    /// Raw per-class scores after the first `iterations` stages.
    pub fn decision_function(&self, row: &[f64], iterations: usize) -> Vec<f64> {
        let mut s = self.initial_scores.clone();
        for stage in self.stages.iter().take(iterations) {
            for (c, t) in stage.iter().enumerate() {
                s[c] += self.learning_rate * t.predict_row(row);
            }
        }
        s
    }

    /// Summed squared-error decrease per feature over all trees.
    pub fn split_gains(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.n_features];
        for t in self.stages.iter().flatten() {
            for (a, g) in total.iter_mut().zip(split_gains(&t.nodes, self.n_features)) {
                *a += g;
            }
        }
        total
    }
}

impl Classifier for GradientBoosting {
    fn classes(&self) -> &[u32] {
        &self.classes
    }

    fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        let rows: Vec<&[f64]> = x.rows().collect();
        rows.par_iter()
            .map(|r| softmax(&self.decision_function(r, self.stages.len())))
            .collect()
    }
}
