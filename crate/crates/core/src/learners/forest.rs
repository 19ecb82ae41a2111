//! Random forest: bootstrap-aggregated Gini trees with random feature subsets.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::split::RankedColumns;
use super::tree::{DecisionTree, TreeParams};
use super::{check_fit_input, class_index, normalized_weights, Classifier};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::rng::{derive, seeded};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` means `⌊√p⌋` (at least 1).
    pub features_per_split: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 500,
            features_per_split: None,
            max_depth: None,
            min_samples_split: 2,
            min_samples_leaf: 1,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn resolved_features(&self, p: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| ((p as f64).sqrt().floor() as usize).max(1))
            .min(p.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub classes: Vec<u32>,
    pub n_features: usize,
    pub features_per_split: usize,
    /// Seed each tree's bootstrap and feature draws came from.
    pub tree_seeds: Vec<u64>,
    pub trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(x: &Matrix, y: &[u32], weights: Option<&[f64]>, params: &ForestParams) -> Result<Self> {
        check_fit_input(x, y, "random forest")?;
        if params.n_trees == 0 {
            return Err(Error::InvalidParameter("n_trees must be at least 1".into()));
        }
        let m = params.resolved_features(x.n_cols());
        let tree_params = TreeParams {
            max_depth: params.max_depth,
            min_samples_split: params.min_samples_split,
            min_samples_leaf: params.min_samples_leaf,
            features_per_split: Some(m),
            seed: 0,
        };
        tree_params.validate()?;
        let cols = RankedColumns::new(x)?;
        let (classes, idx) = class_index(y);
        let base = normalized_weights(weights, y.len())?;
        let n = y.len();
        let tree_seeds: Vec<u64> = (0..params.n_trees as u64).map(|i| derive(params.seed, i)).collect();

        let trees = tree_seeds
            .par_iter()
            .map(|&seed| {
                let mut rng = seeded(seed);
                if params.bootstrap {
                    let mut counts = vec![0u32; n];
                    for _ in 0..n {
                        counts[rng.gen_range(0..n)] += 1;
                    }
                    let w: Vec<f64> = base.iter().zip(&counts).map(|(b, c)| b * *c as f64).collect();
                    let rows = (0..n).filter(|&i| counts[i] > 0).collect();
                    DecisionTree::fit_ranked(&cols, &classes, &idx, &w, rows, &tree_params, &mut rng)
                } else {
                    let rows = (0..n).collect();
                    DecisionTree::fit_ranked(&cols, &classes, &idx, &base, rows, &tree_params, &mut rng)
                }
            })
            .collect();

        Ok(Self {
            classes,
            n_features: x.n_cols(),
            features_per_split: m,
            tree_seeds,
            trees,
        })
    }

    pub fn split_gains(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.n_features];
        for t in &self.trees {
            for (a, g) in total.iter_mut().zip(t.split_gains()) {
                *a += g;
            }
        }
        total
    }

    /// Hard majority vote over trees, lowest class on ties.
    pub fn predict_hard_vote(&self, x: &Matrix) -> Vec<u32> {
        x.rows()
            .map(|r| {
                let mut votes = vec![0usize; self.classes.len()];
                for t in &self.trees {
                    votes[super::argmax(t.leaf_distribution(r))] += 1;
                }
                let best = (0..votes.len()).fold(0, |b, i| if votes[i] > votes[b] { i } else { b });
                self.classes[best]
            })
            .collect()
    }
}

impl Classifier for RandomForest {
    fn classes(&self) -> &[u32] {
        &self.classes
    }

    /// Mean of the trees' leaf distributions.
    fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        let k = self.classes.len();
        let scale = 1.0 / self.trees.len() as f64;
        let rows: Vec<&[f64]> = x.rows().collect();
        rows.par_iter()
            .map(|r| {
                let mut p = vec![0.0; k];
                for t in &self.trees {
                    for (a, v) in p.iter_mut().zip(t.leaf_distribution(r)) {
                        *a += v;
                    }
                }
                p.iter_mut().for_each(|v| *v *= scale);
                p
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Matrix, Vec<u32>) {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![i as f64, (i % 7) as f64, ((i * 13) % 5) as f64])
            .collect();
        let y = (0..40)
            .map(|i| {
                if i < 15 {
                    1
                } else if i < 30 {
                    2
                } else {
                    3
                }
            })
            .collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn tree_count_and_determinism() {
        let (x, y) = toy();
        let p = ForestParams {
            n_trees: 7,
            seed: 3,
            ..Default::default()
        };
        let a = RandomForest::fit(&x, &y, None, &p).unwrap();
        let b = RandomForest::fit(&x, &y, None, &p).unwrap();
        assert_eq!(a.trees.len(), 7);
        assert_eq!(a, b);
        assert_eq!(a.features_per_split, 1);
    }

    #[test]
    fn proba_rows_sum_to_one() {
        let (x, y) = toy();
        let f = RandomForest::fit(
            &x,
            &y,
            None,
            &ForestParams {
                n_trees: 5,
                ..Default::default()
            },
        )
        .unwrap();
        for p in f.predict_proba(&x) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_trees_rejected() {
        let (x, y) = toy();
        assert!(RandomForest::fit(
            &x,
            &y,
            None,
            &ForestParams {
                n_trees: 0,
                ..Default::default()
            }
        )
        .is_err());
    }
}
