//! From-scratch classifiers sharing one fit/predict contract.

mod forest;
mod gbt;
mod knn;
mod naive_bayes;
mod split;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{distinct_classes, Matrix};

pub use forest::{ForestParams, RandomForest};
pub use gbt::{GbtParams, GradientBoosting, RegressionNode, RegressionTree};
pub use knn::{euclidean, Knn, KnnParams};
pub use naive_bayes::{gaussian_density, NaiveBayes, NbParams};
pub use tree::{best_split, fit_tree, gini, DecisionTree, Node, Split, TreeNode, TreeParams};

pub trait Classifier {
    /// Class labels in ascending order; probability columns follow this order.
    fn classes(&self) -> &[u32];

    fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>>;

    /// Argmax of `predict_proba`; ties go to the lowest class.
    fn predict(&self, x: &Matrix) -> Vec<u32> {
        let classes = self.classes();
        self.predict_proba(x).iter().map(|p| classes[argmax(p)]).collect()
    }
}

/// Index of the first maximum.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Sorted distinct classes and, per row, the position of its class.
pub(crate) fn class_index(labels: &[u32]) -> (Vec<u32>, Vec<usize>) {
    let classes = distinct_classes(labels);
    let idx = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label present"))
        .collect();
    (classes, idx)
}

/// Weights rescaled to mean 1, so any common factor leaves fits unchanged.
pub(crate) fn normalized_weights(weights: Option<&[f64]>, n: usize) -> Result<Vec<f64>> {
    match weights {
        None => Ok(vec![1.0; n]),
        Some(w) => {
            if w.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "{} sample weights for {n} rows",
                    w.len()
                )));
            }
            if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidParameter(
                    "sample weights must be finite and non-negative".into(),
                ));
            }
            let total: f64 = w.iter().sum();
            if total <= 0.0 {
                return Err(Error::InvalidParameter("sample weights sum to zero".into()));
            }
            let scale = n as f64 / total;
            Ok(w.iter().map(|v| v * scale).collect())
        }
    }
}

pub(crate) fn check_fit_input(x: &Matrix, y: &[u32], what: &'static str) -> Result<()> {
    if x.n_rows() == 0 {
        return Err(Error::EmptyInput(what));
    }
    if x.n_rows() != y.len() {
        return Err(Error::InvalidParameter(format!(
            "{} rows but {} labels",
            x.n_rows(),
            y.len()
        )));
    }
    Ok(())
}

/// Learner choice and hyperparameters, as written in pipeline configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Tree(TreeParams),
    Forest(ForestParams),
    Gbt(GbtParams),
    Nb(NbParams),
    Knn(KnnParams),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Forest(ForestParams::default())
    }
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Tree(_) => "tree",
            ModelSpec::Forest(_) => "forest",
            ModelSpec::Gbt(_) => "gbt",
            ModelSpec::Nb(_) => "nb",
            ModelSpec::Knn(_) => "knn",
        }
    }

    /// Fits the learner. `seed` overrides any seed stored in the params;
    /// `categorical` lists the feature columns the naive Bayes learner treats
    /// as categorical.
    pub fn fit(
        &self,
        x: &Matrix,
        y: &[u32],
        weights: Option<&[f64]>,
        categorical: &[usize],
        seed: u64,
    ) -> Result<Model> {
        Ok(match self {
            ModelSpec::Tree(p) => {
                let p = TreeParams { seed, ..p.clone() };
                Model::Tree(DecisionTree::fit(x, y, weights, &p)?)
            }
            ModelSpec::Forest(p) => {
                let p = ForestParams { seed, ..p.clone() };
                Model::Forest(RandomForest::fit(x, y, weights, &p)?)
            }
            ModelSpec::Gbt(p) => {
                let p = GbtParams { seed, ..p.clone() };
                Model::Gbt(GradientBoosting::fit(x, y, weights, &p)?)
            }
            ModelSpec::Nb(p) => Model::Nb(NaiveBayes::fit(x, y, weights, categorical, p)?),
            ModelSpec::Knn(p) => Model::Knn(Knn::fit(x, y, weights, p)?),
        })
    }
}

/// A fitted learner of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Tree(DecisionTree),
    Forest(RandomForest),
    Gbt(GradientBoosting),
    Nb(NaiveBayes),
    Knn(Knn),
}

impl Model {
    /// Per-feature summed split gains for tree-based models.
    pub fn split_gains(&self) -> Option<Vec<f64>> {
        match self {
            Model::Tree(m) => Some(m.split_gains()),
            Model::Forest(m) => Some(m.split_gains()),
            Model::Gbt(m) => Some(m.split_gains()),
            Model::Nb(_) | Model::Knn(_) => None,
        }
    }
}

impl Classifier for Model {
    fn classes(&self) -> &[u32] {
        match self {
            Model::Tree(m) => m.classes(),
            Model::Forest(m) => m.classes(),
            Model::Gbt(m) => m.classes(),
            Model::Nb(m) => m.classes(),
            Model::Knn(m) => m.classes(),
        }
    }

    fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        match self {
            Model::Tree(m) => m.predict_proba(x),
            Model::Forest(m) => m.predict_proba(x),
            Model::Gbt(m) => m.predict_proba(x),
            Model::Nb(m) => m.predict_proba(x),
            Model::Knn(m) => m.predict_proba(x),
        }
    }
}
