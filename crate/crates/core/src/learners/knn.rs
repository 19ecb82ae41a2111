//! k-nearest neighbours under Euclidean distance with weighted votes.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_fit_input, class_index, normalized_weights, Classifier};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KnnParams {
    pub k: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self { k: 5 }
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    pub classes: Vec<u32>,
    pub k: usize,
    pub train: Matrix,
    /// Class position per training row.
    pub class_idx: Vec<usize>,
    pub weights: Vec<f64>,
}

impl Knn {
    pub fn fit(x: &Matrix, y: &[u32], weights: Option<&[f64]>, params: &KnnParams) -> Result<Self> {
        check_fit_input(x, y, "k-nearest neighbours")?;
        if params.k == 0 || params.k > x.n_rows() {
            return Err(Error::InvalidParameter(format!(
                "k = {} must lie in 1..={}",
                params.k,
                x.n_rows()
            )));
        }
        let (classes, class_idx) = class_index(y);
        Ok(Self {
            classes,
            k: params.k,
            train: x.clone(),
            class_idx,
            weights: normalized_weights(weights, y.len())?,
        })
    }

    /// Training-row indices of the `k` nearest rows; equal distances go to the
    /// lower index.
    pub fn neighbors(&self, query: &[f64]) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = self
            .train
            .rows()
            .enumerate()
            .map(|(i, r)| (squared_distance(query, r), i))
            .collect();
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < d.len() {
            d.select_nth_unstable_by(self.k - 1, cmp);
            d.truncate(self.k);
        }
        d.sort_by(cmp);
        d.into_iter().map(|(_, i)| i).collect()
    }
}

impl Classifier for Knn {
    fn classes(&self) -> &[u32] {
        &self.classes
    }

    /// Weighted vote shares among the neighbours.
    fn predict_proba(&self, x: &Matrix) -> Vec<Vec<f64>> {
        let rows: Vec<&[f64]> = x.rows().collect();
        rows.par_iter()
            .map(|q| {
                let mut votes = vec![0.0; self.classes.len()];
                for i in self.neighbors(q) {
                    votes[self.class_idx[i]] += self.weights[i];
                }
                let total: f64 = votes.iter().sum();
                if total > 0.0 {
                    votes.iter_mut().for_each(|v| *v /= total);
                } else {
                    let u = 1.0 / votes.len() as f64;
                    votes.iter_mut().for_each(|v| *v = u);
                }
                votes
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_four_five() {
        assert_eq!(euclidean(&[0.0, 0.0], &[3.0, 4.0]), 5.0);
    }

    #[test]
    fn majority_of_three() {
        let x = Matrix::from_rows(&[[0.0], [1.0], [2.0], [10.0]]).unwrap();
        let m = Knn::fit(&x, &[1, 1, 2, 2], None, &KnnParams { k: 3 }).unwrap();
        assert_eq!(m.predict(&Matrix::from_rows(&[[1.0]]).unwrap()), vec![1]);
    }

    #[test]
    fn distance_ties_use_lower_index() {
        let x = Matrix::from_rows(&[[1.0], [-1.0], [5.0]]).unwrap();
        let m = Knn::fit(&x, &[2, 1, 1], None, &KnnParams { k: 1 }).unwrap();
        assert_eq!(m.neighbors(&[0.0]), vec![0]);
        assert_eq!(m.predict(&Matrix::from_rows(&[[0.0]]).unwrap()), vec![2]);
    }

    #[test]
    fn k_bounds() {
        let x = Matrix::zeros(2, 1);
        assert!(Knn::fit(&x, &[1, 2], None, &KnnParams { k: 3 }).is_err());
        assert!(Knn::fit(&x, &[1, 2], None, &KnnParams { k: 0 }).is_err());
    }
}
