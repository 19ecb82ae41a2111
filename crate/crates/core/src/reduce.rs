//! Principal component analysis over the (scaled) feature matrix.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{FeatureMatrix, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub feature_names: Vec<String>,
    pub column_means: Vec<f64>,
    /// `k` unit-length principal directions, each of length `p`.
    pub components: Vec<Vec<f64>>,
    pub explained_variance: Vec<f64>,
    pub explained_variance_ratio: Vec<f64>,
    /// Every eigenvalue of the covariance matrix, descending.
    pub spectrum: Vec<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    /// Ratios for all `p` components (sums to 1 unless total variance is 0).
    pub fn full_variance_ratio(&self) -> Vec<f64> {
        let total: f64 = self.spectrum.iter().sum();
        self.spectrum
            .iter()
            .map(|&l| if total > 0.0 { l / total } else { 0.0 })
            .collect()
    }

    pub fn component_names(&self) -> Vec<String> {
        (1..=self.n_components()).map(|i| format!("pc{i}")).collect()
    }

    /// Explained-variance table: `component,ratio,cumulative_ratio`, one row per component.
    pub fn write_variance_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "component,ratio,cumulative_ratio")?;
        let mut cumulative = 0.0;
        for (i, r) in self.full_variance_ratio().iter().enumerate() {
            cumulative += r;
            writeln!(out, "{},{},{}", i + 1, r, cumulative)?;
        }
        Ok(())
    }

    /// Maps projected rows back to feature space.
    pub fn reconstruct(&self, projected: &Matrix) -> Result<Matrix> {
        if projected.n_cols() != self.n_components() {
            return Err(Error::FeatureMismatch {
                expected: self.n_components(),
                found: projected.n_cols(),
            });
        }
        let p = self.column_means.len();
        let mut out = Matrix::zeros(projected.n_rows(), p);
        for i in 0..projected.n_rows() {
            let z = projected.row(i);
            let row = out.row_mut(i);
            row.copy_from_slice(&self.column_means);
            for (zc, comp) in z.iter().zip(&self.components) {
                for (r, c) in row.iter_mut().zip(comp) {
                    *r += zc * c;
                }
            }
        }
        Ok(out)
    }
}

/// Fits the top-`k` principal directions of the sample covariance (n-1 denominator).
///
/// Each direction's largest-magnitude entry is made positive.
pub fn fit_pca(matrix: &FeatureMatrix, k: usize) -> Result<PcaModel> {
    let x = &matrix.values;
    let (n, p) = (x.n_rows(), x.n_cols());
    if n < 2 {
        return Err(Error::InvalidParameter(format!("PCA needs at least 2 rows, got {n}")));
    }
    if k == 0 || k > p {
        return Err(Error::InvalidParameter(format!(
            "PCA component count {k} out of range 1..={p}"
        )));
    }

    let mut means = vec![0.0; p];
    for row in x.rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);

    let mut cov = DMatrix::<f64>::zeros(p, p);
    let mut centered = vec![0.0; p];
    for row in x.rows() {
        for ((c, v), m) in centered.iter_mut().zip(row).zip(&means) {
            *c = v - m;
        }
        for a in 0..p {
            let ca = centered[a];
            if ca == 0.0 {
                continue;
            }
            for b in a..p {
                cov[(a, b)] += ca * centered[b];
            }
        }
    }
    let denom = (n - 1) as f64;
    for a in 0..p {
        for b in a..p {
            let v = cov[(a, b)] / denom;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }

    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let spectrum: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let total: f64 = spectrum.iter().sum();
    let components: Vec<Vec<f64>> = order[..k]
        .iter()
        .map(|&i| {
            let mut v: Vec<f64> = eig.eigenvectors.column(i).iter().copied().collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let mut pivot = 0;
            for (j, x) in v.iter().enumerate() {
                if x.abs() > v[pivot].abs() {
                    pivot = j;
                }
            }
            let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
            v.iter_mut().for_each(|x| *x *= sign / norm);
            v
        })
        .collect();
    let explained_variance = spectrum[..k].to_vec();
    let explained_variance_ratio = explained_variance
        .iter()
        .map(|&l| if total > 0.0 { l / total } else { 0.0 })
        .collect();

    Ok(PcaModel {
        feature_names: matrix.feature_names.clone(),
        column_means: means,
        components,
        explained_variance,
        explained_variance_ratio,
        spectrum,
    })
}

/// Projects rows onto the fitted components; output columns are `pc1..pck`.
pub fn project(matrix: &FeatureMatrix, model: &PcaModel) -> Result<FeatureMatrix> {
    matrix.check_same_features(&model.feature_names)?;
    let k = model.n_components();
    let mut out = Matrix::zeros(matrix.n_rows(), k);
    let mut centered = vec![0.0; model.column_means.len()];
    for i in 0..matrix.n_rows() {
        for ((c, v), m) in centered.iter_mut().zip(matrix.values.row(i)).zip(&model.column_means) {
            *c = v - m;
        }
        let row = out.row_mut(i);
        for (z, comp) in row.iter_mut().zip(&model.components) {
            *z = centered.iter().zip(comp).map(|(a, b)| a * b).sum();
        }
    }
    let names = model.component_names();
    FeatureMatrix::new(names.clone(), out, matrix.labels.clone(), names)
}
