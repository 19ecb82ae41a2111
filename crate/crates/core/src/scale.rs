//! Min-max normalization and z-score standardization of numeric features.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnScaler {
    MinMax { min: f64, max: f64 },
    ZScore { mean: f64, std: f64 },
}

impl ColumnScaler {
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ColumnScaler::MinMax { min, max } => {
                if max > min {
                    (x - min) / (max - min)
                } else {
                    0.0
                }
            }
            ColumnScaler::ZScore { mean, std } => {
                if std > 0.0 {
                    (x - mean) / std
                } else {
                    0.0
                }
            }
        }
    }

    /// Inverse map; `None` for degenerate columns.
    pub fn invert(&self, y: f64) -> Option<f64> {
        match *self {
            ColumnScaler::MinMax { min, max } => (max > min).then_some(min + y * (max - min)),
            ColumnScaler::ZScore { mean, std } => (std > 0.0).then_some(mean + y * std),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledColumn {
    pub name: String,
    pub scaler: ColumnScaler,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub feature_names: Vec<String>,
    pub columns: Vec<ScaledColumn>,
}

/// Population mean and standard deviation (divide by n).
pub fn population_moments(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Fits min-max on `minmax_columns` and z-score on every other numeric feature.
pub fn fit_scaler(matrix: &FeatureMatrix, minmax_columns: &[String]) -> Result<ScalerState> {
    for c in minmax_columns {
        if !matrix.is_numeric(c) {
            return Err(Error::NotNumeric(c.clone()));
        }
    }
    let mut columns = Vec::with_capacity(matrix.numeric_feature_names.len());
    for name in &matrix.numeric_feature_names {
        let j = matrix
            .feature_index(name)
            .ok_or_else(|| Error::NotNumeric(name.clone()))?;
        let values = matrix.values.column(j);
        let scaler = if minmax_columns.contains(name) {
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if values.is_empty() {
                ColumnScaler::MinMax { min: 0.0, max: 0.0 }
            } else {
                ColumnScaler::MinMax { min, max }
            }
        } else {
            let (mean, std) = population_moments(&values);
            ColumnScaler::ZScore { mean, std }
        };
        columns.push(ScaledColumn {
            name: name.clone(),
            scaler,
        });
    }
    Ok(ScalerState {
        feature_names: matrix.feature_names.clone(),
        columns,
    })
}

impl ScalerState {
    fn positions(&self, matrix: &FeatureMatrix) -> Result<Vec<usize>> {
        matrix.check_same_features(&self.feature_names)?;
        self.columns
            .iter()
            .map(|c| {
                matrix
                    .feature_index(&c.name)
                    .ok_or_else(|| Error::NotNumeric(c.name.clone()))
            })
            .collect()
    }

    pub fn transform(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        let positions = self.positions(matrix)?;
        let mut out = matrix.clone();
        for i in 0..out.n_rows() {
            let row = out.values.row_mut(i);
            for (c, &j) in self.columns.iter().zip(&positions) {
                row[j] = c.scaler.apply(row[j]);
            }
        }
        Ok(out)
    }

    /// Inverse of [`transform`](Self::transform); degenerate columns are left as-is.
    pub fn inverse_transform(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        let positions = self.positions(matrix)?;
        let mut out = matrix.clone();
        for i in 0..out.n_rows() {
            let row = out.values.row_mut(i);
            for (c, &j) in self.columns.iter().zip(&positions) {
                if let Some(v) = c.scaler.invert(row[j]) {
                    row[j] = v;
                }
            }
        }
        Ok(out)
    }
}

/// Free-function form of [`ScalerState::transform`].
pub fn transform(matrix: &FeatureMatrix, state: &ScalerState) -> Result<FeatureMatrix> {
    state.transform(matrix)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use proptest::prelude::*;

    fn fm(cols: &[(&str, Vec<f64>)], numeric: &[&str]) -> FeatureMatrix {
        let n = cols[0].1.len();
        let mut m = Matrix::zeros(n, cols.len());
        for (j, (_, v)) in cols.iter().enumerate() {
            for (i, x) in v.iter().enumerate() {
                m.set(i, j, *x);
            }
        }
        FeatureMatrix::new(
            cols.iter().map(|(n, _)| n.to_string()).collect(),
            m,
            vec![1; n],
            numeric.iter().map(|s| s.to_string()).collect(),
        )
        .unwrap()
    }

    #[test]
    fn population_moments_example() {
        let (mean, std) = population_moments(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(mean, 5.0);
        assert_eq!(std, 2.0);
    }

    #[test]
    fn constant_column_has_zero_sigma_and_maps_to_zero() {
        let m = fm(&[("c", vec![3.0, 3.0, 3.0]), ("d", vec![1.0, 1.0, 1.0])], &["c", "d"]);
        let s = fit_scaler(&m, &["d".to_string()]).unwrap();
        assert_eq!(s.columns[0].scaler, ColumnScaler::ZScore { mean: 3.0, std: 0.0 });
        let t = s.transform(&m).unwrap();
        assert!(t.values.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn substitution_examples() {
        let mm = ColumnScaler::MinMax { min: 0.0, max: 100.0 };
        assert_eq!(mm.apply(50.0), 0.5);
        assert_eq!(mm.apply(0.0), 0.0);
        assert_eq!(mm.apply(100.0), 1.0);
        // not clipped outside the fitted range
        assert_eq!(mm.apply(150.0), 1.5);
        let z = ColumnScaler::ZScore { mean: 5.0, std: 2.0 };
        assert_eq!(z.apply(7.0), 1.0);
    }

    #[test]
    fn dummies_untouched_and_errors() {
        let m = fm(&[("x", vec![1.0, 3.0]), ("dummy", vec![0.0, 1.0])], &["x"]);
        let s = fit_scaler(&m, &[]).unwrap();
        let t = s.transform(&m).unwrap();
        assert_eq!(t.values.column(1), vec![0.0, 1.0]);
        assert_eq!(t.values.column(0), vec![-1.0, 1.0]);
        assert!(matches!(
            fit_scaler(&m, &["dummy".to_string()]),
            Err(Error::NotNumeric(_))
        ));
        let other = fm(&[("y", vec![1.0, 3.0]), ("dummy", vec![0.0, 1.0])], &["y"]);
        assert!(matches!(s.transform(&other), Err(Error::FeatureMismatch { .. })));
    }

    proptest! {
        #[test]
        fn fitted_data_bounds_and_moments(
            a in prop::collection::vec(-1e3f64..1e3, 2..60),
            seed in 0u64..1000,
        ) {
            let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v * 0.5 + ((i as u64 * 7919 + seed) % 13) as f64).collect();
            let m = fm(&[("a", a.clone()), ("b", b)], &["a", "b"]);
            let s = fit_scaler(&m, &["a".to_string()]).unwrap();
            let t = s.transform(&m).unwrap();
            for v in t.values.column(0) {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let col = t.values.column(1);
            if let ColumnScaler::ZScore { std, .. } = s.columns[1].scaler {
                if std > 1e-6 {
                    let (mean, sd) = population_moments(&col);
                    prop_assert!(mean.abs() < 1e-9);
                    prop_assert!((sd - 1.0).abs() < 1e-9);
                }
            }
            let back = s.inverse_transform(&t).unwrap();
            for (x, y) in back.values.as_slice().iter().zip(m.values.as_slice()) {
                prop_assert!((x - y).abs() < 1e-9 * (1.0 + y.abs()));
            }
        }
    }
}
