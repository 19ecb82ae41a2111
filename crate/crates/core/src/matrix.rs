use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "matrix data has {} values, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from row slices. All rows must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has {} values, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    /// A matrix with `rows` rows and no columns.
    pub fn empty_columns(rows: usize) -> Self {
        Self {
            rows,
            cols: 0,
            data: Vec::new(),
        }
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, row: usize) -> &mut [f64] {
        &mut self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        (0..self.rows).map(move |i| self.row(i))
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, col)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// New matrix made of the given rows, in the given order (repeats allowed).
    pub fn select_rows(&self, indices: &[usize]) -> Matrix {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Matrix {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    pub fn push_row(&mut self, row: &[f64]) -> Result<()> {
        if self.rows == 0 && self.cols == 0 {
            self.cols = row.len();
        }
        if row.len() != self.cols {
            return Err(Error::FeatureMismatch {
                expected: self.cols,
                found: row.len(),
            });
        }
        self.data.extend_from_slice(row);
        self.rows += 1;
        Ok(())
    }
}

/// Feature grid with names and class labels, as produced by wrangling,
/// scaling and projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub values: Matrix,
    pub labels: Vec<u32>,
    /// Discrete or continuous features (the rest are 0/1 dummies).
    pub numeric_feature_names: Vec<String>,
}

impl FeatureMatrix {
    pub fn new(
        feature_names: Vec<String>,
        values: Matrix,
        labels: Vec<u32>,
        numeric_feature_names: Vec<String>,
    ) -> Result<Self> {
        if values.n_cols() != feature_names.len() {
            return Err(Error::FeatureMismatch {
                expected: feature_names.len(),
                found: values.n_cols(),
            });
        }
        if values.n_rows() != labels.len() {
            return Err(Error::InvalidParameter(format!(
                "{} rows but {} labels",
                values.n_rows(),
                labels.len()
            )));
        }
        if let Some(bad) = numeric_feature_names.iter().find(|n| !feature_names.contains(n)) {
            return Err(Error::NotNumeric(bad.clone()));
        }
        Ok(Self {
            feature_names,
            values,
            labels,
            numeric_feature_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.values.n_rows()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    pub fn is_numeric(&self, name: &str) -> bool {
        self.numeric_feature_names.iter().any(|n| n == name)
    }

    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            feature_names: self.feature_names.clone(),
            values: self.values.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            numeric_feature_names: self.numeric_feature_names.clone(),
        }
    }

    pub fn count_missing(&self) -> usize {
        self.values.as_slice().iter().filter(|v| v.is_nan()).count()
    }

    /// Writes the matrix as CSV with a trailing `Target` column.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push("Target");
        w.write_record(&header)?;
        let mut record = Vec::with_capacity(header.len());
        for (row, label) in self.values.rows().zip(&self.labels) {
            record.clear();
            record.extend(row.iter().map(|v| v.to_string()));
            record.push(label.to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: "<csv output>".into(),
            source: e,
        })?;
        Ok(())
    }

    pub(crate) fn check_same_features(&self, expected: &[String]) -> Result<()> {
        if self.feature_names != expected {
            return Err(Error::FeatureMismatch {
                expected: expected.len(),
                found: self.feature_names.len(),
            });
        }
        Ok(())
    }
}

/// Distinct labels in ascending order.
pub fn distinct_classes(labels: &[u32]) -> Vec<u32> {
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    classes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn select_rows_repeats() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let s = m.select_rows(&[1, 1, 0]);
        assert_eq!(s.n_rows(), 3);
        assert_eq!(s.row(0), &[3.0, 4.0]);
        assert_eq!(s.row(2), &[1.0, 2.0]);
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows: Vec<Vec<f64>> = vec![vec![1.0], vec![1.0, 2.0]];
        assert!(Matrix::from_rows(&rows).is_err());
    }

    #[test]
    fn feature_matrix_validates_numeric_names() {
        let m = Matrix::zeros(1, 1);
        let err = FeatureMatrix::new(vec!["a".into()], m, vec![1], vec!["b".into()]);
        assert!(matches!(err, Err(Error::NotNumeric(_))));
    }
}
