//! Normalized split-gain feature importance for tree-based models.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Model;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub rank: usize,
    pub feature: String,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    /// Every feature, highest fraction first (ties by column order).
    pub ranked: Vec<FeatureImportance>,
    /// Set when the model made no splits; `ranked` is then empty.
    pub no_splits: bool,
}

/// Normalizes raw per-feature gains so they sum to 1.
pub fn rank_gains(gains: &[f64], feature_names: &[String]) -> Result<ImportanceReport> {
    if gains.len() != feature_names.len() {
        return Err(Error::FeatureMismatch {
            expected: feature_names.len(),
            found: gains.len(),
        });
    }
    let total: f64 = gains.iter().sum();
    if !(total > 0.0) {
        return Ok(ImportanceReport {
            ranked: Vec::new(),
            no_splits: true,
        });
    }
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    let ranked = order
        .into_iter()
        .enumerate()
        .map(|(r, j)| FeatureImportance {
            rank: r + 1,
            feature: feature_names[j].clone(),
            fraction: gains[j] / total,
        })
        .collect();
    Ok(ImportanceReport {
        ranked,
        no_splits: false,
    })
}

pub fn feature_importance(model: &Model, feature_names: &[String]) -> Result<ImportanceReport> {
    let gains = model
        .split_gains()
        .ok_or_else(|| Error::InvalidParameter("feature importance needs a tree-based model".into()))?;
    rank_gains(&gains, feature_names)
}

impl ImportanceReport {
    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.ranked.iter().find(|f| f.feature == feature).map(|f| f.rank)
    }

    /// `rank,feature,fraction` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["rank", "feature", "fraction"])?;
        for f in &self.ranked {
            w.write_record([f.rank.to_string(), f.feature.clone(), f.fraction.to_string()])?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("f{i}")).collect()
    }

    #[test]
    fn normalized_and_ranked() {
        let r = rank_gains(&[1.0, 3.0, 0.0, 1.0], &names(4)).unwrap();
        let order: Vec<&str> = r.ranked.iter().map(|f| f.feature.as_str()).collect();
        assert_eq!(order, ["f1", "f0", "f3", "f2"]);
        assert_eq!(r.ranked[0].fraction, 0.6);
        assert!((r.ranked.iter().map(|f| f.fraction).sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(r.rank_of("f3"), Some(3));
    }

    #[test]
    fn no_splits_flagged() {
        let r = rank_gains(&[0.0, 0.0], &names(2)).unwrap();
        assert!(r.no_splits && r.ranked.is_empty());
    }
}
