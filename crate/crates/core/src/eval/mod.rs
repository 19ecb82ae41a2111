//! Splitting, cross-validation folds, metrics and feature importance.

pub mod importance;
pub mod metrics;
pub mod split;

pub use importance::{feature_importance, rank_gains, FeatureImportance, ImportanceReport};
pub use metrics::{metrics, score, Averaging, ClassMetrics, ConfusionMatrix, Metrics};
pub use split::{split_80_20, stratified_kfold, train_test_split, training_rows, SplitIndices};
