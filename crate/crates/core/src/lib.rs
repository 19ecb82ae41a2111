#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Poverty-level classification pipeline: survey ingest, wrangling, scaling,
//! PCA, class balancing, five classifiers and their evaluation.

pub mod balance;
pub mod error;
pub mod eval;
pub mod learners;
pub mod matrix;
pub mod pipeline;
pub mod reduce;
pub mod rng;
pub mod scale;
pub mod schema;
pub mod synth;
pub mod wrangle;

pub use error::{Error, Result, Stage};
pub use learners::{Classifier, Model, ModelSpec};
pub use matrix::{FeatureMatrix, Matrix};
pub use pipeline::{FittedPipeline, ModelFile, PipelineConfig};
pub use schema::{RawTable, Schema};
