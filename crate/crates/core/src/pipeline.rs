//! Config-driven pipeline: encode, split, then impute, scale, project,
//! balance and fit on training rows only.

use std::io::Write;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::balance::{self, BalanceConfig, BalanceReport};
use crate::error::{Error, Result, Stage, StageExt};
use crate::eval::{
    feature_importance, score, split::training_rows, stratified_kfold, train_test_split, Averaging, ImportanceReport,
    Metrics, SplitIndices,
};
use crate::learners::{Classifier, Model, ModelSpec};
use crate::matrix::FeatureMatrix;
use crate::reduce::{fit_pca, project, PcaModel};
use crate::rng::derive_named;
use crate::scale::{fit_scaler, ScalerState};
use crate::schema::{load_csv_with, LoadOptions, RawTable, Schema, YesNoPolicy};
use crate::wrangle::{build_default_plan, encode, Encoded, MedianImputer, WranglePlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalerConfig {
    /// Numeric features min-max normalized; other numeric features are z-scored.
    pub minmax_columns: Vec<String>,
}

impl Default for ScalerConfig {
    fn default() -> Self {
        Self {
            minmax_columns: vec!["dependency".into()],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PcaConfig {
    pub enabled: bool,
    pub k: usize,
}

impl Default for PcaConfig {
    fn default() -> Self {
        Self { enabled: true, k: 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub test_fraction: f64,
    /// Cross-validation folds; 0 skips cross-validation.
    pub cv_folds: usize,
    pub stratified: bool,
    pub averaging: Averaging,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            test_fraction: 0.2,
            cv_folds: 5,
            stratified: true,
            averaging: Averaging::Macro,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub dataset: Option<PathBuf>,
    pub seed: u64,
    /// JSON wrangle plan replacing the built-in one.
    pub wrangle_plan: Option<PathBuf>,
    pub yes_no: YesNoPolicy,
    pub scaler: ScalerConfig,
    pub pca: PcaConfig,
    pub balance: BalanceConfig,
    pub model: ModelSpec,
    pub eval: EvalConfig,
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.eval;
        if !(e.test_fraction > 0.0 && e.test_fraction < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eval.test_fraction {} must lie in (0, 1)",
                e.test_fraction
            )));
        }
        if e.cv_folds == 1 {
            return Err(Error::InvalidParameter("eval.cv_folds must be 0 or at least 2".into()));
        }
        if self.pca.enabled && self.pca.k == 0 {
            return Err(Error::InvalidParameter("pca.k must be at least 1".into()));
        }
        Ok(())
    }

    /// SHA-256 of the compact JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Seed for one named stage, derived from the master seed.
    pub fn stage_seed(&self, stage: &str) -> u64 {
        derive_named(self.seed, stage)
    }

    pub fn load_options(&self) -> LoadOptions {
        LoadOptions { yes_no: self.yes_no }
    }
}

pub fn load_plan(config: &PipelineConfig) -> Result<WranglePlan> {
    match &config.wrangle_plan {
        None => Ok(build_default_plan()),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            WranglePlan::from_json(&text)
        }
    }
}

/// Reads the configured dataset against the survey schema.
pub fn load_dataset(config: &PipelineConfig) -> Result<RawTable> {
    let path = config
        .dataset
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("no dataset path configured".into()))?;
    load_csv_with(path, &Schema::survey(), config.load_options())
}

/// The transformations fitted on training rows plus the learner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub input_features: Vec<String>,
    pub imputer: MedianImputer,
    pub scaler: ScalerState,
    pub pca: Option<PcaModel>,
    /// Columns the learner sees.
    pub model_features: Vec<String>,
    pub model: Model,
}

impl FittedPipeline {
    pub fn transform(&self, matrix: &FeatureMatrix) -> Result<FeatureMatrix> {
        let mut m = matrix.clone();
        self.imputer.transform(&mut m).stage(Stage::Impute)?;
        let m = self.scaler.transform(&m).stage(Stage::Scale)?;
        match &self.pca {
            Some(p) => project(&m, p).stage(Stage::Reduce),
            None => Ok(m),
        }
    }

    pub fn predict(&self, matrix: &FeatureMatrix) -> Result<Vec<u32>> {
        let m = self.transform(matrix)?;
        Ok(self.model.predict(&m.values))
    }

    pub fn importance(&self) -> Result<ImportanceReport> {
        feature_importance(&self.model, &self.model_features).stage(Stage::Evaluate)
    }
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub pipeline: FittedPipeline,
    pub balance: BalanceReport,
    pub log: Vec<String>,
}

/// Fits every stage on `train` (which may still hold NaN in `impute_columns`).
pub fn fit_pipeline(config: &PipelineConfig, train: &FeatureMatrix, impute_columns: &[String]) -> Result<FitOutcome> {
    let mut log = Vec::new();
    let mut m = train.clone();
    let imputer = MedianImputer::fit(&m, impute_columns).stage(Stage::Impute)?;
    let filled = imputer.transform(&mut m).stage(Stage::Impute)?;
    for (c, n) in &filled {
        log.push(format!(
            "impute: {c} filled {n} cells with median {}",
            imputer.medians[c]
        ));
    }

    let scaler = fit_scaler(&m, &config.scaler.minmax_columns).stage(Stage::Scale)?;
    let m = scaler.transform(&m).stage(Stage::Scale)?;
    log.push(format!(
        "scale: {} numeric columns ({} min-max)",
        scaler.columns.len(),
        config.scaler.minmax_columns.len()
    ));

    let (pca, m) = if config.pca.enabled {
        let p = fit_pca(&m, config.pca.k).stage(Stage::Reduce)?;
        let projected = project(&m, &p).stage(Stage::Reduce)?;
        log.push(format!(
            "reduce: {} components of {} features, explained variance {:.6}",
            p.n_components(),
            m.n_features(),
            p.explained_variance_ratio.iter().sum::<f64>()
        ));
        (Some(p), projected)
    } else {
        log.push("reduce: disabled".into());
        (None, m)
    };

    let balanced =
        balance::apply(&config.balance, &m.values, &m.labels, config.stage_seed("balance")).stage(Stage::Balance)?;
    log.extend(balanced.report.to_log_lines());

    let categorical: Vec<usize> = (0..m.n_features())
        .filter(|&j| !m.is_numeric(&m.feature_names[j]))
        .collect();
    let model = config
        .model
        .fit(
            &balanced.matrix,
            &balanced.labels,
            balanced.weights.as_deref(),
            &categorical,
            config.stage_seed("model"),
        )
        .stage(Stage::Fit)?;
    log.push(format!(
        "fit: {} on {} rows x {} features",
        config.model.name(),
        balanced.labels.len(),
        m.n_features()
    ));

    Ok(FitOutcome {
        pipeline: FittedPipeline {
            input_features: train.feature_names.clone(),
            imputer,
            scaler,
            pca,
            model_features: m.feature_names.clone(),
            model,
        },
        balance: balanced.report,
        log,
    })
}

/// Scores on one held-out fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub fold: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub k: usize,
    pub folds: Vec<FoldScore>,
    pub mean_accuracy: f64,
    pub mean_precision: f64,
    pub mean_recall: f64,
    pub mean_f1: f64,
}

/// Stratified k-fold cross-validation; every stage is refit inside each fold.
pub fn cross_validate(
    config: &PipelineConfig,
    matrix: &FeatureMatrix,
    impute_columns: &[String],
    k: usize,
) -> Result<CvReport> {
    let folds = stratified_kfold(&matrix.labels, k, config.stage_seed("cv")).stage(Stage::Evaluate)?;
    let classes = crate::matrix::distinct_classes(&matrix.labels);
    let scores = (0..k)
        .into_par_iter()
        .map(|i| {
            let train = matrix.select_rows(&training_rows(&folds, i));
            let test = matrix.select_rows(&folds[i]);
            let fitted = fit_pipeline(config, &train, impute_columns)?;
            let predicted = fitted.pipeline.predict(&test)?;
            let m = score(&classes, &test.labels, &predicted, config.eval.averaging).stage(Stage::Evaluate)?;
            Ok(FoldScore {
                fold: i + 1,
                train_rows: train.n_rows(),
                test_rows: test.n_rows(),
                accuracy: m.accuracy,
                precision: m.precision,
                recall: m.recall,
                f1: m.f1,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = |f: fn(&FoldScore) -> f64| scores.iter().map(f).sum::<f64>() / scores.len() as f64;
    Ok(CvReport {
        k,
        mean_accuracy: mean(|s| s.accuracy),
        mean_precision: mean(|s| s.precision),
        mean_recall: mean(|s| s.recall),
        mean_f1: mean(|s| s.f1),
        folds: scores,
    })
}

/// Encodes the raw table and reports the stage counts.
pub fn prepare(table: &RawTable, plan: &WranglePlan) -> Result<Encoded> {
    encode(table, plan).stage(Stage::Wrangle)
}

pub fn split(config: &PipelineConfig, labels: &[u32]) -> Result<SplitIndices> {
    train_test_split(
        labels,
        config.eval.test_fraction,
        config.stage_seed("split"),
        config.eval.stratified,
    )
    .stage(Stage::Evaluate)
}

/// A trained pipeline plus the record needed to replay the run.
#[derive(Debug, Clone)]
pub struct TrainRun {
    pub split: SplitIndices,
    pub fit: FitOutcome,
    pub audit: Vec<String>,
}

fn audit_header(config: &PipelineConfig, table_rows: usize, table_cols: usize, encoded: &Encoded) -> Vec<String> {
    let mut audit = vec![
        format!("config_hash {}", config.hash()),
        format!("seed {}", config.seed),
        format!("model {}", config.model.name()),
        format!("ingest: rows {table_rows} columns {table_cols}"),
    ];
    audit.extend(encoded.audit.to_log_lines());
    audit
}

/// Encodes, splits and fits on the training rows.
pub fn train(config: &PipelineConfig, table: &RawTable) -> Result<TrainRun> {
    config.validate()?;
    let encoded = prepare(table, &load_plan(config)?)?;
    train_encoded(config, table, &encoded)
}

fn train_encoded(config: &PipelineConfig, table: &RawTable, encoded: &Encoded) -> Result<TrainRun> {
    let mut audit = audit_header(config, table.n_rows(), table.n_cols(), encoded);
    let split = split(config, &encoded.matrix.labels)?;
    audit.push(format!(
        "split: train {} test {} (test fraction {}, stratified {})",
        split.train_rows.len(),
        split.test_rows.len(),
        config.eval.test_fraction,
        config.eval.stratified
    ));
    let train = encoded.matrix.select_rows(&split.train_rows);
    let fit = fit_pipeline(config, &train, &encoded.impute_columns)?;
    audit.extend(fit.log.iter().cloned());
    Ok(TrainRun { split, fit, audit })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub model: String,
    pub config_hash: String,
    pub seed: u64,
    pub rows: usize,
    pub features: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub test: Metrics,
    pub cv: Option<CvReport>,
    pub importance: Option<ImportanceReport>,
}

impl EvalReport {
    /// `model,metric,value` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "metric", "value"])?;
        let mut row = |metric: String, value: f64| w.write_record([self.model.clone(), metric, value.to_string()]);
        row("test_accuracy".into(), self.test.accuracy)?;
        row("test_precision".into(), self.test.precision)?;
        row("test_recall".into(), self.test.recall)?;
        row("test_f1".into(), self.test.f1)?;
        for c in &self.test.per_class {
            row(format!("test_class{}_precision", c.class), c.precision)?;
            row(format!("test_class{}_recall", c.class), c.recall)?;
            row(format!("test_class{}_f1", c.class), c.f1)?;
        }
        if let Some(cv) = &self.cv {
            for f in &cv.folds {
                row(format!("cv_fold{}_accuracy", f.fold), f.accuracy)?;
                row(format!("cv_fold{}_f1", f.fold), f.f1)?;
            }
            row("cv_mean_accuracy".into(), cv.mean_accuracy)?;
            row("cv_mean_precision".into(), cv.mean_precision)?;
            row("cv_mean_recall".into(), cv.mean_recall)?;
            row("cv_mean_f1".into(), cv.mean_f1)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EvaluationRun {
    pub train: TrainRun,
    pub report: EvalReport,
}

/// Trains, scores the held-out rows and, when configured, cross-validates
/// over all wrangled rows.
pub fn evaluate(config: &PipelineConfig, table: &RawTable) -> Result<EvaluationRun> {
    config.validate()?;
    let encoded = prepare(table, &load_plan(config)?)?;
    let mut run = train_encoded(config, table, &encoded)?;
    let test = encoded.matrix.select_rows(&run.split.test_rows);
    let predicted = run.fit.pipeline.predict(&test)?;
    let classes = crate::matrix::distinct_classes(&encoded.matrix.labels);
    let metrics = score(&classes, &test.labels, &predicted, config.eval.averaging).stage(Stage::Evaluate)?;
    run.audit.push(format!(
        "evaluate: test accuracy {:.6} {:?} f1 {:.6}",
        metrics.accuracy, config.eval.averaging, metrics.f1
    ));
    let importance = match run.fit.pipeline.model.split_gains() {
        Some(_) => Some(run.fit.pipeline.importance()?),
        None => None,
    };
    let cv = if config.eval.cv_folds >= 2 {
        let cv = cross_validate(config, &encoded.matrix, &encoded.impute_columns, config.eval.cv_folds)?;
        run.audit.push(format!(
            "cv: {} folds mean accuracy {:.6} mean f1 {:.6}",
            cv.k, cv.mean_accuracy, cv.mean_f1
        ));
        Some(cv)
    } else {
        None
    };
    let report = EvalReport {
        model: config.model.name().into(),
        config_hash: config.hash(),
        seed: config.seed,
        rows: encoded.matrix.n_rows(),
        features: encoded.matrix.n_features(),
        train_rows: run.split.train_rows.len(),
        test_rows: run.split.test_rows.len(),
        test: metrics,
        cv,
        importance,
    };
    Ok(EvaluationRun { train: run, report })
}

/// Cross-validation alone over every wrangled row.
pub fn cross_validate_table(config: &PipelineConfig, table: &RawTable, k: usize) -> Result<(CvReport, Vec<String>)> {
    config.validate()?;
    let plan = load_plan(config)?;
    let encoded = prepare(table, &plan)?;
    let mut audit = audit_header(config, table.n_rows(), table.n_cols(), &encoded);
    let cv = cross_validate(config, &encoded.matrix, &encoded.impute_columns, k)?;
    audit.push(format!(
        "cv: {} folds mean accuracy {:.6} mean f1 {:.6}",
        cv.k, cv.mean_accuracy, cv.mean_f1
    ));
    Ok((cv, audit))
}

pub const MODEL_FORMAT: &str = "povml-model";
pub const MODEL_VERSION: u32 = 1;

/// Versioned on-disk form of a trained pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub pipeline: FittedPipeline,
}

impl ModelFile {
    pub fn new(config: &PipelineConfig, pipeline: FittedPipeline) -> Self {
        Self {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            config_hash: config.hash(),
            seed: config.seed,
            pipeline,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(text)?;
        if m.format != MODEL_FORMAT || m.version != MODEL_VERSION {
            return Err(Error::InvalidParameter(format!(
                "unsupported model file {} v{}",
                m.format, m.version
            )));
        }
        Ok(m)
    }
}
