use std::path::PathBuf;

use thiserror::Error;

/// Pipeline stage names, used to tag errors surfaced by the CLI.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Ingest,
    Wrangle,
    Impute,
    Scale,
    Reduce,
    Balance,
    Fit,
    Evaluate,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::Ingest => "ingest",
            Stage::Wrangle => "wrangle",
            Stage::Impute => "impute",
            Stage::Scale => "scale",
            Stage::Reduce => "reduce",
            Stage::Balance => "balance",
            Stage::Fit => "fit",
            Stage::Evaluate => "evaluate",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("header does not match schema (unknown: [{}], absent: [{}])", unknown.join(", "), absent.join(", "))]
    HeaderMismatch { unknown: Vec<String>, absent: Vec<String> },

    #[error("line {line}: expected {expected} fields, found {found}")]
    RowArity { line: u64, expected: usize, found: usize },

    #[error("row {row}: Target is missing")]
    MissingTarget { row: usize },

    #[error("invalid wrangle plan: {0}")]
    InvalidPlan(String),

    #[error("{0}: empty input")]
    EmptyInput(&'static str),

    #[error("column {0} is not a numeric feature")]
    NotNumeric(String),

    #[error("feature mismatch: expected {expected} columns, found {found}")]
    FeatureMismatch { expected: usize, found: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("only one class present; at least two are required")]
    SingleClass,

    #[error("class {class} has {size} rows; at least {required} required")]
    ClassTooSmall { class: u32, size: usize, required: usize },

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn in_stage(self, stage: Stage) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage {
                stage,
                source: Box::new(other),
            },
        }
    }

    /// Input and schema problems, as opposed to failures inside a pipeline stage.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Csv(_)
                | Error::Json(_)
                | Error::HeaderMismatch { .. }
                | Error::RowArity { .. }
                | Error::MissingTarget { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Extension for tagging a result with the stage that produced it.
pub trait StageExt<T> {
    fn stage(self, stage: Stage) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: Stage) -> Result<T> {
        self.map_err(|e| e.in_stage(stage))
    }
}
