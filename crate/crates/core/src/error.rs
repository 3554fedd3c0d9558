use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GmmError>;

#[derive(Debug, Error)]
pub enum GmmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A parameter failed validation; `field` names the offending parameter.
    #[error("invalid {field}: {reason}")]
    Validation { field: &'static str, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("insufficient samples: {n_samples} samples for {n_gaus} gaussians")]
    InsufficientSamples { n_samples: usize, n_gaus: usize },

    /// Every component density underflowed for one sample.
    #[error("degenerate point: sample {index} has zero likelihood under every component{}",
        .iteration.map(|it| format!(" (EM iteration {it})")).unwrap_or_default())]
    DegeneratePoint {
        index: usize,
        iteration: Option<usize>,
    },

    #[error("fit failed: every gaussian lost all of its responsibility mass")]
    AllComponentsDegenerate,

    #[error("bad magic string in model file: {0:?}")]
    BadMagic(String),

    #[error("unsupported model file version {0}")]
    VersionMismatch(String),

    #[error("format error at line {line}: {reason}")]
    Format { line: usize, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl GmmError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        GmmError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GmmError::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors raised while fitting rather than while validating input.
    pub fn is_fit_failure(&self) -> bool {
        matches!(
            self,
            GmmError::DegeneratePoint { .. } | GmmError::AllComponentsDegenerate
        )
    }
}
