use std::path::PathBuf;

/// Errors produced by the detection library and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("unsupported QAM order {0} (expected 4, 16 or 64)")]
    UnsupportedOrder(usize),

    #[error("{context}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is indefinite (eigenvalue {eigenvalue:e})")]
    Indefinite { eigenvalue: f64 },

    #[error("channel is rank deficient (smallest singular value {smallest:e})")]
    RankDeficient { smallest: f64 },

    #[error("singular value decomposition failed: {0}")]
    Decomposition(&'static str),

    #[error("exhaustive search over {size} candidates exceeds the cap of {cap}")]
    AlphabetTooLarge { size: u128, cap: u128 },

    #[error("trajectory diverged at level {level}, iteration {iteration}")]
    Diverged { level: usize, iteration: usize },

    #[error("all {count} trajectories diverged")]
    AllTrajectoriesFailed { count: usize },

    #[error("config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("{path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than a runtime failure.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::UnsupportedOrder(_)
                | Error::InvalidParameter { .. }
                | Error::Config { .. }
                | Error::Parse { .. }
                | Error::DimensionMismatch { .. }
                | Error::AlphabetTooLarge { .. }
        ) || matches!(self, Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
