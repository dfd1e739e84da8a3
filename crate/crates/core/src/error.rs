use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in `{field}`: expected {expected}, found {found}")]
    Dimension {
        field: &'static str,
        expected: String,
        found: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{0} is not symmetric positive definite")]
    NotPositiveDefinite(&'static str),

    #[error("normal matrix is numerically singular (condition estimate {condition:e})")]
    Singular { condition: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("objective evaluation failed: {0}")]
    Evaluation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed json in {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn dim(field: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::Dimension {
            field,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Stable machine-readable code, one per error kind.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Domain(_) => "domain",
            Error::NotPositiveDefinite(_) => "not_positive_definite",
            Error::Singular { .. } => "singular",
            Error::Degenerate(_) => "degenerate_input",
            Error::Evaluation(_) => "evaluation",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json { .. } => "json",
        }
    }

    /// Process exit status used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json { .. } | Error::Dimension { .. } => 2,
            Error::Io { .. } => 4,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
