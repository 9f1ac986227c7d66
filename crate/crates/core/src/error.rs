use thiserror::Error;

/// Why a censored dataset cannot pin down a capacity distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unidentifiable {
    NoBreakdowns,
    NoSurvivals,
}

impl std::fmt::Display for Unidentifiable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Unidentifiable::NoBreakdowns => write!(f, "no breakdowns recorded"),
            Unidentifiable::NoSurvivals => write!(f, "no censored (non-breakdown) records"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-identifiable data: {0}")]
    NonIdentifiable(Unidentifiable),

    #[error("singular design: column {column} is collinear with {}", with.join(", "))]
    SingularDesign { column: String, with: Vec<String> },

    #[error("parse error at line {line}{}: {message}", column.as_ref().map(|c| format!(", column '{c}'")).unwrap_or_default())]
    Parse {
        line: usize,
        column: Option<String>,
        message: String,
    },

    #[error("invalid config field '{field}': {message}")]
    Config { field: String, message: String },

    #[error("study run failed at (distribution {dist}, size {size}, replication {rep}): {message}")]
    Run {
        dist: usize,
        size: usize,
        rep: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
