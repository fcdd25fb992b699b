use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Broad class of an [`AuditError`], used to pick a process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ErrorClass {
    /// Malformed input: missing columns, bad values, duplicate ids.
    Schema,
    /// Not enough observations for the requested computation.
    InsufficientData,
    /// A statistic with no defined value (zero variance and similar).
    Degenerate,
    /// Reading or writing a file failed.
    Io,
    /// Invalid parameters supplied by the caller.
    Usage,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Schema => 2,
            ErrorClass::InsufficientData => 3,
            ErrorClass::Degenerate => 4,
            ErrorClass::Io => 5,
            ErrorClass::Usage => 64,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorClass::Schema => "schema",
            ErrorClass::InsufficientData => "insufficient_data",
            ErrorClass::Degenerate => "degenerate",
            ErrorClass::Io => "io",
            ErrorClass::Usage => "usage",
        }
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(
        "missing required column `{column}`{}",
        near.as_ref().map(|n| format!(" (found `{n}`, check its spelling)")).unwrap_or_default()
    )]
    MissingColumn {
        column: String,
        /// Header close to the missing name, if any.
        near: Option<String>,
    },

    #[error("row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("row {row}, column `{column}`: score {value} outside [1, 10]{rater}", rater = .rater.as_deref().map(|r| format!(" (rater {r})")).unwrap_or_default())]
    ScoreRange {
        row: usize,
        column: String,
        value: String,
        rater: Option<String>,
    },

    #[error("row {row}: unknown {field} `{value}`")]
    Enumeration {
        row: usize,
        field: String,
        value: String,
    },

    #[error("duplicate {what}: {}", join_ids(.ids))]
    Duplicate { what: String, ids: Vec<String> },

    #[error("{0}")]
    Domain(String),

    #[error("energy counter decreased: start {start_kwh} kWh > end {end_kwh} kWh")]
    Monotonicity { start_kwh: f64, end_kwh: f64 },

    #[error("prompt {prompt_id} carries no energy information (need net_j, gross_j or e_start_kwh/e_end_kwh)")]
    IncompleteEnergy { prompt_id: u32 },

    #[error("missing data: {0}")]
    MissingData(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("pairing failed: {0}")]
    Pairing(String),

    #[error("config file line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: String, name: String },

    #[error("{stage} stage: {source}{}", hint.map(|h| format!(" (hint: {h})")).unwrap_or_default())]
    Stage {
        stage: &'static str,
        hint: Option<&'static str>,
        #[source]
        source: Box<AuditError>,
    },
}

fn join_ids(ids: &[String]) -> String {
    ids.join(", ")
}

impl AuditError {
    pub fn class(&self) -> ErrorClass {
        match self {
            AuditError::Io { .. } => ErrorClass::Io,
            AuditError::MissingColumn { .. }
            | AuditError::Parse { .. }
            | AuditError::ScoreRange { .. }
            | AuditError::Enumeration { .. }
            | AuditError::Duplicate { .. }
            | AuditError::Monotonicity { .. }
            | AuditError::IncompleteEnergy { .. }
            | AuditError::Config { .. } => ErrorClass::Schema,
            AuditError::MissingData(_)
            | AuditError::InsufficientData(_)
            | AuditError::Pairing(_) => ErrorClass::InsufficientData,
            AuditError::Degenerate(_) => ErrorClass::Degenerate,
            AuditError::Domain(_) => ErrorClass::Schema,
            AuditError::Unknown { .. } => ErrorClass::Usage,
            AuditError::Stage { source, .. } => source.class(),
        }
    }

    /// Tags an error with the pipeline stage that raised it.
    pub fn in_stage(self, stage: &'static str, hint: Option<&'static str>) -> Self {
        match self {
            e @ AuditError::Stage { .. } => e,
            e => AuditError::Stage {
                stage,
                hint,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AuditError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        AuditError::Domain(msg.into())
    }
}

pub type Result<T, E = AuditError> = std::result::Result<T, E>;
