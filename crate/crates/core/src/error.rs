use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported ICD sublist {sublist:?} for {version}")]
    RejectedSublist { version: String, sublist: String },

    #[error("age breakdown not fine enough: {0}")]
    RejectedAgeFormat(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("missing or zero denominator: {0}")]
    MissingDenominator(String),

    #[error("invalid reference rates: {0}")]
    InvalidReference(String),

    #[error("missing age group {0}")]
    MissingAgeGroup(String),

    #[error("ambiguous ICD code {code:?}: matched by {count} map rows")]
    AmbiguousCode { code: String, count: usize },

    #[error("chain is constant: {0}")]
    ConstantChain(String),

    #[error("not enough draws: {0}")]
    InsufficientDraws(String),

    #[error("target has zero posterior standard deviation: {0}")]
    DegenerateTarget(String),

    #[error("could not find a starting point with finite log-density: {0}")]
    InitializationFailure(String),

    #[error("invalid projection horizon: {0}")]
    InvalidHorizon(String),

    #[error("no validation points")]
    EmptyValidation,

    #[error("missing quantile for level {0}")]
    MissingQuantile(String),

    #[error("empty training series for {0}")]
    EmptyTraining(String),

    #[error("country {0} has no subgroup tag")]
    MissingTag(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error in {context}: {message}")]
    Parse { context: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(context: impl Into<String>, message: impl ToString) -> Self {
        Error::Parse {
            context: context.into(),
            message: message.to_string(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Whether the error stems from bad inputs (as opposed to a numerical failure).
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::ConstantChain(_)
                | Error::InsufficientDraws(_)
                | Error::DegenerateTarget(_)
                | Error::InitializationFailure(_)
        )
    }
}
