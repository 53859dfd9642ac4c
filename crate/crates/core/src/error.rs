use crate::model::{ExchangeId, InstanceError, VertexId};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Instance(#[from] InstanceError),

    #[error("exchanges overlap at vertex {vertex}")]
    Overlap { vertex: VertexId },

    #[error("unknown exchange id {0}")]
    UnknownExchange(ExchangeId),

    #[error("invalid packing problem: {0}")]
    InvalidProblem(String),

    #[error("time limit reached")]
    TimeLimit,

    #[error("{count} exchanges exceed the oracle cap of {cap}")]
    CapExceeded { count: usize, cap: usize },

    #[error("schema violation at {pointer}: {message}")]
    Schema {
        code: &'static str,
        pointer: String,
        message: String,
    },

    #[error("invalid formula: {0}")]
    Formula(String),

    #[error("invalid generator config: {0}")]
    Config(String),

    #[error("invalid experiment spec ({code}): {message}")]
    Spec { code: &'static str, message: String },

    #[error("internal invariant broken: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Stable machine-readable code for error reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Instance(e) => e
                .violations
                .first()
                .map(|v| v.code.as_str())
                .unwrap_or("invalid_instance"),
            Error::Overlap { .. } => "overlap",
            Error::UnknownExchange(_) => "unknown_exchange",
            Error::InvalidProblem(_) => "invalid_problem",
            Error::TimeLimit => "time_limit",
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::Schema { code, .. } => code,
            Error::Formula(_) => "invalid_formula",
            Error::Config(_) => "invalid_config",
            Error::Spec { code, .. } => code,
            Error::Internal(_) => "internal",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
