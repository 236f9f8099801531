use thiserror::Error;

/// Which end of a search bracket a solver ran into.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bound {
    Lower,
    Upper,
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::Lower => f.write_str("lower"),
            Bound::Upper => f.write_str("upper"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("order grids differ; curves cannot be composed")]
    GridMismatch,

    #[error("no usable Renyi order; no valid (epsilon, delta) guarantee")]
    NoValidGuarantee,

    #[error("target epsilon {target} unreachable: {parameter} search hit its {bound} bound {value}")]
    Unreachable {
        parameter: &'static str,
        bound: Bound,
        value: f64,
        target: f64,
    },

    #[error("privacy budget exhausted: history alone reaches epsilon {spent} >= target {target}")]
    BudgetExhausted { spent: f64, target: f64 },

    #[error("selection budget exhausts new-group training budget (phase {phase}: {remaining} <= 0)")]
    SelectionExhaustsTraining { phase: usize, remaining: f64 },

    #[error("margin undefined for multilabel")]
    MarginMultilabel,

    #[error("BALD requires a stochastic model")]
    NotStochastic,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("unknown group {group} in {context}")]
    UnknownGroup { group: u32, context: String },

    #[error("{path}: line {line}: {message}")]
    Csv {
        path: String,
        line: usize,
        message: String,
    },

    #[error("audit failed: {0}")]
    AuditFailed(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
