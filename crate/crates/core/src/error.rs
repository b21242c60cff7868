use crate::ode::OdeState;

/// Errors raised by the laboratory. Every fallible operation in the crate
/// returns this type.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate parameter: {0}")]
    DegenerateParameter(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("integration failed: {reason} ({} samples computed)", partial.len())]
    IntegrationFailure { reason: String, partial: Vec<OdeState> },

    #[error("no bracket found for the free parameter over {} scan points", scan.len())]
    BracketNotFound { scan: Vec<(f64, String)> },

    #[error("bisection did not converge after {iterations} iterations (bracket [{lo}, {hi}])")]
    Convergence { iterations: usize, lo: f64, hi: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("trajectory invariant violated: {0}")]
    InvariantViolation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// Short machine-readable name of the variant, used in sweep tables.
    pub fn kind(&self) -> &'static str {
        match self {
            LabError::Domain(_) => "Domain",
            LabError::DegenerateParameter(_) => "DegenerateParameter",
            LabError::InvalidParams(_) => "InvalidParams",
            LabError::Precondition(_) => "PreconditionRejected",
            LabError::InsufficientData { .. } => "InsufficientData",
            LabError::IntegrationFailure { .. } => "IntegrationFailure",
            LabError::BracketNotFound { .. } => "BracketNotFound",
            LabError::Convergence { .. } => "ConvergenceFailure",
            LabError::Parse { .. } => "Parse",
            LabError::InvariantViolation(_) => "InvariantViolation",
            LabError::Io(_) => "Io",
            LabError::Json(_) => "Json",
        }
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
