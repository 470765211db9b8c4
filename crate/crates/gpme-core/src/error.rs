//! Crate-wide error type.

use thiserror::Error;

/// Errors reported by graph construction, solvers and I/O helpers.
#[derive(Debug, Error)]
pub enum GpmeError {
    /// A node id was referenced that the graph does not contain.
    #[error("unknown node id `{0}`")]
    UnknownNode(String),

    /// Structural validation of a graph failed (duplicate edge, self-loop,
    /// nonpositive measure, ...).
    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    /// A nonlinearity failed its construction-time checks (monotonicity,
    /// φ(0)=0, inverse consistency).
    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    /// A parameter was outside its documented range.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A run was refused because a hypothesis needed by the theory does not
    /// hold (or cannot be asserted) for the given data. `hypothesis` names
    /// the violated condition (`H1`, `H2`, `H3` or the sign condition).
    #[error("hypothesis violation [{hypothesis}]: {detail}")]
    HypothesisViolation { hypothesis: String, detail: String },

    /// A user-asserted lazy-graph flag was contradicted on the enumerated
    /// region.
    #[error("flag contradicted on truncation [{hypothesis}]: {detail}")]
    FlagContradiction { hypothesis: String, detail: String },

    /// An iterative solver hit its iteration or level cap.
    #[error("solver did not converge: {detail} (best residual {residual:.3e})")]
    NoConvergence { detail: String, residual: f64 },

    /// An operation needed to enumerate an infinite set (for example the
    /// neighbors of a node that is not locally finite) and must instead be
    /// run through a truncation.
    #[error("truncation required: {0}")]
    TruncationRequired(String),

    /// Malformed input data (JSON, CSV, expression syntax).
    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl From<serde_json::Error> for GpmeError {
    fn from(e: serde_json::Error) -> Self {
        GpmeError::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, GpmeError>;
