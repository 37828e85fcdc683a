use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid policy parameters: {0}")]
    InvalidParams(String),

    #[error("degenerate distribution: {0}")]
    DegenerateDistribution(String),

    /// Vertex index is 0-based; the message prints it 1-based.
    #[error("dead end: vertex v{} has no outgoing arc with positive parameter", .vertex + 1)]
    DeadEnd { vertex: usize },

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("gradient undefined: path lies outside the distribution support")]
    UndefinedGradient,

    #[error("support too large: at least {count} paths exceed the cap of {cap}")]
    SupportTooLarge { count: u128, cap: usize },

    #[error("sampling failed at step {step}: vertex v{} has no admissible successor", .vertex + 1)]
    Sampling { vertex: usize, step: usize },

    #[error("utility evaluation returned {value} for path {}", labels(.path))]
    Evaluation { path: Vec<usize>, value: f64 },

    #[error("utility undefined for path {}", labels(.0))]
    MissingUtility(Vec<usize>),

    #[error("optimal baseline undefined: zero denominator")]
    BaselineUndefined,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration error: {0}")]
    Config(String),
}

/// Dash-joined 1-based labels, matching how paths are displayed elsewhere.
fn labels(path: &[usize]) -> String {
    path.iter().map(|v| (v + 1).to_string()).collect::<Vec<_>>().join("-")
}
