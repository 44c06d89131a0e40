use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tensor: {0}")]
    InvalidTensor(String),
    #[error("assumption violated: {0}")]
    AssumptionViolation(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("degenerate model: {0}")]
    DegenerateModel(String),
    #[error("index {index} out of range (limit {limit})")]
    IndexOutOfRange { index: usize, limit: usize },
    #[error("invalid hypergraph: {0}")]
    InvalidHypergraph(String),
    #[error("inclusion probability {prob} exceeds 1 (layer {layer})")]
    ProbabilityOverflow { layer: usize, prob: f64 },
    #[error("population cap of {cap} nodes exceeded")]
    PopulationCap { cap: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("lambda = {lambda} hits a pole of the operator")]
    PoleError { lambda: f64 },
    #[error("singular matrix: {0}")]
    SingularMatrix(String),
    #[error("no convergence after {iterations} restarts ({converged}/{wanted} pairs)")]
    NoConvergence {
        iterations: usize,
        converged: usize,
        wanted: usize,
    },
    #[error("outlier {index} has a non-negligible imaginary part ({ratio:.3e})")]
    ComplexOutlier { index: usize, ratio: f64 },
    #[error("depth {depth} exceeds the admissible depth {cap}")]
    DepthTooLarge { depth: usize, cap: usize },
    #[error("depth {requested} exceeds tree depth {available}")]
    DepthExceeded { requested: usize, available: usize },
    #[error("zero vector")]
    ZeroVector,
    #[error("invalid threshold {0}")]
    InvalidThreshold(f64),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("no restart improved on the unweighted baseline")]
    NoImprovement,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by bad input rather than by numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidTensor(_)
                | Error::AssumptionViolation(_)
                | Error::InvalidModel(_)
                | Error::IndexOutOfRange { .. }
                | Error::InvalidHypergraph(_)
                | Error::ProbabilityOverflow { .. }
                | Error::DimensionMismatch { .. }
                | Error::InvalidThreshold(_)
                | Error::LengthMismatch(..)
                | Error::NotApplicable(_)
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}
