use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by the command-line front end to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Numerical,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("dense solve limited to order {limit}, got {order}")]
    DenseLimitExceeded { order: usize, limit: usize },

    #[error("conjugate gradient breakdown at iteration {iteration}: p'Ap = {curvature:e}")]
    BreakdownDetected { iteration: usize, curvature: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid tolerance: {0}")]
    InvalidTolerance(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("sketch dimension {requested} exceeds the {rows} available rows")]
    SketchDimExceedsRows { requested: usize, rows: usize },

    #[error("oracle kind {0} needs finite-sum structure")]
    NotFiniteSum(&'static str),

    #[error("inner solve stalled after {iterations} iterations (lhs {lhs:e}, rhs {rhs:e})")]
    InnerSolveStalled { iterations: usize, lhs: f64, rhs: f64 },

    #[error("certificate violation: {0}")]
    CertificateViolation(String),

    #[error("assertion failed: {0}")]
    AssertionFailed(String),

    #[error("degenerate bracket: {0}")]
    DegenerateBracket(String),

    #[error("bracket exhausted after {steps} bisection steps (lambda in [{lo:e}, {hi:e}])")]
    BracketExhausted { steps: usize, lo: f64, hi: f64 },

    #[error("invalid bracket: {0}")]
    InvalidBracket(String),

    #[error("while loop did not reach the step-length floor after {0} shrink steps")]
    WhileLoopExhausted(usize),

    #[error("outer iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("non-binary label {label} at line {line}")]
    NonBinaryLabel { line: usize, label: f64 },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn at_iteration(self, iteration: usize) -> Error {
        match self {
            e @ Error::AtIteration { .. } => e,
            e => Error::AtIteration {
                iteration,
                source: Box::new(e),
            },
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Error {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Short stable identifier, printed on the machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::NotPositiveDefinite { .. } => "not_positive_definite",
            Error::DenseLimitExceeded { .. } => "dense_limit_exceeded",
            Error::BreakdownDetected { .. } => "breakdown_detected",
            Error::NonFinite(_) => "non_finite",
            Error::InvalidTolerance(_) => "invalid_tolerance",
            Error::InvalidConfig(_) => "invalid_config",
            Error::SketchDimExceedsRows { .. } => "sketch_dim_exceeds_rows",
            Error::NotFiniteSum(_) => "not_finite_sum",
            Error::InnerSolveStalled { .. } => "inner_solve_stalled",
            Error::CertificateViolation(_) => "certificate_violation",
            Error::AssertionFailed(_) => "assertion_failed",
            Error::DegenerateBracket(_) => "degenerate_bracket",
            Error::BracketExhausted { .. } => "bracket_exhausted",
            Error::InvalidBracket(_) => "invalid_bracket",
            Error::WhileLoopExhausted(_) => "while_loop_exhausted",
            Error::AtIteration { source, .. } => source.kind(),
            Error::Parse { .. } => "parse_error",
            Error::NonBinaryLabel { .. } => "non_binary_label",
            Error::Io { .. } => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidTolerance(_)
            | Error::InvalidConfig(_)
            | Error::NotFiniteSum(_)
            | Error::DimensionMismatch { .. }
            | Error::DenseLimitExceeded { .. }
            | Error::SketchDimExceedsRows { .. } => ErrorClass::Config,
            Error::Parse { .. }
            | Error::NonBinaryLabel { .. }
            | Error::Io { .. }
            | Error::Csv(_)
            | Error::Json(_) => ErrorClass::Io,
            Error::AtIteration { source, .. } => source.class(),
            _ => ErrorClass::Numerical,
        }
    }
}
