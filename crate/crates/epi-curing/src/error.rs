use thiserror::Error;

/// Crate-wide error type. The CLI maps variants onto its stable exit codes,
/// so keep the grouping here in sync with `cli::exit_code_for`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("rate matrix is not square: {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },
    #[error("negative rate {value} at ({i},{j})")]
    NegativeRate { i: usize, j: usize, value: f64 },
    #[error("nonzero diagonal entry {value} at node {i}: self-infection is excluded")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("non-finite entry at ({i},{j})")]
    NonFiniteEntry { i: usize, j: usize },
    #[error("invalid size: {0}")]
    InvalidSize(String),
    #[error("invalid edge probability {0}: want 0 < p <= 1")]
    InvalidProbability(f64),
    #[error("partition does not match the node set: {0}")]
    PartitionMismatch(String),
    #[error("partition is not equitable: node {node} against cell {cell}: {detail}")]
    NotEquitable {
        node: usize,
        cell: usize,
        detail: String,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("matrix is not symmetric: max asymmetry {0:.3e}")]
    NotSymmetric(f64),
    #[error("operation requires a symmetric network")]
    AsymmetricInput,
    #[error("operation requires a symmetric quotient: max asymmetry {0:.3e}")]
    AsymmetricQuotient(f64),
    #[error("integration step failure: {0}")]
    StepFailure(String),
    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
    #[error("iteration did not converge: {0}")]
    NonConvergence(String),
    #[error("state space too large: N={n} exceeds cap {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("no feasibility-boundary crossing in the search bracket: {0}")]
    NoRoot(String),
    #[error("requested tolerance unreachable: {0}")]
    ToleranceUnreachable(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid two-level instance: {0}")]
    InvalidInstance(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("unsupported or malformed input format: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
