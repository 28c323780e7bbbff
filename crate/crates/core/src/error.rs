use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("nonconforming input: {0}")]
    Nonconforming(String),

    #[error("inverted element {element}: signed area {area:e}")]
    InvertedElement { element: usize, area: f64 },

    #[error("unlabeled triangle at line {line}")]
    UnlabeledTriangle { line: usize },

    #[error("no compatible labeling found: {0}")]
    IncompatibleLabeling(String),

    #[error("refinement recursion depth {depth} exceeded (labeling is not compatible)")]
    RecursionDepth { depth: usize },

    #[error("element {0} does not exist")]
    NoSuchElement(usize),

    #[error("coarsening did not reach the coarse mesh: {0}")]
    Decomposition(String),

    #[error("missing coefficient for subdomain {0}")]
    MissingCoefficient(u32),

    #[error("invalid coefficient {value} for subdomain {label} (must be positive)")]
    InvalidCoefficient { label: u32, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("negative energy {0:e}: operator is not positive semidefinite")]
    NegativeEnergy(f64),

    #[error("local matrix of subspace {0} is singular")]
    SingularLocal(usize),

    #[error("dof {dof} out of range (n = {n})")]
    DofOutOfRange { dof: usize, n: usize },

    #[error("solver breakdown at iteration {iteration}: {reason}")]
    Breakdown { iteration: usize, reason: String },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("dimension {n} exceeds dense limit {limit}")]
    DenseLimit { n: usize, limit: usize },

    #[error("index {m} out of range for spectrum of size {len}")]
    SpectrumIndex { m: usize, len: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
