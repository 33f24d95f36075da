use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid weight law: {0}")]
    InvalidSpec(String),

    #[error("unsupported combination: {0}")]
    Unsupported(String),

    #[error("vertex {vertex} out of range for a graph on {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("invalid perturbation set: {0}")]
    InvalidPerturbation(String),

    #[error("neighbourhood of vertex {root} at depth {depth} is not a tree")]
    NotATree { root: usize, depth: usize },

    #[error("depth mismatch: {0}")]
    DepthMismatch(String),

    #[error("tree exceeded the node budget of {limit} nodes")]
    NodeBudget { limit: usize },

    #[error("exact matching solver supports at most {limit} vertices, got {n}")]
    SolverLimit { n: usize, limit: usize },

    #[error("need at least {need} samples, got {got}")]
    InsufficientSamples { need: usize, got: usize },

    #[error("sample variance is zero (degenerate functional)")]
    DegenerateVariance,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("replica {replica} panicked: {message}")]
    WorkerPanic { replica: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
