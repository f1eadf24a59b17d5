use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("vertex {vertex} has non-positive gap {delta}")]
    NonPositiveGap { vertex: usize, delta: f64 },
    #[error("vertex ids must be 0..n-1 without gaps or repeats (found id {id} at position {position})")]
    NonContiguousIds { id: usize, position: usize },
    #[error("model has no vertices")]
    EmptyModel,
    #[error("edge {edge} references unknown vertex {vertex}")]
    DanglingVertexId { edge: usize, vertex: usize },
    #[error("edge {edge} is a self loop on vertex {vertex}")]
    SelfLoop { edge: usize, vertex: usize },
    #[error("edge {edge} has a non-finite matrix entry")]
    NonFiniteEntry { edge: usize },
    #[error("edge {edge} is not Hermitian although the model is declared Hermitian")]
    NotHermitian { edge: usize },
    #[error("edge {edge}: exactly one of \"matrix\" or \"pauli\" must be given")]
    EdgeOperatorSpec { edge: usize },
    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("vertex set is empty")]
    EmptySet,
    #[error("vertex set {set:?} is not a subset of the edge ({u}, {v})")]
    InvalidSubset { set: Vec<u32>, u: usize, v: usize },
    #[error("precision must be positive and finite, got {0}")]
    NonPositivePrecision(f64),
    #[error("terminal set is not contained in a single connected component")]
    Disconnected,
    #[error("vertex {0} is out of range")]
    InvalidVertex(usize),
    #[error("{n} qubits exceed the dense-state cap of {cap}")]
    TooManyQubits { n: usize, cap: usize },
    #[error("state is orthogonal to the vacuum; no creation-operator representation")]
    OrthogonalToVacuum,
    #[error("iteration did not converge: {0}")]
    NotConverged(String),
    #[error("invalid observable: {0}")]
    InvalidObservable(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by an invalid model or invalid user input.
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Io(_) | Error::NotConverged(_) | Error::OrthogonalToVacuum
        )
    }
}
