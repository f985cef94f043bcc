use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("loop edge `{edge}` at vertex `{vertex}`: an edge must join two distinct vertices")]
    LoopEdge { edge: String, vertex: String },

    #[error("unknown vertex `{0}`")]
    UnknownVertex(String),

    #[error("unknown edge `{0}`")]
    UnknownEdge(String),

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("invalid rate function: {0}")]
    InvalidRate(String),

    #[error("time {time} outside [0, {horizon}]")]
    OutOfHorizon { time: f64, horizon: f64 },

    #[error("reversed interval [{a}, {b}]")]
    ReversedInterval { a: f64, b: f64 },

    #[error("path is not contiguous at step {0}")]
    NotContiguous(usize),

    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("chain is not time-homogeneous: edge `{0}` has a non-constant rate")]
    NotHomogeneous(String),

    #[error("path enumeration would exceed the ceiling of {ceiling} paths")]
    EnumerationCeiling { ceiling: usize },

    #[error("tolerance {epsilon} needs more than {max_order} series orders (R*D*t = {scale})")]
    EpsilonUnattainable { epsilon: f64, max_order: usize, scale: f64 },

    #[error("graph is not regular: {0}")]
    NotRegular(String),

    #[error("integer overflow in path counts at length {0}")]
    Overflow(usize),

    #[error("empty sample batch")]
    EmptyBatch,

    #[error("sampled trajectory {index} has zero density")]
    DensityMismatch { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{field}: {message}")]
    Schema { field: String, message: String },

    #[error("{field}: {source}")]
    Document { field: String, source: Box<Error> },
}

impl Error {
    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn at(field: impl Into<String>, source: Error) -> Self {
        Error::Document {
            field: field.into(),
            source: Box::new(source),
        }
    }

    /// Innermost error, looking through document field wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Document { source, .. } => source.root(),
            other => other,
        }
    }

    /// Stable snake-case name used in machine-readable error documents.
    pub fn kind(&self) -> &'static str {
        match self.root() {
            Error::LoopEdge { .. } => "loop_edge",
            Error::UnknownVertex(_) => "unknown_vertex",
            Error::UnknownEdge(_) => "unknown_edge",
            Error::DuplicateId { .. } => "duplicate_id",
            Error::InvalidRate(_) => "invalid_rate",
            Error::OutOfHorizon { .. } => "out_of_horizon",
            Error::ReversedInterval { .. } => "reversed_interval",
            Error::NotContiguous(_) => "not_contiguous",
            Error::InvalidTrajectory(_) => "invalid_trajectory",
            Error::InvalidDistribution(_) => "invalid_distribution",
            Error::NotHomogeneous(_) => "not_homogeneous",
            Error::EnumerationCeiling { .. } => "enumeration_ceiling",
            Error::EpsilonUnattainable { .. } => "epsilon_unattainable",
            Error::NotRegular(_) => "not_regular",
            Error::Overflow(_) => "overflow",
            Error::EmptyBatch => "empty_batch",
            Error::DensityMismatch { .. } => "density_mismatch",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Schema { .. } => "schema",
            Error::Document { .. } => unreachable!("root is never a wrapper"),
        }
    }

    /// Process exit code: 2 for input problems, 3 for numerical
    /// disagreement, 4 for resource ceilings.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::EnumerationCeiling { .. }
            | Error::EpsilonUnattainable { .. }
            | Error::Overflow(_) => 4,
            Error::DensityMismatch { .. } => 3,
            _ => 2,
        }
    }
}
