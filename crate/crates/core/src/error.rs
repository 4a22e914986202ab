use thiserror::Error;

use crate::model::IndexSet;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not symmetric (max asymmetry {asymmetry:.3e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive semidefinite (smallest eigenvalue {min_eigenvalue:.3e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("correlation matrix has diagonal entry {value} at index {index}")]
    NotUnitDiagonal { index: usize, value: f64 },

    #[error("column {0} has zero variance")]
    ZeroVarianceColumn(usize),

    #[error("at least two observations are required")]
    EmptyData,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),

    #[error("support {0} is singular or too ill-conditioned")]
    SingularSupport(IndexSet),

    #[error("cardinality {cardinality} is smaller than component order {order}")]
    CardinalityTooSmall { cardinality: usize, order: usize },

    #[error("no direction on this support satisfies the constraints")]
    InfeasibleConstraints,

    #[error("component explains no variance")]
    DegenerateComponent,

    #[error("search budget exceeded: {0} subsets")]
    BudgetExceeded(u128),

    #[error("start set of size {cardinality} cannot hold an uncorrelated component of order {order}")]
    StartSetInfeasible { cardinality: usize, order: usize },

    #[error("no feasible support found")]
    NoFeasibleSupport,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown fixture `{0}`")]
    UnknownFixture(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("component {index}: {source}")]
    Component {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Strips any [`Error::Component`] wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Component { source, .. } => source.root(),
            other => other,
        }
    }

    pub(crate) fn at_component(self, index: usize) -> Error {
        match self {
            e @ Error::Component { .. } => e,
            e => Error::Component {
                index,
                source: Box::new(e),
            },
        }
    }
}
