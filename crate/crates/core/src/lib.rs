//! Least-squares sparse principal component analysis.
//!
//! Sparse components are chosen to maximise the variance of the data they
//! explain, `a'SSa / a'Sa`, rather than their own variance. For a fixed
//! support the optimal loadings solve a small symmetric eigenproblem
//! ([`solver`]); supports are found by an exact per-component
//! branch-and-bound ([`search`]) or by backward elimination of small
//! loadings ([`trim`]).
//!
//! ```
//! use lsspca::{datasets, search::{sequential_fit, SearchConfig}, Mode};
//!
//! let pitprops = datasets::pitprops();
//! let cfg = SearchConfig::new(vec![7, 2, 3], Mode::Correlated);
//! let set = sequential_fit(&pitprops.matrix, &cfg).unwrap();
//! let pcve = 100.0 * set.total_vexp() / pitprops.matrix.trace();
//! assert!((pcve - 62.4).abs() < 0.15);
//! ```

pub mod datasets;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod search;
pub mod solver;
pub mod trim;

pub use error::{Error, Result};
pub use linalg::{pseudo_inverse, symmetric_eig, symmetric_sqrt, EigenResult};
pub use model::{
    covariance_from_data, ComponentSet, CovarianceMatrix, DataMatrix, IndexSet, MatrixKind, Mode,
    SparseComponent,
};
pub use solver::SolveContext;
