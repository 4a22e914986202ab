//! Domain types shared by the solvers and searches.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, PSD_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MatrixKind {
    Covariance,
    Correlation,
}

/// A validated symmetric positive-semidefinite covariance or correlation
/// matrix. `S·S` and the spectrum are computed once on construction.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix {
    matrix: DMatrix<f64>,
    squared: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    kind: MatrixKind,
}

impl CovarianceMatrix {
    pub fn new(matrix: DMatrix<f64>, kind: MatrixKind) -> Result<Self> {
        if matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        linalg::check_symmetric(&matrix)?;
        let matrix = linalg::symmetrize(&matrix);
        if kind == MatrixKind::Correlation {
            for i in 0..matrix.nrows() {
                let value = matrix[(i, i)];
                if (value - 1.0).abs() > 1e-10 {
                    return Err(Error::NotUnitDiagonal { index: i, value });
                }
            }
        }
        let eig = linalg::eig_unchecked(&matrix);
        let top = eig.top_value();
        let lowest = eig.values[eig.dim() - 1];
        if lowest < -PSD_TOL * top.max(0.0) || top <= 0.0 {
            return Err(Error::NotPsd {
                min_eigenvalue: lowest,
            });
        }
        let squared = &matrix * &matrix;
        Ok(Self {
            matrix,
            squared,
            eigenvalues: eig.values,
            kind,
        })
    }

    pub fn correlation(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(matrix, MatrixKind::Correlation)
    }

    pub fn covariance(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(matrix, MatrixKind::Covariance)
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// `S·S`.
    pub fn squared(&self) -> &DMatrix<f64> {
        &self.squared
    }

    /// Total variance `tr(S)`.
    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// PCA eigenvalues, descending.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// Correlation matrix implied by this covariance.
    pub fn to_correlation(&self) -> Result<CovarianceMatrix> {
        let p = self.dim();
        let sd: Vec<f64> = (0..p).map(|i| self.matrix[(i, i)].sqrt()).collect();
        if let Some(i) = sd.iter().position(|s| *s == 0.0) {
            return Err(Error::ZeroVarianceColumn(i));
        }
        let mut r = DMatrix::from_fn(p, p, |i, j| self.matrix[(i, j)] / (sd[i] * sd[j]));
        r.fill_diagonal(1.0);
        CovarianceMatrix::correlation(r)
    }
}

/// Observations in rows, variables in columns.
#[derive(Debug, Clone)]
pub struct DataMatrix {
    pub values: DMatrix<f64>,
    pub column_names: Option<Vec<String>>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>, column_names: Option<Vec<String>>) -> Result<Self> {
        if let Some(names) = &column_names {
            if names.len() != values.ncols() {
                return Err(Error::DimensionMismatch {
                    expected: values.ncols(),
                    found: names.len(),
                });
            }
        }
        Ok(Self {
            values,
            column_names,
        })
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn p(&self) -> usize {
        self.values.ncols()
    }

    pub fn centered(&self) -> DMatrix<f64> {
        let mut x = self.values.clone();
        for mut col in x.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        x
    }
}

/// Covariance (`standardize = false`) or correlation matrix of a data table.
///
/// Uses the `1/n` divisor: `S = XᵀX / n` on mean-centred columns.
pub fn covariance_from_data(data: &DataMatrix, standardize: bool) -> Result<CovarianceMatrix> {
    let n = data.n();
    if n < 2 || data.p() == 0 {
        return Err(Error::EmptyData);
    }
    let mut x = data.centered();
    if standardize {
        for (j, mut col) in x.column_iter_mut().enumerate() {
            let scale = data.values.column(j).amax();
            let var = col.norm_squared() / n as f64;
            if scale == 0.0 || var.sqrt() <= 1e-12 * scale {
                return Err(Error::ZeroVarianceColumn(j));
            }
            col.scale_mut(1.0 / var.sqrt());
        }
    }
    let mut s = x.transpose() * &x / n as f64;
    if standardize {
        s.fill_diagonal(1.0);
        CovarianceMatrix::new(linalg::symmetrize(&s), MatrixKind::Correlation)
    } else {
        CovarianceMatrix::new(linalg::symmetrize(&s), MatrixKind::Covariance)
    }
}

/// Strictly increasing variable indices (0-based) of a support.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IndexSet(Vec<usize>);

impl IndexSet {
    pub fn new(mut indices: Vec<usize>) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidIndexSet("duplicate index".into()));
        }
        Ok(Self(indices))
    }

    /// Like [`IndexSet::new`] but also checks every index is below `p`.
    pub fn within(indices: Vec<usize>, p: usize) -> Result<Self> {
        let set = Self::new(indices)?;
        if let Some(&bad) = set.0.iter().find(|&&i| i >= p) {
            return Err(Error::InvalidIndexSet(format!(
                "index {bad} out of range for dimension {p}"
            )));
        }
        Ok(set)
    }

    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        Self(indices)
    }

    pub fn full(p: usize) -> Self {
        Self((0..p).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.binary_search(&i).is_ok()
    }

    pub fn without(&self, removed: &[usize]) -> IndexSet {
        Self(
            self.0
                .iter()
                .copied()
                .filter(|i| !removed.contains(i))
                .collect(),
        )
    }

    /// 1-based indices, as variables are numbered in reports.
    pub fn one_based(&self) -> Vec<usize> {
        self.0.iter().map(|i| i + 1).collect()
    }
}

impl fmt::Display for IndexSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// How a component relates to the ones before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// `a_j' S a_k = 0` for every earlier `k`.
    Uncorrelated,
    /// Fit to the residuals of the earlier components (deflation).
    Correlated,
    /// Deflation plus orthogonal loadings, `a_j' a_k = 0`.
    Orthogonal,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Uncorrelated => "uncorrelated",
            Mode::Correlated => "correlated",
            Mode::Orthogonal => "orthogonal",
        })
    }
}

/// One sparse component.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseComponent {
    /// Unit-norm loadings, exactly zero off the support.
    pub loadings: DVector<f64>,
    pub support: IndexSet,
    /// Variance explained. For correlated and orthogonal components this is
    /// the incremental variance explained on top of the earlier components.
    pub vexp: f64,
    /// Value of the objective the solver maximised on this support: equals
    /// `vexp` for uncorrelated components and the deflated approximation
    /// `a'S_jS_ja / a'Sa` otherwise. Searches bound with this value.
    pub objective: f64,
    /// Component variance `a'Sa`.
    pub variance: f64,
    pub mode: Mode,
    /// 1-based position in its chain.
    pub order: usize,
}

impl SparseComponent {
    pub fn cardinality(&self) -> usize {
        self.support.len()
    }

    pub fn l1_norm(&self) -> f64 {
        self.loadings.lp_norm(1)
    }

    /// `|a_i| / ‖a‖₁` for each support index, in support order.
    pub fn contributions(&self) -> Vec<f64> {
        let l1 = self.l1_norm();
        self.support
            .as_slice()
            .iter()
            .map(|&i| self.loadings[i].abs() / l1)
            .collect()
    }

    pub fn min_load(&self) -> f64 {
        self.support
            .as_slice()
            .iter()
            .map(|&i| self.loadings[i].abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// An ordered chain of components computed from one matrix.
#[derive(Debug, Clone)]
pub struct ComponentSet {
    pub components: Vec<SparseComponent>,
    pub source: CovarianceMatrix,
    pub cumulative_vexp: Vec<f64>,
    pub pca_eigenvalues: DVector<f64>,
}

impl ComponentSet {
    pub fn new(source: CovarianceMatrix, components: Vec<SparseComponent>) -> Self {
        let cumulative_vexp = components
            .iter()
            .scan(0.0, |acc, c| {
                *acc += c.vexp;
                Some(*acc)
            })
            .collect();
        let pca_eigenvalues = source.eigenvalues().clone();
        Self {
            components,
            source,
            cumulative_vexp,
            pca_eigenvalues,
        }
    }

    pub fn empty(source: CovarianceMatrix) -> Self {
        Self::new(source, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn push(&mut self, component: SparseComponent) {
        let prev = self.cumulative_vexp.last().copied().unwrap_or(0.0);
        self.cumulative_vexp.push(prev + component.vexp);
        self.components.push(component);
    }

    pub fn total_vexp(&self) -> f64 {
        self.cumulative_vexp.last().copied().unwrap_or(0.0)
    }

    /// Loadings as a `p × d` matrix, one column per component.
    pub fn loadings(&self) -> DMatrix<f64> {
        let p = self.source.dim();
        let mut a = DMatrix::zeros(p, self.components.len());
        for (k, c) in self.components.iter().enumerate() {
            a.set_column(k, &c.loadings);
        }
        a
    }
}
