//! Dense symmetric linear algebra used by every solver.
//!
//! All routines go through a single symmetric eigendecomposition. The
//! tolerances are relative to the largest eigenvalue so they do not depend on
//! the units of the input.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative symmetry tolerance, against the largest absolute entry.
pub const SYMMETRY_TOL: f64 = 1e-10;
/// Eigenvalues at or below this fraction of the largest are treated as zero.
pub const RANK_TOL: f64 = 1e-10;
/// Eigenvalues below `-PSD_TOL * largest` reject a matrix as indefinite.
pub const PSD_TOL: f64 = 1e-8;
/// Largest condition number accepted for a support's covariance block.
pub const MAX_CONDITION: f64 = 1e12;

/// Spectrum of a symmetric matrix, eigenvalues in descending order.
///
/// Column `k` of `vectors` pairs with `values[k]`; every column has its
/// largest-magnitude entry positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenResult {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl EigenResult {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn top_value(&self) -> f64 {
        self.values[0]
    }

    pub fn top_vector(&self) -> DVector<f64> {
        self.vectors.column(0).into_owned()
    }

    /// Rebuilds `V f(Λ) Vᵀ` for a function applied to each eigenvalue.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.dim();
        let mut scaled = self.vectors.clone();
        for k in 0..n {
            let w = f(self.values[k]);
            scaled.column_mut(k).scale_mut(w);
        }
        scaled * self.vectors.transpose()
    }
}

/// Largest absolute asymmetry `max |m_ij - m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in (i + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

/// Checks squareness and relative symmetry.
pub fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch {
            expected: m.nrows(),
            found: m.ncols(),
        });
    }
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOL * max_abs(m) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    Ok(())
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Flips `v` so that its largest-magnitude entry is positive.
///
/// Entries within a relative `1e-10` of the maximum count as tied and the
/// lowest such index decides.
pub fn apply_sign_convention(v: &mut DVector<f64>) {
    let peak = v.amax();
    if peak == 0.0 {
        return;
    }
    let cutoff = peak * (1.0 - 1e-10);
    if let Some(lead) = v.iter().position(|x| x.abs() >= cutoff) {
        if v[lead] < 0.0 {
            v.neg_mut();
        }
    }
}

/// Full eigendecomposition of a symmetric matrix, sorted descending.
pub fn symmetric_eig(m: &DMatrix<f64>) -> Result<EigenResult> {
    check_symmetric(m)?;
    Ok(eig_unchecked(&symmetrize(m)))
}

/// Decomposition of an already-symmetric matrix (no validation).
pub(crate) fn eig_unchecked(m: &DMatrix<f64>) -> EigenResult {
    let n = m.nrows();
    if n == 0 {
        return EigenResult {
            values: DVector::zeros(0),
            vectors: DMatrix::zeros(0, 0),
        };
    }
    let decomposition = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        decomposition.eigenvalues[b]
            .total_cmp(&decomposition.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&k| decomposition.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = decomposition.eigenvectors.column(src).into_owned();
        apply_sign_convention(&mut v);
        vectors.set_column(dst, &v);
    }
    EigenResult { values, vectors }
}

/// Moore–Penrose inverse of a symmetric positive-semidefinite matrix.
///
/// Eigenvalues at or below `1e-10 * λ_max` are treated as exactly zero, so
/// the zero matrix maps to the zero matrix.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = eig_unchecked(&symmetrize(m));
    pseudo_inverse_from(&eig)
}

pub(crate) fn pseudo_inverse_from(eig: &EigenResult) -> DMatrix<f64> {
    let top = eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if top == 0.0 {
        return DMatrix::zeros(eig.dim(), eig.dim());
    }
    let cutoff = RANK_TOL * top;
    eig.map_spectrum(|v| if v.abs() <= cutoff { 0.0 } else { 1.0 / v })
}

/// Principal square root of a symmetric PSD matrix.
///
/// Slightly negative eigenvalues (down to `-1e-8 * λ_max`) are clamped to zero.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(m)?;
    let eig = eig_unchecked(&symmetrize(m));
    sqrt_from(&eig, false)
}

/// Square root restricted to the numerical range: eigenvalues at or below
/// `1e-10 * λ_max` are dropped instead of square-rooted.
pub(crate) fn range_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = eig_unchecked(&symmetrize(m));
    sqrt_from(&eig, true)
}

fn sqrt_from(eig: &EigenResult, drop_small: bool) -> Result<DMatrix<f64>> {
    if eig.dim() == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let top = eig.top_value().max(0.0);
    let lowest = eig.values[eig.dim() - 1];
    if lowest < -PSD_TOL * top || (top == 0.0 && lowest < 0.0) {
        return Err(Error::NotPsd {
            min_eigenvalue: lowest,
        });
    }
    let cutoff = if drop_small { RANK_TOL * top } else { 0.0 };
    Ok(eig.map_spectrum(|v| if v <= cutoff { 0.0 } else { v.sqrt() }))
}

/// `D⁻¹` and `D^{-1/2}` of a positive-definite block, or `None` when the
/// block is singular or its condition number exceeds [`MAX_CONDITION`].
pub(crate) fn inverse_and_inverse_sqrt(d: &DMatrix<f64>) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let eig = eig_unchecked(&symmetrize(d));
    let n = eig.dim();
    let top = eig.top_value();
    let bottom = eig.values[n - 1];
    if !(top > 0.0) || !(bottom > 0.0) || top / bottom > MAX_CONDITION {
        return None;
    }
    Some((
        eig.map_spectrum(|v| 1.0 / v),
        eig.map_spectrum(|v| 1.0 / v.sqrt()),
    ))
}

/// Principal submatrix `m[ind, ind]`.
pub(crate) fn gather(m: &DMatrix<f64>, ind: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(ind.len(), ind.len(), |r, c| m[(ind[r], ind[c])])
}

/// Rows `ind` of `m`, all columns.
pub(crate) fn gather_rows(m: &DMatrix<f64>, ind: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(ind.len(), m.ncols(), |r, c| m[(ind[r], c)])
}

/// Spectral norm of a symmetric matrix.
pub(crate) fn sym_norm(m: &DMatrix<f64>) -> f64 {
    let eig = eig_unchecked(&symmetrize(m));
    eig.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}
