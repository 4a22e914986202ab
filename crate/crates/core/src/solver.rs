//! Closed-form least-squares sparse components on a fixed support.
//!
//! Every solve reduces a generalized eigenproblem `H M ã = φ ã`, with `H`
//! symmetric PSD and `M` symmetric, to the symmetric matrix `H½ M H½`. The
//! top eigenvector `b` of that matrix gives `ã = H½ b`.
//!
//! | mode          | `H`                                 | `M`               |
//! |---------------|-------------------------------------|-------------------|
//! | first         | `D⁻¹`                               | `J'SSJ`           |
//! | uncorrelated  | `D⁻¹ - D⁻¹R'(RD⁻¹R')⁺RD⁻¹`, `R = A'SJ` | `J'SSJ`        |
//! | correlated    | `D⁻¹`                               | `J'S_jS_jJ`       |
//! | orthogonal    | `D⁻¹ - D⁻¹B(B'D⁻¹B)⁺B'D⁻¹`, `B = J'A`  | `J'S_jS_jJ`    |
//!
//! where `D = J'SJ` is the covariance block of the support and
//! `S_j = S - SA(A'SA)⁺A'S` is the covariance of the residuals after the
//! earlier components `A`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, eig_unchecked, gather, gather_rows, symmetrize};
use crate::model::{ComponentSet, CovarianceMatrix, IndexSet, Mode, SparseComponent};

/// Relative size below which a quadratic form counts as zero.
const DEGENERATE_TOL: f64 = 1e-12;

/// Everything needed to solve the next component of a chain.
#[derive(Debug, Clone)]
pub struct SolveContext<'a> {
    cov: &'a CovarianceMatrix,
    previous: &'a [SparseComponent],
    mode: Mode,
    /// Previous loadings as columns, `p × (j-1)`.
    loadings: DMatrix<f64>,
    /// `S A`.
    s_loadings: DMatrix<f64>,
    /// `S_j`, for correlated and orthogonal chains past the first component.
    deflated: Option<DMatrix<f64>>,
    /// `S_j S_j`.
    deflated_squared: Option<DMatrix<f64>>,
}

impl<'a> SolveContext<'a> {
    pub fn new(cov: &'a CovarianceMatrix, previous: &'a [SparseComponent], mode: Mode) -> Self {
        let p = cov.dim();
        let mut loadings = DMatrix::zeros(p, previous.len());
        for (k, c) in previous.iter().enumerate() {
            loadings.set_column(k, &c.loadings);
        }
        let s_loadings = cov.matrix() * &loadings;
        let (deflated, deflated_squared) = if previous.is_empty() || mode == Mode::Uncorrelated {
            (None, None)
        } else {
            let inner = loadings.transpose() * &s_loadings;
            let sj = symmetrize(
                &(cov.matrix() - &s_loadings * linalg::pseudo_inverse(&inner) * s_loadings.transpose()),
            );
            let sj2 = &sj * &sj;
            (Some(sj), Some(sj2))
        };
        Self {
            cov,
            previous,
            mode,
            loadings,
            s_loadings,
            deflated,
            deflated_squared,
        }
    }

    /// Context for the first component.
    pub fn first(cov: &'a CovarianceMatrix, mode: Mode) -> Self {
        Self::new(cov, &[], mode)
    }

    pub fn from_set(set: &'a ComponentSet, mode: Mode) -> Self {
        Self::new(&set.source, &set.components, mode)
    }

    pub fn cov(&self) -> &CovarianceMatrix {
        self.cov
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn previous(&self) -> &[SparseComponent] {
        self.previous
    }

    /// 1-based order of the component this context solves for.
    pub fn order(&self) -> usize {
        self.previous.len() + 1
    }

    /// Residual covariance `S_j`, when this context deflates.
    pub fn deflated(&self) -> Option<&DMatrix<f64>> {
        self.deflated.as_ref()
    }

    /// `S_j`, which is `S` itself before any component was extracted.
    pub fn residual_covariance(&self) -> &DMatrix<f64> {
        self.deflated.as_ref().unwrap_or(self.cov.matrix())
    }

    fn residual_squared(&self) -> &DMatrix<f64> {
        self.deflated_squared.as_ref().unwrap_or(self.cov.squared())
    }

    /// Solves for the component of this context's mode on `ind`.
    pub fn solve(&self, ind: &IndexSet) -> Result<SparseComponent> {
        match self.mode {
            Mode::Uncorrelated => uncorrelated_component(self, ind),
            Mode::Correlated => correlated_component(self, ind),
            Mode::Orthogonal => orthogonal_loadings_component(self, ind),
        }
    }

    /// Upper bound on the incremental variance explained
    /// `a'S_jS_ja / a'S_ja` of any component supported within `ind`: the
    /// top eigenvalue of the pencil `((S_jS_j)[ind], S_j[ind])` on the range
    /// of `S_j[ind]`. It cannot grow when indices are removed.
    pub fn incremental_bound(&self, ind: &IndexSet) -> f64 {
        let sj = gather(self.residual_covariance(), ind.as_slice());
        let eig = eig_unchecked(&symmetrize(&sj));
        let top = eig.top_value();
        if !(top > 0.0) {
            return 0.0;
        }
        let cutoff = linalg::RANK_TOL * top;
        let inv_sqrt = eig.map_spectrum(|v| if v <= cutoff { 0.0 } else { 1.0 / v.sqrt() });
        let m = gather(self.residual_squared(), ind.as_slice());
        eig_unchecked(&symmetrize(&(&inv_sqrt * m * &inv_sqrt))).top_value()
    }

    /// Cheap per-variable score: the objective of the singleton support
    /// `{i}`, i.e. `(S_jS_j)_ii / S_ii`.
    pub fn singleton_score(&self, i: usize) -> f64 {
        let sii = self.cov.matrix()[(i, i)];
        if sii <= 0.0 {
            0.0
        } else {
            self.residual_squared()[(i, i)] / sii
        }
    }
}

/// Variance explained `a'SSa / a'Sa` by the component `t = Xa`.
pub fn variance_explained(cov: &CovarianceMatrix, a: &DVector<f64>) -> Result<f64> {
    check_len(cov, a)?;
    let sa = cov.matrix() * a;
    let quad = a.dot(&sa);
    if quad <= DEGENERATE_TOL * cov.trace() * a.norm_squared() || a.norm_squared() == 0.0 {
        return Err(Error::DegenerateComponent);
    }
    Ok(sa.norm_squared() / quad)
}

/// The deflated objective `a'S_jS_ja / a'Sa` that correlated solutions
/// maximise. Equal to [`variance_explained`] for the first component.
pub fn approx_variance_explained(ctx: &SolveContext<'_>, a: &DVector<f64>) -> Result<f64> {
    if ctx.mode == Mode::Uncorrelated && !ctx.previous.is_empty() {
        return Err(Error::InvalidConfig(
            "approximate variance explained needs a deflating mode".into(),
        ));
    }
    check_len(ctx.cov, a)?;
    let quad = a.dot(&(ctx.cov.matrix() * a));
    if quad <= DEGENERATE_TOL * ctx.cov.trace() * a.norm_squared() || a.norm_squared() == 0.0 {
        return Err(Error::DegenerateComponent);
    }
    let sja = ctx.residual_covariance() * a;
    Ok(sja.norm_squared() / quad)
}

/// Variance explained by `t = Xa` on top of the earlier components: the
/// variance explained by its residual `Qt` orthogonal to them,
/// `a'S_jS_ja / a'S_ja`.
pub fn incremental_variance_explained(ctx: &SolveContext<'_>, a: &DVector<f64>) -> Result<f64> {
    check_len(ctx.cov, a)?;
    if ctx.previous.is_empty() {
        return variance_explained(ctx.cov, a);
    }
    let deflated;
    let sj = match &ctx.deflated {
        Some(sj) => sj,
        None => {
            let inner = ctx.loadings.transpose() * &ctx.s_loadings;
            deflated = ctx.cov.matrix()
                - &ctx.s_loadings * linalg::pseudo_inverse(&inner) * ctx.s_loadings.transpose();
            &deflated
        }
    };
    let sja = sj * a;
    let quad = a.dot(&sja);
    if quad <= DEGENERATE_TOL * ctx.cov.trace() * a.norm_squared() || a.norm_squared() == 0.0 {
        return Err(Error::DegenerateComponent);
    }
    Ok(sja.norm_squared() / quad)
}

fn check_len(cov: &CovarianceMatrix, a: &DVector<f64>) -> Result<()> {
    if a.len() != cov.dim() {
        return Err(Error::DimensionMismatch {
            expected: cov.dim(),
            found: a.len(),
        });
    }
    Ok(())
}

fn check_support(cov: &CovarianceMatrix, ind: &IndexSet) -> Result<()> {
    if ind.is_empty() {
        return Err(Error::InvalidIndexSet("empty support".into()));
    }
    if let Some(&last) = ind.as_slice().last() {
        if last >= cov.dim() {
            return Err(Error::InvalidIndexSet(format!(
                "index {last} out of range for dimension {}",
                cov.dim()
            )));
        }
    }
    Ok(())
}

/// Top eigenpair of `H½ M H½`, mapped back to `ã = H½ b`.
fn reduced_top(h: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(f64, DVector<f64>)> {
    let h_sqrt = linalg::range_sqrt(h)?;
    let k = symmetrize(&(&h_sqrt * m * &h_sqrt));
    let eig = eig_unchecked(&k);
    Ok((eig.top_value(), &h_sqrt * eig.top_vector()))
}

/// `D⁻¹ - D⁻¹ N (N'D⁻¹N)⁺ N'D⁻¹`, and the projector `I - D⁻¹N(N'D⁻¹N)⁺N'`
/// whose range holds every `ã` with `N'ã = 0`.
fn constrained_metric(d_inv: &DMatrix<f64>, n: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let c = d_inv.nrows();
    let dn = d_inv * n;
    let inner = n.transpose() * &dn;
    let lift = &dn * linalg::pseudo_inverse(&inner);
    let projector = DMatrix::identity(c, c) - &lift * n.transpose();
    let h = symmetrize(&(d_inv - &lift * dn.transpose()));
    let scale = linalg::sym_norm(d_inv);
    if linalg::sym_norm(&h) <= linalg::RANK_TOL * scale {
        return Err(Error::InfeasibleConstraints);
    }
    Ok((h, projector))
}

fn support_block(cov: &CovarianceMatrix, ind: &IndexSet) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let d = gather(cov.matrix(), ind.as_slice());
    linalg::inverse_and_inverse_sqrt(&d).ok_or_else(|| Error::SingularSupport(ind.clone()))
}

/// Scatters `ã` into a unit-norm length-`p` vector with the sign convention.
fn embed(p: usize, ind: &IndexSet, reduced: &DVector<f64>) -> Result<DVector<f64>> {
    let norm = reduced.norm();
    if !(norm > 0.0) || !norm.is_finite() {
        return Err(Error::DegenerateComponent);
    }
    let mut a = DVector::zeros(p);
    for (k, &i) in ind.as_slice().iter().enumerate() {
        a[i] = reduced[k] / norm;
    }
    linalg::apply_sign_convention(&mut a);
    Ok(a)
}

fn finish(
    ctx: &SolveContext<'_>,
    ind: &IndexSet,
    reduced: &DVector<f64>,
    objective: f64,
    mode: Mode,
) -> Result<SparseComponent> {
    if objective <= DEGENERATE_TOL * ctx.cov.trace() {
        return Err(Error::DegenerateComponent);
    }
    let a = embed(ctx.cov.dim(), ind, reduced)?;
    let variance = a.dot(&(ctx.cov.matrix() * &a));
    let vexp = match mode {
        Mode::Uncorrelated => variance_explained(ctx.cov, &a)?,
        Mode::Correlated | Mode::Orthogonal => incremental_variance_explained(ctx, &a)?,
    };
    Ok(SparseComponent {
        loadings: a,
        support: ind.clone(),
        vexp,
        objective,
        variance,
        mode,
        order: ctx.order(),
    })
}

/// First LS sparse component on `ind`: top eigenvector of `D⁻¹J'SSJ`.
pub fn first_component(cov: &CovarianceMatrix, ind: &IndexSet) -> Result<SparseComponent> {
    first_in(&SolveContext::first(cov, Mode::Uncorrelated), ind, Mode::Uncorrelated)
}

fn first_in(ctx: &SolveContext<'_>, ind: &IndexSet, mode: Mode) -> Result<SparseComponent> {
    check_support(ctx.cov, ind)?;
    let (_, d_inv_sqrt) = support_block(ctx.cov, ind)?;
    let m = gather(ctx.cov.squared(), ind.as_slice());
    let k = symmetrize(&(&d_inv_sqrt * m * &d_inv_sqrt));
    let eig = eig_unchecked(&k);
    let reduced = &d_inv_sqrt * eig.top_vector();
    finish(ctx, ind, &reduced, eig.top_value(), mode)
}

/// Component uncorrelated with every earlier one in `ctx`.
pub fn uncorrelated_component(ctx: &SolveContext<'_>, ind: &IndexSet) -> Result<SparseComponent> {
    if ctx.previous.is_empty() {
        return first_in(ctx, ind, Mode::Uncorrelated);
    }
    check_support(ctx.cov, ind)?;
    let order = ctx.order();
    if ind.len() < order {
        return Err(Error::CardinalityTooSmall {
            cardinality: ind.len(),
            order,
        });
    }
    let (d_inv, _) = support_block(ctx.cov, ind)?;
    // R' = J'SA, c × (j-1)
    let r_t = gather_rows(&ctx.s_loadings, ind.as_slice());
    let (h, projector) = constrained_metric(&d_inv, &r_t)?;
    let m = gather(ctx.cov.squared(), ind.as_slice());
    let (phi, reduced) = reduced_top(&h, &m)?;
    finish(ctx, ind, &(projector * reduced), phi, Mode::Uncorrelated)
}

/// Component fit to the residuals of the earlier components.
///
/// Its `objective` is the deflated value `a'S_jS_ja / a'Sa`; its `vexp` is
/// the true incremental variance explained.
pub fn correlated_component(ctx: &SolveContext<'_>, ind: &IndexSet) -> Result<SparseComponent> {
    if ctx.previous.is_empty() {
        return first_in(ctx, ind, Mode::Correlated);
    }
    check_support(ctx.cov, ind)?;
    let (_, d_inv_sqrt) = support_block(ctx.cov, ind)?;
    let m = gather(ctx.residual_squared(), ind.as_slice());
    let k = symmetrize(&(&d_inv_sqrt * m * &d_inv_sqrt));
    let eig = eig_unchecked(&k);
    let reduced = &d_inv_sqrt * eig.top_vector();
    finish(ctx, ind, &reduced, eig.top_value(), Mode::Correlated)
}

/// Correlated component whose loadings are orthogonal to the earlier ones.
pub fn orthogonal_loadings_component(
    ctx: &SolveContext<'_>,
    ind: &IndexSet,
) -> Result<SparseComponent> {
    if ctx.previous.is_empty() {
        return first_in(ctx, ind, Mode::Orthogonal);
    }
    check_support(ctx.cov, ind)?;
    let (d_inv, _) = support_block(ctx.cov, ind)?;
    // B = J'A, c × (j-1)
    let b = gather_rows(&ctx.loadings, ind.as_slice());
    let (h, projector) = constrained_metric(&d_inv, &b)?;
    let m = gather(ctx.residual_squared(), ind.as_slice());
    let (phi, reduced) = reduced_top(&h, &m)?;
    finish(ctx, ind, &(projector * reduced), phi, Mode::Orthogonal)
}

/// Leading `d` principal components, `vexp_j = λ_j`.
pub fn full_pca(cov: &CovarianceMatrix, d: usize) -> Result<ComponentSet> {
    let p = cov.dim();
    if d == 0 || d > p {
        return Err(Error::InvalidConfig(format!(
            "number of components must be in 1..={p}, got {d}"
        )));
    }
    let eig = linalg::symmetric_eig(cov.matrix())?;
    let components = (0..d)
        .map(|k| {
            let a = eig.vectors.column(k).into_owned();
            let support =
                IndexSet::from_sorted((0..p).filter(|&i| a[i] != 0.0).collect::<Vec<_>>());
            let lambda = eig.values[k];
            SparseComponent {
                loadings: a,
                support,
                vexp: lambda,
                objective: lambda,
                variance: lambda,
                mode: Mode::Uncorrelated,
                order: k + 1,
            }
        })
        .collect();
    Ok(ComponentSet::new(cov.clone(), components))
}

/// First eigenvector of the principal submatrix `S[ind, ind]`, the
/// maximum-variance competitor on the same support.
pub fn submatrix_pc(cov: &CovarianceMatrix, ind: &IndexSet) -> Result<SparseComponent> {
    check_support(cov, ind)?;
    let d = gather(cov.matrix(), ind.as_slice());
    let eig = eig_unchecked(&d);
    let a = embed(cov.dim(), ind, &eig.top_vector())?;
    let vexp = variance_explained(cov, &a)?;
    Ok(SparseComponent {
        loadings: a,
        support: ind.clone(),
        vexp,
        objective: vexp,
        variance: eig.top_value(),
        mode: Mode::Uncorrelated,
        order: 1,
    })
}

/// Solves a whole chain on given supports.
pub fn fit_supports(
    cov: &CovarianceMatrix,
    supports: &[IndexSet],
    mode: Mode,
) -> Result<ComponentSet> {
    let mut components: Vec<SparseComponent> = Vec::with_capacity(supports.len());
    for (k, ind) in supports.iter().enumerate() {
        let next = SolveContext::new(cov, &components, mode)
            .solve(ind)
            .map_err(|e| e.at_component(k + 1))?;
        components.push(next);
    }
    Ok(ComponentSet::new(cov.clone(), components))
}
