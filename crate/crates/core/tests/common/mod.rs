#![allow(dead_code)]

use lsspca::CovarianceMatrix;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `G G' / k` for a Gaussian-ish `p × k` factor; rank `min(p, k)`.
pub fn random_cov(p: usize, k: usize, seed: u64) -> CovarianceMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(p, k, |_, _| rng.random_range(-1.0..1.0));
    CovarianceMatrix::covariance(&g * g.transpose() / k as f64).unwrap()
}

pub fn from_factor(p: usize, entries: &[f64]) -> CovarianceMatrix {
    let k = entries.len() / p;
    let g = DMatrix::from_column_slice(p, k, &entries[..p * k]);
    let m = &g * g.transpose() + DMatrix::identity(p, p) * 1e-3;
    CovarianceMatrix::covariance(m).unwrap()
}

/// Variance explained jointly by the columns of `a`, `tr(SA(A'SA)⁻¹A'S)`,
/// computed with a plain inverse.
pub fn joint_vexp(s: &DMatrix<f64>, a: &DMatrix<f64>) -> f64 {
    let sa = s * a;
    let inner = a.transpose() * &sa;
    let inv = inner.try_inverse().expect("A'SA invertible");
    (&sa * inv * sa.transpose()).trace()
}

pub fn rayleigh_vexp(s: &DMatrix<f64>, a: &DVector<f64>) -> f64 {
    let sa = s * a;
    sa.norm_squared() / a.dot(&sa)
}

pub fn subsets(p: usize, c: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, p: usize, c: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == c {
            out.push(cur.clone());
            return;
        }
        for i in start..p {
            cur.push(i);
            rec(i + 1, p, c, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, p, c, &mut Vec::new(), &mut out);
    out
}
