//! Small dense linear-algebra helpers shared by the metric, target and
//! diagnostics modules.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Upper-triangular Cholesky factor `Q` with `G = QᵀQ`, plus `log det G`.
#[derive(Debug, Clone, PartialEq)]
pub struct UpperFactor {
    pub q: DMatrix<f64>,
    pub logdet: f64,
}

impl UpperFactor {
    /// `Q⁻¹ v` by back substitution.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut out = v.clone();
        // Q has a strictly positive diagonal, so the solve cannot fail.
        let ok = self.q.solve_upper_triangular_mut(&mut out);
        debug_assert!(ok);
        out
    }

    /// `‖Q v‖₂ = √(vᵀ G v)`.
    pub fn norm(&self, v: &DVector<f64>) -> f64 {
        (&self.q * v).norm()
    }
}

fn try_cholesky(g: &DMatrix<f64>) -> Option<UpperFactor> {
    let chol = Cholesky::new(g.clone())?;
    let l = chol.l();
    let logdet = 2.0 * l.diagonal().iter().map(|d| d.ln()).sum::<f64>();
    if !logdet.is_finite() {
        return None;
    }
    Some(UpperFactor { q: l.transpose(), logdet })
}

/// Factor a symmetric matrix that is positive definite in exact arithmetic.
///
/// If the first attempt fails, `1e-12·trace(G)/n·I` is added once and the
/// factorization retried. Returns the (possibly jittered) matrix that was
/// actually factored.
pub fn factor_with_jitter(mut g: DMatrix<f64>) -> Result<(DMatrix<f64>, UpperFactor)> {
    if let Some(f) = try_cholesky(&g) {
        return Ok((g, f));
    }
    let n = g.nrows();
    if n == 0 {
        return Err(Error::NotPositiveDefinite);
    }
    let jitter = 1e-12 * g.trace() / n as f64;
    if !(jitter > 0.0) || !jitter.is_finite() {
        return Err(Error::NotPositiveDefinite);
    }
    for i in 0..n {
        g[(i, i)] += jitter;
    }
    let f = try_cholesky(&g).ok_or(Error::NotPositiveDefinite)?;
    Ok((g, f))
}

/// Maximum relative asymmetry `max|Mᵢⱼ − Mⱼᵢ| / max|Mᵢⱼ|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).amax() / scale
}

/// Symmetric positive definite square root via eigendecomposition.
pub fn spd_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::NotPositiveDefinite);
    }
    let root = eig.eigenvalues.map(|l| l.sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&root) * eig.eigenvectors.transpose())
}

/// Smallest and largest eigenvalue of a symmetric matrix.
pub fn eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// `n` i.i.d. standard normal draws.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Uniform direction on the unit sphere in `ℝⁿ` (`n ≥ 1`).
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    loop {
        let v = standard_normal(rng, n);
        let norm = v.norm();
        if norm > 0.0 {
            return v / norm;
        }
    }
}

pub(crate) fn check_dim(v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: v.len() });
    }
    Ok(())
}

pub(crate) fn check_finite(v: &DVector<f64>) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn factor_reproduces_matrix() {
        let g = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let (used, f) = factor_with_jitter(g.clone()).unwrap();
        assert_eq!(used, g);
        assert_relative_eq!(f.q.transpose() * &f.q, g, epsilon = 1e-12);
        assert_relative_eq!(f.logdet, g.determinant().ln(), epsilon = 1e-12);
        let v = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert_relative_eq!(&f.q * f.solve(&v), v, epsilon = 1e-12);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(factor_with_jitter(g), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn sqrt_squares_back() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let r = spd_sqrt(&m).unwrap();
        assert_relative_eq!(&r * &r, m, epsilon = 1e-12);
        assert!(asymmetry(&r) < 1e-14);
    }
}
