//! Unnormalized targets `π(x) ∝ 1_K(x)·exp(−f(x))` and Gaussian preconditioning.

use alloc::boxed::Box;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg::{asymmetry, check_dim, eigen_extremes, factor_with_jitter, spd_sqrt};
use crate::polytope::Polytope;
use crate::{Error, Result};

/// Negative log-density `f` (up to an additive constant) with curvature bounds
/// `αI ⪯ ∇²f ⪯ βI`.
///
/// Implementations must be pure: chains evaluate the same target concurrently.
pub trait LogConcaveTarget {
    fn dim(&self) -> usize;

    /// `f(x)`. Only differences `f(x) − f(z)` are ever used.
    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    /// Strong-convexity modulus; `0` for weakly logconcave targets.
    fn alpha(&self) -> f64;

    /// Smoothness bound, strictly positive.
    fn beta(&self) -> f64;

    /// Bound `η ≥ ‖Σ_π‖₂` on the target covariance, when known.
    fn eta(&self) -> Option<f64> {
        None
    }

    /// Condition number `β/α`.
    fn kappa(&self) -> Result<f64> {
        let alpha = self.alpha();
        if alpha > 0.0 {
            Ok(self.beta() / alpha)
        } else {
            Err(Error::RequiresStrongConvexity)
        }
    }
}

fn check_curvature(alpha: f64, beta: f64) -> Result<()> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter("beta must be finite and > 0"));
    }
    if !(0.0..=beta).contains(&alpha) {
        return Err(Error::InvalidParameter("alpha must lie in [0, beta]"));
    }
    Ok(())
}

type ValueFn = Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
type GradientFn = Box<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// A target given by closures.
pub struct FnTarget {
    dim: usize,
    value: ValueFn,
    gradient: Option<GradientFn>,
    alpha: f64,
    beta: f64,
    eta: Option<f64>,
}

impl FnTarget {
    pub fn new<F>(dim: usize, value: F, alpha: f64, beta: f64) -> Result<Self>
    where
        F: Fn(&DVector<f64>) -> f64 + Send + Sync + 'static,
    {
        check_curvature(alpha, beta)?;
        Ok(Self { dim, value: Box::new(value), gradient: None, alpha, beta, eta: None })
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    {
        self.gradient = Some(Box::new(gradient));
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = Some(eta);
        self
    }

    /// `f ≡ 0`: the uniform distribution on `K`.
    ///
    /// A constant is β-smooth for every β > 0; β = 1 is reported so that
    /// `λ = β` gives `λ = 1`.
    pub fn flat(dim: usize) -> Self {
        Self {
            dim,
            value: Box::new(|_| 0.0),
            gradient: Some(Box::new(move |_| DVector::zeros(dim))),
            alpha: 0.0,
            beta: 1.0,
            eta: None,
        }
    }
}

impl core::fmt::Debug for FnTarget {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("FnTarget")
            .field("dim", &self.dim)
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("eta", &self.eta)
            .finish_non_exhaustive()
    }
}

impl LogConcaveTarget for FnTarget {
    fn dim(&self) -> usize {
        self.dim
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }
    fn gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        self.gradient.as_ref().map(|g| g(x))
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn beta(&self) -> f64 {
        self.beta
    }
    fn eta(&self) -> Option<f64> {
        self.eta
    }
}

/// `N(μ, Σ)` with `Σ` symmetric positive definite.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTarget {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl GaussianTarget {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = mean.len();
        if cov.nrows() != n || cov.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: cov.nrows() });
        }
        if mean.iter().chain(cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if asymmetry(&cov) > 1e-12 {
            return Err(Error::NotSymmetric);
        }
        if nalgebra::Cholesky::new(cov.clone()).is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        Ok(Self { mean, cov })
    }

    pub fn standard(n: usize) -> Self {
        Self { mean: DVector::zeros(n), cov: DMatrix::identity(n, n) }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Symmetric square root `Σ^{1/2}`.
    pub fn cov_sqrt(&self) -> Result<DMatrix<f64>> {
        spd_sqrt(&self.cov)
    }
}

/// `f(x) = ½(x−μ)ᵀΣ⁻¹(x−μ)` with `α = 1/λ_max(Σ)`, `β = 1/λ_min(Σ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticTarget {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
    alpha: f64,
    beta: f64,
}

impl QuadraticTarget {
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.precision
    }
}

impl LogConcaveTarget for QuadraticTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        let d = x - &self.mean;
        0.5 * d.dot(&(&self.precision * &d))
    }
    fn gradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(&self.precision * (x - &self.mean))
    }
    fn alpha(&self) -> f64 {
        self.alpha
    }
    fn beta(&self) -> f64 {
        self.beta
    }
    fn eta(&self) -> Option<f64> {
        Some(1.0 / self.alpha)
    }
}

/// The negative log-density of a Gaussian as a [`LogConcaveTarget`].
pub fn quadratic_target(g: &GaussianTarget) -> Result<QuadraticTarget> {
    let (_, factor) = factor_with_jitter(g.cov.clone())?;
    // Σ⁻¹ = Q⁻¹Q⁻ᵀ.
    let n = g.dim();
    let mut q_inv = DMatrix::identity(n, n);
    if !factor.q.solve_upper_triangular_mut(&mut q_inv) {
        return Err(Error::NotPositiveDefinite);
    }
    let mut precision = &q_inv * q_inv.transpose();
    precision = (&precision + precision.transpose()) * 0.5;
    let (lo, hi) = eigen_extremes(&g.cov);
    if !(lo > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let (alpha, beta) = if lo == hi { (1.0 / hi, 1.0 / hi) } else { (1.0 / hi, 1.0 / lo) };
    Ok(QuadraticTarget { mean: g.mean.clone(), precision, alpha, beta })
}

/// `y ↦ L·y + shift`, mapping sampler coordinates back to the original space.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineTransform {
    pub linear: DMatrix<f64>,
    pub shift: DVector<f64>,
}

impl AffineTransform {
    pub fn identity(n: usize) -> Self {
        Self { linear: DMatrix::identity(n, n), shift: DVector::zeros(n) }
    }

    pub fn new(linear: DMatrix<f64>, shift: DVector<f64>) -> Result<Self> {
        let n = shift.len();
        if linear.nrows() != n || linear.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, found: linear.nrows() });
        }
        if linear.clone().try_inverse().is_none() {
            return Err(Error::InvalidParameter("transform matrix must be invertible"));
        }
        Ok(Self { linear, shift })
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(y, self.dim())?;
        Ok(&self.linear * y + &self.shift)
    }

    /// Map every sample through the transform.
    pub fn map_samples(&self, samples: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
        samples.iter().map(|y| self.apply(y)).collect()
    }
}

/// Reduce `N(μ, Σ)` truncated on `{Ax > b}` to `N(0, I)` truncated on
/// `{Ãy > b̃}` with `Ã = AΣ^{1/2}` and `b̃ = b − Aμ`.
///
/// Samples of the reduced problem map back through the returned transform
/// `y ↦ Σ^{1/2}y + μ`.
pub fn precondition_gaussian(
    g: &GaussianTarget,
    p: &Polytope,
) -> Result<(Polytope, AffineTransform)> {
    if p.dim() != g.dim() {
        return Err(Error::DimensionMismatch { expected: g.dim(), found: p.dim() });
    }
    let root = g.cov_sqrt()?;
    let a = p.a() * &root;
    let b = p.b() - p.a() * &g.mean;
    let reduced = Polytope::new(a, b)?;
    Ok((reduced, AffineTransform { linear: root, shift: g.mean.clone() }))
}
