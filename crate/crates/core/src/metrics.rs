//! Regularized local metrics `G(x) = H(x) + λI` and the Lewis weight solver.

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;

use crate::linalg::{check_dim, factor_with_jitter, UpperFactor};
use crate::polytope::Polytope;
use crate::{Error, Result};

/// Parameters of the regularized Lewis metric
/// `G(x) = c₁·√n·(log m)^{c₂}·A_xᵀW_xA_x + λI`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LewisParams {
    pub lambda: f64,
    pub c1: f64,
    pub c2: f64,
    /// Even `q ≥ 4`; `None` picks [`LewisParams::default_q`] from `m`.
    pub q: Option<u32>,
    pub tol: f64,
    pub max_iter: usize,
}

impl LewisParams {
    pub fn new(lambda: f64) -> Self {
        Self { lambda, c1: 1.0, c2: 0.0, q: None, tol: 1e-8, max_iter: 200 }
    }

    /// Smallest even integer `≥ max(4, 2⌈log₂ m⌉)`.
    pub fn default_q(m: usize) -> u32 {
        let log2_ceil = if m <= 1 { 0 } else { usize::BITS - (m - 1).leading_zeros() };
        (2 * log2_ceil).max(4)
    }

    pub fn resolved_q(&self, m: usize) -> u32 {
        self.q.unwrap_or_else(|| Self::default_q(m))
    }

    fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter("lambda must be > 0"));
        }
        if !(self.c1 > 0.0) || !(self.c2 >= 0.0) {
            return Err(Error::InvalidParameter("need c1 > 0 and c2 >= 0"));
        }
        if let Some(q) = self.q {
            if q < 4 || !q.is_multiple_of(2) {
                return Err(Error::InvalidParameter("q must be an even integer >= 4"));
            }
        }
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter("Lewis tolerance and iteration cap must be positive"));
        }
        Ok(())
    }
}

/// Which local metric the walk uses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricKind {
    SoftThreshold { lambda: f64 },
    RegularizedLewis(LewisParams),
}

impl MetricKind {
    pub fn soft_threshold(lambda: f64) -> Self {
        MetricKind::SoftThreshold { lambda }
    }

    pub fn lewis(lambda: f64) -> Self {
        MetricKind::RegularizedLewis(LewisParams::new(lambda))
    }

    pub fn lambda(&self) -> f64 {
        match self {
            MetricKind::SoftThreshold { lambda } => *lambda,
            MetricKind::RegularizedLewis(p) => p.lambda,
        }
    }

    /// Evaluate `G(x)` for interior `x`.
    pub fn evaluate(&self, p: &Polytope, x: &DVector<f64>) -> Result<MetricEval> {
        match self {
            MetricKind::SoftThreshold { lambda } => soft_threshold_metric(p, x, *lambda),
            MetricKind::RegularizedLewis(params) => regularized_lewis_metric(p, x, params),
        }
    }

    /// Evaluate only the unregularized part `H(x)`.
    pub fn barrier_part(&self, p: &Polytope, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        match self {
            MetricKind::SoftThreshold { .. } => {
                let ax = p.interior_slack(x)?.scaled_rows(p.a());
                Ok(ax.transpose() * ax)
            }
            MetricKind::RegularizedLewis(params) => lewis_part(p, x, params),
        }
    }
}

/// `G(x)`, its upper Cholesky factor `Q` (`G = QᵀQ`) and `log det G`.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricEval {
    pub g: DMatrix<f64>,
    pub factor: UpperFactor,
    pub at: DVector<f64>,
}

impl MetricEval {
    fn from_matrix(g: DMatrix<f64>, at: DVector<f64>) -> Result<Self> {
        let (g, factor) = factor_with_jitter(g)?;
        Ok(Self { g, factor, at })
    }

    pub fn logdet(&self) -> f64 {
        self.factor.logdet
    }

    pub fn dim(&self) -> usize {
        self.at.len()
    }

    /// `‖h‖_{G} = ‖Qh‖₂`.
    pub fn local_norm(&self, h: &DVector<f64>) -> Result<f64> {
        check_dim(h, self.dim())?;
        Ok(self.factor.norm(h))
    }

    /// Whether `z` lies in the closed Dikin ellipsoid `E(x, G(x), 1)`.
    pub fn dikin_ellipsoid_contains(&self, z: &DVector<f64>) -> Result<bool> {
        check_dim(z, self.dim())?;
        Ok(self.factor.norm(&(z - &self.at)) <= 1.0)
    }
}

/// Soft-threshold metric `G(x) = A_xᵀA_x + λI`.
pub fn soft_threshold_metric(p: &Polytope, x: &DVector<f64>, lambda: f64) -> Result<MetricEval> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter("lambda must be > 0"));
    }
    let ax = p.interior_slack(x)?.scaled_rows(p.a());
    let mut g = ax.transpose() * ax;
    for i in 0..g.nrows() {
        g[(i, i)] += lambda;
    }
    MetricEval::from_matrix(g, x.clone())
}

/// Result of the Lewis weight fixed-point solve.
#[derive(Debug, Clone, PartialEq)]
pub struct LewisWeights {
    pub w: DVector<f64>,
    /// `max_i |wᵢ − τᵢ(w)| / wᵢ` at the returned weights.
    pub residual: f64,
    pub iterations: usize,
}

/// Leverage-type scores `τᵢ(w) = wᵢ^c · aᵢᵀ(AᵀW^cA)⁻¹aᵢ`, the leverage scores
/// of `Ã = W^{c/2}A`.
///
/// `R` comes from a Householder QR of `Ã` (so `RᵀR = ÃᵀÃ` without squaring the
/// condition number) and each score is `‖R⁻ᵀãᵢ‖²`, which keeps small scores
/// accurate in relative terms.
fn weighted_leverage(ax: &DMatrix<f64>, w: &DVector<f64>, c: f64) -> Result<DVector<f64>> {
    let mut scaled = ax.clone();
    for (mut row, wi) in scaled.row_iter_mut().zip(w.iter()) {
        row *= wi.powf(0.5 * c);
    }
    let col_norms: alloc::vec::Vec<f64> = scaled.column_iter().map(|c| c.norm()).collect();
    let r = scaled.clone().qr().r();
    for (j, norm) in col_norms.iter().enumerate() {
        if !(r[(j, j)].abs() > 1e-12 * norm) {
            return Err(Error::RankDeficient);
        }
    }
    let mut y = scaled.transpose();
    if !r.tr_solve_upper_triangular_mut(&mut y) {
        return Err(Error::RankDeficient);
    }
    let tau = DVector::from_iterator(ax.nrows(), y.column_iter().map(|col| col.norm_squared()));
    if tau.iter().any(|t| !t.is_finite()) {
        return Err(Error::RankDeficient);
    }
    Ok(tau)
}

fn stationarity_residual(w: &DVector<f64>, tau: &DVector<f64>) -> f64 {
    w.iter().zip(tau.iter()).map(|(wi, ti)| (wi - ti).abs() / wi).fold(0.0, f64::max)
}

/// ℓ_q Lewis weights of `A_x`: the maximizer of
/// `log det(A_xᵀW^{c_q}A_x) − c_q·Σwᵢ` with `c_q = 1 − 2/q`.
///
/// Solved through its stationarity condition `wᵢ = τᵢ(w)` by the fixed-point
/// iteration `w ← τ(w)` from `wᵢ = n/m`. In `log w` coordinates the iteration
/// map has Jacobian `c_q(I − B)` whose `B` has eigenvalues in `[0, 1]`, so it contracts at
/// rate `c_q` near the solution.
pub fn lewis_weights(ax: &DMatrix<f64>, q: u32, tol: f64, max_iter: usize) -> Result<LewisWeights> {
    let (m, n) = ax.shape();
    if q < 4 || !q.is_multiple_of(2) {
        return Err(Error::InvalidParameter("q must be an even integer >= 4"));
    }
    if m < n || n == 0 {
        return Err(Error::RankDeficient);
    }
    let c = 1.0 - 2.0 / q as f64;
    let mut w = DVector::from_element(m, n as f64 / m as f64);
    let mut best = f64::INFINITY;
    for iterations in 0..=max_iter {
        let tau = weighted_leverage(ax, &w, c)?;
        let residual = stationarity_residual(&w, &tau);
        best = best.min(residual);
        if residual <= tol {
            return Ok(LewisWeights { w, residual, iterations });
        }
        if iterations == max_iter {
            break;
        }
        w.zip_apply(&tau, |wi, ti| *wi = ti);
    }
    Err(Error::LewisNotConverged { residual: best, iterations: max_iter })
}

fn lewis_part(p: &Polytope, x: &DVector<f64>, params: &LewisParams) -> Result<DMatrix<f64>> {
    params.validate()?;
    let (m, n) = (p.num_constraints(), p.dim());
    if m < n {
        return Err(Error::TooFewConstraints { m, n });
    }
    let ax = p.interior_slack(x)?.scaled_rows(p.a());
    let weights = lewis_weights(&ax, params.resolved_q(m), params.tol, params.max_iter)?;
    let scale = params.c1 * (n as f64).sqrt() * (m as f64).ln().powf(params.c2);
    let mut weighted = ax.clone();
    for (mut row, wi) in weighted.row_iter_mut().zip(weights.w.iter()) {
        row *= *wi;
    }
    Ok((ax.transpose() * weighted) * scale)
}

/// Regularized Lewis metric `c₁√n(log m)^{c₂}·A_xᵀW_xA_x + λI`.
pub fn regularized_lewis_metric(
    p: &Polytope,
    x: &DVector<f64>,
    params: &LewisParams,
) -> Result<MetricEval> {
    let mut g = lewis_part(p, x, params)?;
    for i in 0..g.nrows() {
        g[(i, i)] += params.lambda;
    }
    MetricEval::from_matrix(g, x.clone())
}
