//! Pre-run planning: mode solvers, warm-start balls with a warmness bound,
//! closed-form iteration budgets and the violated-constraint budget.

use alloc::vec::Vec;

use nalgebra::DVector;
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;

use crate::linalg::{check_dim, unit_direction};
use crate::polytope::Polytope;
use crate::target::LogConcaveTarget;
use crate::{Error, Result};

/// Half-space projection sweeps and tolerance for the projected solve.
pub const PROJECTION_SWEEPS: usize = 10_000;
pub const PROJECTION_TOL: f64 = 1e-10;

/// Unconstrained and constrained minimizers of `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModePair {
    pub x_star: DVector<f64>,
    pub x_dag: DVector<f64>,
    pub grad_norm_star: f64,
    /// `β·‖x − proj(x − ∇f(x)/β)‖` at `x_dag`.
    pub kkt_residual_dag: f64,
    /// Both solves met `tol` within `max_iter`.
    pub converged: bool,
}

/// Dykstra's alternating projection onto the closed half-spaces
/// `aᵢᵀy ≥ bᵢ`. Returns the last iterate; it is exact when `m ≤ 1`.
pub fn project_onto_closure(p: &Polytope, v: &DVector<f64>) -> Result<DVector<f64>> {
    check_dim(v, p.dim())?;
    let m = p.num_constraints();
    let rows: Vec<DVector<f64>> = p.a().row_iter().map(|r| r.transpose()).collect();
    let norms_sq: Vec<f64> = rows.iter().map(|r| r.norm_squared()).collect();
    let mut x = v.clone();
    let mut increments = alloc::vec![DVector::<f64>::zeros(v.len()); m];
    for _ in 0..PROJECTION_SWEEPS {
        // the iterate can return to the same point while the increments still
        // move, so convergence needs both to settle and x to be feasible
        let mut change = 0.0;
        for i in 0..m {
            let y = &x + &increments[i];
            let gap = p.b()[i] - rows[i].dot(&y);
            let projected = if gap > 0.0 { &y + &rows[i] * (gap / norms_sq[i]) } else { y.clone() };
            let increment = y - &projected;
            change += (&increment - &increments[i]).norm_squared() + (&projected - &x).norm_squared();
            increments[i] = increment;
            x = projected;
        }
        let violation = (0..m)
            .map(|i| (p.b()[i] - rows[i].dot(&x)) / norms_sq[i].sqrt())
            .fold(0.0, f64::max);
        if change.sqrt() <= PROJECTION_TOL && violation <= PROJECTION_TOL {
            break;
        }
    }
    Ok(x)
}

/// Gradient descent for `x*` and projected gradient descent for `x†`, both
/// with step `1/β`, starting from the origin and from the projection of `x*`.
pub fn solve_modes<T: LogConcaveTarget + ?Sized>(
    target: &T,
    p: &Polytope,
    tol: f64,
    max_iter: usize,
) -> Result<ModePair> {
    let n = target.dim();
    if p.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: p.dim() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter("tolerance must be > 0"));
    }
    if !(target.alpha() > 0.0) {
        return Err(Error::RequiresStrongConvexity);
    }
    let beta = target.beta();
    let grad = |x: &DVector<f64>| target.gradient(x).ok_or(Error::MissingGradient);

    let mut x_star = DVector::zeros(n);
    let mut g = grad(&x_star)?;
    let mut star_ok = false;
    for _ in 0..max_iter {
        if g.norm() <= tol {
            star_ok = true;
            break;
        }
        x_star -= &g / beta;
        g = grad(&x_star)?;
    }
    let grad_norm_star = g.norm();
    star_ok |= grad_norm_star <= tol;
    if !grad_norm_star.is_finite() {
        return Err(Error::NonFinite);
    }

    let mut x_dag = project_onto_closure(p, &x_star)?;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let next = project_onto_closure(p, &(&x_dag - grad(&x_dag)? / beta))?;
        residual = beta * (&next - &x_dag).norm();
        x_dag = next;
        if residual <= tol {
            break;
        }
    }
    if max_iter == 0 {
        let next = project_onto_closure(p, &(&x_dag - grad(&x_dag)? / beta))?;
        residual = beta * (&next - &x_dag).norm();
    }
    Ok(ModePair {
        x_star,
        x_dag,
        grad_norm_star,
        kkt_residual_dag: residual,
        converged: star_ok && residual <= tol,
    })
}

/// A ball `B(x0, r0)` inside `K ∩ B(x†, r1)` to draw initial points from,
/// with the log of the warmness bound it certifies.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStartBall {
    pub x0: DVector<f64>,
    pub r0: f64,
    pub r1: f64,
    pub log_m: f64,
    /// Outer radius used in `log_m`.
    pub r_outer: f64,
    /// `r_outer` came from axis chord reach rather than the caller. It is then
    /// a lower bound on the true outer radius, so `log_m` is advisory.
    pub r_outer_estimated: bool,
}

/// Smallest normalized margin `(aᵢᵀx − bᵢ)/‖aᵢ‖` (`+∞` when `m = 0`).
pub fn min_margin(p: &Polytope, x: &DVector<f64>) -> Result<f64> {
    let s = p.slack(x)?;
    Ok(s.values
        .iter()
        .zip(p.row_norms().iter())
        .map(|(si, ni)| si / ni)
        .fold(f64::INFINITY, f64::min))
}

/// Largest reach from `x1` along the `2n` signed coordinate axes.
pub fn axis_reach(p: &Polytope, x1: &DVector<f64>) -> Result<f64> {
    let n = p.dim();
    let mut reach = 0.0f64;
    for j in 0..n {
        let chord = p.chord(x1, &DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 }))?;
        reach = reach.max(chord.t_plus).max(-chord.t_minus);
    }
    Ok(reach)
}

/// Build the warm-start ball by shrinking `B(x1, r̃)` towards `x†`.
///
/// The map `y ↦ x† + t(y − x†)` with `t = r1/(r̃ + ‖x1 − x†‖)` sends
/// `B(x1, r̃)` into `B(x†, r1)`; `t` is capped at 1 so the image stays in `K`.
/// If `x†` lies a hair outside `K` the radius is reduced by the shortfall.
/// `r_outer` is the radius of a ball around `x1` containing `K`; when absent it
/// is estimated with [`axis_reach`].
pub fn warm_start_ball<T: LogConcaveTarget + ?Sized>(
    target: &T,
    p: &Polytope,
    x1: &DVector<f64>,
    r_tilde: f64,
    modes: &ModePair,
    r_outer: Option<f64>,
) -> Result<WarmStartBall> {
    let n = p.dim();
    check_dim(x1, n)?;
    check_dim(&modes.x_dag, n)?;
    check_dim(&modes.x_star, n)?;
    let beta = target.beta();
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter("beta must be finite and > 0"));
    }
    if !(r_tilde > 0.0) || !r_tilde.is_finite() {
        return Err(Error::InvalidParameter("inner radius must be finite and > 0"));
    }
    if min_margin(p, x1)? < r_tilde {
        return Err(Error::BallNotInside);
    }

    let mode_gap = (&modes.x_dag - &modes.x_star).norm();
    let r1 = (1.0 / beta.sqrt()).min(1.0 / (2.0 * beta * mode_gap));
    let offset = x1 - &modes.x_dag;
    let dist = offset.norm();
    let t = (r1 / (r_tilde + dist)).min(1.0);
    let x0 = &modes.x_dag + &offset * t;
    let mut r0 = t * r_tilde;
    let anchor_margin = min_margin(p, &modes.x_dag)?;
    if anchor_margin < 0.0 {
        r0 += (1.0 - t) * anchor_margin;
    }
    if !(r0 > 0.0) {
        return Err(Error::BallNotInside);
    }

    let (r_outer, estimated) = match r_outer {
        Some(r) if r > 0.0 => (r, false),
        Some(_) => return Err(Error::InvalidParameter("outer radius must be > 0")),
        None => (axis_reach(p, x1)?, true),
    };
    let nf = n as f64;
    let log_m = 1.0
        + nf * (3.0 * r_outer / r_tilde).ln()
        + nf * (0.5 * (beta * r_outer * r_outer).ln()).max((2.0 * beta * r_outer * mode_gap).ln());
    Ok(WarmStartBall { x0, r0, r1, log_m, r_outer, r_outer_estimated: estimated })
}

/// Uniform draw from the open ball `B(x0, r0)`.
pub fn sample_warm_start<R: Rng + ?Sized>(ball: &WarmStartBall, rng: &mut R) -> DVector<f64> {
    let n = ball.x0.len();
    let dir = unit_direction(rng, n);
    let u: f64 = rng.random();
    &ball.x0 + dir * (ball.r0 * u.powf(1.0 / n as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    StronglyLogConcave,
    WeaklyLogConcave,
    BeyondWorstCase,
}

/// Which metric the budget is for. `c2` is the log-exponent of the Lewis scaling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BudgetMetric {
    SoftThreshold,
    Lewis { c2: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingBudgetQuery {
    pub regime: Regime,
    pub m: usize,
    pub n: usize,
    /// `κ = β/α`; strong regime only.
    pub kappa: Option<f64>,
    /// `β·η`; weak regime only.
    pub beta_eta: Option<f64>,
    pub metric: BudgetMetric,
    /// `ln M` for warmness `M ≥ 1`.
    pub log_m: f64,
    pub eps: f64,
    pub c: f64,
    /// Weak regime; defaults to `max(1, ln n)`.
    pub psi_n_sq: Option<f64>,
}

impl MixingBudgetQuery {
    fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 {
            return Err(Error::InconsistentQuery("m and n must be positive"));
        }
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(Error::InvalidParameter("eps must lie in (0, 1)"));
        }
        if !(self.log_m >= 0.0) {
            return Err(Error::InvalidParameter("warmness must be >= 1"));
        }
        if !(self.c > 0.0) || !self.c.is_finite() {
            return Err(Error::InvalidParameter("C must be finite and > 0"));
        }
        if let BudgetMetric::Lewis { c2 } = self.metric {
            if !(c2 >= 0.0) || !c2.is_finite() {
                return Err(Error::InvalidParameter("c2 must be finite and >= 0"));
            }
        }
        match self.regime {
            Regime::StronglyLogConcave => {
                if self.beta_eta.is_some() || self.psi_n_sq.is_some() {
                    return Err(Error::InconsistentQuery("weak-regime fields set in strong regime"));
                }
                match self.kappa {
                    Some(k) if k >= 0.0 && k.is_finite() => Ok(()),
                    Some(_) => Err(Error::InvalidParameter("kappa must be finite and >= 0")),
                    None => Err(Error::InconsistentQuery("strong regime needs kappa")),
                }
            }
            Regime::WeaklyLogConcave => {
                if self.kappa.is_some() {
                    return Err(Error::InconsistentQuery("kappa set in weak regime"));
                }
                if let Some(psi) = self.psi_n_sq {
                    if !(psi > 0.0) || !psi.is_finite() {
                        return Err(Error::InvalidParameter("psi_n^2 must be finite and > 0"));
                    }
                }
                match self.beta_eta {
                    Some(be) if be >= 0.0 && be.is_finite() => Ok(()),
                    Some(_) => Err(Error::InvalidParameter("beta*eta must be finite and >= 0")),
                    None => Err(Error::InconsistentQuery("weak regime needs beta*eta")),
                }
            }
            Regime::BeyondWorstCase => {
                Err(Error::InconsistentQuery("beyond-worst-case budgets need the polytope"))
            }
        }
    }
}

/// `max(1, ln n)`.
pub fn default_psi_n_sq(n: usize) -> f64 {
    (n as f64).ln().max(1.0)
}

/// `C · factor · n · ln(√M/ε)` before rounding up; the log term is clamped at 0.
pub fn mixing_budget_raw(q: &MixingBudgetQuery) -> Result<f64> {
    q.validate()?;
    let n = q.n as f64;
    let m = q.m as f64;
    let (base, log_scale) = match q.metric {
        BudgetMetric::SoftThreshold => (m, 1.0),
        BudgetMetric::Lewis { c2 } => (n.powf(1.5), m.ln().powf(c2)),
    };
    let factor = match q.regime {
        Regime::StronglyLogConcave => (base + q.kappa.unwrap_or(0.0)) * log_scale,
        _ => {
            let psi = q.psi_n_sq.unwrap_or_else(|| default_psi_n_sq(q.n));
            psi * (base + q.beta_eta.unwrap_or(0.0)) * log_scale
        }
    };
    let log_term = (0.5 * q.log_m - q.eps.ln()).max(0.0);
    Ok(q.c * factor * n * log_term)
}

/// Iteration budget `T` for the strong and weak regimes.
pub fn mixing_budget(q: &MixingBudgetQuery) -> Result<u64> {
    ceil_budget(mixing_budget_raw(q)?)
}

fn ceil_budget(raw: f64) -> Result<u64> {
    if !raw.is_finite() || raw >= u64::MAX as f64 {
        return Err(Error::InvalidParameter("budget is not finite"));
    }
    Ok(raw.ceil() as u64)
}

fn radius_hat_from_log(log_inv_s: f64, n: usize) -> f64 {
    let nf = n as f64;
    2.0 + 2.0 * (nf.powf(-0.25) * log_inv_s.powf(0.25)).max(nf.powf(-0.5) * log_inv_s.sqrt())
}

/// `2 + 2·max(n^{-1/4}·ln(1/s)^{1/4}, n^{-1/2}·ln(1/s)^{1/2})` for `s ∈ (0, 1)`.
pub fn radius_hat(s: f64, n: usize) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter("s must lie in (0, 1)"));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1"));
    }
    Ok(radius_hat_from_log(-s.ln(), n))
}

/// Number of constraints whose affine function reaches `≤ 0` on the closed
/// ball `B(center, rho)`.
pub fn violated_constraint_count(p: &Polytope, center: &DVector<f64>, rho: f64) -> Result<usize> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidParameter("rho must be >= 0"));
    }
    let s = p.slack(center)?;
    Ok(s.values.iter().zip(p.row_norms().iter()).filter(|(si, ni)| **si <= **ni * rho).count())
}

/// 32 log-spaced values over `[1e-2, 1e3]` followed by `+∞`.
pub fn default_delta_grid() -> Vec<f64> {
    let (lo, hi) = (1e-2f64.ln(), 1e3f64.ln());
    let mut grid: Vec<f64> = (0..32).map(|k| (lo + (hi - lo) * k as f64 / 31.0).exp()).collect();
    grid.push(f64::INFINITY);
    grid
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeyondWorstCaseBudget {
    pub budget: u64,
    /// `+∞` when the sentinel wins.
    pub best_delta: f64,
    pub count: usize,
    /// The `(m + κ)·n` budget with the same `C` and log factor.
    pub plain_budget: u64,
    pub radius_hat: f64,
}

/// Minimize `κn + m/δ² + n·count(δ)` over `delta_grid` and the `δ = ∞`
/// sentinel, where `count(δ)` is the number of constraints reaching the ball
/// around `x†` of radius `(Υ̂ + δ)·√(n/α)`, and scale by `C·ln(2M/ε)`.
/// Ties go to the earliest grid entry; the sentinel is tried last.
pub fn beyond_worst_case_budget<T: LogConcaveTarget + ?Sized>(
    p: &Polytope,
    target: &T,
    modes: &ModePair,
    log_m: f64,
    eps: f64,
    c: f64,
    delta_grid: &[f64],
) -> Result<BeyondWorstCaseBudget> {
    let n = p.dim();
    check_dim(&modes.x_dag, n)?;
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be >= 1"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::InvalidParameter("eps must lie in (0, 1)"));
    }
    if !(log_m >= 0.0) || !log_m.is_finite() {
        return Err(Error::InvalidParameter("warmness must be finite and >= 1"));
    }
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter("C must be finite and > 0"));
    }
    if delta_grid.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::InvalidParameter("grid values must be > 0"));
    }
    let alpha = target.alpha();
    let kappa = target.kappa()?;
    let nf = n as f64;
    let m = p.num_constraints();
    // ln(2M/ε) = ln(1/s) for s = ε/(2M)
    let log_factor = core::f64::consts::LN_2 + log_m - eps.ln();
    let upsilon = radius_hat_from_log(log_factor, n);
    let scale = (nf / alpha).sqrt();

    let sentinel = kappa * nf + nf * m as f64;
    let mut best = (sentinel, f64::INFINITY, m);
    let mut best_finite: Option<(f64, f64, usize)> = None;
    for &delta in delta_grid.iter().filter(|d| d.is_finite()) {
        let count = violated_constraint_count(p, &modes.x_dag, (upsilon + delta) * scale)?;
        let value = kappa * nf + m as f64 / (delta * delta) + nf * count as f64;
        if best_finite.is_none_or(|b| value < b.0) {
            best_finite = Some((value, delta, count));
        }
    }
    if let Some(b) = best_finite {
        if b.0 <= best.0 {
            best = b;
        }
    }
    Ok(BeyondWorstCaseBudget {
        budget: ceil_budget(c * best.0 * log_factor)?,
        best_delta: best.1,
        count: best.2,
        plain_budget: ceil_budget(c * sentinel * log_factor)?,
        radius_hat: upsilon,
    })
}
