//! Ground-truth oracles and numeric property checks: a rejection sampler for
//! truncated Gaussians, moment comparison, cross-ratio and Hilbert distances,
//! and randomized checks of the metrics' self-concordance and symmetry bounds.

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};

use crate::linalg::{check_dim, standard_normal, unit_direction};
use crate::metrics::{MetricEval, MetricKind};
use crate::polytope::Polytope;
use crate::target::GaussianTarget;
use crate::{ChainRng, Error, Result};

/// Consecutive rejections after which [`rejection_oracle`] gives up.
pub const MAX_CONSECUTIVE_REJECTIONS: u64 = 1_000_000;

/// Lewis scaling `c₁` used by [`run_standard_checks`]. With `c₁ = 1` the
/// Frobenius bound fails on some one-dimensional instances; from about 2.5
/// upwards it holds on every instance tried.
pub const CERTIFIED_LEWIS_C1: f64 = 3.0;

fn ordered<'a>(x: &'a DVector<f64>, y: &'a DVector<f64>) -> (&'a DVector<f64>, &'a DVector<f64>) {
    // a fixed order makes the result bitwise symmetric in (x, y)
    for (a, b) in x.iter().zip(y.iter()) {
        if a < b {
            return (x, y);
        }
        if a > b {
            return (y, x);
        }
    }
    (x, y)
}

/// Cross-ratio distance `d_K(x, y)` through the chord `p, x, y, q`.
///
/// An endpoint counts as infinite only when the chord reports `±∞`; with both
/// endpoints at infinity the distance is 0.
pub fn cross_ratio(p: &Polytope, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    check_dim(x, p.dim())?;
    check_dim(y, p.dim())?;
    if !p.contains(x)? || !p.contains(y)? {
        return Err(Error::NotInterior);
    }
    if x == y {
        return Ok(0.0);
    }
    let (x, y) = ordered(x, y);
    // y = x + 1·d, so t_minus < 0 < 1 < t_plus
    let c = p.chord(x, &(y - x))?;
    let (back, ahead) = (-c.t_minus, c.t_plus - 1.0);
    Ok(match (back.is_finite(), ahead.is_finite()) {
        (true, true) => (c.t_plus - c.t_minus) / (back * ahead),
        (false, true) => 1.0 / ahead,
        (true, false) => 1.0 / back,
        (false, false) => 0.0,
    })
}

/// Hilbert distance `ln(1 + d_K(x, y))`.
pub fn hilbert(p: &Polytope, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    Ok(cross_ratio(p, x, y)?.ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MixedMode {
    /// Parameter is `α`: `max(d_K, ln2·√α·‖x−y‖)`.
    Strong,
    /// Parameter is `η`: `max((ln2/√η)·‖x−y‖, d^H)`.
    Weak,
}

pub fn mixed_distance(
    p: &Polytope,
    x: &DVector<f64>,
    y: &DVector<f64>,
    param: f64,
    mode: MixedMode,
) -> Result<f64> {
    if !(param > 0.0) || !param.is_finite() {
        return Err(Error::InvalidParameter("mixed distance parameter must be finite and > 0"));
    }
    let euclid = (x - y).norm();
    let ln2 = core::f64::consts::LN_2;
    Ok(match mode {
        MixedMode::Strong => cross_ratio(p, x, y)?.max(ln2 * param.sqrt() * euclid),
        MixedMode::Weak => (ln2 / param.sqrt() * euclid).max(hilbert(p, x, y)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricPairReport {
    pub d_cross: f64,
    pub d_hilbert: f64,
    pub d_mixed_strong: f64,
    pub d_mixed_weak: f64,
}

pub fn metric_pair_report(
    p: &Polytope,
    x: &DVector<f64>,
    y: &DVector<f64>,
    alpha: f64,
    eta: f64,
) -> Result<MetricPairReport> {
    let d_cross = cross_ratio(p, x, y)?;
    Ok(MetricPairReport {
        d_cross,
        d_hilbert: d_cross.ln_1p(),
        d_mixed_strong: mixed_distance(p, x, y, alpha, MixedMode::Strong)?,
        d_mixed_weak: mixed_distance(p, x, y, eta, MixedMode::Weak)?,
    })
}

/// Exact draws from a Gaussian conditioned on `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleBatch {
    pub samples: Vec<DVector<f64>>,
    pub attempts: u64,
}

impl OracleBatch {
    pub fn acceptance_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.samples.len() as f64 / self.attempts as f64
        }
    }
}

/// Draw `N(μ, Σ)` and keep the draws that land in `K` until `count` are kept.
pub fn rejection_oracle<R: Rng + ?Sized>(
    g: &GaussianTarget,
    p: &Polytope,
    count: usize,
    rng: &mut R,
) -> Result<OracleBatch> {
    let n = g.dim();
    if p.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, found: p.dim() });
    }
    let l = Cholesky::new(g.cov().clone()).ok_or(Error::NotPositiveDefinite)?.l();
    let mut samples = Vec::with_capacity(count);
    let mut attempts = 0u64;
    let mut streak = 0u64;
    while samples.len() < count {
        let x = g.mean() + &l * standard_normal(rng, n);
        attempts += 1;
        if p.is_interior(&x) {
            samples.push(x);
            streak = 0;
        } else {
            streak += 1;
            if streak >= MAX_CONSECUTIVE_REJECTIONS {
                return Err(Error::AcceptanceTooLow { accepted: samples.len(), attempts });
            }
        }
    }
    Ok(OracleBatch { samples, attempts })
}

/// Sample moments with standard errors for the mean and for each covariance
/// entry.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSummary {
    pub count: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub mean_se: DVector<f64>,
    pub cov_se: DMatrix<f64>,
}

impl MomentSummary {
    /// Standard errors for independent draws.
    pub fn iid(samples: &[DVector<f64>]) -> Result<Self> {
        let (mean, cov, n) = moments(samples)?;
        let count = samples.len() as f64;
        let mean_se = cov.diagonal().map(|v| (v / count).sqrt());
        let mut prod_var = DMatrix::zeros(n, n);
        for x in samples {
            let c = x - &mean;
            let u = &c * c.transpose();
            prod_var += (&u - &cov).map(|e| e * e);
        }
        let cov_se = (prod_var / count / count).map(f64::sqrt);
        Ok(Self { count: samples.len(), mean, cov, mean_se, cov_se })
    }

    /// Standard errors from `batches` contiguous batch means, for correlated
    /// chain output. Trailing samples that do not fill a batch are used in the
    /// moments but not in the error estimate.
    pub fn batch_means(samples: &[DVector<f64>], batches: usize) -> Result<Self> {
        let (mean, cov, n) = moments(samples)?;
        if batches < 2 || samples.len() < batches {
            return Err(Error::InvalidParameter("need at least 2 batches with one sample each"));
        }
        let size = samples.len() / batches;
        let mut mean_var = DVector::zeros(n);
        let mut cov_var = DMatrix::zeros(n, n);
        for chunk in samples.chunks_exact(size).take(batches) {
            let mut bm = DVector::zeros(n);
            let mut bc = DMatrix::zeros(n, n);
            for x in chunk {
                let c = x - &mean;
                bm += &c;
                bc += &c * c.transpose();
            }
            bm /= size as f64;
            bc /= size as f64;
            mean_var += bm.map(|e| e * e);
            cov_var += (bc - &cov).map(|e| e * e);
        }
        let b = batches as f64;
        let mean_se = (mean_var / (b * (b - 1.0))).map(f64::sqrt);
        let cov_se = (cov_var / (b * (b - 1.0))).map(f64::sqrt);
        Ok(Self { count: samples.len(), mean, cov, mean_se, cov_se })
    }
}

fn moments(samples: &[DVector<f64>]) -> Result<(DVector<f64>, DMatrix<f64>, usize)> {
    let first = samples.first().ok_or(Error::InvalidParameter("empty sample batch"))?;
    let n = first.len();
    let count = samples.len() as f64;
    let mut mean = DVector::zeros(n);
    for x in samples {
        check_dim(x, n)?;
        mean += x;
    }
    mean /= count;
    let mut cov = DMatrix::zeros(n, n);
    for x in samples {
        let c = x - &mean;
        cov += &c * c.transpose();
    }
    cov /= count;
    Ok((mean, cov, n))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub mean_a: DVector<f64>,
    pub mean_b: DVector<f64>,
    pub cov_a: DMatrix<f64>,
    pub cov_b: DMatrix<f64>,
    /// `(mean_a − mean_b)/√(se_a² + se_b²)` per coordinate.
    pub z_scores: DVector<f64>,
    pub max_abs_z: f64,
    pub cov_z_scores: DMatrix<f64>,
    pub max_abs_cov_z: f64,
}

fn z(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff / se
    }
}

/// Compare two summaries through pooled standard errors.
pub fn compare_summaries(a: &MomentSummary, b: &MomentSummary) -> Result<MomentReport> {
    check_dim(&b.mean, a.mean.len())?;
    let z_scores = a.mean.zip_zip_map(&b.mean, &a.mean_se.zip_map(&b.mean_se, |x, y| x.hypot(y)), |ma, mb, se| {
        z(ma - mb, se)
    });
    let pooled = a.cov_se.zip_map(&b.cov_se, |x, y| x.hypot(y));
    let cov_z_scores = (&a.cov - &b.cov).zip_map(&pooled, z);
    let max_abs = |it: &mut dyn Iterator<Item = &f64>| it.fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(MomentReport {
        max_abs_z: max_abs(&mut z_scores.iter()),
        max_abs_cov_z: max_abs(&mut cov_z_scores.iter()),
        mean_a: a.mean.clone(),
        mean_b: b.mean.clone(),
        cov_a: a.cov.clone(),
        cov_b: b.cov.clone(),
        z_scores,
        cov_z_scores,
    })
}

/// Compare two batches of independent draws.
pub fn compare_moments(a: &[DVector<f64>], b: &[DVector<f64>]) -> Result<MomentReport> {
    compare_summaries(&MomentSummary::iid(a)?, &MomentSummary::iid(b)?)
}

/// Compare correlated chain output (batch-means errors) with independent draws.
pub fn compare_chain_moments(
    chain: &[DVector<f64>],
    reference: &[DVector<f64>],
    batches: usize,
) -> Result<MomentReport> {
    compare_summaries(&MomentSummary::batch_means(chain, batches)?, &MomentSummary::iid(reference)?)
}

/// KL divergence between the proposals at `x` and at `z`:
/// `KL(N(x, (r²/n)G(x)⁻¹) ‖ N(z, (r²/n)G(z)⁻¹))`.
pub fn proposal_kl(at_x: &MetricEval, at_z: &MetricEval, step_size: f64) -> f64 {
    let n = at_x.dim();
    // tr(G(z)G(x)⁻¹) = ‖Q_z Q_x⁻¹‖_F²
    let mut inv = DMatrix::identity(n, n);
    at_x.factor.q.solve_upper_triangular_mut(&mut inv);
    let trace = (&at_z.factor.q * inv).norm_squared();
    let h = &at_z.at - &at_x.at;
    let quad = at_z.factor.norm(&h).powi(2) * n as f64 / (step_size * step_size);
    0.5 * (trace - n as f64 + quad + at_x.logdet() - at_z.logdet())
}

/// Outcome of a randomized property check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub trials: usize,
    pub violations: usize,
    /// Largest observed `lhs / rhs`; values below 1 mean the bound held with room.
    pub max_ratio: f64,
}

impl CheckReport {
    fn new(name: &str) -> Self {
        Self { name: String::from(name), trials: 0, violations: 0, max_ratio: 0.0 }
    }

    fn record(&mut self, lhs: f64, rhs: f64, passed: bool) {
        if !passed || lhs.is_nan() {
            self.violations += 1;
        }
        let ratio = if rhs > 0.0 { lhs / rhs } else if lhs > 0.0 { f64::INFINITY } else { 0.0 };
        if ratio > self.max_ratio || ratio.is_nan() {
            self.max_ratio = ratio;
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Generator for trial `i` of a check seeded with `seed`.
fn trial_rng(seed: u64, trial: usize) -> ChainRng {
    let mut rng = ChainRng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

/// A few hit-and-run moves from `anchor`; unbounded chord ends are capped at
/// distance `10·(1 + ‖anchor‖)`.
fn random_interior<R: Rng + ?Sized>(p: &Polytope, anchor: &DVector<f64>, rng: &mut R) -> Result<DVector<f64>> {
    let cap = 10.0 * (1.0 + anchor.norm());
    let mut x = anchor.clone();
    for _ in 0..5 {
        let d = unit_direction(rng, p.dim());
        let c = p.chord(&x, &d)?;
        let (lo, hi) = (c.t_minus.max(-cap), c.t_plus.min(cap));
        let t = lo + (hi - lo) * rng.random::<f64>();
        let next = &x + d * t;
        if p.is_interior(&next) {
            x = next;
        }
    }
    Ok(x)
}

/// `Q⁻ᵀ Δ Q⁻¹` for the upper factor `Q` of `G(x)`.
fn whiten(at_x: &MetricEval, delta: &DMatrix<f64>) -> DMatrix<f64> {
    let q = &at_x.factor.q;
    let mut left = delta.clone();
    q.tr_solve_upper_triangular_mut(&mut left);
    let mut both = left.transpose();
    q.tr_solve_upper_triangular_mut(&mut both);
    both
}

/// Check, at random interior `x` and `y` with `δ = ‖y − x‖_{G(x)} ≤ delta_max`,
///
/// * `‖G(x)^{-1/2}(G(y) − G(x))G(x)^{-1/2}‖_F ≤ 2δ/(1−δ)² + 1e-6`, and
/// * `det(G(x)^{-1/2}G(y)G(x)^{-1/2}) ≤ exp(8√n·δ)·(1 + 1e-6)` when `δ ≤ ½`.
///
/// Points start from `anchor`, which must be interior. Each trial uses its own
/// generator stream derived from `seed`.
pub fn certify_ssc(
    p: &Polytope,
    metric: &MetricKind,
    anchor: &DVector<f64>,
    trials: usize,
    delta_max: f64,
    seed: u64,
) -> Result<(CheckReport, CheckReport)> {
    if !(delta_max > 0.0 && delta_max < 1.0) {
        return Err(Error::InvalidParameter("delta_max must lie in (0, 1)"));
    }
    if !p.contains(anchor)? {
        return Err(Error::NotInterior);
    }
    let n = p.dim();
    let mut frob = CheckReport::new("ssc-frobenius");
    let mut det = CheckReport::new("ssc-determinant");
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let x = random_interior(p, anchor, &mut rng)?;
        let at_x = metric.evaluate(p, &x)?;
        let u = unit_direction(&mut rng, n);
        let mut delta = delta_max * rng.random::<f64>();
        let unit = &u / at_x.factor.norm(&u);
        let mut y = &x + &unit * delta;
        while !p.is_interior(&y) {
            delta *= 0.5;
            y = &x + &unit * delta;
        }
        let at_y = metric.evaluate(p, &y)?;
        let lhs = whiten(&at_x, &(&at_y.g - &at_x.g)).norm();
        let rhs = 2.0 * delta / (1.0 - delta).powi(2) + 1e-6;
        frob.trials += 1;
        frob.record(lhs, rhs, lhs <= rhs);
        if delta <= 0.5 {
            let log_ratio = at_y.logdet() - at_x.logdet();
            let bound = 8.0 * (n as f64).sqrt() * delta;
            det.trials += 1;
            det.record(log_ratio.exp(), bound.exp(), log_ratio <= bound + 1e-6f64.ln_1p());
        }
    }
    Ok((frob, det))
}

/// Check the symmetry of the barrier Hessian `H(x) = A_xᵀA_x` at random
/// interior `x`:
///
/// * points on the unit `H(x)` sphere (pulled in by `1e-9`) lie in `K ∩ (2x − K)`;
/// * points of `K ∩ (2x − K)` satisfy `‖z − x‖²_{H(x)} ≤ m + 1e-9`.
///
/// Points of the symmetrized body are drawn uniformly along a random chord
/// through `x`, one of them within `1e-12` of the chord end.
pub fn certify_symmetry(p: &Polytope, anchor: &DVector<f64>, trials: usize, seed: u64) -> Result<(CheckReport, CheckReport)> {
    let m = p.num_constraints();
    if m == 0 {
        return Err(Error::InvalidParameter("symmetry check needs at least one constraint"));
    }
    if !p.contains(anchor)? {
        return Err(Error::NotInterior);
    }
    let n = p.dim();
    let mut inner = CheckReport::new("symmetry-inner");
    let mut outer = CheckReport::new("symmetry-outer");
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial);
        let x = random_interior(p, anchor, &mut rng)?;
        let s = p.interior_slack(&x)?;
        let ax = s.scaled_rows(p.a());
        let h_norm = |v: &DVector<f64>| (&ax * v).norm();

        let u = unit_direction(&mut rng, n);
        let hu = h_norm(&u);
        inner.trials += 1;
        if hu > 0.0 {
            let step = &u * ((1.0 - 1e-9) / hu);
            let z = &x + &step;
            let mirror = &x - &step;
            let worst = (&ax * &step).amax();
            inner.record(worst, 1.0, p.is_interior(&z) && p.is_interior(&mirror));
        } else {
            // u spans a line contained in K
            inner.record(0.0, 1.0, true);
        }

        let v = unit_direction(&mut rng, n);
        let av = &ax * &v;
        let reach = av.iter().map(|e| 1.0 / e.abs()).fold(f64::INFINITY, f64::min);
        if !reach.is_finite() {
            outer.trials += 1;
            outer.record(0.0, m as f64, true);
            continue;
        }
        for t in [reach * (2.0 * rng.random::<f64>() - 1.0), reach * (1.0 - 1e-12)] {
            let h = &v * t;
            let z = &x + &h;
            let inside = p.is_interior(&z) && p.is_interior(&(&x - &h));
            if !inside {
                continue;
            }
            let sq = h_norm(&h).powi(2);
            outer.trials += 1;
            outer.record(sq, m as f64, sq <= m as f64 + 1e-9);
        }
    }
    Ok((inner, outer))
}

/// A random polytope containing the ball of radius ½ around the origin:
/// Gaussian rows with offsets `bᵢ = −‖aᵢ‖·(½ + U)`.
pub fn random_polytope<R: Rng + ?Sized>(rng: &mut R, n: usize, m: usize) -> Polytope {
    let a = DMatrix::from_fn(m, n, |_, _| standard_normal(rng, 1)[0]);
    let b = DVector::from_iterator(
        m,
        a.row_iter().map(|r| -r.norm() * (0.5 + rng.random::<f64>())).collect::<Vec<_>>(),
    );
    Polytope::new(a, b).expect("Gaussian rows are nonzero")
}

/// Named polytope with an interior anchor point.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub name: String,
    pub polytope: Polytope,
    pub anchor: DVector<f64>,
}

/// Boxes, orthants, simplices and seeded random polytopes with
/// `n ≤ 5`, `n ≤ m ≤ 10`.
pub fn standard_corpus() -> Vec<CorpusEntry> {
    use alloc::format;
    let mut out = Vec::new();
    for n in 1..=5usize {
        let lo = alloc::vec![0.0; n];
        let hi: Vec<f64> = (1..=n).map(|k| k as f64).collect();
        out.push(CorpusEntry {
            name: format!("box{n}"),
            polytope: Polytope::make_box(&lo, &hi).expect("valid bounds"),
            anchor: DVector::from_iterator(n, hi.iter().map(|h| h / 3.0)),
        });
        out.push(CorpusEntry {
            name: format!("orthant{n}"),
            polytope: Polytope::make_orthant(n),
            anchor: DVector::from_element(n, 1.0),
        });
        out.push(CorpusEntry {
            name: format!("simplex{n}"),
            polytope: Polytope::make_simplex(n),
            anchor: DVector::from_element(n, 1.0 / (n as f64 + 2.0)),
        });
    }
    let mut rng = ChainRng::seed_from_u64(0x5eed);
    for k in 0..15 {
        let n = 1 + k % 5;
        let m = rng.random_range(n..=10);
        out.push(CorpusEntry {
            name: format!("random{k}"),
            polytope: random_polytope(&mut rng, n, m),
            anchor: DVector::zeros(n),
        });
    }
    out
}

/// Run the self-concordance checks for both metric kinds (`λ = 1`, Lewis
/// scaling [`CERTIFIED_LEWIS_C1`]) and the
/// symmetry checks over `corpus`, spreading `trials` per check across entries.
pub fn run_standard_checks(corpus: &[CorpusEntry], trials: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    let mut lewis = crate::metrics::LewisParams::new(1.0);
    lewis.c1 = CERTIFIED_LEWIS_C1;
    let kinds = [("soft-threshold", MetricKind::soft_threshold(1.0)), ("lewis", MetricKind::RegularizedLewis(lewis))];
    let per_entry = trials.div_ceil(corpus.len().max(1));
    for (label, kind) in kinds {
        let mut frob = CheckReport::new(&alloc::format!("ssc-frobenius/{label}"));
        let mut det = CheckReport::new(&alloc::format!("ssc-determinant/{label}"));
        for (i, entry) in corpus.iter().enumerate() {
            let (f, d) = certify_ssc(&entry.polytope, &kind, &entry.anchor, per_entry, 0.4, seed ^ (i as u64) << 32)?;
            merge(&mut frob, &f);
            merge(&mut det, &d);
        }
        reports.push(frob);
        reports.push(det);
    }
    let mut inner = CheckReport::new("symmetry-inner");
    let mut outer = CheckReport::new("symmetry-outer");
    for (i, entry) in corpus.iter().enumerate() {
        let (a, b) = certify_symmetry(&entry.polytope, &entry.anchor, per_entry, seed ^ (i as u64) << 32)?;
        merge(&mut inner, &a);
        merge(&mut outer, &b);
    }
    reports.push(inner);
    reports.push(outer);
    Ok(reports)
}

fn merge(into: &mut CheckReport, from: &CheckReport) {
    into.trials += from.trials;
    into.violations += from.violations;
    if from.max_ratio > into.max_ratio || from.max_ratio.is_nan() {
        into.max_ratio = from.max_ratio;
    }
}
