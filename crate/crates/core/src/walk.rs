//! The regularized Dikin walk: Gaussian proposals shaped by the local metric,
//! a Metropolis filter, lazification and chain execution.
//!
//! RNG discipline per step, in order: one uniform for the lazy coin (only when
//! `lazy` is set), `n` standard normals for the proposal, then one uniform for
//! the Metropolis test. The last draw is skipped when the proposal falls
//! outside `K`, because the indicator already forces rejection. It is drawn
//! for every proposal inside `K`, whether accepted or not.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::DVector;
#[allow(unused_imports)]
use num_traits::Float;
use rand::{Rng, SeedableRng};

use crate::linalg::{check_dim, standard_normal};
use crate::metrics::{MetricEval, MetricKind};
use crate::polytope::Polytope;
use crate::target::LogConcaveTarget;
use crate::{ChainRng, Error, Result};

/// Smallest and largest step size reachable through adaptation.
pub const STEP_SIZE_RANGE: (f64, f64) = (1e-6, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct WalkConfig {
    /// Step size `r`; proposals are `N(x, (r²/n)·G(x)⁻¹)`.
    pub step_size: f64,
    pub metric: MetricKind,
    pub lazy: bool,
    /// Number of recorded-phase iterations `T`.
    pub steps: usize,
    pub burn_in: usize,
    /// Adapt `r` during burn-in. The recorded phase always runs at a fixed `r`.
    pub adapt: bool,
    /// Non-lazy proposals per adaptation window.
    pub adapt_window: usize,
    pub seed: u64,
    pub thin: usize,
}

impl Default for WalkConfig {
    fn default() -> Self {
        Self {
            step_size: 0.1,
            metric: MetricKind::soft_threshold(1.0),
            lazy: true,
            steps: 0,
            burn_in: 0,
            adapt: true,
            adapt_window: 100,
            seed: 0,
            thin: 1,
        }
    }
}

impl WalkConfig {
    fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) || !self.step_size.is_finite() {
            return Err(Error::InvalidParameter("step size must be finite and > 0"));
        }
        if self.thin == 0 {
            return Err(Error::InvalidParameter("thin must be >= 1"));
        }
        if self.adapt && self.adapt_window == 0 {
            return Err(Error::InvalidParameter("adaptation window must be >= 1"));
        }
        Ok(())
    }
}

/// Running counters of a chain.
///
/// `proposed = accepted + rejected_outside + rejected_mh` at all times.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    pub proposed: u64,
    pub accepted: u64,
    pub lazy_skips: u64,
    pub rejected_outside: u64,
    pub rejected_mh: u64,
    /// Proposals rejected because `f` was not finite there (also counted in
    /// `rejected_mh`).
    pub nonfinite_target: u64,
    /// Running mean of `min(0, L)` over proposals that reached the Metropolis test.
    pub mean_log_ratio: f64,
}

impl StepStats {
    /// Accepted fraction of non-lazy proposals.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn steps(&self) -> u64 {
        self.proposed + self.lazy_skips
    }

    fn record_log_ratio(&mut self, log_ratio: f64) {
        let tested = (self.accepted + self.rejected_mh) as f64;
        let value = log_ratio.min(0.0);
        self.mean_log_ratio += (value - self.mean_log_ratio) / tested;
    }
}

/// What a single iteration did.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    LazySkip,
    RejectedOutside,
    RejectedMh,
    Accepted,
}

/// Current point with its cached metric, cached `f`, RNG and counters.
#[derive(Debug, Clone)]
pub struct ChainState {
    x: DVector<f64>,
    metric: MetricEval,
    f_x: f64,
    rng: ChainRng,
    pub stats: StepStats,
}

impl ChainState {
    pub fn new<T: LogConcaveTarget + ?Sized>(
        x0: DVector<f64>,
        target: &T,
        p: &Polytope,
        kind: &MetricKind,
        seed: u64,
    ) -> Result<Self> {
        Self::with_rng(x0, target, p, kind, ChainRng::seed_from_u64(seed))
    }

    pub fn with_rng<T: LogConcaveTarget + ?Sized>(
        x0: DVector<f64>,
        target: &T,
        p: &Polytope,
        kind: &MetricKind,
        rng: ChainRng,
    ) -> Result<Self> {
        check_dim(&x0, p.dim())?;
        check_dim(&x0, target.dim())?;
        if x0.is_empty() {
            return Err(Error::InvalidParameter("dimension must be >= 1"));
        }
        if !p.contains(&x0)? {
            return Err(Error::NotInterior);
        }
        let f_x = target.value(&x0);
        if !f_x.is_finite() {
            return Err(Error::NonFiniteTarget);
        }
        let metric = kind.evaluate(p, &x0)?;
        Ok(Self { x: x0, metric, f_x, rng, stats: StepStats::default() })
    }

    pub fn x(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn metric(&self) -> &MetricEval {
        &self.metric
    }

    pub fn f_x(&self) -> f64 {
        self.f_x
    }

    pub fn rng_mut(&mut self) -> &mut ChainRng {
        &mut self.rng
    }
}

/// `z = x + (r/√n)·Q⁻¹ξ` for a given noise vector `ξ`.
pub fn propose_from_noise(metric: &MetricEval, step_size: f64, xi: &DVector<f64>) -> DVector<f64> {
    let n = metric.dim() as f64;
    &metric.at + metric.factor.solve(xi) * (step_size / n.sqrt())
}

/// Draw `z ~ N(x, (r²/n)·G(x)⁻¹)` from the chain's generator.
pub fn propose(state: &mut ChainState, step_size: f64) -> DVector<f64> {
    let xi = standard_normal(&mut state.rng, state.x.len());
    propose_from_noise(&state.metric, step_size, &xi)
}

fn log_ratio_from_parts(
    f_x: f64,
    f_z: f64,
    at_x: &MetricEval,
    at_z: &MetricEval,
    step_size: f64,
) -> f64 {
    let n = at_x.dim() as f64;
    let h = &at_z.at - &at_x.at;
    let back = at_z.factor.norm(&h).powi(2);
    let forward = at_x.factor.norm(&h).powi(2);
    (f_x - f_z) + 0.5 * (at_z.logdet() - at_x.logdet())
        - n / (2.0 * step_size * step_size) * (back - forward)
}

/// Log of the Metropolis ratio
/// `e^{−f(z)}·N(x; z, (r²/n)G(z)⁻¹) / (e^{−f(x)}·N(z; x, (r²/n)G(x)⁻¹))`
/// for interior `x = at_x.at`, `z = at_z.at`.
pub fn log_accept_ratio<T: LogConcaveTarget + ?Sized>(
    target: &T,
    at_x: &MetricEval,
    at_z: &MetricEval,
    step_size: f64,
) -> Result<f64> {
    let f_x = target.value(&at_x.at);
    let f_z = target.value(&at_z.at);
    if !f_x.is_finite() || !f_z.is_finite() {
        return Err(Error::NonFiniteTarget);
    }
    Ok(log_ratio_from_parts(f_x, f_z, at_x, at_z, step_size))
}

/// One lazy Metropolis-filtered Dikin step.
pub fn step<T: LogConcaveTarget + ?Sized>(
    state: &mut ChainState,
    target: &T,
    p: &Polytope,
    metric: &MetricKind,
    step_size: f64,
    lazy: bool,
) -> Result<StepOutcome> {
    if lazy && state.rng.random::<f64>() >= 0.5 {
        state.stats.lazy_skips += 1;
        return Ok(StepOutcome::LazySkip);
    }
    state.stats.proposed += 1;
    let z = propose(state, step_size);
    if !p.is_interior(&z) {
        state.stats.rejected_outside += 1;
        return Ok(StepOutcome::RejectedOutside);
    }
    let at_z = match metric.evaluate(p, &z) {
        Ok(m) => m,
        Err(e) => {
            state.stats.proposed -= 1;
            return Err(e);
        }
    };
    let f_z = target.value(&z);
    let log_ratio = if f_z.is_finite() {
        log_ratio_from_parts(state.f_x, f_z, &state.metric, &at_z, step_size)
    } else {
        state.stats.nonfinite_target += 1;
        f64::NEG_INFINITY
    };
    let u: f64 = state.rng.random();
    let accept = log_ratio.is_finite() && u.ln() < log_ratio;
    if accept {
        state.stats.accepted += 1;
        state.x = z;
        state.metric = at_z;
        state.f_x = f_z;
    } else {
        state.stats.rejected_mh += 1;
    }
    state.stats.record_log_ratio(log_ratio);
    Ok(if accept { StepOutcome::Accepted } else { StepOutcome::RejectedMh })
}

/// Step-size rule used during burn-in: double above 0.7 acceptance, halve
/// below 0.3, clamp to [`STEP_SIZE_RANGE`].
pub fn adapt_step_size(window_acceptance: f64, step_size: f64) -> f64 {
    let next = if window_acceptance > 0.7 {
        step_size * 2.0
    } else if window_acceptance < 0.3 {
        step_size * 0.5
    } else {
        step_size
    };
    next.clamp(STEP_SIZE_RANGE.0, STEP_SIZE_RANGE.1)
}

/// Output of [`run`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub samples: Vec<DVector<f64>>,
    /// Counters over the recorded phase only.
    pub stats: StepStats,
    pub burn_in_stats: StepStats,
    /// Step size used in the recorded phase.
    pub step_size: f64,
    pub seed: u64,
}

/// A run that stopped on an error, with the counters accumulated so far.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFailure {
    pub error: Error,
    pub stats: StepStats,
    pub completed_steps: usize,
}

impl fmt::Display for RunFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "chain aborted after {} steps: {}", self.completed_steps, self.error)
    }
}

impl core::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        Self { error, stats: StepStats::default(), completed_steps: 0 }
    }
}

/// Run a chain from `x0` with the generator seeded from `config.seed`.
pub fn run<T: LogConcaveTarget + ?Sized>(
    x0: DVector<f64>,
    target: &T,
    p: &Polytope,
    config: &WalkConfig,
) -> core::result::Result<SampleBatch, RunFailure> {
    config.validate()?;
    let state = ChainState::new(x0, target, p, &config.metric, config.seed)?;
    run_from_state(state, target, p, config)
}

/// Run `burn_in` (optionally adapting) and then `steps` iterations.
///
/// The recorded samples are `x_t` for `t = thin, 2·thin, …, ≤ steps`, so the
/// final state `x_T` is recorded whenever `thin` divides `T`. With `T = 0` the
/// output is the starting point of the recorded phase.
pub fn run_from_state<T: LogConcaveTarget + ?Sized>(
    mut state: ChainState,
    target: &T,
    p: &Polytope,
    config: &WalkConfig,
) -> core::result::Result<SampleBatch, RunFailure> {
    config.validate()?;
    let mut r = config.step_size;
    let mut window = StepStats::default();
    for t in 0..config.burn_in {
        let before = state.stats;
        step(&mut state, target, p, &config.metric, r, config.lazy).map_err(|error| {
            RunFailure { error, stats: state.stats, completed_steps: t }
        })?;
        if config.adapt {
            window.proposed += state.stats.proposed - before.proposed;
            window.accepted += state.stats.accepted - before.accepted;
            if window.proposed as usize >= config.adapt_window {
                r = adapt_step_size(window.acceptance_rate(), r);
                window = StepStats::default();
            }
        }
    }
    let burn_in_stats = core::mem::take(&mut state.stats);

    let mut samples = Vec::with_capacity(config.steps / config.thin + 1);
    if config.steps == 0 {
        samples.push(state.x.clone());
    }
    for t in 1..=config.steps {
        step(&mut state, target, p, &config.metric, r, config.lazy).map_err(|error| {
            RunFailure { error, stats: state.stats, completed_steps: config.burn_in + t - 1 }
        })?;
        if t % config.thin == 0 {
            samples.push(state.x.clone());
        }
    }
    Ok(SampleBatch { samples, stats: state.stats, burn_in_stats, step_size: r, seed: config.seed })
}
