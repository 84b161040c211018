//! Regularized Dikin walks for logconcave distributions truncated on polytopes.
//!
//! The crate samples `π(x) ∝ 1_K(x)·exp(−f(x))` on an open H-polytope
//! `K = {x | Ax > b}` with a Metropolis-filtered Gaussian proposal whose
//! covariance is the inverse of a regularized local metric `G(x) = H(x) + λI`.
//! Two metrics are provided: the soft-threshold (log-barrier) metric and the
//! regularized Lewis metric.
//!
//! Besides the walk itself the crate carries the pieces needed around a run:
//!
//! - [`target`]: negative log-densities and Gaussian preconditioning,
//! - [`planner`]: mode solvers, warm-start balls and closed-form mixing budgets,
//! - [`diagnostics`]: ground-truth oracles, cross-ratio/Hilbert distances and
//!   numeric self-concordance checks.
//!
//! The crate is `no_std` (with `alloc`) when built without the default `std`
//! feature. File formats and the command-line tool live in the `dikin` crate.
//!
//! ```
//! use dikin_core::{metrics::MetricKind, polytope::Polytope, target::FnTarget, walk};
//! use nalgebra::DVector;
//!
//! let cube = Polytope::make_box(&[0.0; 2], &[1.0; 2]).unwrap();
//! let uniform = FnTarget::flat(2);
//! let config = walk::WalkConfig {
//!     metric: MetricKind::soft_threshold(1.0),
//!     steps: 200,
//!     seed: 3,
//!     ..Default::default()
//! };
//! let batch = walk::run(DVector::from_element(2, 0.5), &uniform, &cube, &config).unwrap();
//! assert_eq!(batch.samples.len(), 200);
//! assert!(batch.samples.iter().all(|x| cube.contains(x).unwrap()));
//! ```
#![cfg_attr(not(feature = "std"), no_std)]
// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod diagnostics;
mod error;
pub mod linalg;
pub mod metrics;
pub mod planner;
pub mod polytope;
pub mod target;
pub mod walk;

pub use error::{Error, Result};

/// Generator used for every chain and every randomized checker.
///
/// ChaCha20 is counter-based and identical across platforms; one generator
/// (one stream) is owned by each chain.
pub type ChainRng = rand_chacha::ChaCha20Rng;
