use dikin_core::diagnostics::{compare_chain_moments, rejection_oracle};
use dikin_core::metrics::{LewisParams, MetricKind};
use dikin_core::planner::{sample_warm_start, solve_modes, warm_start_ball};
use dikin_core::polytope::Polytope;
use dikin_core::target::{precondition_gaussian, quadratic_target, FnTarget, GaussianTarget, LogConcaveTarget};
use dikin_core::walk::{self, ChainState, WalkConfig};
use dikin_core::ChainRng;
use nalgebra::{dvector, DMatrix, DVector};
use rand::SeedableRng;

fn correlated_gaussian() -> GaussianTarget {
    let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 0.5]);
    GaussianTarget::new(dvector![0.3, -0.2], cov).unwrap()
}

fn pentagon() -> Polytope {
    let a = DMatrix::from_row_slice(5, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0, 1.0, 1.0]);
    Polytope::new(a, dvector![-1.0, -2.0, -1.0, -2.0, -0.5]).unwrap()
}

#[test]
fn preconditioned_chain_matches_oracle_in_original_coordinates() {
    let g = correlated_gaussian();
    let p = pentagon();
    let (reduced, back) = precondition_gaussian(&g, &p).unwrap();
    let standard = quadratic_target(&GaussianTarget::standard(2)).unwrap();
    let y0 = back.linear.clone().try_inverse().unwrap() * (dvector![0.0, 0.0] - &back.shift);
    assert!(reduced.contains(&y0).unwrap());
    let config = WalkConfig {
        metric: MetricKind::soft_threshold(1.0),
        steps: 60_000,
        burn_in: 5_000,
        thin: 5,
        seed: 8,
        ..Default::default()
    };
    let batch = walk::run(y0, &standard, &reduced, &config).unwrap();
    let mapped = back.map_samples(&batch.samples).unwrap();
    assert!(mapped.iter().all(|x| p.contains(x).unwrap()));
    let mut rng = ChainRng::seed_from_u64(1);
    let oracle = rejection_oracle(&g, &p, 40_000, &mut rng).unwrap().samples;
    let report = compare_chain_moments(&mapped, &oracle, 40).unwrap();
    assert!(report.max_abs_z < 4.0, "{:?}", report.z_scores);
}

#[test]
fn warm_start_feeds_a_lewis_chain() {
    let p = pentagon();
    let g = correlated_gaussian();
    let target = quadratic_target(&g).unwrap();
    let modes = solve_modes(&target, &p, 1e-10, 100_000).unwrap();
    assert!(modes.converged);
    let ball = warm_start_ball(&target, &p, &dvector![0.5, 0.5], 0.5, &modes, None).unwrap();
    let mut rng = ChainRng::seed_from_u64(2);
    let x0 = sample_warm_start(&ball, &mut rng);
    assert!((&x0 - &ball.x0).norm() < ball.r0);
    let config = WalkConfig {
        metric: MetricKind::RegularizedLewis(LewisParams::new(target.beta())),
        steps: 2_000,
        burn_in: 500,
        seed: 3,
        ..Default::default()
    };
    let batch = walk::run(x0, &target, &p, &config).unwrap();
    assert_eq!(batch.samples.len(), 2_000);
    assert!(batch.samples.iter().all(|x| p.contains(x).unwrap()));
    assert!(batch.stats.acceptance_rate() > 0.2);
}

#[test]
fn chain_state_and_run_share_a_trajectory() {
    let p = Polytope::make_simplex(3);
    let target = FnTarget::flat(3);
    let kind = MetricKind::soft_threshold(1.0);
    let x0 = DVector::from_element(3, 0.2);
    let config = WalkConfig { metric: kind, steps: 300, adapt: false, seed: 44, ..Default::default() };
    let batch = walk::run(x0.clone(), &target, &p, &config).unwrap();
    let state = ChainState::new(x0, &target, &p, &kind, 44).unwrap();
    let again = walk::run_from_state(state, &target, &p, &config).unwrap();
    assert_eq!(batch.samples, again.samples);
    assert_eq!(batch.stats, again.stats);
}
