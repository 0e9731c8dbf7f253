//! Full-network cascade from a negative-mean start on the (11, 4) network.

use ctm_core::analysis::{classify_trajectory, cluster_coherence, ResponseKind, ResponseThresholds};
use ctm_core::dynamics::{negative_mean_initial_state, simulate, CtmParams, InputSchedule};
use ctm_core::integrator::IntegratorConfig;
use ctm_core::bifurcation::find_bifurcation_point;
use ctm_core::network::{ClusterSizes, Network, ThreeClusterSpec};
use ctm_core::AgentSet;

const SEED: u64 = 7;

fn run(seed: u64) -> (Network<f64>, ctm_core::Trajectory<f64>) {
    let net = Network::three_cluster(&ThreeClusterSpec::new(11, 4, 0.2)).unwrap();
    let params = CtmParams::feedback(3.0, 10.0, 0.05);
    let x0 = negative_mean_initial_state(11, Some(0), seed);
    let integ = IntegratorConfig::rk4(0.01, 200.0);
    let traj = simulate(&net, &params, &x0, 0.0, &InputSchedule::persistent(0, 1.0), &integ).unwrap();
    (net, traj)
}

#[test]
fn negative_start_cascades() {
    let (net, traj) = run(SEED);
    let x0 = &traj.states[0];
    assert!(x0.iter().sum::<f64>() < 0.0);

    let class = classify_trajectory(&traj, &ResponseThresholds::default()).unwrap();
    assert_eq!(class.kind, ResponseKind::Cascade, "{class:?}");

    let exclude: AgentSet = [0].into();
    let spread = cluster_coherence(&traj, &net, &exclude).unwrap().final_spread();
    assert!(spread.iter().all(|&s| s < 1e-6), "{spread:?}");

    let last = traj.final_state();
    let max = last.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(last[0], max);
    assert!(last[1..].iter().all(|&x| x < last[0]));
}

#[test]
fn cascade_is_seed_robust() {
    let u_c = find_bifurcation_point(ClusterSizes::new(11, 4), 0.2).unwrap().u_c;
    for seed in 0..10 {
        let (_, traj) = run(seed);
        let class = classify_trajectory(&traj, &ResponseThresholds::default()).unwrap();
        assert_eq!(class.kind, ResponseKind::Cascade, "seed {seed}");
        // the jump follows the slow drift of u up to the unforced bifurcation
        let u = class.u_at_jump.unwrap();
        assert!(u > 1.0 && u < u_c, "seed {seed}: u = {u}");
        assert!(class.jump_time.unwrap() > 50.0);
    }
}

#[test]
fn decimation_keeps_class() {
    let (_, traj) = run(SEED);
    let th = ResponseThresholds::default();
    let full = classify_trajectory(&traj, &th).unwrap().kind;
    let half = classify_trajectory(&traj.decimated(2), &th).unwrap().kind;
    assert_eq!(full, half);
}

#[test]
fn coherence_decays_exponentially() {
    let (net, traj) = run(SEED);
    let exclude: AgentSet = [0].into();
    let coh = cluster_coherence(&traj, &net, &exclude).unwrap();
    // log of the total spread against time over [1, 4], above the round-off floor
    let pts: Vec<(f64, f64)> = coh
        .times
        .iter()
        .zip(&coh.spreads)
        .filter(|(t, _)| **t >= 1.0 && **t <= 4.0)
        .map(|(t, s)| (*t, (s[0] + s[1] + s[2]).ln()))
        .collect();
    let m = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / m, pts.iter().map(|p| p.1).sum::<f64>() / m);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let r2 = sxy * sxy / (sxx * syy);
    assert!(sxy / sxx < 0.0);
    assert!(r2 >= 0.99, "R^2 = {r2}");
}
