//! High-effort CTM against the discrete linear threshold model.

use ctm_core::integrator::IntegratorConfig;
use ctm_core::ltm::{ctm_ltm_agreement, ltm_fixed_point, AgentSet, AgreementReport};
use ctm_core::network::{Network, ThreeClusterSpec};

fn integ() -> IntegratorConfig<f64> {
    IntegratorConfig::rk4(0.002, 20.0)
}

fn compare(net: &Network<f64>, seeds: &[usize]) -> AgreementReport {
    let seeds: AgentSet = seeds.iter().copied().collect();
    ctm_ltm_agreement(net, &seeds, 200.0, &integ()).unwrap()
}

fn triangle(mu: f64) -> Network<f64> {
    Network::from_edges(3, &[(0, 1), (1, 2), (0, 2)], vec![mu; 3]).unwrap()
}

#[test]
fn triangle_activates_all() {
    let r = compare(&triangle(0.4), &[0]);
    assert!(r.conclusive());
    assert!(r.matches, "{r:?}");
    assert!(r.switch_order_match);
    assert_eq!(r.ltm_activation_order, vec![vec![1, 2]]);
    assert!(r.tied_agents.is_empty());
}

#[test]
fn triangle_tie_is_flagged() {
    // one of two neighbours active against mu = 1/2
    let r = compare(&triangle(0.5), &[0]);
    assert_eq!(r.ltm_active, [0].into());
    assert_eq!(r.tied_agents, vec![1, 2]);
}

fn seed_sets(size: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = vec![vec![]];
    let mut frontier = out.clone();
    for _ in 0..max {
        let mut next = Vec::new();
        for s in &frontier {
            let start = s.last().map_or(0, |&l| l + 1);
            for i in start..size {
                let mut t = s.clone();
                t.push(i);
                next.push(t);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out.retain(|s| !s.is_empty());
    out
}

#[test]
fn three_cluster_networks_agree() {
    let cases = [(5, 2, 0.2, 3), (7, 2, 0.2, 3), (7, 3, 0.1, 3), (9, 3, 0.3, 3), (11, 4, 0.2, 3), (13, 5, 0.15, 2), (15, 4, 0.25, 2)];
    let (mut checked, mut tied) = (0, 0);
    for (total, n, eps, max_seeds) in cases {
        let net = Network::three_cluster(&ThreeClusterSpec::new(total, n, eps)).unwrap();
        for seeds in seed_sets(total, max_seeds) {
            let r = compare(&net, &seeds);
            if !r.ltm_converged {
                continue;
            }
            if !r.tied_agents.is_empty() {
                tied += 1;
                continue;
            }
            checked += 1;
            let ctx = format!("N={total} n={n} eps={eps} seeds={seeds:?}: {r:?}");
            assert!(r.ctm_steady, "{ctx}");
            assert!(r.matches, "{ctx}");
            assert!(r.switch_order_match, "{ctx}");
        }
    }
    assert!(checked > 500, "only {checked} tie-free cases ({tied} tied)");
}

#[test]
fn mismatches_only_at_ties() {
    let net = Network::three_cluster(&ThreeClusterSpec::new(11, 4, 0.2)).unwrap();
    for seeds in seed_sets(11, 2) {
        let r = compare(&net, &seeds);
        if r.ltm_converged && !r.matches {
            assert!(!r.tied_agents.is_empty(), "untied mismatch for {seeds:?}: {r:?}");
        }
    }
}

#[test]
fn ltm_is_monotone_in_seeds() {
    let net = Network::three_cluster(&ThreeClusterSpec::new(11, 4, 0.1)).unwrap();
    for seeds in seed_sets(11, 2) {
        let base: AgentSet = seeds.iter().copied().collect();
        let out = ltm_fixed_point(&net, &base).unwrap();
        assert!(out.active.is_superset(&base));
        for extra in 0..11 {
            let mut more = base.clone();
            more.insert(extra);
            assert!(ltm_fixed_point(&net, &more).unwrap().active.is_superset(&out.active));
        }
    }
}
