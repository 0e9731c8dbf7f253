//! Discrete linear threshold model and its comparison with the CTM in the
//! high-effort limit.
//!
//! An inactive agent activates when the fraction of its active neighbors is
//! strictly greater than its threshold; equality does not activate. Active
//! agents stay active, so from any seed set the process only grows.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::dynamics::{simulate_system, CtmParams, CtmSystem, InputSchedule};
use crate::error::{CtmError, Result};
use crate::integrator::IntegratorConfig;
use crate::network::Network;
use crate::scalar::Real;

pub type AgentSet = BTreeSet<usize>;

/// Initial state given to seeded agents in the CTM comparison.
pub const SEED_STATE: f64 = 3.0;
/// Initial state given to unseeded agents in the CTM comparison.
pub const UNSEEDED_STATE: f64 = -1.0;
/// Crossings closer in time than this count as simultaneous.
const SIMULTANEITY_TOL: f64 = 1e-9;

fn active_fraction<T: Real>(network: &Network<T>, active: &[bool], i: usize) -> T {
    let count = network.neighbors(i).filter(|&j| active[j]).count();
    T::count(count) / T::count(network.degree(i))
}

fn check_no_isolated<T: Real>(network: &Network<T>) -> Result<()> {
    match (0..network.len()).find(|&i| network.degree(i) == 0) {
        Some(i) => Err(CtmError::Config(format!("agent {i} is isolated (degree 0)"))),
        None => Ok(()),
    }
}

fn to_mask(size: usize, set: &AgentSet) -> Result<Vec<bool>> {
    let mut mask = vec![false; size];
    for &i in set {
        if i >= size {
            return Err(CtmError::Usage(format!("agent {i} out of range for N = {size}")));
        }
        mask[i] = true;
    }
    Ok(mask)
}

/// One synchronous update: the current active set plus every agent whose
/// active-neighbor fraction exceeds its threshold.
pub fn ltm_step<T: Real>(network: &Network<T>, active: &AgentSet) -> Result<AgentSet> {
    check_no_isolated(network)?;
    let mask = to_mask(network.len(), active)?;
    Ok(step_mask(network, &mask).into_iter().enumerate().filter(|(_, a)| *a).map(|(i, _)| i).collect())
}

fn step_mask<T: Real>(network: &Network<T>, mask: &[bool]) -> Vec<bool> {
    (0..network.len())
        .map(|i| mask[i] || active_fraction(network, mask, i) > network.thresholds()[i])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LtmOutcome {
    pub active: AgentSet,
    /// Agents activated in each round, in order.
    pub activation_order: Vec<Vec<usize>>,
    pub converged: bool,
    pub steps: usize,
}

/// Iterates [`ltm_step`] from `seeds` until nothing changes (at most `4 N`
/// rounds).
pub fn ltm_fixed_point<T: Real>(network: &Network<T>, seeds: &AgentSet) -> Result<LtmOutcome> {
    check_no_isolated(network)?;
    let size = network.len();
    let mut mask = to_mask(size, seeds)?;
    let mut order = Vec::new();
    for step in 0..4 * size.max(1) {
        let next = step_mask(network, &mask);
        let newly: Vec<usize> = (0..size).filter(|&i| next[i] && !mask[i]).collect();
        if newly.is_empty() {
            return Ok(LtmOutcome {
                active: mask_to_set(&mask),
                activation_order: order,
                converged: true,
                steps: step,
            });
        }
        order.push(newly);
        mask = next;
    }
    Ok(LtmOutcome { active: mask_to_set(&mask), activation_order: order, converged: false, steps: 4 * size })
}

fn mask_to_set(mask: &[bool]) -> AgentSet {
    mask.iter().enumerate().filter(|(_, a)| **a).map(|(i, _)| i).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementReport {
    pub ctm_active: AgentSet,
    pub ltm_active: AgentSet,
    pub ltm_activation_order: Vec<Vec<usize>>,
    /// Unseeded agents in order of their first upward zero crossing, with time.
    pub ctm_switch_order: Vec<(usize, f64)>,
    pub ltm_converged: bool,
    pub ctm_steady: bool,
    /// Unseeded agents whose active fraction equals their threshold at the
    /// LTM fixed point. The CTM limit does not decide these.
    pub tied_agents: Vec<usize>,
    pub matches: bool,
    /// The CTM switched exactly the agents the LTM activated, and every
    /// switch is an LTM-admissible step: at its crossing time the agent's
    /// fraction of seeded or already-switched neighbours exceeds its
    /// threshold. Synchronous LTM rounds need not be preserved; within a
    /// round, agents with a stronger drive switch first.
    pub switch_order_match: bool,
}

impl AgreementReport {
    /// Both models settled, so the comparison means something.
    pub fn conclusive(&self) -> bool {
        self.ltm_converged && self.ctm_steady
    }
}

/// Runs the CTM with `u = 1` and effort `v` from seeded (`+3`, held fixed)
/// and unseeded (`-1`) initial states, and compares with the LTM.
pub fn ctm_ltm_agreement<T: Real>(
    network: &Network<T>,
    seeds: &AgentSet,
    v: T,
    integ: &IntegratorConfig<T>,
) -> Result<AgreementReport> {
    let size = network.len();
    let ltm = ltm_fixed_point(network, seeds)?;
    let seed_mask = to_mask(size, seeds)?;

    let params = CtmParams::fixed(T::one()).with_v(v);
    let sys = CtmSystem::new(network, params, InputSchedule::none())?.with_frozen(seed_mask.clone())?;
    let x0: Vec<T> = seed_mask
        .iter()
        .map(|&s| T::lit(if s { SEED_STATE } else { UNSEEDED_STATE }))
        .collect();
    let traj = simulate_system(sys, &x0, T::zero(), integ)?;

    let ctm_active: AgentSet = traj
        .final_state()
        .iter()
        .enumerate()
        .filter(|(_, &x)| x > T::zero())
        .map(|(i, _)| i)
        .collect();

    let mut crossings: Vec<(usize, f64)> = Vec::new();
    for i in (0..size).filter(|&i| !seed_mask[i]) {
        let hit = traj.states.windows(2).zip(traj.times.windows(2)).find_map(|(s, t)| {
            (s[0][i] < T::zero() && s[1][i] >= T::zero()).then(|| {
                // linear interpolation inside the step
                let (a, b) = (s[0][i].as_f64(), s[1][i].as_f64());
                let (ta, tb) = (t[0].as_f64(), t[1].as_f64());
                ta + (tb - ta) * (-a) / (b - a)
            })
        });
        if let Some(t) = hit {
            crossings.push((i, t));
        }
    }
    crossings.sort_by(|a, b| a.1.total_cmp(&b.1));

    // each crossing must be explained by the seeds and earlier crossings
    let crossed: AgentSet = crossings.iter().map(|&(i, _)| i).collect();
    let activated: AgentSet = ltm.activation_order.iter().flatten().copied().collect();
    let mut causal = true;
    for &(i, t) in &crossings {
        let mut mask = seed_mask.clone();
        for &(j, tj) in &crossings {
            if tj < t - SIMULTANEITY_TOL {
                mask[j] = true;
            }
        }
        if active_fraction(network, &mask, i) <= network.thresholds()[i] {
            causal = false;
            break;
        }
    }
    let switch_order_match = crossed == activated && causal;

    let final_mask: Vec<bool> = (0..size).map(|i| ltm.active.contains(&i)).collect();
    let tol = T::tol(1e-12);
    let tied_agents = (0..size)
        .filter(|&i| !seed_mask[i])
        .filter(|&i| (active_fraction(network, &final_mask, i) - network.thresholds()[i]).abs() <= tol)
        .collect();

    Ok(AgreementReport {
        matches: ctm_active == ltm.active,
        ctm_active,
        ltm_active: ltm.active,
        ltm_activation_order: ltm.activation_order,
        ctm_switch_order: crossings,
        ltm_converged: ltm.converged,
        ctm_steady: traj.steady_state_reached,
        tied_agents,
        switch_order_match,
    })
}
