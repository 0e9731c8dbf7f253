//! Continuous threshold model (CTM) of cascade dynamics.
//!
//! Agents hold a real state `x_i`; an agent is "active" when `x_i > 0`. The
//! network dynamics are
//!
//! ```text
//! x_i' = -d_i x_i + sum_j a_ij u S(v x_j) + d_i (1 - 2 mu_i) + beta_i
//! ```
//!
//! with `S` a sigmoid, `mu_i` the threshold and `u` a gain that may be driven
//! by a low-pass filter of the population average. On the three-cluster
//! network (two clusters of size `n` with thresholds `1/2 -+ eps` and a neutral
//! cluster) the dynamics reduce exactly to three cluster averages, whose
//! symmetric equilibrium undergoes a pitchfork bifurcation in `u`.
//!
//! Numerics are generic over [`Real`] (`f32`, `f64`); the `*64` aliases fix
//! double precision.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bifurcation;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod integrator;
pub mod ltm;
pub mod network;
pub mod reduced;
pub mod scalar;
pub mod sigmoid;

pub use analysis::{
    branch_continuation, classify_reduced, classify_response, classify_trajectory, cluster_coherence,
    fit_cubic_normal_form, gain_grid, BranchDiagram, BranchEquilibrium, BranchSlice, CoherenceSeries, NormalFormFit,
    ResponseClass, ResponseKind, ResponseThresholds,
};
pub use bifurcation::{
    classify_pitchfork, eps_at_transition, expansion_coeffs, find_bifurcation_point, find_transition,
    invert_cubic_series, lambda3_curve, lambda3_transition, lambda_coeffs, min_n_for_cascade, quadratic_coeffs,
    sweep_cluster_size, u_at_transition, BifurcationPoint, ExpansionCoeffs, PitchforkClass, PitchforkKind,
    QuadraticCoeffs, SweepRow, TransitionReport,
};
pub use dynamics::{
    control_gain, ctm_vector_field, negative_mean_initial_state, simulate, simulate_system, ControllerState,
    CtmParams, CtmSystem, GainMode, InputSchedule, Trajectory,
};
pub use error::{CtmError, Result};
pub use export::ConfigRecord;
pub use integrator::{integrate, IntegratorConfig, Method, Solution};
pub use ltm::{ctm_ltm_agreement, ltm_fixed_point, ltm_step, AgentSet, AgreementReport, LtmOutcome};
pub use network::{ClusterLabel, ClusterSizes, Network, ThreeClusterSpec};
pub use reduced::{
    principal_y_star, simulate_reduced, solve_y_star, PrincipalBranch, ReducedState, ReducedSystem,
    ReducedTrajectory, SymmetricEquilibrium,
};
pub use scalar::Real;
pub use sigmoid::Sigmoid;

pub type Network64 = Network<f64>;
pub type Network32 = Network<f32>;
pub type CtmParams64 = CtmParams<f64>;
pub type Trajectory64 = Trajectory<f64>;
pub type ReducedSystem64 = ReducedSystem<f64>;
pub type ReducedSystem32 = ReducedSystem<f32>;
pub type ReducedState64 = ReducedState<f64>;
pub type IntegratorConfig64 = IntegratorConfig<f64>;
pub type TransitionReport64 = TransitionReport<f64>;
pub type PitchforkClass64 = PitchforkClass<f64>;
