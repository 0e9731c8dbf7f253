//! Numerical oracles and trajectory analytics.
//!
//! The normal-form fit and branch continuation work in `f64` on top of
//! nalgebra; the trajectory analytics are generic.

use std::collections::VecDeque;
use std::io::{self, Write};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::bifurcation::check_sigmoid;
use crate::dynamics::Trajectory;
use crate::error::{CtmError, Result};
use crate::export::{write_row, ConfigRecord};
use crate::ltm::AgentSet;
use crate::network::{ClusterLabel, ClusterSizes, Network};
use crate::reduced::{bisect_root, principal_y_star, PrincipalBranch, ReducedState, ReducedSystem, ReducedTrajectory};
use crate::scalar::Real;

/// Cubic normal form `lambda1 d + lambda3 d^3` recovered by brute force.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalFormFit {
    pub lambda1: f64,
    pub lambda3: f64,
    /// Offsets `dy3` sampled.
    pub offsets: Vec<f64>,
    /// `dy3'` at each offset with clusters 1 and 2 at equilibrium.
    pub rates: Vec<f64>,
    /// `max |rate - (lambda1 d + lambda3 d^3)|`.
    pub max_residual: f64,
}

/// Step and count of the `dy3` offsets (both signs).
const FIT_STEP: f64 = 0.01;
const FIT_POINTS: usize = 5;

/// Fits the one-dimensional equilibrium condition around the principal
/// symmetric equilibrium at `(eps, u)`.
///
/// For each offset `d` of cluster 3, the first two equilibrium conditions
/// are solved for clusters 1 and 2, and the third equation gives `d'`.
/// `d'` is odd in `d`; the fit uses odd powers through `d^7` so that the
/// quintic and higher terms do not leak into `lambda3`.
pub fn fit_cubic_normal_form(sizes: ClusterSizes, epsilon: f64, u: f64) -> Result<NormalFormFit> {
    let sys = ReducedSystem::new(sizes, epsilon, u)?;
    let y_star = principal_y_star(sizes, epsilon, u)?.y_star;
    let mut offsets = Vec::with_capacity(2 * FIT_POINTS);
    for k in 1..=FIT_POINTS {
        let d = FIT_STEP * k as f64;
        offsets.extend([d, -d]);
    }
    let mut rates = Vec::with_capacity(offsets.len());
    for &d in &offsets {
        let shift1 = |a: f64| sys.field(ReducedState::new(y_star + a, -y_star, d)).y1;
        let shift2 = |a: f64| sys.field(ReducedState::new(y_star, -y_star + a, d)).y2;
        let a1 = small_root(shift1)
            .ok_or_else(|| CtmError::Inconclusive(format!("cluster 1 root not found at dy3 = {d}")))?;
        let a2 = small_root(shift2)
            .ok_or_else(|| CtmError::Inconclusive(format!("cluster 2 root not found at dy3 = {d}")))?;
        rates.push(sys.field(ReducedState::new(y_star + a1, -y_star + a2, d)).y3);
    }

    // scaled odd basis s, s^3, s^5, s^7 with s = d / scale
    let scale = FIT_STEP * FIT_POINTS as f64;
    let powers = [1, 3, 5, 7];
    let design = DMatrix::from_fn(offsets.len(), powers.len(), |i, j| (offsets[i] / scale).powi(powers[j]));
    let rhs = DVector::from_column_slice(&rates);
    let coef = design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-14)
        .map_err(|e| CtmError::Inconclusive(format!("least squares failed: {e}")))?;
    let lambda1 = coef[0] / scale;
    let lambda3 = coef[1] / scale.powi(3);
    let fitted = &design * &coef;
    let max_residual = (fitted - rhs).amax();
    Ok(NormalFormFit { lambda1, lambda3, offsets, rates, max_residual })
}

/// Root of `f` nearest zero, bracketed on widening symmetric intervals.
fn small_root(f: impl Fn(f64) -> f64) -> Option<f64> {
    [0.05, 0.2, 0.5, 1.0].iter().find_map(|&h| bisect_root(&f, -h, h))
}

/// Equilibrium of the reduced model with its stability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BranchEquilibrium {
    pub state: [f64; 3],
    pub y_bar: f64,
    pub stable: bool,
    /// Largest real part of the Jacobian spectrum.
    pub leading_real_part: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchSlice {
    pub u: f64,
    /// Sorted by `y_bar`.
    pub equilibria: Vec<BranchEquilibrium>,
    /// Newton failed from every start.
    pub empty: bool,
    /// Some equilibrium lies within 1e-3 of the start lattice boundary, so
    /// equilibria outside the lattice may have been missed.
    pub near_boundary: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchDiagram {
    pub sizes: ClusterSizes,
    pub epsilon: f64,
    pub beta: f64,
    pub slices: Vec<BranchSlice>,
}

impl BranchDiagram {
    pub fn u_values(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.u).collect()
    }

    /// First gain at which the equilibrium continued from the principal
    /// symmetric one is unstable (unforced diagrams only).
    pub fn symmetric_loss_of_stability(&self) -> Result<Option<f64>> {
        let u_max = self.slices.iter().map(|s| s.u).fold(0.0, f64::max);
        let branch = PrincipalBranch::new(self.sizes, self.epsilon, u_max)?;
        for slice in &self.slices {
            let y = branch.at(slice.u)?;
            let target = [y, -y, 0.0];
            let hit = slice.equilibria.iter().find(|e| {
                e.state.iter().zip(target).all(|(a, b)| (a - b).abs() <= DEDUP_TOL * 10.0)
            });
            match hit {
                Some(e) if !e.stable => return Ok(Some(slice.u)),
                Some(_) => {}
                None => {
                    return Err(CtmError::Inconclusive(format!(
                        "symmetric equilibrium not found at u = {}",
                        slice.u
                    )))
                }
            }
        }
        Ok(None)
    }

    /// CSV with columns `u, y_bar, stable` (one row per equilibrium).
    pub fn write_csv<W: Write>(&self, config: &ConfigRecord, w: &mut W) -> io::Result<()> {
        config.write_header(w)?;
        writeln!(w, "u,y_bar,stable")?;
        for s in &self.slices {
            for e in &s.equilibria {
                writeln!(w, "{:.16e},{:.16e},{}", s.u, e.y_bar, u8::from(e.stable))?;
            }
        }
        Ok(())
    }
}

const LATTICE: [f64; 7] = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
const DEDUP_TOL: f64 = 1e-6;
const NEWTON_TOL: f64 = 1e-12;
const NEWTON_ITERS: usize = 100;

fn to_matrix(j: [[f64; 3]; 3]) -> Matrix3<f64> {
    Matrix3::from_fn(|r, c| j[r][c])
}

/// Damped Newton with backtracking on `|F|_inf`.
fn newton(sys: &ReducedSystem<f64>, start: [f64; 3]) -> Option<[f64; 3]> {
    let norm = |y: &Vector3<f64>| sys.field(ReducedState::new(y[0], y[1], y[2])).sup_norm();
    let mut y = Vector3::from(start);
    let mut r = norm(&y);
    for _ in 0..NEWTON_ITERS {
        if r <= NEWTON_TOL {
            return Some([y[0], y[1], y[2]]);
        }
        let s = ReducedState::new(y[0], y[1], y[2]);
        let f = Vector3::from(sys.field(s).to_array());
        let step = to_matrix(sys.jacobian(s)).lu().solve(&(-f))?;
        let mut t = 1.0;
        loop {
            let trial = y + step * t;
            let rt = norm(&trial);
            if rt < r || t < 1e-6 {
                y = trial;
                r = rt;
                break;
            }
            t *= 0.5;
        }
        if !r.is_finite() {
            return None;
        }
    }
    (r <= NEWTON_TOL * 10.0).then(|| [y[0], y[1], y[2]])
}

fn equilibria_at(sys: &ReducedSystem<f64>) -> BranchSlice {
    let mut found: Vec<[f64; 3]> = Vec::new();
    for &a in &LATTICE {
        for &b in &LATTICE {
            for &c in &LATTICE {
                if let Some(y) = newton(sys, [a, b, c]) {
                    if !found.iter().any(|f| f.iter().zip(y).all(|(p, q)| (p - q).abs() <= DEDUP_TOL)) {
                        found.push(y);
                    }
                }
            }
        }
    }
    let bound = LATTICE[LATTICE.len() - 1] - 1e-3;
    let near_boundary = found.iter().any(|y| y.iter().any(|v| v.abs() >= bound));
    let mut equilibria: Vec<BranchEquilibrium> = found
        .into_iter()
        .map(|y| {
            let s = ReducedState::new(y[0], y[1], y[2]);
            let eig = to_matrix(sys.jacobian(s)).complex_eigenvalues();
            let leading = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
            BranchEquilibrium { state: y, y_bar: sys.y_bar(s), stable: leading < 0.0, leading_real_part: leading }
        })
        .collect();
    equilibria.sort_by(|p, q| p.y_bar.total_cmp(&q.y_bar));
    BranchSlice { u: sys.u, empty: equilibria.is_empty(), near_boundary, equilibria }
}

/// Equilibria of the reduced model (with a single-agent input `beta` on
/// cluster 1, entering as `beta / n`) across a grid of gains.
pub fn branch_continuation(
    sizes: ClusterSizes,
    epsilon: f64,
    u_values: &[f64],
    beta: f64,
) -> Result<BranchDiagram> {
    sizes.check_for_analysis()?;
    if !(beta >= 0.0) {
        return Err(CtmError::Usage(format!("beta = {beta} must be non-negative")));
    }
    let limit = 1.5 * (sizes.total - 1) as f64 / (sizes.total - 2 * sizes.n - 1) as f64;
    if let Some(bad) = u_values.iter().find(|&&u| !(0.0..=limit).contains(&u)) {
        return Err(CtmError::Usage(format!("gain {bad} outside [0, {limit}]")));
    }
    let base = ReducedSystem::new(sizes, epsilon, 0.0)?.with_agent_input(beta);
    check_sigmoid(base.sigmoid)?;
    let slices = u_values.par_iter().map(|&u| equilibria_at(&base.with_gain(u))).collect();
    Ok(BranchDiagram { sizes, epsilon, beta, slices })
}

/// Evenly spaced gains, endpoints included.
pub fn gain_grid(u_min: f64, u_max: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 || !(u_max > u_min) {
        return Err(CtmError::Usage(format!("bad gain grid [{u_min}, {u_max}] with {steps} points")));
    }
    let h = (u_max - u_min) / (steps - 1) as f64;
    Ok((0..steps).map(|k| if k + 1 == steps { u_max } else { u_min + h * k as f64 }).collect())
}

/// Per-cluster state spread over time.
#[derive(Debug, Clone, PartialEq)]
pub struct CoherenceSeries<T> {
    pub times: Vec<T>,
    /// `max - min` of member states per cluster (0 for an empty cluster).
    pub spreads: Vec<[T; 3]>,
}

impl<T: Real> CoherenceSeries<T> {
    pub fn final_spread(&self) -> [T; 3] {
        self.spreads.last().copied().unwrap_or([T::zero(); 3])
    }

    /// CSV with columns `t, spread_c1, spread_c2, spread_c3`.
    pub fn write_csv<W: Write>(&self, config: &ConfigRecord, w: &mut W) -> io::Result<()> {
        config.write_header(w)?;
        writeln!(w, "t,spread_c1,spread_c2,spread_c3")?;
        for (t, s) in self.times.iter().zip(&self.spreads) {
            write_row(w, &[*t, s[0], s[1], s[2]])?;
        }
        Ok(())
    }
}

pub fn cluster_coherence<T: Real>(
    traj: &Trajectory<T>,
    network: &Network<T>,
    exclude: &AgentSet,
) -> Result<CoherenceSeries<T>> {
    if traj.states.first().is_some_and(|s| s.len() != network.len()) {
        return Err(CtmError::Usage(format!(
            "trajectory has {} agents, network {}",
            traj.states[0].len(),
            network.len()
        )));
    }
    let groups: Vec<Vec<usize>> = [ClusterLabel::High, ClusterLabel::Low, ClusterLabel::Neutral]
        .iter()
        .map(|&l| network.members(l).into_iter().filter(|i| !exclude.contains(i)).collect())
        .collect();
    let spreads = traj
        .states
        .iter()
        .map(|x| {
            let mut out = [T::zero(); 3];
            for (k, g) in groups.iter().enumerate() {
                if g.is_empty() {
                    continue;
                }
                let (lo, hi) = g
                    .iter()
                    .fold((T::infinity(), T::neg_infinity()), |(lo, hi), &i| (lo.min(x[i]), hi.max(x[i])));
                out[k] = hi - lo;
            }
            out
        })
        .collect();
    Ok(CoherenceSeries { times: traj.times.clone(), spreads })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ResponseKind {
    Contained,
    Cascade,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponseClass<T> {
    pub kind: ResponseKind,
    /// Start of the first window holding the jump.
    pub jump_time: Option<T>,
    pub jump_magnitude: Option<T>,
    pub u_at_jump: Option<T>,
}

/// Thresholds for [`classify_response`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResponseThresholds<T> {
    /// Rise of the average within one window that counts as a cascade.
    pub jump: T,
    pub window: T,
    /// Final average above which a non-jumping response is "contained".
    pub contained: T,
    /// Windows starting this soon after the first sample are ignored, so the
    /// initial relaxation onto the cluster manifold is not read as a jump.
    pub transient: T,
}

impl<T: Real> Default for ResponseThresholds<T> {
    fn default() -> Self {
        Self { jump: T::lit(0.5), window: T::lit(5.0), contained: T::lit(0.05), transient: T::lit(5.0) }
    }
}

/// Classifies a response from the population average `y_bar(t)` and the
/// gain `u(t)`, sampled at increasing `times`.
pub fn classify_response<T: Real>(
    times: &[T],
    y_bar: &[T],
    u: &[T],
    thresholds: &ResponseThresholds<T>,
) -> Result<ResponseClass<T>> {
    if times.len() != y_bar.len() || times.len() != u.len() {
        return Err(CtmError::Usage("series lengths differ".into()));
    }
    let span = match (times.first(), times.last()) {
        (Some(&a), Some(&b)) => b - a,
        _ => T::zero(),
    };
    if span < thresholds.window {
        return Err(CtmError::Inconclusive(format!(
            "series spans {span}, shorter than the window {}",
            thresholds.window
        )));
    }

    // sliding maximum over [t_i, t_i + window], scanning starts right to left
    let mut window: VecDeque<usize> = VecDeque::new();
    let mut end = times.len();
    let mut first: Option<(usize, T)> = None;
    for i in (0..times.len()).rev() {
        while end > i + 1 && times[end - 1] - times[i] > thresholds.window {
            end -= 1;
            if window.front() == Some(&end) {
                window.pop_front();
            }
        }
        while window.back().is_some_and(|&j| y_bar[j] <= y_bar[i]) {
            window.pop_back();
        }
        window.push_back(i);
        let rise = y_bar[window[0]] - y_bar[i];
        if rise > thresholds.jump && times[i] - times[0] >= thresholds.transient {
            first = Some((i, rise));
        }
    }
    Ok(match first {
        Some((i, rise)) => ResponseClass {
            kind: ResponseKind::Cascade,
            jump_time: Some(times[i]),
            jump_magnitude: Some(rise),
            u_at_jump: Some(u[i]),
        },
        None => {
            let last = y_bar[y_bar.len() - 1];
            let kind = if last > thresholds.contained { ResponseKind::Contained } else { ResponseKind::None };
            ResponseClass { kind, jump_time: None, jump_magnitude: None, u_at_jump: None }
        }
    })
}

pub fn classify_trajectory<T: Real>(
    traj: &Trajectory<T>,
    thresholds: &ResponseThresholds<T>,
) -> Result<ResponseClass<T>> {
    classify_response(&traj.times, &traj.x_bar_series, &traj.u_series, thresholds)
}

pub fn classify_reduced<T: Real>(
    traj: &ReducedTrajectory<T>,
    thresholds: &ResponseThresholds<T>,
) -> Result<ResponseClass<T>> {
    classify_response(&traj.times, &traj.y_bar_series, &traj.u_series, thresholds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bifurcation::{find_bifurcation_point, lambda_coeffs};

    fn s114() -> ClusterSizes {
        ClusterSizes::new(11, 4)
    }

    #[test]
    fn fit_at_symmetric_bifurcation() {
        let fit = fit_cubic_normal_form(s114(), 0.0, 1.0).unwrap();
        assert!(fit.lambda1.abs() < 1e-6, "{}", fit.lambda1);
        assert!((fit.lambda3 + 26.0 / 3.0).abs() < 26.0 / 3.0 * 1e-3, "{}", fit.lambda3);
        assert!(fit.max_residual < 1e-5);
        assert_eq!(fit.offsets.len(), 10);
    }

    #[test]
    fn fit_detects_subcritical() {
        let p = find_bifurcation_point(s114(), 0.2).unwrap();
        let fit = fit_cubic_normal_form(s114(), 0.2, p.u_c).unwrap();
        assert!(fit.lambda3 > 0.0);
        assert!(fit.max_residual < 1e-5);
        let (l1, l3) = lambda_coeffs(p.y_star, p.u_c, s114()).unwrap();
        assert!((fit.lambda1 - l1).abs() < 1e-6);
        assert!((fit.lambda3 - l3).abs() < 1e-3 * l3.abs());
    }

    #[test]
    fn branch_below_threshold() {
        let d = branch_continuation(s114(), 0.0, &[0.5], 0.0).unwrap();
        let s = &d.slices[0];
        assert_eq!(s.equilibria.len(), 1);
        assert!(s.equilibria[0].y_bar.abs() < 1e-12 && s.equilibria[0].stable);
        assert!(!s.near_boundary && !s.empty);
    }

    #[test]
    fn branch_supercritical_pair() {
        let d = branch_continuation(s114(), 0.0, &[1.2], 0.0).unwrap();
        let eq = &d.slices[0].equilibria;
        let origin = eq.iter().find(|e| e.state.iter().all(|v| v.abs() < 1e-9)).unwrap();
        assert!(!origin.stable);
        let nonzero: Vec<_> = eq.iter().filter(|e| e.y_bar.abs() > 1e-6).collect();
        assert_eq!(nonzero.len(), 2);
        assert!((nonzero[0].y_bar + nonzero[1].y_bar).abs() < 1e-9);
        assert!(nonzero.iter().all(|e| e.stable));
    }

    #[test]
    fn branch_subcritical_pattern() {
        let p = find_bifurcation_point(s114(), 0.2).unwrap();
        let d = branch_continuation(s114(), 0.2, &[p.u_c - 0.02], 0.0).unwrap();
        let eq = &d.slices[0].equilibria;
        let middle = eq.iter().find(|e| e.y_bar.abs() < 1e-9 && e.state[0] > 0.0).unwrap();
        assert!(middle.stable);
        let unstable: Vec<_> = eq.iter().filter(|e| !e.stable && e.y_bar.abs() > 1e-6).collect();
        assert_eq!(unstable.len(), 2);
        assert!(unstable[0].y_bar * unstable[1].y_bar < 0.0);
    }

    #[test]
    fn branch_rejects_bad_ranges() {
        assert!(branch_continuation(s114(), 0.0, &[8.0], 0.0).is_err());
        assert!(branch_continuation(s114(), 0.0, &[1.0], -1.0).is_err());
        assert!(gain_grid(1.0, 1.0, 5).is_err());
        assert_eq!(gain_grid(0.0, 1.0, 3).unwrap(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn response_examples() {
        let th = ResponseThresholds::default();
        let t: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.1).collect();
        let zero = vec![0.0; t.len()];
        assert_eq!(classify_response(&t, &zero, &zero, &th).unwrap().kind, ResponseKind::None);
        let ramp: Vec<f64> = t.iter().map(|x| 0.01 * x).collect();
        assert_eq!(classify_response(&t, &ramp, &zero, &th).unwrap().kind, ResponseKind::Contained);
        let step: Vec<f64> = t.iter().map(|&x| if x < 40.0 { 0.0 } else { 1.0 }).collect();
        let u: Vec<f64> = t.iter().map(|x| x / 100.0).collect();
        let r = classify_response(&t, &step, &u, &th).unwrap();
        assert_eq!(r.kind, ResponseKind::Cascade);
        // first window [t, t + 5] reaching the step at t = 40
        assert!((r.jump_time.unwrap() - 35.0).abs() < 1e-9, "{:?}", r.jump_time);
        assert_eq!(r.jump_magnitude, Some(1.0));
        assert!((r.u_at_jump.unwrap() - 0.35).abs() < 1e-12);
        // a jump inside the transient is ignored
        let early: Vec<f64> = t.iter().map(|&x| if x < 2.0 { -1.0 } else { 0.0 }).collect();
        assert_eq!(classify_response(&t, &early, &u, &th).unwrap().kind, ResponseKind::None);
        let no_skip = ResponseThresholds { transient: 0.0, ..th };
        assert_eq!(classify_response(&t, &early, &u, &no_skip).unwrap().kind, ResponseKind::Cascade);
    }

    #[test]
    fn response_window_brute_force() {
        let th = ResponseThresholds { jump: 0.3, window: 2.0, contained: 0.05, transient: 1.0 };
        let t: Vec<f64> = (0..400).map(|k| k as f64 * 0.05).collect();
        for seed in 0..20u32 {
            let y: Vec<f64> =
                t.iter().map(|&x| (x * (0.3 + 0.07 * seed as f64)).sin() * 0.2 + 0.01 * x * (seed % 3) as f64).collect();
            let mut expect = None;
            'outer: for i in 0..t.len() {
                if t[i] < th.transient {
                    continue;
                }
                for j in i..t.len() {
                    if t[j] - t[i] <= th.window && y[j] - y[i] > th.jump {
                        expect = Some(t[i]);
                        break 'outer;
                    }
                }
            }
            let r = classify_response(&t, &y, &y, &th).unwrap();
            assert_eq!(r.jump_time, expect, "seed {seed}");
        }
    }

    #[test]
    fn short_series_inconclusive() {
        let t = [0.0, 1.0, 2.0];
        let r = classify_response(&t, &t, &t, &ResponseThresholds::default());
        assert!(matches!(r, Err(CtmError::Inconclusive(_))));
    }
}
