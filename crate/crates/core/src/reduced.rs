//! Exact three-dimensional reduction onto cluster averages.
//!
//! With `A = N - n - 1`, `B = n - 1`, `M = N - 2n`:
//!
//! ```text
//! y1' = -A y1 + B u S(y1) + M u S(y3) + 2 A eps
//! y2' = -A y2 + B u S(y2) + M u S(y3) - 2 A eps
//! y3' = -(N-1) y3 + (M-1) u S(y3) + n u S(y1) + n u S(y2)
//! ```
//!
//! The field commutes with `gamma: (y1, y2, y3) -> (-y2, -y1, -y3)`, so
//! `(y*, -y*, 0)` is always an equilibrium, where `g(y*) = 0` and
//! `g(y) = -A y + B u S(y) + 2 A eps`.

use std::io::{self, Write};

use serde::Serialize;

use crate::dynamics::{control_gain, ControllerState, CtmParams, GainMode};
use crate::error::{CtmError, Result};
use crate::export::{write_row, ConfigRecord};
use crate::integrator::{integrate, IntegratorConfig};
use crate::network::ClusterSizes;
use crate::scalar::Real;
use crate::sigmoid::Sigmoid;

/// Cluster averages.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ReducedState<T> {
    pub y1: T,
    pub y2: T,
    pub y3: T,
}

impl<T: Real> ReducedState<T> {
    pub fn new(y1: T, y2: T, y3: T) -> Self {
        Self { y1, y2, y3 }
    }

    pub fn symmetric(y_star: T) -> Self {
        Self::new(y_star, -y_star, T::zero())
    }

    pub fn to_array(self) -> [T; 3] {
        [self.y1, self.y2, self.y3]
    }

    pub fn from_slice(v: &[T]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    /// The nontrivial element of the symmetry group.
    pub fn gamma(self) -> Self {
        Self::new(-self.y2, -self.y1, -self.y3)
    }

    pub fn sup_norm(self) -> T {
        self.y1.abs().max(self.y2.abs()).max(self.y3.abs())
    }

    pub fn is_finite(self) -> bool {
        self.y1.is_finite() && self.y2.is_finite() && self.y3.is_finite()
    }
}

impl<T: Real> std::ops::Sub for ReducedState<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.y1 - o.y1, self.y2 - o.y2, self.y3 - o.y3)
    }
}

pub type Matrix3<T> = [[T; 3]; 3];

/// Reduced model at fixed gain `u`, optionally with an additive input on
/// cluster 1 (a single-agent input `beta` enters as `beta / n`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedSystem<T> {
    sizes: ClusterSizes,
    pub epsilon: T,
    pub u: T,
    /// Additive term on `y1'`.
    pub input: T,
    pub sigmoid: Sigmoid,
}

impl<T: Real> ReducedSystem<T> {
    pub fn new(sizes: ClusterSizes, epsilon: T, u: T) -> Result<Self> {
        sizes.check_for_analysis()?;
        if !(u >= T::zero() && u.is_finite()) {
            return Err(CtmError::Usage(format!("gain u = {u} must be non-negative")));
        }
        if !epsilon.is_finite() {
            return Err(CtmError::Usage("epsilon must be finite".into()));
        }
        Ok(Self { sizes, epsilon, u, input: T::zero(), sigmoid: Sigmoid::Tanh })
    }

    /// Adds a single-agent input `beta` on cluster 1, averaged as `beta / n`.
    pub fn with_agent_input(mut self, beta: T) -> Self {
        self.input = beta / T::count(self.sizes.n);
        self
    }

    pub fn with_gain(mut self, u: T) -> Self {
        self.u = u;
        self
    }

    pub fn sizes(&self) -> ClusterSizes {
        self.sizes
    }

    fn coeffs(&self) -> (T, T, T, T, T, T) {
        let total = self.sizes.total;
        let n = self.sizes.n;
        let a = T::count(total - n - 1);
        let b = T::count(n - 1);
        let m = T::count(total - 2 * n);
        let m1 = T::count(total - 2 * n - 1);
        let nn = T::count(n);
        let d3 = T::count(total - 1);
        (a, b, m, m1, nn, d3)
    }

    pub fn field(&self, y: ReducedState<T>) -> ReducedState<T> {
        let (a, b, m, m1, nn, d3) = self.coeffs();
        let s = |v: T| self.sigmoid.value(v);
        let u = self.u;
        let (s1, s2, s3) = (s(y.y1), s(y.y2), s(y.y3));
        let drive = T::lit(2.0) * a * self.epsilon;
        ReducedState::new(
            -a * y.y1 + b * u * s1 + m * u * s3 + drive + self.input,
            -a * y.y2 + b * u * s2 + m * u * s3 - drive,
            -d3 * y.y3 + m1 * u * s3 + nn * u * s1 + nn * u * s2,
        )
    }

    /// `|F(gamma y) - gamma F(y)|_inf`.
    pub fn equivariance_residual(&self, y: ReducedState<T>) -> T {
        (self.field(y.gamma()) - self.field(y).gamma()).sup_norm()
    }

    pub fn jacobian(&self, y: ReducedState<T>) -> Matrix3<T> {
        let (a, b, m, m1, nn, d3) = self.coeffs();
        let u = self.u;
        let d = |v: T| self.sigmoid.slope(v);
        let (p1, p2, p3) = (d(y.y1), d(y.y2), d(y.y3));
        [
            [-a + b * u * p1, T::zero(), m * u * p3],
            [T::zero(), -a + b * u * p2, m * u * p3],
            [nn * u * p1, nn * u * p2, -d3 + m1 * u * p3],
        ]
    }

    /// Population average `(n y1 + n y2 + (N - 2n) y3) / N`.
    pub fn y_bar(&self, y: ReducedState<T>) -> T {
        let (_, _, m, _, nn, _) = self.coeffs();
        (nn * y.y1 + nn * y.y2 + m * y.y3) / T::count(self.sizes.total)
    }

    /// Left side of the symmetric equilibrium condition.
    pub fn g(&self, y: T) -> T {
        let (a, b, ..) = self.coeffs();
        -a * y + b * self.u * self.sigmoid.value(y) + T::lit(2.0) * a * self.epsilon
    }

    /// All roots of `g` on `[-10, 10]`, ascending.
    ///
    /// `g'' = B u S''` changes sign only at 0, so `g` is monotone between its
    /// critical points and each monotone piece holds at most one root.
    pub fn g_roots(&self) -> Result<Vec<T>> {
        let lo = T::lit(-ROOT_BRACKET);
        let hi = T::lit(ROOT_BRACKET);
        let (glo, ghi) = (self.g(lo), self.g(hi));
        if !(glo > T::zero() && ghi < T::zero()) {
            return Err(CtmError::Solver(format!(
                "g does not change sign on [-{ROOT_BRACKET}, {ROOT_BRACKET}] (g(lo) = {glo}, g(hi) = {ghi})"
            )));
        }
        let mut knots = vec![lo];
        if let Some(yc) = self.critical_point() {
            if yc < hi {
                knots.push(-yc);
                if yc > T::zero() {
                    knots.push(yc);
                }
            }
        }
        knots.push(hi);
        let mut roots: Vec<T> = Vec::with_capacity(3);
        for w in knots.windows(2) {
            if let Some(r) = bisect_root(|y| self.g(y), w[0], w[1]) {
                if roots.last().is_none_or(|&last| (r - last).abs() > T::tol(1e-12)) {
                    roots.push(r);
                }
            }
        }
        Ok(roots)
    }

    /// Positive point where `g' = 0`, if `g` is not monotone.
    fn critical_point(&self) -> Option<T> {
        let (a, b, ..) = self.coeffs();
        let bu = b * self.u;
        if bu <= a {
            return None;
        }
        let r = a / bu; // S'(yc) = r, r in (0, 1)
        Some(match self.sigmoid {
            Sigmoid::Tanh => (T::one() - r).sqrt().atanh(),
            Sigmoid::Algebraic => (r.powf(T::lit(-2.0 / 3.0)) - T::one()).max(T::zero()).sqrt(),
        })
    }
}

/// Half-width of the interval searched for symmetric equilibria.
pub const ROOT_BRACKET: f64 = 10.0;
/// Gain step of the principal-root continuation.
pub const CONTINUATION_STEP: f64 = 0.01;

/// Bisects `f` on `[a, b]`; `None` without a sign change. Stops when
/// `|f| <= 1e-12` (scaled for the precision) or the bracket cannot shrink.
pub(crate) fn bisect_root<T: Real>(f: impl Fn(T) -> T, mut a: T, mut b: T) -> Option<T> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == T::zero() {
        return Some(a);
    }
    if fb == T::zero() {
        return Some(b);
    }
    if (fa > T::zero()) == (fb > T::zero()) {
        return None;
    }
    let tol = T::tol(1e-12);
    let half = T::lit(0.5);
    let mut best = if fa.abs() < fb.abs() { (a, fa) } else { (b, fb) };
    for _ in 0..400 {
        let mid = a + (b - a) * half;
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid);
        if fm.abs() < best.1.abs() {
            best = (mid, fm);
        }
        if fm == T::zero() || fm.abs() <= tol && (b - a) <= T::epsilon() * T::lit(4.0) * mid.abs().max(T::one()) {
            return Some(mid);
        }
        if (fm > T::zero()) == (fa > T::zero()) {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Some(best.0)
}

/// A symmetric equilibrium `(y*, -y*, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetricEquilibrium<T> {
    pub y_star: T,
    pub u: T,
    pub epsilon: T,
    pub sizes: ClusterSizes,
    /// `|g(y*)|`.
    pub residual: T,
    /// Continuously connected to `y* = 2 eps` at `u = 0`.
    pub principal: bool,
}

/// Continuation of the principal root of `g` in `u`, tabulated from `u = 0`
/// in steps of 0.01 with nearest-root matching.
#[derive(Debug, Clone)]
pub struct PrincipalBranch<T> {
    base: ReducedSystem<T>,
    step: T,
    table: Vec<T>,
}

impl<T: Real> PrincipalBranch<T> {
    pub fn new(sizes: ClusterSizes, epsilon: T, u_max: T) -> Result<Self> {
        let base = ReducedSystem::new(sizes, epsilon, T::zero())?;
        let step = T::lit(CONTINUATION_STEP);
        let count = (u_max / step).ceil().to_usize().unwrap_or(0);
        // at u = 0 the equation is linear
        let mut table = Vec::with_capacity(count + 1);
        let mut prev = T::lit(2.0) * epsilon;
        table.push(prev);
        for k in 1..=count {
            let roots = base.with_gain(step * T::count(k)).g_roots()?;
            prev = nearest(&roots, prev)?;
            table.push(prev);
        }
        Ok(Self { base, step, table })
    }

    /// Principal root at gain `u` (must not exceed the tabulated range by
    /// more than one step).
    pub fn at(&self, u: T) -> Result<T> {
        if u < T::zero() {
            return Err(CtmError::Usage(format!("gain u = {u} must be non-negative")));
        }
        let k = (u / self.step).floor().to_usize().unwrap_or(usize::MAX);
        if k >= self.table.len() {
            return Err(CtmError::Usage(format!("gain u = {u} beyond the continuation table")));
        }
        let roots = self.base.with_gain(u).g_roots()?;
        nearest(&roots, self.table[k])
    }
}

fn nearest<T: Real>(roots: &[T], target: T) -> Result<T> {
    roots
        .iter()
        .copied()
        .min_by(|a, b| (*a - target).abs().partial_cmp(&(*b - target).abs()).unwrap_or(std::cmp::Ordering::Equal))
        .ok_or_else(|| CtmError::Solver("no root of g found".into()))
}

/// All symmetric equilibria at `(eps, u)`, ascending, with the principal one flagged.
pub fn solve_y_star<T: Real>(
    sizes: ClusterSizes,
    epsilon: T,
    u: T,
) -> Result<Vec<SymmetricEquilibrium<T>>> {
    if epsilon < T::zero() {
        return Err(CtmError::Usage(format!("epsilon = {epsilon} must be non-negative")));
    }
    let sys = ReducedSystem::new(sizes, epsilon, u)?;
    let roots = sys.g_roots()?;
    let principal = PrincipalBranch::new(sizes, epsilon, u)?.at(u)?;
    Ok(roots
        .into_iter()
        .map(|y| SymmetricEquilibrium {
            y_star: y,
            u,
            epsilon,
            sizes,
            residual: sys.g(y).abs(),
            principal: y == principal,
        })
        .collect())
}

/// Convenience for the principal symmetric equilibrium.
pub fn principal_y_star<T: Real>(sizes: ClusterSizes, epsilon: T, u: T) -> Result<SymmetricEquilibrium<T>> {
    solve_y_star(sizes, epsilon, u)?
        .into_iter()
        .find(|e| e.principal)
        .ok_or_else(|| CtmError::Solver("principal root lost".into()))
}

/// Reduced trajectory: cluster averages plus controller series.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<ReducedState<T>>,
    pub u_series: Vec<T>,
    pub y_bar_series: Vec<T>,
    pub x_bar_s_series: Vec<T>,
    pub steady_state_reached: bool,
    pub config: ConfigRecord,
}

impl<T: Real> ReducedTrajectory<T> {
    /// CSV with columns `t, y1, y2, y3, u, y_bar, x_bar_s`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        self.config.write_header(w)?;
        writeln!(w, "t,y1,y2,y3,u,y_bar,x_bar_s")?;
        for k in 0..self.times.len() {
            let s = self.states[k];
            write_row(
                w,
                &[self.times[k], s.y1, s.y2, s.y3, self.u_series[k], self.y_bar_series[k], self.x_bar_s_series[k]],
            )?;
        }
        Ok(())
    }
}

/// Integrates the reduced model, with the gain set by `params` (feedback
/// on the population average `y_bar`, or fixed).
pub fn simulate_reduced<T: Real>(
    system: &ReducedSystem<T>,
    params: &CtmParams<T>,
    initial: ReducedState<T>,
    initial_x_bar_s: T,
    integ: &IntegratorConfig<T>,
) -> Result<ReducedTrajectory<T>> {
    params.check()?;
    let mut sys = *system;
    sys.sigmoid = params.sigmoid;
    let field = |_t: T, z: &[T], dz: &mut [T]| {
        let y = ReducedState::from_slice(z);
        let u = control_gain(params, &ControllerState { x_bar_s: z[3] });
        let f = sys.with_gain(u).field(y);
        dz[0] = f.y1;
        dz[1] = f.y2;
        dz[2] = f.y3;
        dz[3] = match params.gain {
            GainMode::Feedback => params.kappa_s * (sys.y_bar(y) - z[3]),
            GainMode::Fixed(_) => T::zero(),
        };
    };
    let z0 = [initial.y1, initial.y2, initial.y3, initial_x_bar_s];
    let sol = integrate(field, T::zero(), &z0, integ)?;
    let states: Vec<ReducedState<T>> = sol.states.iter().map(|z| ReducedState::from_slice(z)).collect();
    let u_series = sol
        .states
        .iter()
        .map(|z| control_gain(params, &ControllerState { x_bar_s: z[3] }))
        .collect();
    let y_bar_series = states.iter().map(|&y| sys.y_bar(y)).collect();
    let x_bar_s_series = sol.states.iter().map(|z| z[3]).collect();
    let mut config = ConfigRecord::new()
        .with("model", "reduced")
        .with("N", sys.sizes.total)
        .with("n", sys.sizes.n)
        .with("eps", sys.epsilon)
        .with("cluster1_input", sys.input);
    config.extend(&params.record());
    config
        .set("x_bar_s0", initial_x_bar_s)
        .set("method", format!("{:?}", integ.method))
        .set("dt", integ.dt)
        .set("t_end", integ.t_end);
    Ok(ReducedTrajectory {
        times: sol.times,
        states,
        u_series,
        y_bar_series,
        x_bar_s_series,
        steady_state_reached: sol.steady_state_reached,
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sizes() -> ClusterSizes {
        ClusterSizes::new(11, 4)
    }

    #[test]
    fn field_at_origin() {
        for u in [0.0, 1.0, 3.0] {
            let f = ReducedSystem::<f64>::new(sizes(), 0.2, u).unwrap().field(ReducedState::default());
            assert!((f.y1 - 2.4).abs() < 1e-14 && (f.y2 + 2.4).abs() < 1e-14 && f.y3 == 0.0);
            let f = ReducedSystem::new(sizes(), 0.0, u).unwrap().field(ReducedState::default());
            assert_eq!(f, ReducedState::default());
        }
    }

    #[test]
    fn equivariance_samples() {
        let sys = ReducedSystem::new(sizes(), 0.1, 1.5).unwrap();
        assert!(sys.equivariance_residual(ReducedState::new(0.3, 0.7, -0.2)) <= 1e-14);
        assert!(sys.equivariance_residual(ReducedState::new(0.8, -0.8, 0.0)) <= 1e-15);
    }

    #[test]
    fn invalid_sizes() {
        assert!(ReducedSystem::new(ClusterSizes::new(8, 4), 0.1, 1.0).is_err());
        assert!(ReducedSystem::new(ClusterSizes::new(11, 1), 0.1, 1.0).is_err());
        assert!(ReducedSystem::new(sizes(), 0.1, -1.0).is_err());
    }

    #[test]
    fn jacobian_at_origin() {
        let j = ReducedSystem::new(sizes(), 0.0, 1.0).unwrap().jacobian(ReducedState::default());
        assert_eq!(j, [[-3.0, 0.0, 3.0], [0.0, -3.0, 3.0], [4.0, 4.0, -8.0]]);
        let det = j[0][0] * (j[1][1] * j[2][2] - j[1][2] * j[2][1]) - j[0][1] * (j[1][0] * j[2][2] - j[1][2] * j[2][0])
            + j[0][2] * (j[1][0] * j[2][1] - j[1][1] * j[2][0]);
        assert_eq!(det, 0.0);
        let j = ReducedSystem::new(sizes(), 0.3, 0.0).unwrap().jacobian(ReducedState::new(0.4, -1.0, 2.0));
        assert_eq!(j, [[-6.0, 0.0, 0.0], [0.0, -6.0, 0.0], [0.0, 0.0, -10.0]]);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let sys = ReducedSystem::new(ClusterSizes::new(17, 5), 0.15, 1.7).unwrap();
        let h = 1e-6;
        for k in 0..50 {
            let t = k as f64;
            let y = [(0.7 * t).sin() * 2.0, (1.3 * t).cos() * 2.0, (0.4 * t + 1.0).sin() * 2.0];
            let jac = sys.jacobian(ReducedState::from_slice(&y));
            for col in 0..3 {
                let mut yp = y;
                let mut ym = y;
                yp[col] += h;
                ym[col] -= h;
                let fp = sys.field(ReducedState::from_slice(&yp)).to_array();
                let fm = sys.field(ReducedState::from_slice(&ym)).to_array();
                for row in 0..3 {
                    let fd = (fp[row] - fm[row]) / (2.0 * h);
                    assert!((fd - jac[row][col]).abs() <= 1e-6, "({row},{col}): {fd} vs {}", jac[row][col]);
                }
            }
        }
    }

    #[test]
    fn y_star_linear_case() {
        let eqs = solve_y_star::<f64>(sizes(), 0.2, 0.0).unwrap();
        assert_eq!(eqs.len(), 1);
        assert!((eqs[0].y_star - 0.4).abs() < 1e-15 && eqs[0].principal);
    }

    #[test]
    fn y_star_zero_for_symmetric_thresholds() {
        // (N - n - 1) / (n - 1) = 2
        for u in [0.5, 1.0, 1.99] {
            let eqs = solve_y_star(sizes(), 0.0, u).unwrap();
            let p = eqs.iter().find(|e| e.principal).unwrap();
            assert_eq!(p.y_star, 0.0);
        }
        // past the fold the branch stays at zero, flanked by two more roots
        let eqs = solve_y_star::<f64>(sizes(), 0.0, 3.0).unwrap();
        assert_eq!(eqs.len(), 3);
        assert!(eqs[1].principal && eqs[1].y_star.abs() < 1e-15);
    }

    #[test]
    fn y_star_matches_dense_scan() {
        let eqs = solve_y_star(sizes(), 0.2, 1.0).unwrap();
        let p = eqs.iter().find(|e| e.principal).unwrap();
        assert!(p.residual <= 1e-12);
        // brute-force sign scan, grid 1e-6
        let sys = ReducedSystem::new(sizes(), 0.2, 1.0).unwrap();
        let mut scan = Vec::new();
        let mut prev = sys.g(-10.0);
        for k in 1..=20_000_000u64 {
            let y = -10.0 + k as f64 * 1e-6;
            let v = sys.g(y);
            if (v > 0.0) != (prev > 0.0) {
                scan.push(y);
            }
            prev = v;
        }
        assert_eq!(scan.len(), eqs.len());
        for (s, e) in scan.iter().zip(&eqs) {
            assert!((s - e.y_star).abs() <= 1e-6);
        }
    }

    #[test]
    fn principal_is_unique_positive_root() {
        for &(eps, u) in &[(0.1, 2.5), (0.2, 4.0), (0.05, 3.3), (0.3, 1.2)] {
            let eqs = solve_y_star(sizes(), eps, u).unwrap();
            let positive: Vec<_> = eqs.iter().filter(|e| e.y_star > 0.0).collect();
            assert_eq!(positive.len(), 1);
            assert!(positive[0].principal);
        }
    }

    #[test]
    fn symmetric_point_is_equilibrium() {
        for &(eps, u) in &[(0.1, 1.1), (0.2, 2.0), (0.0, 0.7)] {
            let p = principal_y_star(sizes(), eps, u).unwrap();
            let sys = ReducedSystem::new(sizes(), eps, u).unwrap();
            assert!(sys.field(ReducedState::symmetric(p.y_star)).sup_norm() <= 1e-10);
        }
    }

    #[test]
    fn reduced_simulation_settles() {
        let sys = ReducedSystem::new(sizes(), 0.1, 0.8).unwrap();
        let traj = simulate_reduced(
            &sys,
            &CtmParams::fixed(0.8),
            ReducedState::new(-0.5, -0.5, -0.5),
            0.0,
            &IntegratorConfig::rk4(0.01, 50.0),
        )
        .unwrap();
        let y = *traj.states.last().unwrap();
        let p = principal_y_star(sizes(), 0.1, 0.8).unwrap().y_star;
        assert!((y - ReducedState::symmetric(p)).sup_norm() < 1e-8);
    }

    proptest! {
        #[test]
        fn equivariance_everywhere(
            y1 in -3.0..3.0_f64, y2 in -3.0..3.0_f64, y3 in -3.0..3.0_f64,
            eps in 0.0..0.45_f64, u in 0.0..5.0_f64,
        ) {
            let sys = ReducedSystem::new(ClusterSizes::new(11, 4), eps, u).unwrap();
            prop_assert!(sys.equivariance_residual(ReducedState::new(y1, y2, y3)) <= 1e-12);
        }
    }
}
