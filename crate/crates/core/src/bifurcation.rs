//! Closed-form pitchfork analysis of the symmetric equilibrium.
//!
//! Around `(y*, -y*, 0)` the equilibrium conditions of the reduced model
//! collapse to a single scalar equation `lambda1 dy3 + lambda3 dy3^3 = 0`
//! (odd by symmetry). `lambda1 = 0` locates the bifurcation in `u`; the sign
//! of `lambda3` there decides super- versus subcritical. Eliminating `u` and
//! `eps` along `lambda1 = 0` gives curves parametrized by `y*` alone, and the
//! subcritical window is where `lambda3(y*) > 0`.
//!
//! Everything here assumes the tanh sigmoid.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CtmError, Result};
use crate::export::{num, write_row, ConfigRecord};
use crate::network::ClusterSizes;
use crate::reduced::{PrincipalBranch, ReducedSystem};
use crate::scalar::Real;
use crate::sigmoid::Sigmoid;

/// Lower end of the `y*` scan.
pub const SCAN_MIN: f64 = 1e-4;
/// Upper end of the `y*` scan; tanh derivatives are below 1e-16 past it.
pub const SCAN_MAX: f64 = 20.0;
pub const SCAN_POINTS: usize = 2000;
/// `|lambda3|` at or below this at `u_c` is reported as degenerate.
pub const DEGENERATE_LAMBDA3: f64 = 1e-8;

/// Rejects sigmoids other than tanh.
pub fn check_sigmoid(sigmoid: Sigmoid) -> Result<()> {
    match sigmoid {
        Sigmoid::Tanh => Ok(()),
        other => Err(CtmError::Usage(format!(
            "bifurcation formulas assume the tanh sigmoid, got {}",
            other.name()
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpansionCoeffs<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadraticCoeffs<T> {
    pub c2: T,
    pub c1: T,
    pub c0: T,
}

/// Shorthands `(N - 1, N - n - 1, N - 2n, n - 1, n)` as scalars.
fn dims<T: Real>(sizes: ClusterSizes) -> (T, T, T, T, T) {
    let (total, n) = (sizes.total, sizes.n);
    (
        T::count(total - 1),
        T::count(total - n - 1),
        T::count(total - 2 * n),
        T::count(n - 1),
        T::count(n),
    )
}

fn k_factor<T: Real>(sizes: ClusterSizes) -> T {
    let (_, a, _, b, n) = dims::<T>(sizes);
    n * a / b
}

fn g_factor<T: Real>(sizes: ClusterSizes) -> T {
    let (_, _, m, b, n) = dims::<T>(sizes);
    T::one() + (n + T::one()) * m / b
}

fn tanh_derivs<T: Real>(y: T) -> (T, T, T) {
    let s = Sigmoid::Tanh;
    // orders 1..=3 cannot fail
    (
        s.derivative(y, 1).unwrap_or_else(|_| T::nan()),
        s.derivative(y, 2).unwrap_or_else(|_| T::nan()),
        s.derivative(y, 3).unwrap_or_else(|_| T::nan()),
    )
}

pub fn expansion_coeffs<T: Real>(y_star: T, u: T, sizes: ClusterSizes) -> Result<ExpansionCoeffs<T>> {
    sizes.check_for_analysis()?;
    if !(u > T::zero()) {
        return Err(CtmError::Usage(format!("expansion coefficients need u > 0, got {u}")));
    }
    let (_, a_deg, m, b_deg, _) = dims::<T>(sizes);
    let k = b_deg / m;
    let (d1, d2, d3) = tanh_derivs(y_star);
    Ok(ExpansionCoeffs {
        a: k * d3 / T::lit(6.0),
        b: k * d2 / T::lit(2.0),
        c: k * d1 - a_deg / (m * u),
    })
}

/// `(lambda1, lambda3)` at the symmetric equilibrium `y*` and gain `u`.
pub fn lambda_coeffs<T: Real>(y_star: T, u: T, sizes: ClusterSizes) -> Result<(T, T)> {
    let ExpansionCoeffs { a, b, c } = expansion_coeffs(y_star, u, sizes)?;
    if c == T::zero() {
        return Err(CtmError::Singular(format!("c = 0 at y* = {y_star}, u = {u}")));
    }
    let (d, ..) = dims::<T>(sizes);
    let k = k_factor::<T>(sizes);
    let g = g_factor::<T>(sizes);
    let two = T::lit(2.0);
    let three = T::lit(3.0);
    let lambda1 = -d - g * u - k * two / c;
    let lambda3 =
        g * u / three + k * (two / (three * c) - T::lit(4.0) * b * b / c.powi(5) + two * a / c.powi(4));
    Ok((lambda1, lambda3))
}

/// Third-order inversion of `a dx^3 + b dx^2 + c dx = -dy + dy^3 / 3` for
/// the small root `dx`.
pub fn invert_cubic_series<T: Real>(coeffs: ExpansionCoeffs<T>, delta_y: T) -> Result<T> {
    let ExpansionCoeffs { a, b, c } = coeffs;
    if c == T::zero() {
        return Err(CtmError::Singular("c = 0 in series inversion".into()));
    }
    let dy2 = delta_y * delta_y;
    let cubic = T::one() / (T::lit(3.0) * c) - T::lit(2.0) * b * b / c.powi(5) + a / c.powi(4);
    Ok(-delta_y / c - b / c.powi(3) * dy2 + cubic * dy2 * delta_y)
}

pub fn quadratic_coeffs<T: Real>(y_star: T, sizes: ClusterSizes) -> Result<QuadraticCoeffs<T>> {
    sizes.check_for_analysis()?;
    let (d, a_deg, m, b_deg, n) = dims::<T>(sizes);
    let t = Sigmoid::Tanh.slope(y_star);
    Ok(QuadraticCoeffs {
        c2: (n + T::one() + b_deg / m) * t,
        c1: (m - T::one()) * a_deg / m + d * b_deg / m * t,
        c0: -a_deg * d / m,
    })
}

/// Positive root of `c2 u^2 + c1 u + c0 = 0`: the gain at which the
/// symmetric equilibrium `y*` sits on `lambda1 = 0`.
pub fn u_at_transition<T: Real>(y_star: T, sizes: ClusterSizes) -> Result<T> {
    let QuadraticCoeffs { c2, c1, c0 } = quadratic_coeffs(y_star, sizes)?;
    let disc = c1 * c1 - T::lit(4.0) * c2 * c0;
    Ok(T::lit(-2.0) * c0 / (disc.sqrt() + c1))
}

/// Disparity for which `y*` is the symmetric equilibrium at `u_at_transition(y*)`.
pub fn eps_at_transition<T: Real>(y_star: T, sizes: ClusterSizes) -> Result<T> {
    let u = u_at_transition(y_star, sizes)?;
    let (_, a_deg, _, b_deg, _) = dims::<T>(sizes);
    let half = T::lit(0.5);
    Ok(y_star * half - b_deg / (T::lit(2.0) * a_deg) * u * y_star.tanh())
}

/// `lambda3` along `lambda1 = 0`, with `u` eliminated.
pub fn lambda3_transition<T: Real>(y_star: T, sizes: ClusterSizes) -> Result<T> {
    let u = u_at_transition(y_star, sizes)?;
    let ExpansionCoeffs { a, b, c } = expansion_coeffs(y_star, u, sizes)?;
    let (d, ..) = dims::<T>(sizes);
    let k = k_factor::<T>(sizes);
    Ok(-d / T::lit(3.0) + k * (T::lit(2.0) * a * c - T::lit(4.0) * b * b) / c.powi(5))
}

/// Log-spaced scan grid on `[SCAN_MIN, SCAN_MAX]`.
pub fn scan_grid<T: Real>() -> Vec<T> {
    let (lo, hi) = (SCAN_MIN.ln(), SCAN_MAX.ln());
    (0..SCAN_POINTS)
        .map(|k| {
            let f = k as f64 / (SCAN_POINTS - 1) as f64;
            T::lit(if k + 1 == SCAN_POINTS { SCAN_MAX } else { (lo + f * (hi - lo)).exp() })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanGrid {
    pub y_min: f64,
    pub y_max: f64,
    pub points: usize,
    pub spacing: &'static str,
}

/// Outcome of the search for a subcritical window in `y*`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionReport<T> {
    pub sizes: ClusterSizes,
    pub exists: bool,
    /// Where `lambda3` turns positive.
    pub y_star_0: Option<T>,
    /// Where it turns negative again.
    pub y_star_1: Option<T>,
    pub u_star: Option<T>,
    /// Critical disparity: supercritical below, subcritical above.
    pub eps_star: Option<T>,
    pub lambda3_max: T,
    /// Every sign change of `lambda3` on the scan, refined.
    pub sign_changes: Vec<T>,
    /// `N = 2n + 1`: `lambda3` stays positive past `y_star_0`, so there is
    /// no `y_star_1`.
    pub unbounded_window: bool,
    pub scan_grid: ScanGrid,
}

pub fn find_transition<T: Real>(sizes: ClusterSizes) -> Result<TransitionReport<T>> {
    sizes.check_for_analysis()?;
    // with a single neutral agent u(y*) and lambda3 grow without bound;
    // scan only where the closed forms are still finite
    let unbounded = sizes.total == 2 * sizes.n + 1;
    let mut grid = scan_grid::<T>();
    let mut values = grid.iter().map(|&y| lambda3_transition(y, sizes)).collect::<Result<Vec<T>>>()?;
    if unbounded {
        let finite = values.iter().position(|v| !v.is_finite()).unwrap_or(values.len());
        grid.truncate(finite);
        values.truncate(finite);
    }
    if values.len() < 2 {
        return Err(CtmError::Solver(format!("lambda3 is not finite on the scan for {sizes}")));
    }

    let (d, ..) = dims::<T>(sizes);
    let asymptote = -d / T::lit(3.0);
    let last = values[values.len() - 1];
    if !unbounded && (last - asymptote).abs() >= T::tol(1e-6) * d.max(T::one()) {
        return Err(CtmError::Solver(format!(
            "lambda3 has not reached its asymptote at y* = {SCAN_MAX}: {last} vs {asymptote}"
        )));
    }
    if values[0] >= T::zero() {
        return Err(CtmError::Inconclusive(format!("lambda3 is non-negative at y* = {SCAN_MIN}")));
    }

    let lambda3_max = values.iter().copied().fold(T::neg_infinity(), T::max);
    let f = |y: T| lambda3_transition(y, sizes).unwrap_or_else(|_| T::nan());
    let mut sign_changes = Vec::new();
    for k in 1..grid.len() {
        if (values[k - 1] > T::zero()) != (values[k] > T::zero()) {
            sign_changes.push(bisect(&f, grid[k - 1], grid[k], T::tol(1e-10)));
        }
    }
    let exists = lambda3_max > T::zero();
    let y0 = if exists { sign_changes.first().copied() } else { None };
    let y1 = if exists { sign_changes.get(1).copied() } else { None };
    let (u_star, eps_star) = match y0 {
        Some(y) => (Some(u_at_transition(y, sizes)?), Some(eps_at_transition(y, sizes)?)),
        None => (None, None),
    };
    Ok(TransitionReport {
        sizes,
        exists,
        y_star_0: y0,
        y_star_1: y1,
        u_star,
        eps_star,
        lambda3_max,
        sign_changes,
        unbounded_window: unbounded,
        scan_grid: ScanGrid { y_min: SCAN_MIN, y_max: grid[grid.len() - 1].as_f64(), points: grid.len(), spacing: "log" },
    })
}

/// Bisection on a bracketing interval down to width `tol`.
fn bisect<T: Real>(f: &impl Fn(T) -> T, mut lo: T, mut hi: T, tol: T) -> T {
    let positive_lo = f(lo) > T::zero();
    while hi - lo > tol {
        let mid = lo + (hi - lo) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) > T::zero()) == positive_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo + (hi - lo) * T::lit(0.5)
}

/// Smallest `n` in `2..=(N-1)/2` whose symmetric equilibrium can turn
/// subcritical.
pub fn min_n_for_cascade(total: usize) -> Result<Option<usize>> {
    if total < 5 {
        return Err(CtmError::Usage(format!("min_n_for_cascade needs N >= 5, got {total}")));
    }
    for n in 2..=(total - 1) / 2 {
        if find_transition::<f64>(ClusterSizes::new(total, n))?.exists {
            return Ok(Some(n));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifurcationPoint<T> {
    pub u_c: T,
    pub y_star: T,
}

/// Number of gain samples scanned for the sign change of `lambda1`.
const GAIN_SCAN: usize = 400;

/// Gain `u_c` at which the principal symmetric equilibrium loses stability
/// (`g = 0` and `lambda1 = 0` jointly).
pub fn find_bifurcation_point<T: Real>(sizes: ClusterSizes, epsilon: T) -> Result<BifurcationPoint<T>> {
    sizes.check_for_analysis()?;
    if !(epsilon >= T::zero()) {
        return Err(CtmError::Usage(format!("epsilon = {epsilon} must be non-negative")));
    }
    if epsilon == T::zero() {
        // y* = 0 and lambda1(0, 1) = 0 identically
        return Ok(BifurcationPoint { u_c: T::one(), y_star: T::zero() });
    }
    let (d, _, m, ..) = dims::<T>(sizes);
    let u_lo = T::one();
    let u_hi = d / (m - T::one());
    let branch = PrincipalBranch::new(sizes, epsilon, u_hi)?;
    let lambda1 = |u: T| -> Result<(T, T)> {
        let y = branch.at(u)?;
        Ok((lambda_coeffs(y, u, sizes)?.0, y))
    };

    let step = (u_hi - u_lo) / T::count(GAIN_SCAN);
    let mut prev_u = u_lo;
    let mut prev = lambda1(u_lo)?.0;
    let mut bracket = None;
    for k in 1..=GAIN_SCAN {
        let u = if k == GAIN_SCAN { u_hi } else { u_lo + step * T::count(k) };
        let val = lambda1(u)?.0;
        if prev < T::zero() && val >= T::zero() {
            bracket = Some((prev_u, u));
            break;
        }
        prev_u = u;
        prev = val;
    }
    let (mut lo, mut hi) = bracket.ok_or_else(|| {
        CtmError::NoBifurcation(format!(
            "lambda1 does not change sign for u in [{u_lo}, {u_hi}] at {sizes}, eps = {epsilon}"
        ))
    })?;
    for _ in 0..200 {
        let mid = lo + (hi - lo) * T::lit(0.5);
        if mid <= lo || mid >= hi {
            break;
        }
        if lambda1(mid)?.0 < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (l_lo, _) = lambda1(lo)?;
    let (l_hi, _) = lambda1(hi)?;
    let u_c = if l_lo.abs() <= l_hi.abs() { lo } else { hi };
    let (l1, y_star) = lambda1(u_c)?;
    let scale = d.max(T::one());
    if l1.abs() > T::tol(1e-10) * scale {
        return Err(CtmError::NoBifurcation(format!(
            "lambda1 jumps across u = {u_c} (|lambda1| = {}); pole, not a root",
            l1.abs()
        )));
    }
    let residual = ReducedSystem::new(sizes, epsilon, u_c)?.g(y_star).abs();
    if residual > T::tol(1e-10) * scale {
        return Err(CtmError::Solver(format!("equilibrium residual {residual} at u_c = {u_c}")));
    }
    Ok(BifurcationPoint { u_c, y_star })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PitchforkKind {
    Supercritical,
    Subcritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PitchforkClass<T> {
    pub kind: PitchforkKind,
    pub u_c: T,
    pub y_star_at_uc: T,
    pub lambda3_at_uc: T,
}

pub fn classify_pitchfork<T: Real>(sizes: ClusterSizes, epsilon: T) -> Result<PitchforkClass<T>> {
    let BifurcationPoint { u_c, y_star } = find_bifurcation_point(sizes, epsilon)?;
    let (_, lambda3) = lambda_coeffs(y_star, u_c, sizes)?;
    if lambda3.abs() <= T::lit(DEGENERATE_LAMBDA3) {
        return Err(CtmError::Degenerate { u_c: u_c.as_f64(), lambda3: lambda3.as_f64() });
    }
    let kind = if lambda3 > T::zero() { PitchforkKind::Subcritical } else { PitchforkKind::Supercritical };
    Ok(PitchforkClass { kind, u_c, y_star_at_uc: y_star, lambda3_at_uc: lambda3 })
}

/// One row of a sweep over the cluster size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow<T> {
    pub total: usize,
    pub n: usize,
    pub exists: bool,
    pub y_star_0: Option<T>,
    pub y_star_1: Option<T>,
    pub u_star: Option<T>,
    pub eps_star: Option<T>,
}

impl<T: Real> From<&TransitionReport<T>> for SweepRow<T> {
    fn from(r: &TransitionReport<T>) -> Self {
        Self {
            total: r.sizes.total,
            n: r.sizes.n,
            exists: r.exists,
            y_star_0: r.y_star_0,
            y_star_1: r.y_star_1,
            u_star: r.u_star,
            eps_star: r.eps_star,
        }
    }
}

/// `find_transition` for every `n` in `n_min..=n_max`, in parallel; rows
/// come back ordered by `n`.
pub fn sweep_cluster_size<T: Real>(total: usize, n_min: usize, n_max: usize) -> Result<Vec<SweepRow<T>>> {
    if n_min > n_max {
        return Err(CtmError::Usage(format!("empty n range {n_min}..={n_max}")));
    }
    for n in [n_min, n_max] {
        ClusterSizes::new(total, n).check_for_analysis()?;
    }
    (n_min..=n_max)
        .into_par_iter()
        .map(|n| find_transition::<T>(ClusterSizes::new(total, n)).map(|r| SweepRow::from(&r)))
        .collect()
}

fn opt<T: Real>(v: Option<T>) -> String {
    v.map(num).unwrap_or_default()
}

/// CSV with columns `N, n, exists, y_star_0, y_star_1, u_star, eps_star`;
/// absent values are empty fields.
pub fn write_sweep_csv<T: Real, W: Write>(rows: &[SweepRow<T>], config: &ConfigRecord, w: &mut W) -> io::Result<()> {
    config.write_header(w)?;
    writeln!(w, "N,n,exists,y_star_0,y_star_1,u_star,eps_star")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.total,
            r.n,
            r.exists,
            opt(r.y_star_0),
            opt(r.y_star_1),
            opt(r.u_star),
            opt(r.eps_star)
        )?;
    }
    Ok(())
}

/// `lambda3` along the transition curve on the scan grid.
pub fn lambda3_curve<T: Real>(sizes: ClusterSizes) -> Result<Vec<(T, T)>> {
    sizes.check_for_analysis()?;
    scan_grid::<T>().into_iter().map(|y| Ok((y, lambda3_transition(y, sizes)?))).collect()
}

pub fn write_lambda3_csv<T: Real, W: Write>(curve: &[(T, T)], config: &ConfigRecord, w: &mut W) -> io::Result<()> {
    config.write_header(w)?;
    writeln!(w, "y_star,lambda3")?;
    for &(y, l) in curve {
        write_row(w, &[y, l])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reduced::principal_y_star;

    fn s114() -> ClusterSizes {
        ClusterSizes::new(11, 4)
    }

    #[test]
    fn expansion_at_origin() {
        let e = expansion_coeffs(0.0_f64, 1.0, s114()).unwrap();
        assert!((e.a + 1.0 / 3.0).abs() < 1e-15 && e.b == 0.0 && (e.c + 1.0).abs() < 1e-15);
        for &(total, n, u) in &[(20, 5, 0.3), (100, 30, 4.0)] {
            assert_eq!(expansion_coeffs(0.0, u, ClusterSizes::new(total, n)).unwrap().b, 0.0);
        }
        let far = expansion_coeffs(40.0_f64, 2.0, s114()).unwrap();
        assert_eq!((far.a, far.b), (0.0, 0.0));
        assert!((far.c + 6.0 / 6.0).abs() < 1e-15);
        assert!(matches!(expansion_coeffs(0.0, 0.0, s114()), Err(CtmError::Usage(_))));
    }

    #[test]
    fn lambdas_at_origin() {
        let (l1, l3) = lambda_coeffs(0.0_f64, 1.0, s114()).unwrap();
        assert!(l1.abs() < 1e-12, "{l1}");
        assert!((l3 + 26.0 / 3.0).abs() < 1e-12, "{l3}");
        // c = 0 at y* = 0 when u = (N-n-1)/(n-1) = 2
        assert!(matches!(lambda_coeffs(0.0, 2.0, s114()), Err(CtmError::Singular(_))));
    }

    #[test]
    fn series_inversion_examples() {
        let e = ExpansionCoeffs { a: 0.0_f64, b: 0.0, c: -1.0 };
        let dx = invert_cubic_series(e, 0.1).unwrap();
        assert!((dx - (0.1 - 0.001 / 3.0)).abs() < 1e-15);
        let e = ExpansionCoeffs { a: -1.0 / 3.0, b: 0.2, c: -0.8 };
        assert_eq!(invert_cubic_series(e, 0.0).unwrap(), 0.0);
        assert!(invert_cubic_series(ExpansionCoeffs { a: 1.0, b: 1.0, c: 0.0 }, 0.1).is_err());
    }

    #[test]
    fn quadratic_examples() {
        let q = quadratic_coeffs(0.0_f64, s114()).unwrap();
        assert!((q.c2 - 6.0).abs() < 1e-14 && (q.c1 - 14.0).abs() < 1e-14 && (q.c0 + 20.0).abs() < 1e-14);
        let q = quadratic_coeffs(40.0_f64, s114()).unwrap();
        assert_eq!(q.c2, 0.0);
        assert!((q.c1 - 4.0).abs() < 1e-14);
    }

    #[test]
    fn transition_gain() {
        assert!((u_at_transition(0.0_f64, s114()).unwrap() - 1.0).abs() < 1e-15);
        assert!((u_at_transition(20.0_f64, s114()).unwrap() - 5.0).abs() < 1e-12);
        let u: Vec<f64> = [0.5, 1.0, 2.0].iter().map(|&y| u_at_transition(y, s114()).unwrap()).collect();
        assert!(u[0] < u[1] && u[1] < u[2]);
        assert_eq!(eps_at_transition(0.0, s114()).unwrap(), 0.0);
    }

    #[test]
    fn transition_curves_consistent() {
        for &y in &[0.05_f64, 0.3, 0.8, 1.5, 3.0] {
            let u = u_at_transition(y, s114()).unwrap();
            let (l1, l3) = lambda_coeffs(y, u, s114()).unwrap();
            assert!(l1.abs() < 1e-10, "{l1}");
            assert!((l3 - lambda3_transition(y, s114()).unwrap()).abs() < 1e-10);
            let eps = eps_at_transition(y, s114()).unwrap();
            assert!(ReducedSystem::new(s114(), eps, u).unwrap().g(y).abs() < 1e-12);
        }
    }

    #[test]
    fn transition_for_eleven_four() {
        let r = find_transition::<f64>(s114()).unwrap();
        assert!(r.exists);
        let eps = r.eps_star.unwrap();
        assert!((eps - 0.11).abs() < 0.005, "{eps}");
        let (y0, y1) = (r.y_star_0.unwrap(), r.y_star_1.unwrap());
        assert!(y0 < y1);
        assert_eq!(r.sign_changes.len(), 2);
        assert!(lambda3_transition(y0, s114()).unwrap().abs() < 1e-8);
        assert!(lambda3_transition(y1, s114()).unwrap().abs() < 1e-8);
        assert!(lambda3_transition(0.5 * (y0 + y1), s114()).unwrap() > 0.0);
    }

    #[test]
    fn threshold_cluster_size() {
        assert!(!find_transition::<f64>(ClusterSizes::new(100, 26)).unwrap().exists);
        assert!(find_transition::<f64>(ClusterSizes::new(100, 27)).unwrap().exists);
        assert_eq!(min_n_for_cascade(100).unwrap(), Some(27));
        assert!(min_n_for_cascade(11).unwrap().unwrap() <= 4);
        assert!(min_n_for_cascade(4).is_err());
    }

    #[test]
    fn single_neutral_agent() {
        for &(total, n) in &[(5, 2), (11, 5), (101, 50)] {
            let r = find_transition::<f64>(ClusterSizes::new(total, n)).unwrap();
            assert!(r.exists && r.unbounded_window);
            assert_eq!(r.sign_changes.len(), 1);
            assert!(r.y_star_1.is_none() && r.eps_star.unwrap() > 0.0);
        }
        assert!(!find_transition::<f64>(s114()).unwrap().unbounded_window);
    }

    #[test]
    fn bifurcation_at_zero_disparity() {
        for &(total, n) in &[(11, 4), (7, 2), (100, 30)] {
            let p = find_bifurcation_point::<f64>(ClusterSizes::new(total, n), 0.0).unwrap();
            assert_eq!((p.u_c, p.y_star), (1.0, 0.0));
        }
    }

    #[test]
    fn bifurcation_matches_transition_at_eps_star() {
        let r = find_transition::<f64>(s114()).unwrap();
        let p = find_bifurcation_point(s114(), r.eps_star.unwrap()).unwrap();
        assert!((p.u_c - r.u_star.unwrap()).abs() < 1e-6, "{} vs {:?}", p.u_c, r.u_star);
        let y = principal_y_star(s114(), r.eps_star.unwrap(), p.u_c).unwrap().y_star;
        assert!((y - p.y_star).abs() < 1e-12);
    }

    #[test]
    fn classification() {
        assert_eq!(classify_pitchfork(s114(), 0.1).unwrap().kind, PitchforkKind::Supercritical);
        assert_eq!(classify_pitchfork(s114(), 0.2).unwrap().kind, PitchforkKind::Subcritical);
        let c = classify_pitchfork(s114(), 0.0_f64).unwrap();
        assert_eq!(c.kind, PitchforkKind::Supercritical);
        assert!((c.lambda3_at_uc + 26.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn negative_disparity_rejected() {
        assert!(matches!(find_bifurcation_point(s114(), -0.1), Err(CtmError::Usage(_))));
        assert!(find_transition::<f64>(ClusterSizes::new(8, 4)).is_err());
    }

    #[test]
    fn non_tanh_rejected() {
        assert!(check_sigmoid(Sigmoid::Tanh).is_ok());
        assert!(matches!(check_sigmoid(Sigmoid::Algebraic), Err(CtmError::Usage(_))));
    }

    #[test]
    fn sweep_is_ordered() {
        let rows = sweep_cluster_size::<f64>(30, 2, 14).unwrap();
        assert_eq!(rows.iter().map(|r| r.n).collect::<Vec<_>>(), (2..=14).collect::<Vec<_>>());
        assert!(sweep_cluster_size::<f64>(30, 2, 15).is_err());
        let mut out = Vec::new();
        write_sweep_csv(&rows, &ConfigRecord::new().with("N", 30), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("# N=30\nN,n,exists,"));
        assert_eq!(text.lines().count(), 2 + rows.len());
    }

    #[test]
    fn single_precision_transition() {
        let r = find_transition::<f32>(s114()).unwrap();
        assert!((r.eps_star.unwrap() - 0.11).abs() < 0.005);
    }
}
