//! Explicit Runge-Kutta integration with steady-state early stopping.
//!
//! The fixed-step path is the default because it is bit-reproducible. The
//! adaptive Dormand-Prince 5(4) path lands exactly on the same output grid
//! (`dt * record_every`), so the two can be compared point by point.

use serde::{Deserialize, Serialize};

use crate::error::{CtmError, Result};
use crate::scalar::{sup_norm, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Method {
    #[default]
    Rk4Fixed,
    Rk45Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig<T> {
    pub method: Method,
    /// Step size (fixed) or initial step and output spacing unit (adaptive).
    pub dt: T,
    /// Integration horizon, measured from the initial time.
    pub t_end: T,
    pub abs_tol: T,
    pub rel_tol: T,
    /// Stop once `|f(x)|_inf` falls below this. Zero disables.
    pub steady_tol: T,
    /// Record every k-th step.
    pub record_every: usize,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            method: Method::Rk4Fixed,
            dt: T::lit(0.01),
            t_end: T::lit(100.0),
            abs_tol: T::lit(1e-9),
            rel_tol: T::lit(1e-7),
            steady_tol: T::lit(1e-10),
            record_every: 1,
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    pub fn rk4(dt: T, t_end: T) -> Self {
        Self { dt, t_end, ..Self::default() }
    }

    pub fn with_steady_tol(mut self, tol: T) -> Self {
        self.steady_tol = tol;
        self
    }

    pub fn check(&self) -> Result<()> {
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !pos(self.dt) {
            return Err(CtmError::Config(format!("dt = {} must be positive", self.dt)));
        }
        if !pos(self.t_end) {
            return Err(CtmError::Config(format!("t_end = {} must be positive", self.t_end)));
        }
        if !pos(self.abs_tol) || !pos(self.rel_tol) {
            return Err(CtmError::Config("adaptive tolerances must be positive".into()));
        }
        if !(self.steady_tol >= T::zero()) {
            return Err(CtmError::Config("steady_tol must be non-negative".into()));
        }
        if self.record_every == 0 {
            return Err(CtmError::Config("record_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Recorded solution of an initial value problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub steady_state_reached: bool,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl<T: Real> Solution<T> {
    pub fn last_state(&self) -> &[T] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    fn push(&mut self, t: T, x: &[T]) {
        if self.times.last().is_some_and(|&last| t <= last) {
            return;
        }
        self.times.push(t);
        self.states.push(x.to_vec());
    }
}

/// Integrates `x' = field(t, x)` from `(t0, initial)` over `config.t_end`.
///
/// `field` writes the derivative into its last argument.
pub fn integrate<T, F>(mut field: F, t0: T, initial: &[T], config: &IntegratorConfig<T>) -> Result<Solution<T>>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]),
{
    config.check()?;
    if let Some(i) = initial.iter().position(|v| !v.is_finite()) {
        return Err(CtmError::Integration {
            last_good_time: t0.as_f64(),
            reason: format!("initial component {i} is not finite"),
        });
    }
    match config.method {
        Method::Rk4Fixed => rk4(&mut field, t0, initial, config),
        Method::Rk45Adaptive => dopri(&mut field, t0, initial, config),
    }
}

fn non_finite<T: Real>(t: T, x: &[T]) -> Option<CtmError> {
    x.iter().position(|v| !v.is_finite()).map(|i| CtmError::Integration {
        last_good_time: t.as_f64(),
        reason: format!("state component {i} became non-finite"),
    })
}

fn rk4<T, F>(field: &mut F, t0: T, initial: &[T], config: &IntegratorConfig<T>) -> Result<Solution<T>>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]),
{
    let dim = initial.len();
    let dt = config.dt;
    let total_steps = {
        let ratio = (config.t_end / dt).as_f64();
        (ratio - 1e-9).ceil().max(1.0) as usize
    };
    let t_final = t0 + config.t_end;
    let half = T::lit(0.5);
    let sixth = T::one() / T::lit(6.0);
    let two = T::lit(2.0);

    let mut x = initial.to_vec();
    let mut k1 = vec![T::zero(); dim];
    let mut k2 = vec![T::zero(); dim];
    let mut k3 = vec![T::zero(); dim];
    let mut k4 = vec![T::zero(); dim];
    let mut tmp = vec![T::zero(); dim];

    let mut sol = Solution {
        times: Vec::with_capacity(total_steps / config.record_every + 2),
        states: Vec::with_capacity(total_steps / config.record_every + 2),
        steady_state_reached: false,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    sol.push(t0, &x);

    let mut t = t0;
    for step in 0..total_steps {
        field(t, &x, &mut k1);
        if config.steady_tol > T::zero() && sup_norm(&k1) < config.steady_tol {
            sol.push(t, &x);
            sol.steady_state_reached = true;
            return Ok(sol);
        }
        let t_next = if step + 1 == total_steps { t_final } else { t0 + dt * T::count(step + 1) };
        let h = t_next - t;
        for i in 0..dim {
            tmp[i] = x[i] + half * h * k1[i];
        }
        field(t + half * h, &tmp, &mut k2);
        for i in 0..dim {
            tmp[i] = x[i] + half * h * k2[i];
        }
        field(t + half * h, &tmp, &mut k3);
        for i in 0..dim {
            tmp[i] = x[i] + h * k3[i];
        }
        field(t + h, &tmp, &mut k4);
        for i in 0..dim {
            x[i] = x[i] + h * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
        }
        if let Some(e) = non_finite(t, &x) {
            return Err(e);
        }
        t = t_next;
        sol.accepted_steps += 1;
        if (step + 1) % config.record_every == 0 || step + 1 == total_steps {
            sol.push(t, &x);
        }
    }
    Ok(sol)
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

fn dopri<T, F>(field: &mut F, t0: T, initial: &[T], config: &IntegratorConfig<T>) -> Result<Solution<T>>
where
    T: Real,
    F: FnMut(T, &[T], &mut [T]),
{
    let dim = initial.len();
    let c: Vec<T> = C.iter().map(|&v| T::lit(v)).collect();
    let a: Vec<Vec<T>> = A.iter().map(|row| row.iter().map(|&v| T::lit(v)).collect()).collect();
    let e: Vec<T> = B5.iter().zip(B4.iter()).map(|(&p, &q)| T::lit(p - q)).collect();

    let spacing = config.dt * T::count(config.record_every);
    let t_final = t0 + config.t_end;
    let n_out = {
        let ratio = (config.t_end / spacing).as_f64();
        (ratio - 1e-9).ceil().max(1.0) as usize
    };
    let output_time = |k: usize| if k >= n_out { t_final } else { t0 + spacing * T::count(k) };

    let mut k: Vec<Vec<T>> = vec![vec![T::zero(); dim]; 7];
    let mut tmp = vec![T::zero(); dim];
    let mut x_new = vec![T::zero(); dim];
    let mut x = initial.to_vec();
    let mut sol = Solution {
        times: Vec::new(),
        states: Vec::new(),
        steady_state_reached: false,
        accepted_steps: 0,
        rejected_steps: 0,
    };
    sol.push(t0, &x);

    let mut t = t0;
    let mut h = config.dt;
    let mut next_out = 1usize;
    let safety = T::lit(0.9);
    let min_factor = T::lit(0.2);
    let max_factor = T::lit(5.0);
    let exponent = T::lit(-0.2);
    field(t, &x, &mut k[0]);

    while next_out <= n_out {
        if config.steady_tol > T::zero() && sup_norm(&k[0]) < config.steady_tol {
            sol.push(t, &x);
            sol.steady_state_reached = true;
            return Ok(sol);
        }
        let target = output_time(next_out);
        let remaining = target - t;
        let hits_output = h >= remaining;
        let step = if hits_output { remaining } else { h };
        let min_step = T::epsilon() * T::lit(16.0) * t.abs().max(T::one());
        if step < min_step {
            return Err(CtmError::Integration {
                last_good_time: t.as_f64(),
                reason: format!("adaptive step underflow (h = {step:e})"),
            });
        }

        for s in 1..7 {
            for i in 0..dim {
                let mut acc = T::zero();
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc = acc + a[s][j] * kj[i];
                }
                tmp[i] = x[i] + step * acc;
            }
            field(t + c[s] * step, &tmp, &mut k[s]);
        }
        // Stage 7 is evaluated at the 5th-order solution (FSAL).
        x_new.copy_from_slice(&tmp);
        let mut err_sq = T::zero();
        for i in 0..dim {
            let mut err = T::zero();
            for (s, ks) in k.iter().enumerate() {
                err = err + e[s] * ks[i];
            }
            err = err * step;
            let scale = config.abs_tol + config.rel_tol * x[i].abs().max(x_new[i].abs());
            let r = err / scale;
            err_sq = err_sq + r * r;
        }
        let err_norm = (err_sq / T::count(dim.max(1))).sqrt();
        if !err_norm.is_finite() {
            if let Some(e) = non_finite(t, &x_new) {
                return Err(e);
            }
        }
        let factor = if err_norm == T::zero() {
            max_factor
        } else {
            (safety * err_norm.powf(exponent)).max(min_factor).min(max_factor)
        };
        if err_norm <= T::one() {
            if let Some(e) = non_finite(t, &x_new) {
                return Err(e);
            }
            t = if hits_output { target } else { t + step };
            x.copy_from_slice(&x_new);
            let last = k[6].clone();
            k[0].copy_from_slice(&last);
            sol.accepted_steps += 1;
            if hits_output {
                sol.push(t, &x);
                next_out += 1;
                if factor < T::one() {
                    h = step * factor;
                }
            } else {
                h = step * factor;
            }
        } else {
            sol.rejected_steps += 1;
            h = step * factor.min(T::one());
        }
    }
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decay(_t: f64, x: &[f64], dx: &mut [f64]) {
        dx[0] = -x[0];
    }

    #[test]
    fn exponential_decay_rk4() {
        let cfg = IntegratorConfig { steady_tol: 0.0, ..IntegratorConfig::rk4(0.01, 5.0) };
        let sol = integrate(decay, 0.0, &[1.0], &cfg).unwrap();
        let end = sol.last_state()[0];
        // exp(-5) = 0.006737946999085467 (mpmath)
        assert!((end - 0.006_737_946_999_085_467).abs() < 1e-8, "{end}");
        assert!((sol.times.last().unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(sol.times.len(), 501);
        assert!(sol.times.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |dt: f64| {
            let cfg = IntegratorConfig { steady_tol: 0.0, ..IntegratorConfig::rk4(dt, 2.0) };
            let sol = integrate(decay, 0.0, &[1.0], &cfg).unwrap();
            (sol.last_state()[0] - (-2.0_f64).exp()).abs()
        };
        let ratio = err(0.1) / err(0.05);
        assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn zero_field_stops_immediately() {
        let cfg = IntegratorConfig::rk4(0.01, 10.0);
        let sol = integrate(|_, _, dx: &mut [f64]| dx.fill(0.0), 0.0, &[3.0, -1.0], &cfg).unwrap();
        assert!(sol.steady_state_reached);
        assert_eq!(sol.accepted_steps, 0);
        assert_eq!(sol.last_state(), &[3.0, -1.0]);
    }

    #[test]
    fn tanh_relaxation_matches_fine_reference() {
        let field = |_t: f64, x: &[f64], dx: &mut [f64]| dx[0] = -x[0] + x[0].tanh();
        let coarse = IntegratorConfig { steady_tol: 0.0, ..IntegratorConfig::rk4(0.01, 10.0) };
        let fine = IntegratorConfig { steady_tol: 0.0, ..IntegratorConfig::rk4(0.0005, 10.0) };
        let a = integrate(field, 0.0, &[2.0], &coarse).unwrap().last_state()[0];
        let b = integrate(field, 0.0, &[2.0], &fine).unwrap().last_state()[0];
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        // linear part cancels at 0: x' ~ -x^3/3, so x(t) ~ sqrt(3 / (2t))
        assert!(a > 0.0 && a < 2.0);
        let long = IntegratorConfig { steady_tol: 0.0, ..IntegratorConfig::rk4(0.01, 1000.0) };
        let c = integrate(field, 0.0, &[2.0], &long).unwrap().last_state()[0];
        let ratio = c / (1.5_f64 / 1000.0).sqrt();
        assert!((ratio - 1.0).abs() < 0.05, "{c}");
    }

    #[test]
    fn adaptive_hits_output_grid() {
        let cfg = IntegratorConfig {
            method: Method::Rk45Adaptive,
            steady_tol: 0.0,
            record_every: 10,
            ..IntegratorConfig::rk4(0.01, 5.0)
        };
        let sol = integrate(decay, 0.0, &[1.0], &cfg).unwrap();
        assert_eq!(sol.times.len(), 51);
        for (k, (&t, x)) in sol.times.iter().zip(&sol.states).enumerate() {
            assert!((t - 0.1 * k as f64).abs() < 1e-12);
            assert!((x[0] - (-t).exp()).abs() < 1e-7);
        }
    }

    #[test]
    fn non_finite_state_is_reported() {
        let cfg = IntegratorConfig { steady_tol: 0.0, ..IntegratorConfig::rk4(0.1, 10.0) };
        let err = integrate(|_, x: &[f64], dx: &mut [f64]| dx[0] = x[0] * x[0], 0.0, &[1.0], &cfg)
            .unwrap_err();
        match err {
            CtmError::Integration { last_good_time, .. } => assert!(last_good_time < 1.5),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = IntegratorConfig::<f64> { dt: 0.0, ..Default::default() };
        assert!(integrate(decay, 0.0, &[1.0], &cfg).is_err());
    }
}
