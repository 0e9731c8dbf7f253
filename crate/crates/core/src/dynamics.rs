//! The N-agent continuous threshold model with a slow-filter gain controller.
//!
//! Each agent evolves as
//! `x_i' = -d_i x_i + sum_j a_ij u S(v x_j) + d_i (1 - 2 mu_i) + beta_i(t)`
//! and, in feedback mode, `u = u0 S(kappa |xs|)` with `xs' = kappa_s (mean(x) - xs)`.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CtmError, Result};
use crate::export::{write_row, ConfigRecord};
use crate::integrator::{integrate, IntegratorConfig};
use crate::network::{ClusterLabel, Network};
use crate::scalar::Real;
use crate::sigmoid::Sigmoid;

/// How the social sensitivity `u` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GainMode<T> {
    /// `u = u0 S(kappa |xs|)`, driven by the slow filter.
    Feedback,
    /// Constant `u`; the filter state is frozen.
    Fixed(T),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CtmParams<T> {
    /// Maximal social sensitivity.
    pub u0: T,
    /// Saturation rate of the gain.
    pub kappa: T,
    /// Rate of the slow average filter.
    pub kappa_s: T,
    /// Social effort gain inside the sigmoid.
    pub v: T,
    pub gain: GainMode<T>,
    pub sigmoid: Sigmoid,
}

impl<T: Real> CtmParams<T> {
    pub fn feedback(u0: T, kappa: T, kappa_s: T) -> Self {
        Self { u0, kappa, kappa_s, v: T::one(), gain: GainMode::Feedback, sigmoid: Sigmoid::Tanh }
    }

    /// Constant gain `u`, unit effort.
    pub fn fixed(u: T) -> Self {
        Self { gain: GainMode::Fixed(u), ..Self::feedback(T::one(), T::one(), T::one()) }
    }

    pub fn with_v(mut self, v: T) -> Self {
        self.v = v;
        self
    }

    pub fn check(&self) -> Result<()> {
        let positive = |name: &str, x: T| {
            if x > T::zero() && x.is_finite() {
                Ok(())
            } else {
                Err(CtmError::Config(format!("{name} = {x} must be positive")))
            }
        };
        positive("u0", self.u0)?;
        positive("kappa", self.kappa)?;
        positive("kappa_s", self.kappa_s)?;
        positive("v", self.v)?;
        if let GainMode::Fixed(u) = self.gain {
            if !(u >= T::zero() && u.is_finite()) {
                return Err(CtmError::Config(format!("fixed gain u = {u} must be non-negative")));
            }
        }
        Ok(())
    }

    pub fn record(&self) -> ConfigRecord {
        let mut rec = ConfigRecord::new();
        rec.set("u0", self.u0).set("kappa", self.kappa).set("kappa_s", self.kappa_s).set("v", self.v);
        match self.gain {
            GainMode::Feedback => rec.set("gain", "feedback"),
            GainMode::Fixed(u) => rec.set("gain", format!("fixed({u})")),
        };
        rec.set("sigmoid", self.sigmoid.name());
        rec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControllerState<T> {
    /// Slow filtered average state.
    pub x_bar_s: T,
}

/// Exogenous additive input on a single agent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputSchedule<T> {
    pub perturbed_agent: Option<usize>,
    pub beta: T,
    pub start: T,
    /// `None` keeps the input on for all later times.
    pub end: Option<T>,
}

impl<T: Real> Default for InputSchedule<T> {
    fn default() -> Self {
        Self::none()
    }
}

impl<T: Real> InputSchedule<T> {
    pub fn none() -> Self {
        Self { perturbed_agent: None, beta: T::zero(), start: T::zero(), end: None }
    }

    /// Constant input `beta` on `agent` for `t >= 0`.
    pub fn persistent(agent: usize, beta: T) -> Self {
        Self { perturbed_agent: Some(agent), beta, start: T::zero(), end: None }
    }

    #[inline]
    pub fn value(&self, agent: usize, t: T) -> T {
        match self.perturbed_agent {
            Some(a) if a == agent && t >= self.start && self.end.is_none_or(|e| t < e) => self.beta,
            _ => T::zero(),
        }
    }

    pub fn check(&self, size: usize) -> Result<()> {
        if let Some(a) = self.perturbed_agent {
            if a >= size {
                return Err(CtmError::Config(format!("perturbed agent {a} out of range for N = {size}")));
            }
        }
        if !self.beta.is_finite() {
            return Err(CtmError::Config("beta must be finite".into()));
        }
        Ok(())
    }
}

/// `u` for the given controller state. In fixed mode returns the constant.
pub fn control_gain<T: Real>(params: &CtmParams<T>, controller: &ControllerState<T>) -> T {
    match params.gain {
        GainMode::Feedback => params.u0 * params.sigmoid.value(params.kappa * controller.x_bar_s.abs()),
        GainMode::Fixed(u) => u,
    }
}

/// The coupled agent + controller vector field over a fixed network.
///
/// The packed state is `[x_0, .., x_{N-1}, xs]`.
#[derive(Debug, Clone)]
pub struct CtmSystem<'a, T> {
    network: &'a Network<T>,
    params: CtmParams<T>,
    input: InputSchedule<T>,
    bias: Vec<T>,
    frozen: Vec<bool>,
    coupling: Vec<T>,
}

impl<'a, T: Real> CtmSystem<'a, T> {
    pub fn new(network: &'a Network<T>, params: CtmParams<T>, input: InputSchedule<T>) -> Result<Self> {
        params.check()?;
        input.check(network.len())?;
        let problems = network.validate();
        if !problems.is_empty() {
            return Err(CtmError::Config(problems.join("; ")));
        }
        let two = T::lit(2.0);
        let bias = (0..network.len())
            .map(|i| T::count(network.degree(i)) * (T::one() - two * network.thresholds()[i]))
            .collect();
        Ok(Self {
            network,
            params,
            input,
            bias,
            frozen: vec![false; network.len()],
            coupling: vec![T::zero(); network.len()],
        })
    }

    /// Holds the marked agents at their initial state (zero derivative).
    pub fn with_frozen(mut self, frozen: Vec<bool>) -> Result<Self> {
        if frozen.len() != self.network.len() {
            return Err(CtmError::Usage("frozen mask has wrong length".into()));
        }
        self.frozen = frozen;
        Ok(self)
    }

    pub fn dimension(&self) -> usize {
        self.network.len() + 1
    }

    pub fn params(&self) -> &CtmParams<T> {
        &self.params
    }

    /// Evaluates the packed field `dz = F(t, z)`.
    pub fn eval(&mut self, t: T, z: &[T], dz: &mut [T]) {
        let size = self.network.len();
        let (x, xs) = (&z[..size], z[size]);
        let u = control_gain(&self.params, &ControllerState { x_bar_s: xs });
        for (c, &xj) in self.coupling.iter_mut().zip(x) {
            *c = u * self.params.sigmoid.value(self.params.v * xj);
        }
        for i in 0..size {
            if self.frozen[i] {
                dz[i] = T::zero();
                continue;
            }
            let mut social = T::zero();
            for (&a, &c) in self.network.row(i).iter().zip(&self.coupling) {
                if a != 0 {
                    social = social + c;
                }
            }
            dz[i] = -T::count(self.network.degree(i)) * x[i] + social + self.bias[i] + self.input.value(i, t);
        }
        dz[size] = match self.params.gain {
            GainMode::Feedback => {
                let mean = x.iter().copied().sum::<T>() / T::count(size);
                self.params.kappa_s * (mean - xs)
            }
            GainMode::Fixed(_) => T::zero(),
        };
    }
}

/// One evaluation of the CTM field: returns `(x', xs')`.
pub fn ctm_vector_field<T: Real>(
    network: &Network<T>,
    params: &CtmParams<T>,
    state: &[T],
    controller: &ControllerState<T>,
    input: &InputSchedule<T>,
    t: T,
) -> Result<(Vec<T>, T)> {
    if state.len() != network.len() {
        return Err(CtmError::Usage(format!(
            "state has {} components but the network has {} agents",
            state.len(),
            network.len()
        )));
    }
    let mut sys = CtmSystem::new(network, *params, *input)?;
    let mut z = state.to_vec();
    z.push(controller.x_bar_s);
    let mut dz = vec![T::zero(); z.len()];
    sys.eval(t, &z, &mut dz);
    let dxs = dz.pop().unwrap_or_else(T::zero);
    Ok((dz, dxs))
}

/// Time series produced by [`simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    pub u_series: Vec<T>,
    pub x_bar_series: Vec<T>,
    pub x_bar_s_series: Vec<T>,
    pub steady_state_reached: bool,
    pub config: ConfigRecord,
}

impl<T: Real> Trajectory<T> {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &[T] {
        self.states.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// Keeps every `factor`-th sample (plus the last one).
    pub fn decimated(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        let last = self.len().saturating_sub(1);
        let keep: Vec<usize> = (0..self.len()).filter(|&k| k % factor == 0 || k == last).collect();
        let pick = |v: &Vec<T>| keep.iter().map(|&k| v[k]).collect::<Vec<T>>();
        Self {
            times: pick(&self.times),
            states: keep.iter().map(|&k| self.states[k].clone()).collect(),
            u_series: pick(&self.u_series),
            x_bar_series: pick(&self.x_bar_series),
            x_bar_s_series: pick(&self.x_bar_s_series),
            steady_state_reached: self.steady_state_reached,
            config: self.config.clone(),
        }
    }

    /// CSV with columns `t, x_0..x_{N-1}, u, x_bar, x_bar_s`, preceded by
    /// the config as `#` lines.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        self.config.write_header(w)?;
        let size = self.states.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((0..size).map(|i| format!("x_{i}")));
        header.extend(["u", "x_bar", "x_bar_s"].map(String::from));
        writeln!(w, "{}", header.join(","))?;
        let mut row = Vec::with_capacity(size + 4);
        for k in 0..self.len() {
            row.clear();
            row.push(self.times[k]);
            row.extend_from_slice(&self.states[k]);
            row.extend([self.u_series[k], self.x_bar_series[k], self.x_bar_s_series[k]]);
            write_row(w, &row)?;
        }
        Ok(())
    }
}

/// Integrates the coupled CTM from `initial_state` and `initial_x_bar_s`.
pub fn simulate<T: Real>(
    network: &Network<T>,
    params: &CtmParams<T>,
    initial_state: &[T],
    initial_x_bar_s: T,
    input: &InputSchedule<T>,
    integ: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    let sys = CtmSystem::new(network, *params, *input)?;
    simulate_system(sys, initial_state, initial_x_bar_s, integ)
}

/// Like [`simulate`] for an already-configured system (e.g. with frozen agents).
pub fn simulate_system<T: Real>(
    mut sys: CtmSystem<'_, T>,
    initial_state: &[T],
    initial_x_bar_s: T,
    integ: &IntegratorConfig<T>,
) -> Result<Trajectory<T>> {
    let size = sys.network.len();
    if initial_state.len() != size {
        return Err(CtmError::Usage(format!(
            "initial state has {} components but the network has {size} agents",
            initial_state.len()
        )));
    }
    let params = *sys.params();
    let input = sys.input;
    let mut z0 = initial_state.to_vec();
    z0.push(initial_x_bar_s);
    let sol = integrate(|t, z: &[T], dz: &mut [T]| sys.eval(t, z, dz), T::zero(), &z0, integ)?;

    let mut states = Vec::with_capacity(sol.states.len());
    let mut u_series = Vec::with_capacity(sol.states.len());
    let mut x_bar_series = Vec::with_capacity(sol.states.len());
    let mut x_bar_s_series = Vec::with_capacity(sol.states.len());
    for z in sol.states {
        let xs = z[size];
        u_series.push(control_gain(&params, &ControllerState { x_bar_s: xs }));
        x_bar_series.push(z[..size].iter().copied().sum::<T>() / T::count(size));
        x_bar_s_series.push(xs);
        let mut x = z;
        x.truncate(size);
        states.push(x);
    }

    let mut config = ConfigRecord::new().with("model", "ctm").with("agents", size);
    config.extend(&params.record());
    match input.perturbed_agent {
        Some(a) => config.set("perturbed_agent", a).set("beta", input.beta),
        None => config.set("perturbed_agent", "none").set("beta", T::zero()),
    };
    config
        .set("x_bar_s0", initial_x_bar_s)
        .set("method", format!("{:?}", integ.method))
        .set("dt", integ.dt)
        .set("t_end", integ.t_end)
        .set("steady_tol", integ.steady_tol);

    Ok(Trajectory {
        times: sol.times,
        states,
        u_series,
        x_bar_series,
        x_bar_s_series,
        steady_state_reached: sol.steady_state_reached,
        config,
    })
}

/// Random initial condition with negative mean: uniform on `[-1.5, -0.1]`,
/// the perturbed agent (if any) set to `-0.1`.
pub fn negative_mean_initial_state<T: Real>(size: usize, perturbed: Option<usize>, seed: u64) -> Vec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<T> = (0..size).map(|_| T::lit(rng.random_range(-1.5..=-0.1))).collect();
    if let Some(p) = perturbed.filter(|&p| p < size) {
        x[p] = T::lit(-0.1);
    }
    x
}

/// Average of the given agents' states.
pub fn cluster_mean<T: Real>(state: &[T], members: &[usize]) -> T {
    members.iter().map(|&i| state[i]).sum::<T>() / T::count(members.len().max(1))
}

/// Cluster averages `(y1, y2, y3)` of a three-cluster state.
pub fn cluster_averages<T: Real>(network: &Network<T>, state: &[T]) -> [T; 3] {
    let mut out = [T::zero(); 3];
    for (k, label) in [ClusterLabel::High, ClusterLabel::Low, ClusterLabel::Neutral].into_iter().enumerate() {
        out[k] = cluster_mean(state, &network.members(label));
    }
    out
}
