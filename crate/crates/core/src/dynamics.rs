//! Benchmark non-autonomous systems and the fixed-step RK4 reference solver.

use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{contract, Error, Result};
use crate::signal::Signal;

/// Right-hand side `f(x, γ, extra) -> dx/dt`, written into the last argument.
pub type RhsFn = dyn Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync;

/// Bounds on the state and inputs along a run, used to evaluate local
/// Lipschitz constants.
#[derive(Debug, Clone, Copy)]
pub struct LipschitzContext<'a> {
    /// sup over the run of ‖x‖∞.
    pub state_sup: f64,
    /// sup over the run of |γ_c| per channel.
    pub input_sup: &'a [f64],
    /// Constant parameters of the system (empty unless it is a family).
    pub extra: &'a [f64],
}

/// Lipschitz constants in the ∞-norm: `l1` for the state and one
/// constant per input channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Lipschitz {
    pub l1: f64,
    pub l2: Vec<f64>,
}

pub type LipschitzFn = dyn Fn(&LipschitzContext<'_>) -> Lipschitz + Send + Sync;

/// A non-autonomous system `dx/dt = f(x, γ(t))`.
#[derive(Clone)]
pub struct SystemSpec {
    pub name: String,
    pub dim: usize,
    pub input_arity: usize,
    /// Number of constant parameters appended to every rhs call.
    pub n_extra: usize,
    rhs: Arc<RhsFn>,
    lipschitz: Option<Arc<LipschitzFn>>,
    /// Largest micro-step the explicit integrator accepts.
    pub max_step: Option<f64>,
}

impl fmt::Debug for SystemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SystemSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("input_arity", &self.input_arity)
            .field("n_extra", &self.n_extra)
            .field("max_step", &self.max_step)
            .finish()
    }
}

impl SystemSpec {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        input_arity: usize,
        rhs: impl Fn(&[f64], &[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            dim,
            input_arity,
            n_extra: 0,
            rhs: Arc::new(rhs),
            lipschitz: None,
            max_step: None,
        }
    }

    pub fn with_extra(mut self, n_extra: usize) -> Self {
        self.n_extra = n_extra;
        self
    }

    pub fn with_lipschitz(
        mut self,
        l: impl Fn(&LipschitzContext<'_>) -> Lipschitz + Send + Sync + 'static,
    ) -> Self {
        self.lipschitz = Some(Arc::new(l));
        self
    }

    pub fn with_max_step(mut self, h: f64) -> Self {
        self.max_step = Some(h);
        self
    }

    pub fn has_lipschitz(&self) -> bool {
        self.lipschitz.is_some()
    }

    pub fn lipschitz(&self, ctx: &LipschitzContext<'_>) -> Option<Lipschitz> {
        self.lipschitz.as_ref().map(|l| l(ctx))
    }

    /// Evaluates `f(x, γ)` for a system without constant parameters.
    pub fn eval_rhs(&self, x: &[f64], gamma: &[f64]) -> Result<Vec<f64>> {
        self.eval_rhs_with(x, gamma, &[])
    }

    pub fn eval_rhs_with(&self, x: &[f64], gamma: &[f64], extra: &[f64]) -> Result<Vec<f64>> {
        self.check_args(x, gamma, extra)?;
        let mut out = vec![0.0; self.dim];
        (self.rhs)(x, gamma, extra, &mut out);
        Ok(out)
    }

    /// Unchecked evaluation into a caller buffer.
    #[inline]
    pub fn rhs_into(&self, x: &[f64], gamma: &[f64], extra: &[f64], out: &mut [f64]) {
        (self.rhs)(x, gamma, extra, out)
    }

    pub(crate) fn check_args(&self, x: &[f64], gamma: &[f64], extra: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(contract(
                "x",
                alloc::format!("length {} != state dimension {}", x.len(), self.dim),
            ));
        }
        if gamma.len() != self.input_arity {
            return Err(contract(
                "gamma_values",
                alloc::format!("length {} != input arity {}", gamma.len(), self.input_arity),
            ));
        }
        if extra.len() != self.n_extra {
            return Err(contract(
                "extra",
                alloc::format!("length {} != parameter count {}", extra.len(), self.n_extra),
            ));
        }
        Ok(())
    }

    fn check_step(&self, h: f64) -> Result<()> {
        if !(h > 0.0) {
            return Err(contract("h", "step must be positive"));
        }
        if let Some(limit) = self.max_step {
            if h > limit {
                return Err(Error::Unstable { step: h, limit });
            }
        }
        Ok(())
    }
}

/// Sampled solution: `states[i]` is the state at `times[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn last(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    /// Validates the structural invariants.
    pub fn validate(&self) -> Result<()> {
        if self.times.is_empty() || self.times.len() != self.states.len() {
            return Err(contract("trajectory", "times and states must have equal nonzero length"));
        }
        if self.times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(contract("trajectory", "times must be strictly increasing"));
        }
        let d = self.dim();
        if self.states.iter().any(|s| s.len() != d) {
            return Err(contract("trajectory", "states have inconsistent dimension"));
        }
        Ok(())
    }
}

/// Scratch buffers for repeated RK4 stepping.
#[derive(Debug, Clone)]
pub struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
    gamma: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize, input_arity: usize) -> Self {
        Self {
            k: [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]],
            tmp: vec![0.0; dim],
            gamma: vec![0.0; input_arity],
        }
    }

    pub fn for_system(system: &SystemSpec) -> Self {
        Self::new(system.dim, system.input_arity)
    }

    /// Advances `x` in place by one classical RK4 step of size `h` from `t`.
    /// Does not validate dimensions or the step size.
    pub fn step_in_place<S: Signal + ?Sized>(
        &mut self,
        system: &SystemSpec,
        x: &mut [f64],
        t: f64,
        h: f64,
        signal: &S,
        extra: &[f64],
    ) {
        let half = 0.5 * h;
        let [k1, k2, k3, k4] = &mut self.k;

        signal.eval(t, &mut self.gamma);
        system.rhs_into(x, &self.gamma, extra, k1);

        for ((tmp, xi), ki) in self.tmp.iter_mut().zip(x.iter()).zip(k1.iter()) {
            *tmp = xi + half * ki;
        }
        signal.eval(t + half, &mut self.gamma);
        system.rhs_into(&self.tmp, &self.gamma, extra, k2);

        for ((tmp, xi), ki) in self.tmp.iter_mut().zip(x.iter()).zip(k2.iter()) {
            *tmp = xi + half * ki;
        }
        system.rhs_into(&self.tmp, &self.gamma, extra, k3);

        for ((tmp, xi), ki) in self.tmp.iter_mut().zip(x.iter()).zip(k3.iter()) {
            *tmp = xi + h * ki;
        }
        signal.eval(t + h, &mut self.gamma);
        system.rhs_into(&self.tmp, &self.gamma, extra, k4);

        let sixth = h / 6.0;
        for i in 0..x.len() {
            x[i] += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }

    /// Integrates from `t0` over `n_steps` uniform steps of size `h`,
    /// overwriting `x` with the final state.
    pub fn advance<S: Signal + ?Sized>(
        &mut self,
        system: &SystemSpec,
        x: &mut [f64],
        t0: f64,
        h: f64,
        n_steps: usize,
        signal: &S,
        extra: &[f64],
    ) -> Result<()> {
        system.check_step(h)?;
        for i in 0..n_steps {
            let t = t0 + i as f64 * h;
            self.step_in_place(system, x, t, h, signal, extra);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Overflow {
                    t: t + h,
                    step: i,
                    state: x.to_vec(),
                });
            }
        }
        Ok(())
    }
}

fn check_signal<S: Signal + ?Sized>(system: &SystemSpec, signal: &S) -> Result<()> {
    if signal.arity() != system.input_arity {
        return Err(contract(
            "signal",
            alloc::format!(
                "arity {} != system input arity {}",
                signal.arity(),
                system.input_arity
            ),
        ));
    }
    Ok(())
}

/// One classical RK4 step.
pub fn rk4_step<S: Signal + ?Sized>(
    system: &SystemSpec,
    x: &[f64],
    t: f64,
    h: f64,
    signal: &S,
    extra: &[f64],
) -> Result<Vec<f64>> {
    check_signal(system, signal)?;
    let gamma = vec![0.0; system.input_arity];
    system.check_args(x, &gamma, extra)?;
    let mut state = x.to_vec();
    Rk4::for_system(system).advance(system, &mut state, t, h, 1, signal, extra)?;
    Ok(state)
}

/// Integrates over `[t0, t1]` with `n_steps` uniform RK4 steps, recording
/// every step.
pub fn integrate<S: Signal + ?Sized>(
    system: &SystemSpec,
    x0: &[f64],
    t0: f64,
    t1: f64,
    n_steps: usize,
    signal: &S,
    extra: &[f64],
) -> Result<Trajectory> {
    if !(t1 > t0) {
        return Err(contract("t1", "end time must exceed start time"));
    }
    if n_steps == 0 {
        return Err(contract("n_steps", "need at least one step"));
    }
    let times: Vec<f64> = (0..=n_steps)
        .map(|i| {
            if i == n_steps {
                t1
            } else {
                t0 + (t1 - t0) * (i as f64) / (n_steps as f64)
            }
        })
        .collect();
    integrate_on_grid(system, x0, &times, 1, signal, extra)
}

/// Integrates through the given time grid, taking `substeps` uniform RK4
/// steps inside every grid interval.
pub fn integrate_on_grid<S: Signal + ?Sized>(
    system: &SystemSpec,
    x0: &[f64],
    times: &[f64],
    substeps: usize,
    signal: &S,
    extra: &[f64],
) -> Result<Trajectory> {
    check_signal(system, signal)?;
    let gamma = vec![0.0; system.input_arity];
    system.check_args(x0, &gamma, extra)?;
    if times.is_empty() || times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(contract("times", "grid must be nonempty and strictly increasing"));
    }
    if substeps == 0 {
        return Err(contract("substeps", "need at least one substep"));
    }
    let mut rk = Rk4::for_system(system);
    let mut x = x0.to_vec();
    let mut states = Vec::with_capacity(times.len());
    states.push(x.clone());
    for (n, w) in times.windows(2).enumerate() {
        let h = (w[1] - w[0]) / substeps as f64;
        rk.advance(system, &mut x, w[0], h, substeps, signal, extra)
            .map_err(|e| match e {
                Error::Overflow { t, state, .. } => Error::Overflow { t, step: n, state },
                other => other,
            })?;
        states.push(x.clone());
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states,
    })
}

/// Uniform grid `t0, t0 + δ, …` up to `t_end` (inclusive within rounding).
pub fn uniform_grid(t0: f64, t_end: f64, delta: f64) -> Result<Vec<f64>> {
    if !(delta > 0.0) || !(t_end > t0) {
        return Err(contract("grid", "need delta > 0 and t_end > t0"));
    }
    let n = libm::round((t_end - t0) / delta) as usize;
    let n = n.max(1);
    Ok((0..=n).map(|i| t0 + i as f64 * delta).collect())
}

/// `dx/dt = −α(t)·x + β(t)`; inputs `(α, β)`.
pub fn linear_scalar() -> SystemSpec {
    SystemSpec::new("linear_scalar", 1, 2, |x, g, _, out| {
        out[0] = -g[0] * x[0] + g[1];
    })
    .with_lipschitz(|ctx| Lipschitz {
        l1: ctx.input_sup[0],
        l2: vec![ctx.state_sup, 1.0],
    })
}

/// Lotka–Volterra predator–prey with control `u(t)` on the prey equation.
pub fn predator_prey() -> SystemSpec {
    SystemSpec::new("predator_prey", 2, 1, |x, g, _, out| {
        out[0] = x[0] - x[0] * x[1] + g[0];
        out[1] = -x[1] + x[0] * x[1];
    })
    .with_lipschitz(|ctx| Lipschitz {
        l1: 1.0 + 2.0 * ctx.state_sup,
        l2: vec![1.0],
    })
}

/// Forced oscillator `x1' = x2`, `x2' = −ν(t)·x1 − k·x2 + f(t)`; inputs `(ν, f)`.
pub fn forced_oscillator(damping: f64) -> SystemSpec {
    SystemSpec::new("forced_oscillator", 2, 2, move |x, g, _, out| {
        out[0] = x[1];
        out[1] = -g[0] * x[0] - damping * x[1] + g[1];
    })
    .with_lipschitz(move |ctx| Lipschitz {
        l1: (ctx.input_sup[0] + libm::fabs(damping)).max(1.0),
        l2: vec![ctx.state_sup, 1.0],
    })
}

/// Damping used by the `forced_oscillator` preset. Below about 0.5 the
/// input ν = cos t pumps the amplitude without bound.
pub const OSCILLATOR_DAMPING: f64 = 1.0;

/// Semidiscrete heat equation with a Gaussian source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatConfig {
    /// Grid points on [0, 1], including both boundary points.
    pub n_grid: usize,
    pub mu: f64,
    pub sigma: f64,
}

impl HeatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid < 3 {
            return Err(contract("n_grid", "need at least 3 grid points"));
        }
        if !(self.sigma > 0.0) || !self.mu.is_finite() {
            return Err(contract("sigma", "sigma must be positive and mu finite"));
        }
        Ok(())
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.n_grid - 1) as f64
    }

    /// Interior grid coordinates x_1 … x_{n−2}.
    pub fn interior(&self) -> Vec<f64> {
        heat_interior(self.n_grid)
    }

    /// Source profile `exp(−(x_j − μ)²/σ²)` at interior points.
    pub fn source(&self) -> Vec<f64> {
        heat_source(&self.interior(), self.mu, self.sigma)
    }
}

pub fn heat_interior(n_grid: usize) -> Vec<f64> {
    let h = 1.0 / (n_grid - 1) as f64;
    (1..n_grid - 1).map(|j| j as f64 * h).collect()
}

fn heat_source(xs: &[f64], mu: f64, sigma: f64) -> Vec<f64> {
    xs.iter()
        .map(|x| {
            let z = (x - mu) / sigma;
            libm::exp(-z * z)
        })
        .collect()
}

#[inline]
fn laplacian_into(u: &[f64], inv_h2: f64, out: &mut [f64]) {
    let d = u.len();
    for j in 0..d {
        let left = if j == 0 { 0.0 } else { u[j - 1] };
        let right = if j + 1 == d { 0.0 } else { u[j + 1] };
        out[j] = (left - 2.0 * u[j] + right) * inv_h2;
    }
}

/// Explicit-step guard for the semidiscrete heat system.
pub fn heat_max_step(n_grid: usize) -> f64 {
    let h = 1.0 / (n_grid - 1) as f64;
    0.4 * h * h
}

/// Semidiscrete heat system with fixed source parameters; input `α(t)`.
pub fn make_heat_system(cfg: HeatConfig) -> Result<SystemSpec> {
    cfg.validate()?;
    let h = cfg.spacing();
    let inv_h2 = 1.0 / (h * h);
    let g = cfg.source();
    let gmax = g.iter().cloned().fold(0.0, f64::max);
    let name = alloc::format!("heat{}", cfg.n_grid);
    Ok(
        SystemSpec::new(name, cfg.n_grid - 2, 1, move |u, a, _, out| {
            laplacian_into(u, inv_h2, out);
            for (o, gj) in out.iter_mut().zip(&g) {
                *o += a[0] * gj;
            }
        })
        .with_lipschitz(move |_| Lipschitz {
            l1: 4.0 * inv_h2,
            l2: vec![gmax],
        })
        .with_max_step(heat_max_step(cfg.n_grid)),
    )
}

/// Heat system whose source centre and width `(μ, σ)` are passed as constant
/// parameters, so one system covers the whole sampled family.
pub fn heat_family(n_grid: usize) -> Result<SystemSpec> {
    HeatConfig {
        n_grid,
        mu: 0.0,
        sigma: 1.0,
    }
    .validate()?;
    let xs = heat_interior(n_grid);
    let h = 1.0 / (n_grid - 1) as f64;
    let inv_h2 = 1.0 / (h * h);
    let name = alloc::format!("heat{}", n_grid);
    Ok(SystemSpec::new(name, n_grid - 2, 1, move |u, a, p, out| {
        laplacian_into(u, inv_h2, out);
        let (mu, sigma) = (p[0], p[1]);
        for (o, x) in out.iter_mut().zip(&xs) {
            let z = (x - mu) / sigma;
            *o += a[0] * libm::exp(-z * z);
        }
    })
    .with_extra(2)
    .with_lipschitz(move |_| Lipschitz {
        l1: 4.0 * inv_h2,
        l2: vec![1.0],
    })
    .with_max_step(heat_max_step(n_grid)))
}

/// Named benchmark presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    LinearScalar,
    PredatorPrey,
    ForcedOscillator,
    Heat22,
}

impl Preset {
    pub const ALL: [Preset; 4] = [
        Preset::LinearScalar,
        Preset::PredatorPrey,
        Preset::ForcedOscillator,
        Preset::Heat22,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::LinearScalar => "linear_scalar",
            Preset::PredatorPrey => "predator_prey",
            Preset::ForcedOscillator => "forced_oscillator",
            Preset::Heat22 => "heat22",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.name() == name)
    }

    /// The system, with `(μ, σ)` as constant parameters for the heat preset.
    pub fn system(self) -> SystemSpec {
        match self {
            Preset::LinearScalar => linear_scalar(),
            Preset::PredatorPrey => predator_prey(),
            Preset::ForcedOscillator => forced_oscillator(OSCILLATOR_DAMPING),
            Preset::Heat22 => heat_family(22).expect("valid grid"),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl core::str::FromStr for Preset {
    type Err = String;
    fn from_str(s: &str) -> core::result::Result<Self, String> {
        Self::from_name(s).ok_or_else(|| s.to_string())
    }
}
