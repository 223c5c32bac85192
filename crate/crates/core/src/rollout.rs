//! Recursive multi-step prediction with a one-step model.

use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::{assemble_input_unchecked, local_solve, InputLayout, DEFAULT_MICRO_STEPS};
use crate::dynamics::{Rk4, SystemSpec, Trajectory};
use crate::error::{contract, Result};
use crate::flownet::ResidualNet;
use crate::input_param::{BasisSpec, LocalInputParams, PiecewiseInput};
use crate::poly_model::{FeatureWorkspace, PolyModel};
use crate::signal::Signal;

const DOMAIN_SLACK: f64 = 1e-9;

/// A map `(x, Γ, extra, δ) → x_next` with the residual structure.
pub trait OneStepModel {
    fn layout(&self) -> InputLayout;

    /// Writes the next state for the assembled model input into `out`.
    fn step(&self, x_in: &[f64], out: &mut [f64]) -> Result<()>;

    /// False when `x_in` lies outside the region the model was built on.
    fn in_domain(&self, _x_in: &[f64]) -> bool {
        true
    }
}

impl OneStepModel for ResidualNet {
    fn layout(&self) -> InputLayout {
        self.layout
    }

    fn step(&self, x_in: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&self.model_forward(x_in)?);
        Ok(())
    }

    fn in_domain(&self, x_in: &[f64]) -> bool {
        self.norm.apply(x_in).iter().all(|v| v.abs() <= 1.0 + DOMAIN_SLACK)
    }
}

impl OneStepModel for PolyModel {
    fn layout(&self) -> InputLayout {
        self.layout
    }

    fn step(&self, x_in: &[f64], out: &mut [f64]) -> Result<()> {
        out.copy_from_slice(&x_in[..self.layout.dim]);
        self.increment_into(x_in, &mut FeatureWorkspace::new(), out);
        Ok(())
    }

    fn in_domain(&self, x_in: &[f64]) -> bool {
        self.in_box(x_in)
    }
}

impl<M: OneStepModel + ?Sized> OneStepModel for &M {
    fn layout(&self) -> InputLayout {
        (**self).layout()
    }
    fn step(&self, x_in: &[f64], out: &mut [f64]) -> Result<()> {
        (**self).step(x_in, out)
    }
    fn in_domain(&self, x_in: &[f64]) -> bool {
        (**self).in_domain(x_in)
    }
}

/// Exact one-step map of the modified system, by RK4 micro-stepping.
#[derive(Clone)]
pub struct ExactIncrement {
    pub system: SystemSpec,
    pub basis: BasisSpec,
    pub micro_steps: usize,
}

impl ExactIncrement {
    pub fn new(system: SystemSpec, basis: BasisSpec) -> Self {
        Self {
            system,
            basis,
            micro_steps: DEFAULT_MICRO_STEPS,
        }
    }

    pub fn with_micro_steps(mut self, n: usize) -> Self {
        self.micro_steps = n.max(1);
        self
    }
}

impl OneStepModel for ExactIncrement {
    fn layout(&self) -> InputLayout {
        InputLayout {
            dim: self.system.dim,
            input_arity: self.system.input_arity,
            basis: self.basis,
            n_extra: self.system.n_extra,
            include_delta: true,
        }
    }

    fn step(&self, x_in: &[f64], out: &mut [f64]) -> Result<()> {
        let l = self.layout();
        let (x, rest) = x_in.split_at(l.dim);
        let (gamma, rest) = rest.split_at(l.n_gamma());
        let (extra, delta) = rest.split_at(l.n_extra);
        let local = LocalInputParams::new(gamma.to_vec(), l.input_arity, delta[0], self.basis)?;
        let mut rk = Rk4::for_system(&self.system);
        out.copy_from_slice(&local_solve(&self.system, &mut rk, x, &local, extra, self.micro_steps)?);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRun {
    pub x0: Vec<f64>,
    pub grid: Vec<f64>,
    /// States up to the failure point when the run was truncated.
    pub predicted: Trajectory,
    pub fitted_inputs: PiecewiseInput,
    /// Step indices `n` whose model input left the model's domain.
    pub out_of_domain: Vec<usize>,
    /// Grid index of the first non-finite state, if any.
    pub failed_at: Option<usize>,
}

impl PredictionRun {
    pub fn completed(&self) -> bool {
        self.failed_at.is_none()
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(contract("grid", "need a strictly increasing grid of length >= 2"));
    }
    Ok(())
}

/// Fits Γ_n on every grid interval and applies the model recursively.
pub fn predict<M, S>(model: &M, x0: &[f64], signal: &S, extra: &[f64], grid: &[f64]) -> Result<PredictionRun>
where
    M: OneStepModel + ?Sized,
    S: Signal + ?Sized,
{
    let layout = model.layout();
    check_grid(grid)?;
    if x0.len() != layout.dim {
        return Err(contract("x0", "length must equal the state dimension"));
    }
    if extra.len() != layout.n_extra {
        return Err(contract("extra", "parameter count does not match the model"));
    }
    if signal.arity() != layout.input_arity {
        return Err(contract("signal", "arity does not match the model"));
    }
    let fitted = PiecewiseInput::fit(signal, grid, layout.basis)?;
    predict_fitted(model, x0, fitted, extra)
}

/// As [`predict`] with the input already parameterized on its breakpoints.
pub fn predict_fitted<M>(model: &M, x0: &[f64], fitted: PiecewiseInput, extra: &[f64]) -> Result<PredictionRun>
where
    M: OneStepModel + ?Sized,
{
    let layout = model.layout();
    if fitted.segments.iter().any(|s| s.basis != layout.basis) {
        return Err(contract("fitted_inputs", "basis differs from the model's basis"));
    }
    let grid = fitted.breakpoints.clone();
    let mut states = Vec::with_capacity(grid.len());
    states.push(x0.to_vec());
    let mut out_of_domain = Vec::new();
    let mut failed_at = None;
    let mut x = x0.to_vec();
    let mut next = vec![0.0; layout.dim];
    for (n, seg) in fitted.segments.iter().enumerate() {
        let input = assemble_input_unchecked(&x, &seg.coeffs, extra, seg.delta, layout.include_delta);
        if !model.in_domain(&input) {
            out_of_domain.push(n);
        }
        let ok = model.step(&input, &mut next).is_ok() && next.iter().all(|v| v.is_finite());
        if !ok {
            failed_at = Some(n + 1);
            break;
        }
        x.copy_from_slice(&next);
        states.push(x.clone());
    }
    let times = grid[..states.len()].to_vec();
    Ok(PredictionRun {
        x0: x0.to_vec(),
        grid,
        predicted: Trajectory { times, states },
        fitted_inputs: fitted,
        out_of_domain,
        failed_at,
    })
}

/// Solution of the modified system driven by `fitted`, integrated segment
/// by segment with `micro_steps` RK4 steps in local time.
pub fn integrate_modified(
    system: &SystemSpec,
    x0: &[f64],
    fitted: &PiecewiseInput,
    extra: &[f64],
    micro_steps: usize,
) -> Result<Trajectory> {
    if x0.len() != system.dim {
        return Err(contract("x0", "length must equal the state dimension"));
    }
    if extra.len() != system.n_extra {
        return Err(contract("extra", "parameter count does not match the system"));
    }
    let mut rk = Rk4::for_system(system);
    let mut x = x0.to_vec();
    let mut states = vec![x.clone()];
    for seg in &fitted.segments {
        x = local_solve(system, &mut rk, &x, seg, extra, micro_steps.max(1))?;
        states.push(x.clone());
    }
    Ok(Trajectory {
        times: fitted.breakpoints.clone(),
        states,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// `|pred − ref|` per time and coordinate.
    pub abs_error: Vec<Vec<f64>>,
    /// Max over time per coordinate.
    pub linf_per_coord: Vec<f64>,
    pub linf: f64,
    /// `linf / max(‖ref‖∞, 1e−12)`.
    pub rel_linf: f64,
    /// Max coordinate error at the final time.
    pub terminal: f64,
}

pub fn compare(pred: &Trajectory, reference: &Trajectory) -> Result<Metrics> {
    pred.validate()?;
    reference.validate()?;
    if pred.len() != reference.len() {
        return Err(contract("pred", "time grids differ in length"));
    }
    let scale = reference.times.iter().fold(0.0f64, |a, t| a.max(t.abs())).max(1.0);
    if pred
        .times
        .iter()
        .zip(&reference.times)
        .any(|(a, b)| (a - b).abs() > 1e-12 * scale)
    {
        return Err(contract("pred", "time grids differ"));
    }
    if pred.dim() != reference.dim() {
        return Err(contract("pred", "state dimensions differ"));
    }
    let d = pred.dim();
    let abs_error: Vec<Vec<f64>> = pred
        .states
        .iter()
        .zip(&reference.states)
        .map(|(p, r)| p.iter().zip(r).map(|(a, b)| (a - b).abs()).collect())
        .collect();
    let mut linf_per_coord = vec![0.0f64; d];
    for e in &abs_error {
        for (m, v) in linf_per_coord.iter_mut().zip(e) {
            *m = m.max(*v);
        }
    }
    let linf = linf_per_coord.iter().fold(0.0f64, |a, b| a.max(*b));
    let ref_sup = reference
        .states
        .iter()
        .flatten()
        .fold(0.0f64, |a, b| a.max(b.abs()));
    let terminal = abs_error.last().map_or(0.0, |e| e.iter().fold(0.0f64, |a, b| a.max(*b)));
    Ok(Metrics {
        abs_error,
        linf_per_coord,
        linf,
        rel_linf: linf / ref_sup.max(1e-12),
        terminal,
    })
}
