//! Closed-form error bounds and empirical checks of them.
//!
//! All norms are ∞-norms. Degenerate limits (`L_φ = 1`, `L1·Δ = 0`) are
//! defined by continuity as `n·E`.

use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{assemble_input_unchecked, sample_inputs, SamplingDomains};
use crate::dynamics::{integrate_on_grid, uniform_grid, LipschitzContext, SystemSpec};
use crate::error::{contract, Error, Result};
use crate::input_param::{sup_error_channels, BasisSpec, PiecewiseInput};
use crate::rollout::{integrate_modified, predict_fitted, ExactIncrement, OneStepModel};
use crate::signal::Signal;

/// Relative slack for floating-point rounding when testing `measured ≤ bound`.
pub const BOUND_RTOL: f64 = 1e-9;

/// Samples per segment used to measure sup-norm gaps of inputs.
pub const GAP_SAMPLES: usize = 33;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundInputs {
    pub l1: f64,
    pub l2: f64,
    pub eta: f64,
    pub l_phi: f64,
    pub e: f64,
    pub delta: f64,
    pub n: u64,
    pub t: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let vals = [self.l1, self.l2, self.eta, self.l_phi, self.e, self.delta, self.t];
        if vals.iter().any(|v| !(*v >= 0.0)) {
            return Err(contract("bound_inputs", "all constants must be nonnegative"));
        }
        Ok(())
    }
}

/// `L2·η·t·e^{L1·t}`.
pub fn input_bound(l1: f64, l2: f64, eta: f64, t: f64) -> f64 {
    if eta == 0.0 || l2 == 0.0 || t == 0.0 {
        return 0.0;
    }
    l2 * eta * t * libm::exp(l1 * t)
}

/// `(1 − L_φⁿ)/(1 − L_φ)·E = Σ_{i<n} L_φ^i·E`.
pub fn rollout_bound(l_phi: f64, e: f64, n: u64) -> f64 {
    if n == 0 || e == 0.0 {
        return 0.0;
    }
    if l_phi == 1.0 {
        return n as f64 * e;
    }
    if l_phi == 0.0 {
        return e;
    }
    let ln = libm::log(l_phi);
    libm::expm1(n as f64 * ln) / libm::expm1(ln) * e
}

/// `input_bound(L1, L2, η, t) + rollout_bound(L_φ, E, n)`.
pub fn combined_bound(b: &BoundInputs) -> f64 {
    input_bound(b.l1, b.l2, b.eta, b.t) + rollout_bound(b.l_phi, b.e, b.n)
}

/// `(e^{n·L1·Δ} − 1)/(e^{L1·Δ} − 1)·E`.
pub fn appendix_bound(l1: f64, delta: f64, n: u64, e: f64) -> f64 {
    if n == 0 || e == 0.0 {
        return 0.0;
    }
    let x = l1 * delta;
    if x == 0.0 {
        return n as f64 * e;
    }
    libm::expm1(n as f64 * x) / libm::expm1(x) * e
}

fn within(measured: f64, bound: f64) -> bool {
    measured <= bound * (1.0 + BOUND_RTOL) + f64::MIN_POSITIVE
}

/// Setup for comparing a system driven by γ against its piecewise
/// parameterization γ̃.
pub struct GronwallSetup<'a> {
    pub system: &'a SystemSpec,
    pub signal: &'a dyn Signal,
    pub basis: BasisSpec,
    pub x0: Vec<f64>,
    pub extra: Vec<f64>,
    pub delta: f64,
    pub t_end: f64,
    /// RK4 steps per grid interval for both solutions.
    pub micro_steps: usize,
    /// Absolute slack absorbing integrator noise when the bound is ~0.
    pub noise_floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GronwallReport {
    pub times: Vec<f64>,
    pub measured: Vec<f64>,
    pub bound: Vec<f64>,
    /// Per-channel sup gap between γ and γ̃.
    pub eta: Vec<f64>,
    pub l1: f64,
    pub l2: Vec<f64>,
    /// `Σ_c L2_c·η_c`, the factor multiplying `t·e^{L1 t}`.
    pub l2_eta: f64,
    pub satisfied: bool,
}

/// Integrates the system under γ and γ̃ and checks
/// `|x − x̃|(t) ≤ (Σ_c L2_c η_c)·t·e^{L1 t}` at every grid time.
pub fn check_gronwall(setup: &GronwallSetup<'_>) -> Result<GronwallReport> {
    let sys = setup.system;
    if !sys.has_lipschitz() {
        return Err(Error::Unsupported(sys.name.to_string()));
    }
    let grid = uniform_grid(0.0, setup.t_end, setup.delta)?;
    let fitted = PiecewiseInput::fit(setup.signal, &grid, setup.basis)?;
    let exact = integrate_on_grid(sys, &setup.x0, &grid, setup.micro_steps, setup.signal, &setup.extra)?;
    let modified = integrate_modified(sys, &setup.x0, &fitted, &setup.extra, setup.micro_steps)?;
    let eta = sup_error_channels(setup.signal, &fitted, GAP_SAMPLES)?;

    let state_sup = exact
        .states
        .iter()
        .chain(&modified.states)
        .flatten()
        .fold(0.0f64, |a, v| a.max(v.abs()));
    let input_sup = input_sup(setup.signal, &fitted);
    let lip = sys
        .lipschitz(&LipschitzContext {
            state_sup,
            input_sup: &input_sup,
            extra: &setup.extra,
        })
        .ok_or_else(|| Error::Unsupported(sys.name.to_string()))?;
    let l2_eta: f64 = lip.l2.iter().zip(&eta).map(|(l, e)| l * e).sum();

    let measured: Vec<f64> = exact
        .states
        .iter()
        .zip(&modified.states)
        .map(|(a, b)| a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())))
        .collect();
    let bound: Vec<f64> = grid.iter().map(|&t| input_bound(lip.l1, 1.0, l2_eta, t)).collect();
    let satisfied = measured
        .iter()
        .zip(&bound)
        .all(|(m, b)| within(*m, *b) || *m <= setup.noise_floor);
    Ok(GronwallReport {
        times: grid,
        measured,
        bound,
        eta,
        l1: lip.l1,
        l2: lip.l2,
        l2_eta,
        satisfied,
    })
}

/// Per-channel sup of |γ| and |γ̃| over the sampled segments.
fn input_sup(signal: &dyn Signal, fitted: &PiecewiseInput) -> Vec<f64> {
    let arity = fitted.arity();
    let mut sup = vec![0.0f64; arity];
    let mut a = vec![0.0; arity];
    let mut b = vec![0.0; arity];
    let mut basis = vec![0.0; fitted.segments[0].basis.n_b()];
    for (n, seg) in fitted.segments.iter().enumerate() {
        for i in 0..GAP_SAMPLES {
            let tau = seg.delta * i as f64 / (GAP_SAMPLES - 1) as f64;
            signal.eval(fitted.breakpoints[n] + tau, &mut a);
            seg.eval_into(tau, &mut basis, &mut b);
            for c in 0..arity {
                sup[c] = sup[c].max(a[c].abs()).max(b[c].abs());
            }
        }
    }
    sup
}

/// How the per-step perturbation is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// Independent uniform draws in `[−E, E]` per coordinate.
    Uniform { seed: u64 },
    /// `+E` in every coordinate at every step.
    Aligned,
}

pub struct RolloutSetup<'a> {
    pub system: &'a SystemSpec,
    pub signal: &'a dyn Signal,
    pub basis: BasisSpec,
    pub x0: Vec<f64>,
    pub extra: Vec<f64>,
    pub delta: f64,
    pub n_steps: usize,
    pub e: f64,
    pub noise: NoiseMode,
    pub l_phi: f64,
    pub micro_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutReport {
    pub steps: Vec<u64>,
    pub measured: Vec<f64>,
    pub bound: Vec<f64>,
    pub l_phi: f64,
    pub satisfied: bool,
}

/// Runs the exact one-step map with and without an injected per-step
/// perturbation of size at most `E` and checks the geometric-sum bound at
/// every step.
pub fn check_rollout_bound(setup: &RolloutSetup<'_>) -> Result<RolloutReport> {
    if !(setup.e >= 0.0) || !(setup.l_phi >= 0.0) {
        return Err(contract("e", "E and L_phi must be nonnegative"));
    }
    let t_end = setup.delta * setup.n_steps as f64;
    let grid: Vec<f64> = (0..=setup.n_steps).map(|i| i as f64 * setup.delta).collect();
    if setup.n_steps == 0 || !(t_end > 0.0) {
        return Err(contract("n_steps", "need a positive horizon"));
    }
    let fitted = PiecewiseInput::fit(setup.signal, &grid, setup.basis)?;
    let oracle = ExactIncrement::new(setup.system.clone(), setup.basis).with_micro_steps(setup.micro_steps);
    let clean = predict_fitted(&oracle, &setup.x0, fitted.clone(), &setup.extra)?;
    if !clean.completed() {
        return Err(contract("x0", "unperturbed rollout did not complete"));
    }

    let d = setup.system.dim;
    let layout = oracle.layout();
    let mut rng = match setup.noise {
        NoiseMode::Uniform { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
        NoiseMode::Aligned => None,
    };
    let mut x = setup.x0.clone();
    let mut next = vec![0.0; d];
    let mut measured = vec![0.0];
    for (n, seg) in fitted.segments.iter().enumerate() {
        let input = assemble_input_unchecked(&x, &seg.coeffs, &setup.extra, seg.delta, layout.include_delta);
        oracle.step(&input, &mut next)?;
        for v in next.iter_mut() {
            *v += match rng.as_mut() {
                Some(r) => setup.e * (2.0 * r.random::<f64>() - 1.0),
                None => setup.e,
            };
        }
        x.copy_from_slice(&next);
        let reference = &clean.predicted.states[n + 1];
        measured.push(x.iter().zip(reference).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())));
    }
    let steps: Vec<u64> = (0..=setup.n_steps as u64).collect();
    let bound: Vec<f64> = steps.iter().map(|&n| rollout_bound(setup.l_phi, setup.e, n)).collect();
    let satisfied = measured.iter().zip(&bound).all(|(m, b)| within(*m, *b));
    Ok(RolloutReport {
        steps,
        measured,
        bound,
        l_phi: setup.l_phi,
        satisfied,
    })
}

/// Default number of sampled pairs for [`estimate_lipschitz`].
pub const LIPSCHITZ_PAIRS: usize = 10_000;
/// Default pair distance for [`estimate_lipschitz`].
pub const LIPSCHITZ_DISTANCE: f64 = 1e-4;
/// Safety factor applied to the sampled maximum ratio.
pub const LIPSCHITZ_INFLATION: f64 = 1.1;

/// Estimates the state Lipschitz constant of a one-step map by sampling
/// base points from `domains`, perturbing the state by `distance` in a
/// random direction, and taking the largest ratio, inflated by 10%.
pub fn estimate_lipschitz<M: OneStepModel + ?Sized>(
    model: &M,
    domains: &SamplingDomains,
    pairs: usize,
    distance: f64,
    seed: u64,
) -> Result<f64> {
    if !(distance > 0.0) {
        return Err(contract("distance", "must be positive"));
    }
    let layout = model.layout();
    if domains.state.len() != layout.dim || domains.gamma.len() != layout.n_gamma() || domains.extra.len() != layout.n_extra
    {
        return Err(contract("domains", "box dimensions do not match the model"));
    }
    let draws = sample_inputs(domains, pairs, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX);
    let d = layout.dim;
    let (mut fa, mut fb) = (vec![0.0; d], vec![0.0; d]);
    let mut worst = 0.0f64;
    for draw in &draws {
        let mut u: Vec<f64> = (0..d).map(|_| 2.0 * rng.random::<f64>() - 1.0).collect();
        let un = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if un == 0.0 {
            continue;
        }
        u.iter_mut().for_each(|v| *v *= distance / un);
        let xb: Vec<f64> = draw.x.iter().zip(&u).map(|(a, b)| a + b).collect();
        let ia = assemble_input_unchecked(&draw.x, &draw.gamma, &draw.extra, draw.delta, layout.include_delta);
        let ib = assemble_input_unchecked(&xb, &draw.gamma, &draw.extra, draw.delta, layout.include_delta);
        if model.step(&ia, &mut fa).is_err() || model.step(&ib, &mut fb).is_err() {
            continue;
        }
        let num = fa.iter().zip(&fb).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if num.is_finite() {
            worst = worst.max(num / distance);
        }
    }
    Ok(LIPSCHITZ_INFLATION * worst)
}
