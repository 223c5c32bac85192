//! Local polynomial parameterization of input signals on each time interval,
//! and their piecewise assembly over a grid.
//!
//! Three bases are supported on an interval of length δ with local time
//! τ ∈ [0, δ]:
//!
//! * Taylor: `b_j(τ) = τ^j`, coefficients `γ^{(j)}(t_n)/j!`.
//! * Lagrange: cardinal polynomials on the equispaced nodes `j·δ/k`,
//!   coefficients are the nodal values.
//! * Legendre: orthonormal `φ_j(τ) = sqrt((2j+1)/δ)·p_j(2τ/δ − 1)`,
//!   coefficients are L2 projections computed by Gauss–Legendre quadrature.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{contract, Error, Result};
use crate::signal::Signal;

/// Slack accepted on either side of `[0, δ]` before `eval_local` rejects τ.
pub const TAU_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    Taylor,
    LagrangeEquispaced,
    LegendreL2,
}

impl BasisKind {
    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Taylor => "taylor",
            BasisKind::LagrangeEquispaced => "lagrange",
            BasisKind::LegendreL2 => "legendre",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "taylor" => Some(BasisKind::Taylor),
            "lagrange" => Some(BasisKind::LagrangeEquispaced),
            "legendre" => Some(BasisKind::LegendreL2),
            _ => None,
        }
    }
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisSpec {
    pub kind: BasisKind,
    pub degree: usize,
}

impl BasisSpec {
    pub const fn new(kind: BasisKind, degree: usize) -> Self {
        Self { kind, degree }
    }

    /// Coefficients per scalar channel.
    pub const fn n_b(&self) -> usize {
        self.degree + 1
    }

    /// Evaluates all basis functions at τ on an interval of length `delta`.
    pub fn eval_basis(&self, delta: f64, tau: f64, out: &mut [f64]) {
        let k = self.degree;
        match self.kind {
            BasisKind::Taylor => {
                let mut p = 1.0;
                for o in out.iter_mut().take(k + 1) {
                    *o = p;
                    p *= tau;
                }
            }
            BasisKind::LagrangeEquispaced => {
                if k == 0 {
                    out[0] = 1.0;
                    return;
                }
                for (j, o) in out.iter_mut().enumerate().take(k + 1) {
                    let tj = lagrange_node(delta, k, j);
                    let mut v = 1.0;
                    for i in 0..=k {
                        if i != j {
                            let ti = lagrange_node(delta, k, i);
                            v *= (tau - ti) / (tj - ti);
                        }
                    }
                    *o = v;
                }
            }
            BasisKind::LegendreL2 => {
                legendre_all(2.0 * tau / delta - 1.0, &mut out[..k + 1]);
                for (j, o) in out.iter_mut().enumerate().take(k + 1) {
                    *o *= libm::sqrt((2 * j + 1) as f64 / delta);
                }
            }
        }
    }
}

impl fmt::Display for BasisSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind, self.degree)
    }
}

/// Node `j` of the degree-`k` equispaced grid on `[0, delta]`.
#[inline]
pub fn lagrange_node(delta: f64, k: usize, j: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        j as f64 * delta / k as f64
    }
}

/// Legendre polynomial `p_j(x)` by the three-term recurrence.
pub fn legendre(j: usize, x: f64) -> f64 {
    let (mut prev, mut cur) = (1.0, x);
    if j == 0 {
        return prev;
    }
    for n in 1..j {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0) * x * cur - nf * prev) / (nf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Writes `p_0(x), …, p_{len−1}(x)` into `out`.
pub fn legendre_all(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = 1.0;
    if out.len() > 1 {
        out[1] = x;
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = ((2.0 * nf + 1.0) * x * out[n] - nf * out[n - 1]) / (nf + 1.0);
    }
}

/// Gauss–Legendre nodes and weights on [−1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = libm::cos(core::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5));
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if libm::fabs(dx) < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut prev, mut cur) = (1.0, x);
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * cur - kf * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    let d = n as f64 * (x * cur - prev) / (x * x - 1.0);
    (cur, d)
}

/// Coefficients of one interval, row `c` holding Γ for input channel `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalInputParams {
    pub coeffs: Vec<f64>,
    pub arity: usize,
    pub delta: f64,
    pub basis: BasisSpec,
}

impl LocalInputParams {
    pub fn new(coeffs: Vec<f64>, arity: usize, delta: f64, basis: BasisSpec) -> Result<Self> {
        if coeffs.len() != arity * basis.n_b() {
            return Err(contract(
                "coeffs",
                alloc::format!("expected {} entries", arity * basis.n_b()),
            ));
        }
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(contract("delta", "interval length must be positive"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(contract("coeffs", "coefficients must be finite"));
        }
        Ok(Self {
            coeffs,
            arity,
            delta,
            basis,
        })
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let nb = self.basis.n_b();
        &self.coeffs[c * nb..(c + 1) * nb]
    }

    /// Evaluates γ̃(τ) into `out` without bounds checks on τ.
    pub fn eval_into(&self, tau: f64, basis_buf: &mut [f64], out: &mut [f64]) {
        let nb = self.basis.n_b();
        self.basis.eval_basis(self.delta, tau, &mut basis_buf[..nb]);
        for (c, o) in out.iter_mut().enumerate().take(self.arity) {
            *o = self.coeffs[c * nb..(c + 1) * nb]
                .iter()
                .zip(&basis_buf[..nb])
                .map(|(a, b)| a * b)
                .sum();
        }
    }
}

/// Evaluates the local parameterization at offset τ ∈ [0, δ].
pub fn eval_local(params: &LocalInputParams, tau: f64) -> Result<Vec<f64>> {
    if tau < -TAU_TOLERANCE || tau > params.delta + TAU_TOLERANCE || tau.is_nan() {
        return Err(Error::Domain {
            value: tau,
            lo: 0.0,
            hi: params.delta,
        });
    }
    let tau = tau.clamp(0.0, params.delta);
    let mut basis = vec![0.0; params.basis.n_b()];
    let mut out = vec![0.0; params.arity];
    params.eval_into(tau, &mut basis, &mut out);
    Ok(out)
}

/// Local signal restricted to `[0, δ]` so it can drive an integrator.
impl Signal for LocalInputParams {
    fn arity(&self) -> usize {
        self.arity
    }

    fn eval(&self, t: f64, out: &mut [f64]) {
        let mut basis = [0.0; 16];
        let nb = self.basis.n_b();
        if nb <= basis.len() {
            self.eval_into(t.clamp(0.0, self.delta), &mut basis, out);
        } else {
            let mut basis = vec![0.0; nb];
            self.eval_into(t.clamp(0.0, self.delta), &mut basis, out);
        }
    }

    fn domain(&self) -> (f64, f64) {
        (0.0, self.delta)
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Fornberg weights for the `order`-th derivative at 0 on integer offsets
/// `−p..=p`.
fn central_weights(order: usize, p: usize) -> Vec<f64> {
    let nodes: Vec<f64> = (0..=2 * p).map(|i| i as f64 - p as f64).collect();
    let n = nodes.len();
    // c[i][m]: weight of node i for derivative m
    let mut c = vec![vec![0.0; order + 1]; n];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = nodes[0];
    for i in 1..n {
        let mn = i.min(order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i];
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.iter().map(|row| row[order]).collect()
}

/// Half-width of the fourth-order central stencil for derivative `order`.
fn stencil_half_width(order: usize) -> usize {
    (order + 1) / 2 + 1
}

/// Taylor expansion of the signal at `t_n`.
///
/// Analytic derivatives are used when the signal provides them; otherwise
/// fourth-order central differences with step `delta/10`.
pub fn fit_taylor<S: Signal + ?Sized>(
    signal: &S,
    t_n: f64,
    delta: f64,
    degree: usize,
) -> Result<LocalInputParams> {
    let basis = BasisSpec::new(BasisKind::Taylor, degree);
    let arity = signal.arity();
    let nb = basis.n_b();
    let mut coeffs = vec![0.0; arity * nb];
    let mut buf = vec![0.0; arity];
    let mut tmp = vec![0.0; arity];
    let (lo, hi) = signal.domain();
    for j in 0..nb {
        if !signal.derivative(j, t_n, &mut buf) {
            let h = delta / 10.0;
            let p = stencil_half_width(j);
            let reach = p as f64 * h;
            if t_n - reach < lo || t_n + reach > hi {
                return Err(Error::Fit(alloc::format!(
                    "finite-difference stencil [{}, {}] leaves signal domain [{lo}, {hi}]",
                    t_n - reach,
                    t_n + reach
                )));
            }
            let w = central_weights(j, p);
            buf.fill(0.0);
            for (i, wi) in w.iter().enumerate() {
                if *wi == 0.0 {
                    continue;
                }
                signal.eval(t_n + (i as f64 - p as f64) * h, &mut tmp);
                for (b, v) in buf.iter_mut().zip(&tmp) {
                    *b += wi * v;
                }
            }
            let scale = libm::pow(h, j as f64);
            buf.iter_mut().for_each(|b| *b /= scale);
        }
        let fact = factorial(j);
        for c in 0..arity {
            coeffs[c * nb + j] = buf[c] / fact;
        }
    }
    LocalInputParams::new(coeffs, arity, delta, basis).map_err(|e| Error::Fit(alloc::format!("{e}")))
}

/// Nodal values on `k + 1` equispaced points of `[t_n, t_n + delta]`.
pub fn fit_interp<S: Signal + ?Sized>(
    signal: &S,
    t_n: f64,
    delta: f64,
    degree: usize,
) -> Result<LocalInputParams> {
    let basis = BasisSpec::new(BasisKind::LagrangeEquispaced, degree);
    let arity = signal.arity();
    let nb = basis.n_b();
    let mut coeffs = vec![0.0; arity * nb];
    let mut buf = vec![0.0; arity];
    for j in 0..nb {
        signal.eval(t_n + lagrange_node(delta, degree, j), &mut buf);
        for c in 0..arity {
            coeffs[c * nb + j] = buf[c];
        }
    }
    LocalInputParams::new(coeffs, arity, delta, basis).map_err(|e| Error::Fit(alloc::format!("{e}")))
}

/// Default Gauss–Legendre order for the L2 projection.
pub const fn default_quad_order(degree: usize) -> usize {
    degree + 3
}

/// L2 projection onto the orthonormal Legendre basis of `[t_n, t_n + delta]`.
pub fn fit_l2<S: Signal + ?Sized>(
    signal: &S,
    t_n: f64,
    delta: f64,
    degree: usize,
    quad_order: usize,
) -> Result<LocalInputParams> {
    if quad_order < degree + 1 {
        return Err(contract("quad_order", "must be at least degree + 1"));
    }
    let basis = BasisSpec::new(BasisKind::LegendreL2, degree);
    let arity = signal.arity();
    let nb = basis.n_b();
    let (nodes, weights) = gauss_legendre(quad_order);
    let mut coeffs = vec![0.0; arity * nb];
    let mut phi = vec![0.0; nb];
    let mut val = vec![0.0; arity];
    for (xi, wi) in nodes.iter().zip(&weights) {
        let tau = 0.5 * delta * (xi + 1.0);
        signal.eval(t_n + tau, &mut val);
        basis.eval_basis(delta, tau, &mut phi);
        let w = 0.5 * delta * wi;
        for c in 0..arity {
            for j in 0..nb {
                coeffs[c * nb + j] += w * val[c] * phi[j];
            }
        }
    }
    LocalInputParams::new(coeffs, arity, delta, basis).map_err(|e| Error::Fit(alloc::format!("{e}")))
}

/// Fits the signal on `[t_n, t_n + delta]` with the requested basis.
pub fn fit_local<S: Signal + ?Sized>(
    signal: &S,
    basis: BasisSpec,
    t_n: f64,
    delta: f64,
) -> Result<LocalInputParams> {
    match basis.kind {
        BasisKind::Taylor => fit_taylor(signal, t_n, delta, basis.degree),
        BasisKind::LagrangeEquispaced => fit_interp(signal, t_n, delta, basis.degree),
        BasisKind::LegendreL2 => {
            fit_l2(signal, t_n, delta, basis.degree, default_quad_order(basis.degree))
        }
    }
}

/// Piecewise input γ̃ over a grid; segment `n` covers `[t_n, t_{n+1})`,
/// the last one closed on the right.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseInput {
    pub breakpoints: Vec<f64>,
    pub segments: Vec<LocalInputParams>,
}

impl PiecewiseInput {
    pub fn new(breakpoints: Vec<f64>, segments: Vec<LocalInputParams>) -> Result<Self> {
        if breakpoints.len() < 2 || segments.len() + 1 != breakpoints.len() {
            return Err(contract("segments", "need one segment per grid interval"));
        }
        for (n, seg) in segments.iter().enumerate() {
            if seg.delta != breakpoints[n + 1] - breakpoints[n] {
                return Err(contract(
                    "segments",
                    alloc::format!("segment {n} length does not match its interval"),
                ));
            }
        }
        Ok(Self {
            breakpoints,
            segments,
        })
    }

    /// Fits every interval of `grid` with `basis`.
    pub fn fit<S: Signal + ?Sized>(signal: &S, grid: &[f64], basis: BasisSpec) -> Result<Self> {
        if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(contract("grid", "need a strictly increasing grid of length >= 2"));
        }
        let segments = grid
            .windows(2)
            .map(|w| fit_local(signal, basis, w[0], w[1] - w[0]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid.to_vec(), segments)
    }

    pub fn arity(&self) -> usize {
        self.segments[0].arity
    }

    /// Segment index holding `t` (half-open intervals, last closed).
    pub fn locate(&self, t: f64) -> usize {
        let n = self.breakpoints.partition_point(|b| *b <= t);
        n.saturating_sub(1).min(self.segments.len() - 1)
    }

    pub fn start(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn end(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }
}

/// Evaluates γ̃(t) on `[t_0, t_N]`.
pub fn eval_global(pw: &PiecewiseInput, t: f64) -> Result<Vec<f64>> {
    if !(t >= pw.start() && t <= pw.end()) {
        return Err(Error::Domain {
            value: t,
            lo: pw.start(),
            hi: pw.end(),
        });
    }
    let n = pw.locate(t);
    eval_local(&pw.segments[n], t - pw.breakpoints[n])
}

impl Signal for PiecewiseInput {
    fn arity(&self) -> usize {
        PiecewiseInput::arity(self)
    }

    fn eval(&self, t: f64, out: &mut [f64]) {
        let t = t.clamp(self.start(), self.end());
        let n = self.locate(t);
        self.segments[n].eval(t - self.breakpoints[n], out);
    }

    fn domain(&self) -> (f64, f64) {
        (self.start(), self.end())
    }
}

/// Per-channel sup-norm gap between `signal` and `pw`, sampled on
/// `samples_per_segment` equispaced points of every closed segment.
pub fn sup_error_channels<S: Signal + ?Sized>(
    signal: &S,
    pw: &PiecewiseInput,
    samples_per_segment: usize,
) -> Result<Vec<f64>> {
    if samples_per_segment < 2 {
        return Err(contract("samples_per_segment", "need at least 2 samples"));
    }
    let arity = pw.arity();
    if signal.arity() != arity {
        return Err(contract("signal", "arity differs from the parameterization"));
    }
    let mut gap = vec![0.0f64; arity];
    let mut truth = vec![0.0; arity];
    let mut approx = vec![0.0; arity];
    let mut basis = vec![0.0; pw.segments[0].basis.n_b()];
    for (n, seg) in pw.segments.iter().enumerate() {
        let t_n = pw.breakpoints[n];
        for i in 0..samples_per_segment {
            let tau = seg.delta * i as f64 / (samples_per_segment - 1) as f64;
            signal.eval(t_n + tau, &mut truth);
            seg.eval_into(tau, &mut basis, &mut approx);
            for c in 0..arity {
                gap[c] = gap[c].max(libm::fabs(truth[c] - approx[c]));
            }
        }
    }
    Ok(gap)
}

/// Sup-norm estimate η of `γ − γ̃` over all channels.
pub fn sup_error<S: Signal + ?Sized>(
    signal: &S,
    pw: &PiecewiseInput,
    samples_per_segment: usize,
) -> Result<f64> {
    Ok(sup_error_channels(signal, pw, samples_per_segment)?
        .into_iter()
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{ConstantSignal, FnSignal};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        libm::fabs(a - b) <= tol
    }

    #[test]
    fn legendre_values() {
        for x in [-1.0, -0.3, 0.0, 0.7] {
            assert_eq!(legendre(0, x), 1.0);
        }
        assert!(close(legendre(2, 0.5), -0.125, 1e-15));
        for j in 0..=10 {
            assert!(close(legendre(j, 1.0), 1.0, 1e-14));
        }
        let mut all = [0.0; 6];
        legendre_all(0.37, &mut all);
        for (j, v) in all.iter().enumerate() {
            assert!(close(*v, legendre(j, 0.37), 1e-15));
        }
    }

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in 1..=8 {
            let (x, w) = gauss_legendre(n);
            for deg in 0..2 * n {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * libm::pow(*x, deg as f64)).sum();
                let want = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!(close(got, want, 1e-13), "n={n} deg={deg} {got} {want}");
            }
        }
    }

    #[test]
    fn fornberg_matches_textbook_stencils() {
        let w = central_weights(1, 2);
        let want = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(want) {
            assert!(close(*a, b, 1e-14));
        }
        let w = central_weights(2, 2);
        let want = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        for (a, b) in w.iter().zip(want) {
            assert!(close(*a, b, 1e-13));
        }
    }

    #[test]
    fn taylor_examples() {
        let c = fit_taylor(&ConstantSignal(vec![3.5]), 1.0, 0.1, 3).unwrap();
        assert_eq!(c.coeffs, vec![3.5, 0.0, 0.0, 0.0]);

        let sq = FnSignal::new().channel_with_derivs(
            |t| t * t,
            |k, t| Some(match k {
                0 => t * t,
                1 => 2.0 * t,
                2 => 2.0,
                _ => 0.0,
            }),
        );
        let c = fit_taylor(&sq, 1.0, 0.1, 2).unwrap();
        assert_eq!(c.coeffs, vec![1.0, 2.0, 1.0]);

        // point values only: finite differences
        let sq_fd = FnSignal::new().channel(|t| t * t);
        let c = fit_taylor(&sq_fd, 1.0, 0.1, 2).unwrap();
        for (a, b) in c.coeffs.iter().zip([1.0, 2.0, 1.0]) {
            assert!(close(*a, b, 1e-9));
        }

        let s = FnSignal::new().channel(|t| libm::sin(4.0 * t) + 1.0);
        let c = fit_taylor(&s, 0.0, 0.1, 2).unwrap();
        for (a, b) in c.coeffs.iter().zip([1.0, 4.0, 0.0]) {
            assert!(close(*a, b, 1e-5), "{a} {b}");
        }
    }

    #[test]
    fn taylor_stencil_outside_domain_fails() {
        let s = FnSignal::new().channel(|t| t).with_domain(0.0, 1.0);
        assert!(matches!(fit_taylor(&s, 0.0, 0.1, 1), Err(Error::Fit(_))));
        assert!(fit_taylor(&s, 0.5, 0.1, 1).is_ok());
    }

    #[test]
    fn interp_examples() {
        let id = FnSignal::new().channel(|t| t);
        assert_eq!(fit_interp(&id, 0.0, 1.0, 1).unwrap().coeffs, vec![0.0, 1.0]);
        assert_eq!(
            fit_interp(&ConstantSignal(vec![2.0]), 0.3, 0.1, 3).unwrap().coeffs,
            vec![2.0; 4]
        );
        let s = FnSignal::new().channel(|t| libm::sin(4.0 * t) + 1.0);
        let c = fit_interp(&s, 0.0, 0.1, 2).unwrap();
        let want = [1.0, libm::sin(0.2) + 1.0, libm::sin(0.4) + 1.0];
        for (a, b) in c.coeffs.iter().zip(want) {
            assert!(close(*a, b, 1e-15));
        }
        // degree 0 keeps the left endpoint
        assert_eq!(fit_interp(&id, 0.4, 0.1, 0).unwrap().coeffs, vec![0.4]);
    }

    #[test]
    fn l2_examples() {
        let one = ConstantSignal(vec![1.0]);
        let c = fit_l2(&one, 0.0, 1.0, 0, 3).unwrap();
        assert!(close(c.coeffs[0], 1.0, 1e-14));
        assert!(close(eval_local(&c, 0.5).unwrap()[0], 1.0, 1e-14));

        let id = FnSignal::new().channel(|t| t);
        let c = fit_l2(&id, 0.0, 1.0, 1, 3).unwrap();
        for i in 0..=100 {
            let tau = i as f64 / 100.0;
            assert!(close(eval_local(&c, tau).unwrap()[0], tau, 1e-12));
        }
        assert!(close(eval_local(&c, 0.3).unwrap()[0], 0.3, 1e-12));
        assert!(matches!(fit_l2(&id, 0.0, 1.0, 3, 3), Err(Error::Contract { .. })));
    }

    #[test]
    fn legendre_basis_is_orthonormal() {
        for k in 0..=6 {
            for delta in [0.1, 1.0, 2.5] {
                let b = BasisSpec::new(BasisKind::LegendreL2, k);
                let (x, w) = gauss_legendre(k + 2);
                let mut gram = vec![0.0; (k + 1) * (k + 1)];
                let mut phi = vec![0.0; k + 1];
                for (xi, wi) in x.iter().zip(&w) {
                    let tau = 0.5 * delta * (xi + 1.0);
                    b.eval_basis(delta, tau, &mut phi);
                    for i in 0..=k {
                        for j in 0..=k {
                            gram[i * (k + 1) + j] += 0.5 * delta * wi * phi[i] * phi[j];
                        }
                    }
                }
                for i in 0..=k {
                    for j in 0..=k {
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!(close(gram[i * (k + 1) + j], want, 1e-10));
                    }
                }
            }
        }
    }

    #[test]
    fn eval_local_examples() {
        let b = BasisSpec::new(BasisKind::Taylor, 2);
        let p = LocalInputParams::new(vec![1.0, 4.0, 0.0], 1, 0.1, b).unwrap();
        assert_eq!(eval_local(&p, 0.0).unwrap(), vec![1.0]);
        assert!(eval_local(&p, 0.1 + 1e-13).is_ok());
        assert!(matches!(eval_local(&p, 0.2), Err(Error::Domain { .. })));
        assert!(eval_local(&p, -1e-9).is_err());

        let b = BasisSpec::new(BasisKind::LagrangeEquispaced, 4);
        let coeffs = vec![0.3, -1.2, 5.0, 2.2, -0.7];
        let p = LocalInputParams::new(coeffs.clone(), 1, 0.15, b).unwrap();
        for (j, c) in coeffs.iter().enumerate() {
            let v = eval_local(&p, lagrange_node(0.15, 4, j)).unwrap()[0];
            assert!(close(v, *c, 1e-13));
        }
    }

    #[test]
    fn local_params_reject_bad_input() {
        let b = BasisSpec::new(BasisKind::Taylor, 1);
        assert!(LocalInputParams::new(vec![1.0], 1, 0.1, b).is_err());
        assert!(LocalInputParams::new(vec![1.0, f64::NAN], 1, 0.1, b).is_err());
        assert!(LocalInputParams::new(vec![1.0, 2.0], 1, 0.0, b).is_err());
    }

    #[test]
    fn eval_global_examples() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let cos = FnSignal::new().channel(libm::cos);
        for kind in [BasisKind::Taylor, BasisKind::LagrangeEquispaced, BasisKind::LegendreL2] {
            let pw = PiecewiseInput::fit(&cos, &grid, BasisSpec::new(kind, 2)).unwrap();
            assert_eq!(pw.locate(0.0), 0);
            assert_eq!(pw.locate(1.0), 9);
            assert_eq!(pw.locate(grid[3]), 3);
            assert_eq!(
                eval_global(&pw, 0.0).unwrap(),
                eval_local(&pw.segments[0], 0.0).unwrap()
            );
            assert_eq!(
                eval_global(&pw, 1.0).unwrap(),
                eval_local(&pw.segments[9], pw.segments[9].delta).unwrap()
            );
            assert!(eval_global(&pw, 1.0 + 1e-9).is_err());
            assert!(eval_global(&pw, -1e-9).is_err());
            let mut worst = 0.0f64;
            for i in 0..=10_000 {
                let t = i as f64 / 10_000.0;
                worst = worst.max((eval_global(&pw, t).unwrap()[0] - libm::cos(t)).abs());
            }
            // Taylor's remainder δ³/3!·max|sin| exceeds 1e-4 on [0, 1]
            let limit = if kind == BasisKind::Taylor { 1e-3 / 6.0 } else { 1e-4 };
            assert!(worst <= limit, "{kind}: {worst}");
        }
    }

    #[test]
    fn piecewise_rejects_mismatched_segments() {
        let b = BasisSpec::new(BasisKind::Taylor, 0);
        let s = LocalInputParams::new(vec![1.0], 1, 0.5, b).unwrap();
        assert!(PiecewiseInput::new(vec![0.0, 0.4], vec![s.clone()]).is_err());
        assert!(PiecewiseInput::new(vec![0.0, 0.5, 1.0], vec![s.clone()]).is_err());
        assert!(PiecewiseInput::new(vec![0.0, 0.5], vec![s]).is_ok());
    }

    #[test]
    fn sup_error_examples() {
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.1).collect();
        let c = ConstantSignal(vec![2.0, -1.0]);
        for kind in [BasisKind::Taylor, BasisKind::LagrangeEquispaced, BasisKind::LegendreL2] {
            let pw = PiecewiseInput::fit(&c, &grid, BasisSpec::new(kind, 1)).unwrap();
            assert!(sup_error(&c, &pw, 5).unwrap() < 1e-14);
        }
        let quad = FnSignal::new().channel(|t| 1.0 - 2.0 * t + 0.5 * t * t);
        let pw = PiecewiseInput::fit(&quad, &grid, BasisSpec::new(BasisKind::LegendreL2, 2)).unwrap();
        assert!(sup_error(&quad, &pw, 11).unwrap() <= 1e-12);
        assert!(sup_error(&quad, &pw, 1).is_err());

        // Taylor remainder: |sin(4τ) − 4τ| ≈ (4τ)³/3! at τ = δ
        let s = FnSignal::new().channel(|t| libm::sin(4.0 * t) + 1.0);
        let pw = PiecewiseInput::fit(&s, &[0.0, 0.1], BasisSpec::new(BasisKind::Taylor, 2)).unwrap();
        let eta = sup_error(&s, &pw, 101).unwrap();
        let estimate = 64.0 / 6.0 * 1e-3;
        assert!(((eta - estimate) / estimate).abs() < 0.1, "{eta} vs {estimate}");
    }
}
