//! Feed-forward network with the residual `Î` structure and exact
//! reverse-mode gradients.
//!
//! Weights are stored flat. Layer `l` maps width `sizes[l]` to `sizes[l+1]`
//! with an augmented `(sizes[l+1] × (sizes[l] + 1))` row-major matrix whose
//! last column is the bias. Hidden layers apply `tanh`, the output layer is
//! linear.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dataset::{InputLayout, Interval};
use crate::error::{contract, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
}

impl Activation {
    pub fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
        }
    }

    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => libm::tanh(x),
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetParams {
    /// `(m, h_1, …, h_L, d)`.
    pub layer_sizes: Vec<usize>,
    pub weights: Vec<f64>,
    pub activation: Activation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitScheme {
    /// Glorot-uniform hidden layers, zero biases, zero output layer.
    ResidualIdentity,
    /// Glorot-uniform on every layer including the output.
    GlorotUniform,
}

impl NetParams {
    /// Zero parameters for the given sizes.
    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        if layer_sizes.len() < 3 {
            return Err(contract("layer_sizes", "need input, at least one hidden, and output layer"));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(contract("layer_sizes", "layer widths must be positive"));
        }
        let n = layer_sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights: vec![0.0; n],
            activation: Activation::Tanh,
        })
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Offset of layer `l` in the flat weight vector.
    pub fn offset(&self, l: usize) -> usize {
        self.layer_sizes[..=l]
            .windows(2)
            .map(|w| w[1] * (w[0] + 1))
            .sum()
    }

    /// Augmented matrix of layer `l`.
    pub fn layer(&self, l: usize) -> &[f64] {
        let o = self.offset(l);
        let n = self.layer_sizes[l + 1] * (self.layer_sizes[l] + 1);
        &self.weights[o..o + n]
    }

    pub fn layer_mut(&mut self, l: usize) -> &mut [f64] {
        let o = self.offset(l);
        let n = self.layer_sizes[l + 1] * (self.layer_sizes[l] + 1);
        &mut self.weights[o..o + n]
    }

    pub fn validate(&self) -> Result<()> {
        let expected: usize = self.layer_sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        if self.layer_sizes.len() < 3 || self.weights.len() != expected {
            return Err(contract("params", "weight count does not match layer sizes"));
        }
        if self.weights.iter().any(|w| !w.is_finite()) {
            return Err(contract("params", "weights must be finite"));
        }
        Ok(())
    }
}

/// Glorot bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    libm::sqrt(6.0 / (fan_in + fan_out) as f64)
}

pub fn init_params(layer_sizes: &[usize], seed: u64, scheme: InitScheme) -> Result<NetParams> {
    let mut p = NetParams::zeros(layer_sizes)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = p.n_layers() - 1;
    for l in 0..p.n_layers() {
        if l == last && scheme == InitScheme::ResidualIdentity {
            continue;
        }
        let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
        let bound = glorot_bound(fan_in, fan_out);
        let cols = fan_in + 1;
        let w = p.layer_mut(l);
        for r in 0..fan_out {
            for c in 0..fan_in {
                w[r * cols + c] = bound * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
    }
    Ok(p)
}

/// Per-layer outputs retained for the backward pass. `post[0]` is the
/// network input; `post[l+1]` the output of layer `l` (after activation for
/// hidden layers).
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub pre: Vec<Vec<f64>>,
    pub post: Vec<Vec<f64>>,
}

/// Plain network evaluation `N(y_in; Θ)`.
pub fn fnn_forward(params: &NetParams, y_in: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
    if y_in.len() != params.input_width() {
        return Err(contract("y_in", "length does not match the input layer"));
    }
    let nl = params.n_layers();
    let mut pre = Vec::with_capacity(nl);
    let mut post = Vec::with_capacity(nl + 1);
    post.push(y_in.to_vec());
    for l in 0..nl {
        let (n_in, n_out) = (params.layer_sizes[l], params.layer_sizes[l + 1]);
        let w = params.layer(l);
        let a = &post[l];
        let z: Vec<f64> = (0..n_out)
            .map(|r| {
                let row = &w[r * (n_in + 1)..(r + 1) * (n_in + 1)];
                row[n_in] + row[..n_in].iter().zip(a).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect();
        let out: Vec<f64> = if l + 1 < nl {
            z.iter().map(|&v| params.activation.apply(v)).collect()
        } else {
            z.clone()
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { layer: l });
        }
        pre.push(z);
        post.push(out);
    }
    let y = post[nl].clone();
    Ok((y, ForwardCache { pre, post }))
}

/// Gradient of `g·N(y_in)` w.r.t. all weights, given `g = ∂L/∂y_out`.
pub fn fnn_backward(params: &NetParams, cache: &ForwardCache, grad_out: &[f64]) -> Vec<f64> {
    let nl = params.n_layers();
    let mut grads = vec![0.0; params.weights.len()];
    let mut delta = grad_out.to_vec();
    for l in (0..nl).rev() {
        let (n_in, n_out) = (params.layer_sizes[l], params.layer_sizes[l + 1]);
        let cols = n_in + 1;
        let a = &cache.post[l];
        let off = params.offset(l);
        for r in 0..n_out {
            let g = &mut grads[off + r * cols..off + (r + 1) * cols];
            for c in 0..n_in {
                g[c] = delta[r] * a[c];
            }
            g[n_in] = delta[r];
        }
        if l > 0 {
            let w = params.layer(l);
            let mut prev = vec![0.0; n_in];
            for r in 0..n_out {
                let row = &w[r * cols..r * cols + n_in];
                for (p, wv) in prev.iter_mut().zip(row) {
                    *p += delta[r] * wv;
                }
            }
            for (p, y) in prev.iter_mut().zip(a) {
                *p *= params.activation.derivative_from_output(*y);
            }
            delta = prev;
        }
    }
    grads
}

/// Affine map of a box onto `[−1, 1]` per coordinate. Degenerate
/// coordinates map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct InputNorm {
    pub center: Vec<f64>,
    pub half_width: Vec<f64>,
}

impl InputNorm {
    pub fn identity(m: usize) -> Self {
        Self {
            center: vec![0.0; m],
            half_width: vec![1.0; m],
        }
    }

    pub fn from_box(b: &[Interval]) -> Self {
        Self {
            center: b.iter().map(|iv| 0.5 * (iv.lo + iv.hi)).collect(),
            half_width: b.iter().map(|iv| 0.5 * (iv.hi - iv.lo)).collect(),
        }
    }

    pub fn to_box(&self) -> Vec<Interval> {
        self.center
            .iter()
            .zip(&self.half_width)
            .map(|(c, h)| Interval::new(c - h, c + h))
            .collect()
    }

    #[inline]
    pub fn apply_into(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..x.len() {
            let h = self.half_width[i];
            out[i] = if h > 0.0 { (x[i] - self.center[i]) / h } else { 0.0 };
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.apply_into(x, &mut out);
        out
    }
}

/// Selects the state part of a model input: `Î = [I_d, 0]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IHat {
    pub d: usize,
    pub m: usize,
}

impl IHat {
    #[inline]
    pub fn apply<'a>(&self, x_in: &'a [f64]) -> &'a [f64] {
        &x_in[..self.d]
    }
}

/// One-step network model `X_out = Î·X_in + N(norm(X_in); Θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualNet {
    pub params: NetParams,
    pub norm: InputNorm,
    pub layout: InputLayout,
}

impl ResidualNet {
    pub fn new(params: NetParams, norm: InputNorm, layout: InputLayout) -> Result<Self> {
        params.validate()?;
        let m = layout.width();
        if params.input_width() != m || params.output_width() != layout.dim {
            return Err(contract("params", "layer sizes do not match the input layout"));
        }
        if norm.center.len() != m || norm.half_width.len() != m {
            return Err(contract("norm", "normalization width does not match the layout"));
        }
        Ok(Self {
            params,
            norm,
            layout,
        })
    }

    /// Network with hidden widths `hidden` for the given layout.
    pub fn init(layout: InputLayout, hidden: &[usize], norm: InputNorm, seed: u64) -> Result<Self> {
        let mut sizes = Vec::with_capacity(hidden.len() + 2);
        sizes.push(layout.width());
        sizes.extend_from_slice(hidden);
        sizes.push(layout.dim);
        let params = init_params(&sizes, seed, InitScheme::ResidualIdentity)?;
        Self::new(params, norm, layout)
    }

    pub fn ihat(&self) -> IHat {
        IHat {
            d: self.layout.dim,
            m: self.layout.width(),
        }
    }

    pub fn model_forward(&self, x_in: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward_with_cache(x_in)?.0)
    }

    pub fn forward_with_cache(&self, x_in: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        if x_in.len() != self.layout.width() {
            return Err(contract("X_in", "length does not match the input layout"));
        }
        let (n, cache) = fnn_forward(&self.params, &self.norm.apply(x_in))?;
        let out = self
            .ihat()
            .apply(x_in)
            .iter()
            .zip(&n)
            .map(|(x, n)| x + n)
            .collect();
        Ok((out, cache))
    }

    /// Gradient of `½‖residual‖²` w.r.t. the weights; the `Î` path has no
    /// weights and contributes nothing.
    pub fn model_backward(&self, cache: &ForwardCache, residual: &[f64]) -> Vec<f64> {
        fnn_backward(&self.params, cache, residual)
    }
}

/// Reusable buffers for minibatch forward/backward passes.
#[derive(Debug, Clone, Default)]
pub struct BatchWorkspace {
    /// Activations per layer boundary, `(batch × width)` row-major.
    acts: Vec<Vec<f64>>,
    deltas: Vec<Vec<f64>>,
    transposed: Vec<Vec<f64>>,
}

impl BatchWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    fn prepare(&mut self, params: &NetParams, batch: usize) {
        let nl = params.n_layers();
        self.acts.resize(nl + 1, Vec::new());
        self.deltas.resize(nl + 1, Vec::new());
        self.transposed.resize(nl, Vec::new());
        for (l, w) in params.layer_sizes.iter().enumerate() {
            self.acts[l].resize(batch * w, 0.0);
            self.deltas[l].resize(batch * w, 0.0);
        }
        for l in 0..nl {
            let (n_in, n_out) = (params.layer_sizes[l], params.layer_sizes[l + 1]);
            let cols = n_in + 1;
            let w = params.layer(l);
            let t = &mut self.transposed[l];
            t.resize(n_in * n_out, 0.0);
            for r in 0..n_out {
                for c in 0..n_in {
                    t[c * n_out + r] = w[r * cols + c];
                }
            }
        }
    }
}

/// Sum over the batch of `‖X_out − target‖²`, and optionally accumulates its
/// gradient scaled by `grad_scale` into `grads`.
///
/// `inputs` holds raw model inputs `(batch × m)` and `targets` `(batch × d)`.
pub fn batch_loss_grad(
    net: &ResidualNet,
    ws: &mut BatchWorkspace,
    inputs: &[f64],
    targets: &[f64],
    grads: Option<(&mut [f64], f64)>,
) -> f64 {
    let p = &net.params;
    let m = p.input_width();
    let d = p.output_width();
    let batch = inputs.len() / m;
    let nl = p.n_layers();
    ws.prepare(p, batch);

    for i in 0..batch {
        net.norm
            .apply_into(&inputs[i * m..(i + 1) * m], &mut ws.acts[0][i * m..(i + 1) * m]);
    }
    for l in 0..nl {
        let (n_in, n_out) = (p.layer_sizes[l], p.layer_sizes[l + 1]);
        let cols = n_in + 1;
        let w = p.layer(l);
        let (lo, hi) = ws.acts.split_at_mut(l + 1);
        let a = &lo[l];
        let z = &mut hi[0];
        let t = &ws.transposed[l];
        for i in 0..batch {
            let zi = &mut z[i * n_out..(i + 1) * n_out];
            for (r, zr) in zi.iter_mut().enumerate() {
                *zr = w[r * cols + n_in];
            }
            let ai = &a[i * n_in..(i + 1) * n_in];
            for (c, &av) in ai.iter().enumerate() {
                let tc = &t[c * n_out..(c + 1) * n_out];
                for (zr, tv) in zi.iter_mut().zip(tc) {
                    *zr += av * tv;
                }
            }
            if l + 1 < nl {
                for zr in zi.iter_mut() {
                    *zr = p.activation.apply(*zr);
                }
            }
        }
    }

    let mut loss = 0.0;
    {
        let out = &ws.acts[nl];
        let dl = &mut ws.deltas[nl];
        for i in 0..batch {
            for k in 0..d {
                let r = inputs[i * m + k] + out[i * d + k] - targets[i * d + k];
                dl[i * d + k] = r;
                loss += r * r;
            }
        }
    }

    let Some((grads, scale)) = grads else {
        return loss;
    };
    // d‖r‖²/dN = 2r
    let scale = 2.0 * scale;
    for l in (0..nl).rev() {
        let (n_in, n_out) = (p.layer_sizes[l], p.layer_sizes[l + 1]);
        let cols = n_in + 1;
        let off = p.offset(l);
        let g = &mut grads[off..off + n_out * cols];
        let a = &ws.acts[l];
        let (dlo, dhi) = ws.deltas.split_at_mut(l + 1);
        let delta = &dhi[0];
        for i in 0..batch {
            let ai = &a[i * n_in..(i + 1) * n_in];
            for r in 0..n_out {
                let dr = scale * delta[i * n_out + r];
                if dr == 0.0 {
                    continue;
                }
                let gr = &mut g[r * cols..(r + 1) * cols];
                for (gv, av) in gr[..n_in].iter_mut().zip(ai) {
                    *gv += dr * av;
                }
                gr[n_in] += dr;
            }
        }
        if l > 0 {
            let w = p.layer(l);
            let prev = &mut dlo[l];
            for i in 0..batch {
                let pi = &mut prev[i * n_in..(i + 1) * n_in];
                pi.fill(0.0);
                for r in 0..n_out {
                    let dr = delta[i * n_out + r];
                    let row = &w[r * cols..r * cols + n_in];
                    for (pv, wv) in pi.iter_mut().zip(row) {
                        *pv += dr * wv;
                    }
                }
                for (pv, y) in pi.iter_mut().zip(&a[i * n_in..(i + 1) * n_in]) {
                    *pv *= p.activation.derivative_from_output(*y);
                }
            }
        }
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::input_param::{BasisKind, BasisSpec};

    fn layout(dim: usize, nb: usize) -> InputLayout {
        InputLayout {
            dim,
            input_arity: 1,
            basis: BasisSpec::new(BasisKind::Taylor, nb - 1),
            n_extra: 0,
            include_delta: true,
        }
    }

    #[test]
    fn zero_network_outputs_zero() {
        let p = NetParams::zeros(&[3, 4, 2]).unwrap();
        let (y, _) = fnn_forward(&p, &[1.0, -2.0, 0.5]).unwrap();
        assert_eq!(y, vec![0.0, 0.0]);
    }

    #[test]
    fn hand_computed_one_hidden_layer() {
        let mut p = NetParams::zeros(&[1, 1, 1]).unwrap();
        // hidden: 0.5·y + 0; output: 2·h + 0
        p.weights.copy_from_slice(&[0.5, 0.0, 2.0, 0.0]);
        let (y, _) = fnn_forward(&p, &[1.0]).unwrap();
        assert!((y[0] - 0.924_234_31).abs() < 1e-8);
        assert_eq!(y[0], 2.0 * libm::tanh(0.5));
    }

    #[test]
    fn small_weights_behave_linearly() {
        let mut p = init_params(&[3, 5, 2], 4, InitScheme::GlorotUniform).unwrap();
        p.weights.iter_mut().for_each(|w| *w *= 1e-6);
        let x = [0.3, -0.7, 0.9];
        let (y, _) = fnn_forward(&p, &x).unwrap();
        // linear map W2·W1 (biases are zero)
        let w1 = p.layer(0).to_vec();
        let w2 = p.layer(1).to_vec();
        for k in 0..2 {
            let mut lin = 0.0;
            for h in 0..5 {
                let hid: f64 = (0..3).map(|c| w1[h * 4 + c] * x[c]).sum();
                lin += w2[k * 6 + h] * hid;
            }
            assert!(((y[k] - lin) / lin).abs() < 1e-11, "{} {}", y[k], lin);
        }
    }

    #[test]
    fn residual_forward_examples() {
        let l = layout(1, 3);
        let net = ResidualNet::init(l, &[6], InputNorm::identity(5), 1).unwrap();
        let x = [2.0, 1.0, 0.0, 0.0, 0.1];
        assert_eq!(net.model_forward(&x).unwrap(), vec![2.0]);

        // force N ≡ −0.3 through the output bias
        let mut net = net;
        let last = net.params.n_layers() - 1;
        let w = net.params.layer_mut(last);
        w.fill(0.0);
        *w.last_mut().unwrap() = -0.3;
        assert!((net.model_forward(&x).unwrap()[0] - 1.7).abs() < 1e-15);
        assert!(net.model_forward(&x[..4]).is_err());
    }

    #[test]
    fn init_properties() {
        let a = init_params(&[8, 80, 80, 80, 2], 3, InitScheme::ResidualIdentity).unwrap();
        assert_eq!(a, init_params(&[8, 80, 80, 80, 2], 3, InitScheme::ResidualIdentity).unwrap());
        assert!(a.layer(3).iter().all(|w| *w == 0.0));
        let p = init_params(&[100, 100, 1], 9, InitScheme::ResidualIdentity).unwrap();
        let bound = glorot_bound(100, 100);
        let w = p.layer(0);
        let mut n = 0;
        for r in 0..100 {
            for c in 0..100 {
                assert!(w[r * 101 + c].abs() <= bound);
                n += 1;
            }
            assert_eq!(w[r * 101 + 100], 0.0);
        }
        assert_eq!(n, 10_000);
        assert!(NetParams::zeros(&[3, 2]).is_err());
    }

    #[test]
    fn zero_residual_gives_zero_gradient() {
        let p = init_params(&[3, 4, 2], 1, InitScheme::GlorotUniform).unwrap();
        let (_, cache) = fnn_forward(&p, &[0.1, 0.2, 0.3]).unwrap();
        assert!(fnn_backward(&p, &cache, &[0.0, 0.0]).iter().all(|g| *g == 0.0));
    }

    #[test]
    fn single_weight_chain_rule() {
        // N(y) = v·tanh(w·y); L = ½(N − t)²
        let (w, v, y, t) = (0.7, -1.3, 0.4, 0.2);
        let mut p = NetParams::zeros(&[1, 1, 1]).unwrap();
        p.weights.copy_from_slice(&[w, 0.0, v, 0.0]);
        let (n, cache) = fnn_forward(&p, &[y]).unwrap();
        let g = fnn_backward(&p, &cache, &[n[0] - t]);
        let h = libm::tanh(w * y);
        let r = v * h - t;
        assert!((g[0] - r * v * (1.0 - h * h) * y).abs() < 1e-15);
        assert!((g[1] - r * v * (1.0 - h * h)).abs() < 1e-15);
        assert!((g[2] - r * h).abs() < 1e-15);
        assert!((g[3] - r).abs() < 1e-15);
    }

    #[test]
    fn batch_matches_per_sample() {
        let l = layout(2, 2);
        let mut net = ResidualNet::init(l, &[7, 5], InputNorm::identity(l.width()), 5).unwrap();
        net.params = init_params(&net.params.layer_sizes, 6, InitScheme::GlorotUniform).unwrap();
        net.norm = InputNorm::from_box(&[Interval::new(-2.0, 2.0); 5]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let batch = 9;
        let inputs: Vec<f64> = (0..batch * 5).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let targets: Vec<f64> = (0..batch * 2).map(|_| rng.random::<f64>()).collect();

        let mut grads = vec![0.0; net.params.weights.len()];
        let mut ws = BatchWorkspace::new();
        let loss = batch_loss_grad(&net, &mut ws, &inputs, &targets, Some((&mut grads, 1.0)));

        let mut want_loss = 0.0;
        let mut want = vec![0.0; grads.len()];
        for i in 0..batch {
            let (y, cache) = net.forward_with_cache(&inputs[i * 5..(i + 1) * 5]).unwrap();
            let r: Vec<f64> = y.iter().zip(&targets[i * 2..(i + 1) * 2]).map(|(a, b)| a - b).collect();
            want_loss += r.iter().map(|v| v * v).sum::<f64>();
            for (w, g) in want.iter_mut().zip(net.model_backward(&cache, &r)) {
                *w += 2.0 * g;
            }
        }
        assert!((loss - want_loss).abs() < 1e-12);
        for (a, b) in grads.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
