//! Time-dependent input processes γ(t).

use alloc::boxed::Box;
use alloc::vec::Vec;

/// A vector-valued input process evaluated pointwise in time.
pub trait Signal: Send + Sync {
    /// Number of scalar channels.
    fn arity(&self) -> usize;

    /// Writes γ(t) into `out` (length `arity`).
    fn eval(&self, t: f64, out: &mut [f64]);

    /// Writes the `order`-th time derivative into `out` when it is known
    /// analytically. Returns `false` when only point values are available.
    fn derivative(&self, _order: usize, _t: f64, _out: &mut [f64]) -> bool {
        false
    }

    /// Closed interval on which the signal may be evaluated.
    fn domain(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, f64::INFINITY)
    }
}

type ChannelFn = Box<dyn Fn(f64) -> f64 + Send + Sync>;
type DerivFn = Box<dyn Fn(usize, f64) -> Option<f64> + Send + Sync>;

/// Signal assembled from one closure per channel.
pub struct FnSignal {
    channels: Vec<ChannelFn>,
    derivs: Vec<Option<DerivFn>>,
    domain: (f64, f64),
}

impl FnSignal {
    pub fn new() -> Self {
        Self {
            channels: Vec::new(),
            derivs: Vec::new(),
            domain: (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    /// Adds a channel known only through point values.
    pub fn channel(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.channels.push(Box::new(f));
        self.derivs.push(None);
        self
    }

    /// Adds a channel with an analytic derivative evaluator
    /// `d(order, t) -> Some(value)`; `None` means the order is unavailable.
    pub fn channel_with_derivs(
        mut self,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d: impl Fn(usize, f64) -> Option<f64> + Send + Sync + 'static,
    ) -> Self {
        self.channels.push(Box::new(f));
        self.derivs.push(Some(Box::new(d)));
        self
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain = (lo, hi);
        self
    }
}

impl Default for FnSignal {
    fn default() -> Self {
        Self::new()
    }
}

impl Signal for FnSignal {
    fn arity(&self) -> usize {
        self.channels.len()
    }

    fn eval(&self, t: f64, out: &mut [f64]) {
        for (o, f) in out.iter_mut().zip(&self.channels) {
            *o = f(t);
        }
    }

    fn derivative(&self, order: usize, t: f64, out: &mut [f64]) -> bool {
        if order == 0 {
            self.eval(t, out);
            return true;
        }
        for (o, d) in out.iter_mut().zip(&self.derivs) {
            match d.as_ref().and_then(|d| d(order, t)) {
                Some(v) => *o = v,
                None => return false,
            }
        }
        true
    }

    fn domain(&self) -> (f64, f64) {
        self.domain
    }
}

/// Time-invariant input.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantSignal(pub Vec<f64>);

impl Signal for ConstantSignal {
    fn arity(&self) -> usize {
        self.0.len()
    }

    fn eval(&self, _t: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }

    fn derivative(&self, order: usize, _t: f64, out: &mut [f64]) -> bool {
        if order == 0 {
            out.copy_from_slice(&self.0);
        } else {
            out.fill(0.0);
        }
        true
    }
}

impl<S: Signal + ?Sized> Signal for &S {
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn eval(&self, t: f64, out: &mut [f64]) {
        (**self).eval(t, out)
    }
    fn derivative(&self, order: usize, t: f64, out: &mut [f64]) -> bool {
        (**self).derivative(order, t, out)
    }
    fn domain(&self) -> (f64, f64) {
        (**self).domain()
    }
}

impl<S: Signal + ?Sized> Signal for Box<S> {
    fn arity(&self) -> usize {
        (**self).arity()
    }
    fn eval(&self, t: f64, out: &mut [f64]) {
        (**self).eval(t, out)
    }
    fn derivative(&self, order: usize, t: f64, out: &mut [f64]) -> bool {
        (**self).derivative(order, t, out)
    }
    fn domain(&self) -> (f64, f64) {
        (**self).domain()
    }
}
