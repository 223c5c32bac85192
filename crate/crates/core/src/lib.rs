//! Learning non-autonomous dynamical systems from trajectory data.
//!
//! Inputs γ(t) are parameterized locally on each interval of a time grid,
//! and a residual one-step model `x_{n+1} = x_n + N(x_n, Γ_n, δ_n)` is fit
//! to sampled one-step pairs. The model is then applied recursively for
//! long-horizon prediction, with closed-form error bounds available in
//! [`analysis`].
//!
//! The crate is `no_std` and needs only `alloc`.

#![no_std]

extern crate alloc;

pub mod analysis;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod flownet;
pub mod input_param;
pub mod poly_model;
pub mod rollout;
pub mod signal;
pub mod trainer;

pub use error::{Error, Result};
