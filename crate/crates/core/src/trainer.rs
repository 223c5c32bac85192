//! Minibatch Adam on the mean squared one-step loss.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{TrainingSample, TrainingSet};
use crate::error::{contract, Error, Result};
use crate::flownet::{batch_loss_grad, BatchWorkspace, InputNorm, ResidualNet};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 500,
            batch_size: 256,
            learning_rate: 1e-3,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            seed: 0,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let (b1, b2) = self.adam_betas;
        if !(self.learning_rate > 0.0) {
            return Err(contract("learning_rate", "must be positive"));
        }
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return Err(contract("adam_betas", "must lie in [0, 1)"));
        }
        if self.batch_size == 0 {
            return Err(contract("batch_size", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return Err(contract("validation_fraction", "must lie in [0, 1)"));
        }
        if !(self.adam_eps >= 0.0) {
            return Err(contract("adam_eps", "must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }
}

/// Bias-corrected Adam update of `params` in place.
pub fn adam_step(
    params: &mut [f64],
    state: &mut AdamState,
    grads: &[f64],
    lr: f64,
    betas: (f64, f64),
    eps: f64,
) -> Result<()> {
    if params.len() != grads.len() || state.m.len() != grads.len() || state.v.len() != grads.len() {
        return Err(contract("grads", "optimizer state shape does not match"));
    }
    let (b1, b2) = betas;
    state.step += 1;
    let t = state.step as f64;
    let c1 = 1.0 - libm::pow(b1, t);
    let c2 = 1.0 - libm::pow(b2, t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / c1;
        let v_hat = state.v[i] / c2;
        params[i] -= lr * m_hat / (libm::sqrt(v_hat) + eps);
    }
    Ok(())
}

fn pack(samples: &[&TrainingSample], include_delta: bool, inputs: &mut Vec<f64>, targets: &mut Vec<f64>) {
    inputs.clear();
    targets.clear();
    for s in samples {
        inputs.extend_from_slice(&s.x_in);
        inputs.extend_from_slice(&s.gamma);
        inputs.extend_from_slice(&s.extra);
        if include_delta {
            inputs.push(s.delta);
        }
        targets.extend_from_slice(&s.x_out);
    }
}

/// `(1/J)·Σ‖X_out − x_out‖²` over the batch.
pub fn mse_loss(net: &ResidualNet, batch: &[TrainingSample]) -> Result<f64> {
    if batch.is_empty() {
        return Err(contract("batch", "must be nonempty"));
    }
    let refs: Vec<&TrainingSample> = batch.iter().collect();
    Ok(sum_sq_loss(net, &refs) / batch.len() as f64)
}

fn sum_sq_loss(net: &ResidualNet, samples: &[&TrainingSample]) -> f64 {
    let mut ws = BatchWorkspace::new();
    let (mut inputs, mut targets) = (Vec::new(), Vec::new());
    let mut total = 0.0;
    for chunk in samples.chunks(1024) {
        pack(chunk, net.layout.include_delta, &mut inputs, &mut targets);
        total += batch_loss_grad(net, &mut ws, &inputs, &targets, None);
    }
    total
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean of minibatch losses over each epoch.
    pub loss_history: Vec<f64>,
    /// Validation MSE after each epoch (NaN when no validation split).
    pub val_history: Vec<f64>,
    pub final_model: ResidualNet,
}

/// Splits `0..n` into (train, validation) indices with a seeded shuffle.
pub fn validation_split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0f_da7a);
    idx.shuffle(&mut rng);
    let n_val = ((n as f64) * fraction) as usize;
    let n_val = n_val.min(n.saturating_sub(1));
    let train = idx.split_off(n_val);
    (train, idx)
}

/// Network for `dataset` with zero output layer and inputs normalized on
/// the dataset's domain box.
pub fn network_for(dataset: &TrainingSet, hidden: &[usize], seed: u64) -> Result<ResidualNet> {
    let norm = InputNorm::from_box(&dataset.normalization_box());
    ResidualNet::init(dataset.layout, hidden, norm, seed)
}

pub fn train(net: ResidualNet, dataset: &TrainingSet, cfg: &TrainConfig) -> Result<TrainReport> {
    train_with_progress(net, dataset, cfg, |_, _, _| {})
}

/// As [`train`], calling `progress(epoch, train_mse, val_mse)` after every
/// epoch.
pub fn train_with_progress(
    mut net: ResidualNet,
    dataset: &TrainingSet,
    cfg: &TrainConfig,
    mut progress: impl FnMut(usize, f64, f64),
) -> Result<TrainReport> {
    cfg.validate()?;
    dataset.validate()?;
    if dataset.layout != net.layout {
        return Err(contract("dataset", "layout does not match the network"));
    }
    let (mut train_idx, val_idx) = validation_split(dataset.len(), cfg.validation_fraction, cfg.seed);
    let val: Vec<&TrainingSample> = val_idx.iter().map(|&i| &dataset.samples[i]).collect();

    let n_w = net.params.weights.len();
    let mut opt = AdamState::new(n_w);
    let mut grads = vec![0.0; n_w];
    let mut ws = BatchWorkspace::new();
    let (mut inputs, mut targets) = (Vec::new(), Vec::new());
    let mut batch: Vec<&TrainingSample> = Vec::with_capacity(cfg.batch_size);
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    let mut val_history = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64 + 1);
        train_idx.shuffle(&mut rng);
        let mut epoch_sum = 0.0;
        for (b, chunk) in train_idx.chunks(cfg.batch_size).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| &dataset.samples[i]));
            pack(&batch, net.layout.include_delta, &mut inputs, &mut targets);
            grads.fill(0.0);
            let scale = 1.0 / chunk.len() as f64;
            let loss = batch_loss_grad(&net, &mut ws, &inputs, &targets, Some((&mut grads, scale)));
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Divergence { epoch, batch: b });
            }
            epoch_sum += loss;
            adam_step(
                &mut net.params.weights,
                &mut opt,
                &grads,
                cfg.learning_rate,
                cfg.adam_betas,
                cfg.adam_eps,
            )?;
        }
        let train_mse = epoch_sum / train_idx.len() as f64;
        let val_mse = if val.is_empty() {
            f64::NAN
        } else {
            sum_sq_loss(&net, &val) / val.len() as f64
        };
        loss_history.push(train_mse);
        val_history.push(val_mse);
        progress(epoch, train_mse, val_mse);
    }
    Ok(TrainReport {
        loss_history,
        val_history,
        final_model: net,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_training_set, Interval, SamplingDomains};
    use crate::dynamics::{linear_scalar, SystemSpec};
    use crate::input_param::{BasisKind, BasisSpec};

    fn zero_system_set(n: usize) -> TrainingSet {
        let sys = SystemSpec::new("zero", 1, 1, |_, _, _, out| out.fill(0.0));
        let d = SamplingDomains {
            state: vec![Interval::new(-2.0, 2.0)],
            gamma: vec![Interval::new(-1.0, 1.0); 3],
            delta: Interval::new(0.05, 0.15),
            extra: vec![],
        };
        build_training_set(&sys, &d, n, 3, BasisSpec::new(BasisKind::LagrangeEquispaced, 2), 4).unwrap()
    }

    fn scalar_set(n: usize, seed: u64) -> TrainingSet {
        let d = SamplingDomains {
            state: vec![Interval::new(-2.0, 2.0)],
            gamma: vec![Interval::new(-5.0, 5.0); 6],
            delta: Interval::new(0.05, 0.15),
            extra: vec![],
        };
        build_training_set(&linear_scalar(), &d, n, seed, BasisSpec::new(BasisKind::LagrangeEquispaced, 2), 20)
            .unwrap()
    }

    #[test]
    fn mse_examples() {
        let set = zero_system_set(64);
        let net = network_for(&set, &[8], 0).unwrap();
        assert_eq!(mse_loss(&net, &set.samples).unwrap(), 0.0);

        let mut s = set.samples[0].clone();
        s.x_out[0] = s.x_in[0] + 0.3;
        assert!((mse_loss(&net, &[s]).unwrap() - 0.09).abs() < 1e-15);
        assert!(mse_loss(&net, &[]).is_err());
    }

    #[test]
    fn batch_mse_is_mean_of_sample_losses() {
        let set = scalar_set(300, 1);
        let mut net = network_for(&set, &[10, 10], 2).unwrap();
        net.params.weights.iter_mut().enumerate().for_each(|(i, w)| *w += 1e-3 * ((i % 7) as f64 - 3.0));
        let total = mse_loss(&net, &set.samples).unwrap();
        let mean = set
            .samples
            .iter()
            .map(|s| mse_loss(&net, core::slice::from_ref(s)).unwrap())
            .sum::<f64>()
            / set.len() as f64;
        assert!((total - mean).abs() < 1e-14);
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let mut p = vec![1.0, -2.0];
        let mut st = AdamState::new(2);
        adam_step(&mut p, &mut st, &[0.0, 0.0], 0.1, (0.9, 0.999), 1e-8).unwrap();
        assert_eq!(p, vec![1.0, -2.0]);
        assert_eq!(st.step, 1);

        // Existing moments decay under a zero gradient.
        st.m = vec![0.5, 0.5];
        adam_step(&mut p, &mut st, &[0.0, 0.0], 0.1, (0.9, 0.999), 1e-8).unwrap();
        assert_eq!(st.m, vec![0.45, 0.45]);
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        let mut p = vec![0.0, 0.0];
        let mut st = AdamState::new(2);
        adam_step(&mut p, &mut st, &[3.0, -0.02], 0.01, (0.9, 0.999), 1e-8).unwrap();
        assert!((p[0] + 0.01).abs() < 1e-9);
        assert!((p[1] - 0.01).abs() < 1e-6);
    }

    #[test]
    fn adam_minimizes_quadratic_bowl() {
        let mut w = vec![1.0];
        let mut st = AdamState::new(1);
        for _ in 0..200 {
            let g = [2.0 * w[0]];
            adam_step(&mut w, &mut st, &g, 0.1, (0.9, 0.999), 1e-8).unwrap();
        }
        assert!(w[0].abs() < 1e-2, "{}", w[0]);
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { adam_betas: (1.0, 0.9), ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
            TrainConfig { validation_fraction: 1.0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
    }

    #[test]
    fn identity_data_stays_exact() {
        let set = zero_system_set(512);
        let net = network_for(&set, &[16, 16], 1).unwrap();
        let cfg = TrainConfig { epochs: 50, batch_size: 64, ..Default::default() };
        let rep = train(net, &set, &cfg).unwrap();
        assert_eq!(rep.loss_history.len(), 50);
        assert_eq!(rep.val_history.len(), 50);
        assert!(*rep.loss_history.last().unwrap() < 1e-8);
    }

    #[test]
    fn training_is_deterministic_and_improves() {
        let set = scalar_set(1000, 4);
        let cfg = TrainConfig { epochs: 15, batch_size: 64, seed: 9, ..Default::default() };
        let a = train(network_for(&set, &[20, 20], 1).unwrap(), &set, &cfg).unwrap();
        let b = train(network_for(&set, &[20, 20], 1).unwrap(), &set, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.loss_history.last().unwrap() <= &a.loss_history[0]);
        let identity = mse_loss(&network_for(&set, &[20, 20], 1).unwrap(), &set.samples).unwrap();
        let fin = mse_loss(&a.final_model, &set.samples).unwrap();
        assert!(fin <= 1.05 * identity, "{fin} vs {identity}");
    }

    #[test]
    fn validation_split_is_disjoint_and_stable() {
        let (t, v) = validation_split(100, 0.1, 3);
        assert_eq!((t.len(), v.len()), (90, 10));
        assert!(v.iter().all(|i| !t.contains(i)));
        assert_eq!(validation_split(100, 0.1, 3), (t, v));
        let (t, v) = validation_split(1, 0.5, 0);
        assert_eq!((t.len(), v.len()), (1, 0));
    }

    #[test]
    fn layout_mismatch_rejected() {
        let set = scalar_set(10, 0);
        let other = zero_system_set(10);
        let net = network_for(&other, &[4], 0).unwrap();
        assert!(train(net, &set, &TrainConfig::default()).is_err());
    }
}
