//! The `simulate`, `gen-data`, `train`, `predict` and `bounds` pipelines.

use std::path::Path;

use flowmap_core::analysis::{
    check_gronwall, check_rollout_bound, combined_bound, estimate_lipschitz, input_bound, rollout_bound,
    appendix_bound, BoundInputs, GronwallSetup, NoiseMode, RolloutSetup, LIPSCHITZ_DISTANCE, LIPSCHITZ_PAIRS,
};
use flowmap_core::dataset::{check_domains, micro_steps_for, generate_pairs, noise_inject, sample_inputs, TrainingSet};
use flowmap_core::dynamics::{integrate_on_grid, uniform_grid, Trajectory};
use flowmap_core::poly_model;
use flowmap_core::rollout::{compare, predict as rollout_predict, ExactIncrement, Metrics, OneStepModel, PredictionRun};
use flowmap_core::trainer::{network_for, train_with_progress};
use flowmap_core::{Error as CoreError, Result as CoreResult};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{BoundsCheck, Experiment, ModelConfig, NoiseConfig};
use crate::error::{CliError, Result};
use crate::expr::ExprSignal;
use crate::io::{self, Checkpoint, LoadedModel, TrainingRecord};

/// Draws per parallel work unit during data generation.
const GEN_CHUNK: usize = 256;
/// Absolute error below which a bound check counts as met regardless of
/// the bound (integration round-off).
const BOUND_NOISE_FLOOR: f64 = 1e-12;
const NOISE_SEED_SALT: u64 = 0x6e6f_6973_65;

/// Reference trajectory of the scenario on its output grid. The substep
/// count is raised when the system imposes a maximum step.
pub fn reference_trajectory(exp: &Experiment) -> Result<Trajectory> {
    let s = &exp.scenario;
    let signal = ExprSignal::parse(&s.signal)?;
    let grid = uniform_grid(s.t0, s.t_end, s.delta)?;
    let substeps = micro_steps_for(&exp.system, s.delta, s.reference_substeps);
    Ok(integrate_on_grid(
        &exp.system,
        &s.x0,
        &grid,
        substeps,
        &signal,
        &s.extra,
    )?)
}

pub fn simulate(exp: &Experiment) -> Result<Trajectory> {
    let traj = reference_trajectory(exp)?;
    io::write_trajectory(&exp.out.join("trajectory.csv"), &traj)?;
    Ok(traj)
}

/// Samples and integrates the training pairs, in parallel chunks merged in
/// draw order so the result does not depend on the thread count.
pub fn generate_dataset(exp: &Experiment) -> Result<TrainingSet> {
    check_domains(&exp.system, &exp.domains, exp.basis)?;
    let draws = sample_inputs(&exp.domains, exp.dataset.size, exp.seed)?;
    let parts = draws
        .par_chunks(GEN_CHUNK)
        .map(|chunk| generate_pairs(&exp.system, chunk, exp.basis, exp.dataset.micro_steps))
        .collect::<CoreResult<Vec<_>>>()?;
    let mut parts = parts.into_iter();
    let mut set = parts.next().expect("at least one chunk");
    for p in parts {
        set.samples.extend(p.samples);
        set.meta.dropped += p.meta.dropped;
    }
    if set.is_empty() {
        return Err(CliError::Numeric("every sampled local solve overflowed".into()));
    }
    set.domains = Some(exp.domains.clone());
    set.seed = Some(exp.seed);
    if exp.dataset.fixed_delta {
        set = set.fixed_delta().map_err(|e| CliError::Config(e.to_string()))?;
    }
    if exp.dataset.noise_std > 0.0 {
        set = noise_inject(&set, exp.dataset.noise_std, exp.seed ^ NOISE_SEED_SALT)?;
    }
    Ok(set)
}

pub fn gen_data(exp: &Experiment) -> Result<TrainingSet> {
    let set = generate_dataset(exp)?;
    io::write_dataset(&exp.dataset_path(), &set, exp.dataset.noise_std)?;
    Ok(set)
}

fn load_dataset(exp: &Experiment) -> Result<TrainingSet> {
    let path = exp.dataset_path();
    let (set, _) = io::read_dataset(&path)?;
    if set.meta.system != exp.system.name {
        return Err(CliError::Config(format!(
            "dataset {} was generated for `{}`, not `{}`",
            path.display(),
            set.meta.system,
            exp.system.name
        )));
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub model: &'static str,
    pub samples: usize,
    pub epochs_completed: Option<usize>,
    pub final_train_mse: Option<f64>,
    pub final_val_mse: Option<f64>,
    pub poly_rank: Option<usize>,
    pub poly_features: Option<usize>,
}

fn finite(v: Option<&f64>) -> Option<f64> {
    v.copied().filter(|v| v.is_finite())
}

/// Trains (or fits) the configured model on the dataset on disk and
/// writes the checkpoint.
pub fn train(exp: &Experiment) -> Result<TrainSummary> {
    let set = load_dataset(exp)?;
    train_on(exp, &set, &exp.checkpoint)
}

pub fn train_on(exp: &Experiment, set: &TrainingSet, checkpoint: &Path) -> Result<TrainSummary> {
    match &exp.model {
        ModelConfig::Network { hidden } => train_network(exp, set, hidden, checkpoint),
        ModelConfig::Polynomial { degree, .. } => fit_polynomial(exp, set, *degree, checkpoint),
    }
}

fn train_network(exp: &Experiment, set: &TrainingSet, hidden: &[usize], checkpoint: &Path) -> Result<TrainSummary> {
    let loss_path = checkpoint.with_file_name("loss.csv");
    let (net, done, mut train_hist, mut val_hist) = if exp.train.resume {
        let (model, _) = io::load_model(checkpoint)?;
        let LoadedModel::Network(net, rec) = model else {
            return Err(CliError::Config("cannot resume: checkpoint is not a network".into()));
        };
        if net.layout != set.layout {
            return Err(CliError::Config("cannot resume: checkpoint layout differs from the dataset".into()));
        }
        let (t, v) = match io::read_csv(&loss_path) {
            Ok(table) => table.rows.iter().map(|r| (r[1], r[2])).unzip(),
            Err(_) => (Vec::new(), Vec::new()),
        };
        (net, rec.epochs_completed, t, v)
    } else {
        (network_for(set, hidden, exp.init_seed())?, 0, Vec::new(), Vec::new())
    };

    let cfg = exp.train.to_config(exp.seed.wrapping_add(done as u64));
    let every = exp.train.log_every;
    let report = train_with_progress(net, set, &cfg, |epoch, t, v| {
        if every > 0 && (epoch % every == 0 || epoch + 1 == cfg.epochs) {
            eprintln!("epoch {:>5}  train {t:.4e}  val {v:.4e}", done + epoch);
        }
    })?;
    train_hist.extend(&report.loss_history);
    val_hist.extend(&report.val_history);
    let record = TrainingRecord {
        epochs_completed: done + cfg.epochs,
        seed: exp.seed,
        dataset_samples: set.len(),
        final_train_mse: finite(train_hist.last()),
        final_val_mse: finite(val_hist.last()),
    };
    io::write_json(
        checkpoint,
        &Checkpoint::from_network(&report.final_model, &exp.system.name, record.clone()),
    )?;
    io::write_loss(&loss_path, 0, &train_hist, &val_hist)?;
    Ok(TrainSummary {
        model: "network",
        samples: set.len(),
        epochs_completed: Some(record.epochs_completed),
        final_train_mse: record.final_train_mse,
        final_val_mse: record.final_val_mse,
        poly_rank: None,
        poly_features: None,
    })
}

fn fit_polynomial(exp: &Experiment, set: &TrainingSet, degree: usize, checkpoint: &Path) -> Result<TrainSummary> {
    let model = poly_model::fit(set, degree)?;
    let info = model.fit_info.clone().expect("fit records diagnostics");
    if info.underdetermined() {
        eprintln!(
            "warning: {} samples for {} features; the fit is underdetermined",
            info.n_samples, info.n_features
        );
    } else if info.rank_deficient() {
        eprintln!("warning: design matrix has rank {} < {}", info.rank, info.n_features);
    }
    io::write_json(checkpoint, &Checkpoint::from_poly(&model, &exp.system.name))?;
    Ok(TrainSummary {
        model: "polynomial",
        samples: set.len(),
        epochs_completed: None,
        final_train_mse: Some(info.residual_mse),
        final_val_mse: None,
        poly_rank: Some(info.rank),
        poly_features: Some(info.n_features),
    })
}

impl OneStepModel for LoadedModel {
    fn layout(&self) -> flowmap_core::dataset::InputLayout {
        LoadedModel::layout(self)
    }

    fn step(&self, x_in: &[f64], out: &mut [f64]) -> CoreResult<()> {
        match self {
            LoadedModel::Network(n, _) => n.step(x_in, out),
            LoadedModel::Polynomial(p) => p.step(x_in, out),
        }
    }

    fn in_domain(&self, x_in: &[f64]) -> bool {
        match self {
            LoadedModel::Network(n, _) => n.in_domain(x_in),
            LoadedModel::Polynomial(p) => p.in_domain(x_in),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub system: String,
    pub model: String,
    pub steps: usize,
    pub completed: bool,
    pub failed_at: Option<usize>,
    pub out_of_domain_steps: usize,
    pub first_out_of_domain: Option<usize>,
    pub linf: f64,
    pub rel_linf: f64,
    pub terminal: f64,
    pub linf_per_coord: Vec<f64>,
}

pub struct PredictOutcome {
    pub run: PredictionRun,
    pub reference: Trajectory,
    pub metrics: Metrics,
    pub record: MetricsRecord,
}

/// Rolls `model` out over the scenario and compares with the reference.
/// The comparison covers the completed prefix of a truncated run.
pub fn evaluate<M: OneStepModel>(exp: &Experiment, model: &M, label: &str) -> Result<PredictOutcome> {
    let s = &exp.scenario;
    if model.layout().basis != exp.basis {
        return Err(CliError::Config(format!(
            "model uses basis {:?} but the experiment uses {:?}",
            model.layout().basis,
            exp.basis
        )));
    }
    let signal = ExprSignal::parse(&s.signal)?;
    let grid = uniform_grid(s.t0, s.t_end, s.delta)?;
    let run = rollout_predict(model, &s.x0, &signal, &s.extra, &grid)?;
    let reference = reference_trajectory(exp)?;
    let n = run.predicted.len();
    let prefix = Trajectory {
        times: reference.times[..n].to_vec(),
        states: reference.states[..n].to_vec(),
    };
    let metrics = compare(&run.predicted, &prefix)?;
    let record = MetricsRecord {
        system: exp.system.name.clone(),
        model: label.to_string(),
        steps: grid.len() - 1,
        completed: run.completed(),
        failed_at: run.failed_at,
        out_of_domain_steps: run.out_of_domain.len(),
        first_out_of_domain: run.out_of_domain.first().copied(),
        linf: metrics.linf,
        rel_linf: metrics.rel_linf,
        terminal: metrics.terminal,
        linf_per_coord: metrics.linf_per_coord.clone(),
    };
    Ok(PredictOutcome {
        run,
        reference,
        metrics,
        record,
    })
}

pub fn write_prediction(dir: &Path, suffix: &str, out: &PredictOutcome) -> Result<()> {
    io::write_trajectory(&dir.join(format!("prediction{suffix}.csv")), &out.run.predicted)?;
    io::write_trajectory(&dir.join("reference.csv"), &out.reference)?;
    io::write_json(&dir.join(format!("metrics{suffix}.json")), &out.record)
}

fn truncated(out: &PredictOutcome) -> Result<()> {
    match out.run.failed_at {
        Some(n) => Err(CliError::Numeric(format!(
            "prediction became non-finite at grid index {n}"
        ))),
        None => Ok(()),
    }
}

pub fn predict(exp: &Experiment) -> Result<PredictOutcome> {
    let (model, system) = io::load_model(&exp.checkpoint)?;
    if system != exp.system.name {
        return Err(CliError::Config(format!(
            "checkpoint was trained for `{system}`, not `{}`",
            exp.system.name
        )));
    }
    let label = match &model {
        LoadedModel::Network(..) => "network".to_string(),
        LoadedModel::Polynomial(p) => format!("polynomial-p{}", p.degree),
    };
    let out = evaluate(exp, &model, &label)?;
    write_prediction(&exp.out, "", &out)?;
    truncated(&out)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum BoundsResult {
    Gronwall {
        l1: f64,
        l2: Vec<f64>,
        eta: Vec<f64>,
        l2_eta: f64,
        max_ratio: f64,
        satisfied: bool,
    },
    Rollout {
        l_phi: f64,
        l_phi_estimated: bool,
        max_ratio: f64,
        satisfied: bool,
    },
    Table {
        rows: usize,
    },
}

impl BoundsResult {
    pub fn satisfied(&self) -> bool {
        match self {
            BoundsResult::Gronwall { satisfied, .. } | BoundsResult::Rollout { satisfied, .. } => *satisfied,
            BoundsResult::Table { .. } => true,
        }
    }
}

fn max_ratio(measured: &[f64], bound: &[f64]) -> f64 {
    measured
        .iter()
        .zip(bound)
        .filter(|(_, b)| **b > 0.0)
        .map(|(m, b)| m / b)
        .fold(0.0, f64::max)
}

fn column_csv(path: &Path, names: &[&str], cols: &[&[f64]]) -> Result<()> {
    let header: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<f64>> = (0..cols[0].len()).map(|i| cols.iter().map(|c| c[i]).collect()).collect();
    io::write_csv(path, &header, rows.iter().map(Vec::as_slice))
}

pub fn run_bounds_check(exp: &Experiment, check: &BoundsCheck, csv: &Path) -> Result<BoundsResult> {
    match check {
        BoundsCheck::Gronwall {
            signal,
            basis,
            x0,
            extra,
            delta,
            t_end,
            micro_steps,
        } => {
            let signal = ExprSignal::parse(signal)?;
            let report = check_gronwall(&GronwallSetup {
                system: &exp.system,
                signal: &signal,
                basis: basis.to_spec()?,
                x0: x0.clone(),
                extra: extra.clone(),
                delta: *delta,
                t_end: *t_end,
                micro_steps: *micro_steps,
                noise_floor: BOUND_NOISE_FLOOR,
            })?;
            column_csv(csv, &["t", "measured", "bound"], &[&report.times, &report.measured, &report.bound])?;
            Ok(BoundsResult::Gronwall {
                max_ratio: max_ratio(&report.measured, &report.bound),
                l1: report.l1,
                l2: report.l2,
                eta: report.eta,
                l2_eta: report.l2_eta,
                satisfied: report.satisfied,
            })
        }
        BoundsCheck::Rollout {
            signal,
            basis,
            x0,
            extra,
            delta,
            steps,
            e,
            noise,
            l_phi,
            micro_steps,
        } => {
            let basis = basis.to_spec()?;
            let (l_phi, estimated) = match l_phi {
                Some(l) => (*l, false),
                None => {
                    if basis != exp.basis {
                        return Err(CliError::Config(
                            "estimating l_phi samples the experiment domains, so the check must use the experiment basis"
                                .into(),
                        ));
                    }
                    let oracle = ExactIncrement::new(exp.system.clone(), basis).with_micro_steps(*micro_steps);
                    let l = estimate_lipschitz(&oracle, &exp.domains, LIPSCHITZ_PAIRS, LIPSCHITZ_DISTANCE, exp.seed)?;
                    (l, true)
                }
            };
            let signal = ExprSignal::parse(signal)?;
            let report = check_rollout_bound(&RolloutSetup {
                system: &exp.system,
                signal: &signal,
                basis,
                x0: x0.clone(),
                extra: extra.clone(),
                delta: *delta,
                n_steps: *steps,
                e: *e,
                noise: match noise {
                    NoiseConfig::Uniform => NoiseMode::Uniform { seed: exp.seed },
                    NoiseConfig::Aligned => NoiseMode::Aligned,
                },
                l_phi,
                micro_steps: *micro_steps,
            })?;
            let n: Vec<f64> = report.steps.iter().map(|&n| n as f64).collect();
            column_csv(csv, &["n", "measured", "bound"], &[&n, &report.measured, &report.bound])?;
            Ok(BoundsResult::Rollout {
                l_phi,
                l_phi_estimated: estimated,
                max_ratio: max_ratio(&report.measured, &report.bound),
                satisfied: report.satisfied,
            })
        }
        BoundsCheck::Table {
            l1,
            l2,
            eta,
            l_phi,
            e,
            delta,
            steps,
        } => {
            let mut cols: [Vec<f64>; 6] = Default::default();
            for n in 0..=*steps {
                let b = BoundInputs {
                    l1: *l1,
                    l2: *l2,
                    eta: *eta,
                    l_phi: *l_phi,
                    e: *e,
                    delta: *delta,
                    n,
                    t: n as f64 * delta,
                };
                b.validate().map_err(|e| CliError::Config(e.to_string()))?;
                let row = [
                    n as f64,
                    b.t,
                    input_bound(b.l1, b.l2, b.eta, b.t),
                    rollout_bound(b.l_phi, b.e, n),
                    combined_bound(&b),
                    appendix_bound(b.l1, b.delta, n, b.e),
                ];
                for (c, v) in cols.iter_mut().zip(row) {
                    c.push(v);
                }
            }
            let refs: Vec<&[f64]> = cols.iter().map(Vec::as_slice).collect();
            column_csv(csv, &["n", "t", "input", "rollout", "combined", "appendix"], &refs)?;
            Ok(BoundsResult::Table {
                rows: *steps as usize + 1,
            })
        }
    }
}

/// Runs every configured check; fails with a numeric error when any
/// empirical check exceeds its bound.
pub fn bounds(exp: &Experiment) -> Result<Vec<BoundsResult>> {
    if exp.bounds.is_empty() {
        return Err(CliError::Config("no bounds checks configured".into()));
    }
    let mut results = Vec::new();
    for (i, check) in exp.bounds.iter().enumerate() {
        let mode = match check {
            BoundsCheck::Gronwall { .. } => "gronwall",
            BoundsCheck::Rollout { .. } => "rollout",
            BoundsCheck::Table { .. } => "table",
        };
        let csv = exp.out.join(format!("bounds_{i}_{mode}.csv"));
        let r = run_bounds_check(exp, check, &csv).map_err(|e| match e {
            CliError::Core(CoreError::Unsupported(s)) => {
                CliError::Config(format!("system `{s}` supplies no Lipschitz constants; use mode `table`"))
            }
            e => e,
        })?;
        results.push(r);
    }
    io::write_json(&exp.out.join("bounds.json"), &results)?;
    let failed: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.satisfied())
        .map(|(i, _)| i)
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Numeric(format!("bound violated by checks {failed:?}")));
    }
    Ok(results)
}
