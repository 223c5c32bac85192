//! JSON experiment configuration and its resolution against example
//! defaults.
//!
//! Every section is optional. Missing sections are filled from the example
//! named by `example`, or from the example matching the `system` preset.
//! Unknown keys are rejected.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flowmap_core::dataset::{Interval, SamplingDomains, DEFAULT_MICRO_STEPS};
use flowmap_core::dynamics::{Preset, SystemSpec};
use flowmap_core::input_param::{BasisKind, BasisSpec};
use flowmap_core::trainer::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::expr::custom_system;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExampleId {
    #[serde(rename = "ex1")]
    Ex1,
    #[serde(rename = "ex1_poly")]
    Ex1Poly,
    #[serde(rename = "ex2")]
    Ex2,
    #[serde(rename = "ex3")]
    Ex3,
    #[serde(rename = "ex4")]
    Ex4,
}

impl ExampleId {
    pub const ALL: [ExampleId; 5] = [Self::Ex1, Self::Ex1Poly, Self::Ex2, Self::Ex3, Self::Ex4];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ex1 => "ex1",
            Self::Ex1Poly => "ex1_poly",
            Self::Ex2 => "ex2",
            Self::Ex3 => "ex3",
            Self::Ex4 => "ex4",
        }
    }

    pub fn preset(self) -> Preset {
        match self {
            Self::Ex1 | Self::Ex1Poly => Preset::LinearScalar,
            Self::Ex2 => Preset::PredatorPrey,
            Self::Ex3 => Preset::ForcedOscillator,
            Self::Ex4 => Preset::Heat22,
        }
    }

    fn for_preset(p: Preset) -> Self {
        match p {
            Preset::LinearScalar => Self::Ex1,
            Preset::PredatorPrey => Self::Ex2,
            Preset::ForcedOscillator => Self::Ex3,
            Preset::Heat22 => Self::Ex4,
        }
    }
}

impl fmt::Display for ExampleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExampleId {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|e| e.name()).collect();
            CliError::Config(format!("unknown example `{s}`; valid examples: {}", names.join(", ")))
        })
    }
}

/// A preset name or a custom system given by right-hand-side expressions
/// in `x0.., g0.., p0..`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemConfig {
    Preset(String),
    Custom(CustomSystem),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomSystem {
    pub name: String,
    pub dim: usize,
    #[serde(default)]
    pub inputs: usize,
    #[serde(default)]
    pub extra: usize,
    pub rhs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BasisConfig {
    pub kind: String,
    pub degree: usize,
}

impl BasisConfig {
    pub fn from_spec(b: BasisSpec) -> Self {
        Self {
            kind: b.kind.name().to_string(),
            degree: b.degree,
        }
    }

    pub fn to_spec(&self) -> Result<BasisSpec> {
        let kind = BasisKind::from_name(&self.kind).ok_or_else(|| {
            CliError::Config(format!(
                "unknown basis `{}`; valid bases: taylor, lagrange, legendre",
                self.kind
            ))
        })?;
        Ok(BasisSpec::new(kind, self.degree))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainsConfig {
    pub state: Vec<[f64; 2]>,
    pub gamma: Vec<[f64; 2]>,
    pub delta: [f64; 2],
    #[serde(default)]
    pub extra: Vec<[f64; 2]>,
}

impl DomainsConfig {
    pub fn from_domains(d: &SamplingDomains) -> Self {
        let pair = |iv: &Interval| [iv.lo, iv.hi];
        Self {
            state: d.state.iter().map(pair).collect(),
            gamma: d.gamma.iter().map(pair).collect(),
            delta: pair(&d.delta),
            extra: d.extra.iter().map(pair).collect(),
        }
    }

    pub fn to_domains(&self) -> SamplingDomains {
        let iv = |p: &[f64; 2]| Interval::new(p[0], p[1]);
        SamplingDomains {
            state: self.state.iter().map(iv).collect(),
            gamma: self.gamma.iter().map(iv).collect(),
            delta: iv(&self.delta),
            extra: self.extra.iter().map(iv).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetConfig {
    /// Number of sampled one-step pairs J.
    pub size: usize,
    pub micro_steps: usize,
    pub noise_std: f64,
    /// Drops δ from the model input (requires a degenerate δ interval).
    pub fixed_delta: bool,
    /// Dataset CSV; defaults to `<out>/dataset.csv`.
    pub path: Option<PathBuf>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            size: 20_000,
            micro_steps: DEFAULT_MICRO_STEPS,
            noise_std: 0.0,
            fixed_delta: false,
            path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelConfig {
    Network {
        #[serde(default = "default_hidden")]
        hidden: Vec<usize>,
    },
    Polynomial {
        degree: usize,
        /// Degrees swept by `bench`; defaults to `[degree]`.
        #[serde(default)]
        sweep: Vec<usize>,
    },
}

fn default_hidden() -> Vec<usize> {
    vec![80, 80, 80]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub validation_fraction: f64,
    /// Continue from the existing checkpoint instead of a fresh network.
    pub resume: bool,
    /// Print progress every this many epochs (0 = silent).
    pub log_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let c = TrainConfig::default();
        Self {
            epochs: c.epochs,
            batch_size: c.batch_size,
            learning_rate: c.learning_rate,
            adam_betas: c.adam_betas,
            adam_eps: c.adam_eps,
            validation_fraction: c.validation_fraction,
            resume: false,
            log_every: 25,
        }
    }
}

impl TrainSection {
    pub fn to_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            adam_betas: self.adam_betas,
            adam_eps: self.adam_eps,
            seed,
            validation_fraction: self.validation_fraction,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub x0: Option<Vec<f64>>,
    /// One expression in `t` per input channel.
    pub signal: Option<Vec<String>>,
    pub extra: Option<Vec<f64>>,
    pub t0: Option<f64>,
    pub t_end: Option<f64>,
    pub delta: Option<f64>,
    /// RK4 steps per grid interval for reference solutions.
    pub reference_substeps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub x0: Vec<f64>,
    pub signal: Vec<String>,
    pub extra: Vec<f64>,
    pub t0: f64,
    pub t_end: f64,
    pub delta: f64,
    pub reference_substeps: usize,
}

impl ScenarioConfig {
    fn merge(self, base: Option<Scenario>) -> Result<Scenario> {
        let missing = |k: &str| CliError::Config(format!("scenario.{k} is required for this system"));
        let b = base.as_ref();
        Ok(Scenario {
            x0: self.x0.or_else(|| b.map(|b| b.x0.clone())).ok_or_else(|| missing("x0"))?,
            signal: self
                .signal
                .or_else(|| b.map(|b| b.signal.clone()))
                .ok_or_else(|| missing("signal"))?,
            extra: self.extra.or_else(|| b.map(|b| b.extra.clone())).unwrap_or_default(),
            t0: self.t0.or_else(|| b.map(|b| b.t0)).unwrap_or(0.0),
            t_end: self.t_end.or_else(|| b.map(|b| b.t_end)).ok_or_else(|| missing("t_end"))?,
            delta: self.delta.or_else(|| b.map(|b| b.delta)).unwrap_or(0.1),
            reference_substeps: self
                .reference_substeps
                .or_else(|| b.map(|b| b.reference_substeps))
                .unwrap_or(100),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseConfig {
    Uniform,
    Aligned,
}

/// One bound computation or empirical check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum BoundsCheck {
    /// Input-perturbation bound: system under γ versus γ̃.
    Gronwall {
        signal: Vec<String>,
        basis: BasisConfig,
        x0: Vec<f64>,
        #[serde(default)]
        extra: Vec<f64>,
        delta: f64,
        t_end: f64,
        #[serde(default = "default_check_micro")]
        micro_steps: usize,
    },
    /// Rollout bound with injected per-step noise on the exact one-step map.
    Rollout {
        signal: Vec<String>,
        basis: BasisConfig,
        x0: Vec<f64>,
        #[serde(default)]
        extra: Vec<f64>,
        delta: f64,
        steps: usize,
        e: f64,
        noise: NoiseConfig,
        /// Lipschitz constant of the one-step map; estimated by sampling
        /// the configured domains when absent.
        #[serde(default)]
        l_phi: Option<f64>,
        #[serde(default = "default_check_micro")]
        micro_steps: usize,
    },
    /// Pure calculator over n = 0..=steps with t = n·Δ.
    Table {
        l1: f64,
        l2: f64,
        eta: f64,
        l_phi: f64,
        e: f64,
        delta: f64,
        steps: u64,
    },
}

fn default_check_micro() -> usize {
    40
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub example: Option<ExampleId>,
    pub system: Option<SystemConfig>,
    pub basis: Option<BasisConfig>,
    pub domains: Option<DomainsConfig>,
    pub dataset: Option<DatasetConfig>,
    pub model: Option<ModelConfig>,
    pub train: Option<TrainSection>,
    pub scenario: Option<ScenarioConfig>,
    pub bounds: Option<Vec<BoundsCheck>>,
    /// Model checkpoint; defaults to `<out>/model.json`.
    pub checkpoint: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

/// Fully resolved experiment.
#[derive(Clone)]
pub struct Experiment {
    pub example: Option<ExampleId>,
    pub system_config: SystemConfig,
    pub system: SystemSpec,
    pub basis: BasisSpec,
    pub domains: SamplingDomains,
    pub dataset: DatasetConfig,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub scenario: Scenario,
    pub bounds: Vec<BoundsCheck>,
    pub seed: u64,
    pub out: PathBuf,
    pub checkpoint: PathBuf,
}

impl fmt::Debug for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Experiment")
            .field("example", &self.example)
            .field("system", &self.system.name)
            .field("basis", &self.basis)
            .field("seed", &self.seed)
            .field("out", &self.out)
            .finish_non_exhaustive()
    }
}

impl Experiment {
    pub fn dataset_path(&self) -> PathBuf {
        self.dataset.path.clone().unwrap_or_else(|| self.out.join("dataset.csv"))
    }

    /// Seed for network initialization, distinct from the data seed.
    pub fn init_seed(&self) -> u64 {
        self.seed.wrapping_add(1)
    }
}

/// Nodal values of `sin(πx)` on the interior points of an `n`-point grid.
pub fn heat_initial_state(n_grid: usize) -> Vec<f64> {
    (1..n_grid - 1)
        .map(|j| (std::f64::consts::PI * j as f64 / (n_grid - 1) as f64).sin())
        .collect()
}

fn iv(lo: f64, hi: f64) -> [f64; 2] {
    [lo, hi]
}

fn example_domains(ex: ExampleId) -> DomainsConfig {
    let delta = iv(0.05, 0.15);
    match ex {
        ExampleId::Ex1 | ExampleId::Ex1Poly => DomainsConfig {
            state: vec![iv(-2.0, 2.0)],
            gamma: vec![iv(-5.0, 5.0); 6],
            delta,
            extra: vec![],
        },
        ExampleId::Ex2 => DomainsConfig {
            state: vec![iv(0.0, 5.0); 2],
            gamma: vec![iv(0.0, 5.0); 3],
            delta,
            extra: vec![],
        },
        ExampleId::Ex3 => DomainsConfig {
            state: vec![iv(-3.0, 3.0); 2],
            gamma: vec![iv(-3.0, 3.0); 6],
            delta,
            extra: vec![],
        },
        ExampleId::Ex4 => DomainsConfig {
            state: vec![iv(0.0, 2.0); 20],
            gamma: vec![iv(-2.0, 2.0); 3],
            delta,
            extra: vec![iv(0.0, 3.0), iv(0.05, 0.5)],
        },
    }
}

/// Initial states for the predator–prey and oscillator scenarios; the
/// resulting trajectories stay inside the training state boxes.
pub const EX2_X0: [f64; 2] = [1.0, 2.0];
pub const EX3_X0: [f64; 2] = [1.0, 0.0];

fn example_scenario(ex: ExampleId) -> Scenario {
    let s = |x0: Vec<f64>, signal: &[&str], extra: Vec<f64>, t_end: f64| Scenario {
        x0,
        signal: signal.iter().map(|s| s.to_string()).collect(),
        extra,
        t0: 0.0,
        t_end,
        delta: 0.1,
        reference_substeps: 100,
    };
    match ex {
        ExampleId::Ex1 => s(vec![2.0], &["sin(4*t)+1", "cos(t^2/1000)"], vec![], 100.0),
        ExampleId::Ex1Poly => s(vec![2.0], &["sin(t/10)+1", "cos(t)"], vec![], 100.0),
        ExampleId::Ex2 => s(EX2_X0.to_vec(), &["sin(t/3)+cos(t)+2"], vec![], 100.0),
        ExampleId::Ex3 => s(EX3_X0.to_vec(), &["cos(t)", "t/50"], vec![], 100.0),
        ExampleId::Ex4 => s(heat_initial_state(22), &["t-floor(t)"], vec![1.0, 0.5], 2.0),
    }
}

fn example_model(ex: ExampleId) -> ModelConfig {
    match ex {
        ExampleId::Ex1Poly => ModelConfig::Polynomial {
            degree: 2,
            sweep: vec![1, 2, 3, 4, 5],
        },
        _ => ModelConfig::Network { hidden: default_hidden() },
    }
}

fn default_bounds(system: &SystemConfig) -> Vec<BoundsCheck> {
    if *system != SystemConfig::Preset(Preset::LinearScalar.name().into()) {
        return Vec::new();
    }
    let signal = vec!["1".to_string(), "cos(t)".to_string()];
    vec![
        BoundsCheck::Gronwall {
            signal: signal.clone(),
            basis: BasisConfig {
                kind: "taylor".into(),
                degree: 1,
            },
            x0: vec![2.0],
            extra: vec![],
            delta: 0.1,
            t_end: 5.0,
            micro_steps: default_check_micro(),
        },
        BoundsCheck::Rollout {
            signal,
            basis: BasisConfig {
                kind: "lagrange".into(),
                degree: 2,
            },
            x0: vec![2.0],
            extra: vec![],
            delta: 0.1,
            steps: 100,
            e: 1e-3,
            noise: NoiseConfig::Uniform,
            l_phi: Some((-0.1f64).exp()),
            micro_steps: default_check_micro(),
        },
    ]
}

pub fn build_system(cfg: &SystemConfig) -> Result<SystemSpec> {
    match cfg {
        SystemConfig::Preset(name) => {
            let p = Preset::from_name(name).ok_or_else(|| unknown_preset(name))?;
            Ok(p.system())
        }
        SystemConfig::Custom(c) => custom_system(&c.name, c.dim, c.inputs, c.extra, &c.rhs),
    }
}

fn unknown_preset(name: &str) -> CliError {
    let names: Vec<_> = Preset::ALL.iter().map(|p| p.name()).collect();
    CliError::Config(format!("unknown preset `{name}`; valid presets: {}", names.join(", ")))
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

pub fn resolve(cfg: ExperimentConfig, ov: &Overrides) -> Result<Experiment> {
    let system_config = match (&cfg.system, cfg.example) {
        (Some(s), _) => s.clone(),
        (None, Some(ex)) => SystemConfig::Preset(ex.preset().name().into()),
        (None, None) => return Err(CliError::Config("either `system` or `example` must be given".into())),
    };
    let system = build_system(&system_config)?;
    let example = cfg.example.or_else(|| match &system_config {
        SystemConfig::Preset(n) => Preset::from_name(n).map(ExampleId::for_preset),
        SystemConfig::Custom(_) => None,
    });
    if let (Some(ex), SystemConfig::Preset(n)) = (example, &system_config) {
        if ex.preset().name() != n {
            return Err(CliError::Config(format!(
                "example `{ex}` uses system `{}`, not `{n}`",
                ex.preset().name()
            )));
        }
    }

    let basis = match cfg.basis {
        Some(b) => b.to_spec()?,
        None => BasisSpec::new(BasisKind::LagrangeEquispaced, 2),
    };
    let domains = match (cfg.domains, example) {
        (Some(d), _) => d.to_domains(),
        (None, Some(ex)) if basis.n_b() == 3 => example_domains(ex).to_domains(),
        _ => {
            return Err(CliError::Config(
                "`domains` is required for custom systems and non-quadratic bases".into(),
            ))
        }
    };
    domains.validate()?;
    if domains.state.len() != system.dim
        || domains.gamma.len() != system.input_arity * basis.n_b()
        || domains.extra.len() != system.n_extra
    {
        return Err(CliError::Config(format!(
            "domains need {} state, {} gamma and {} extra intervals for this system and basis",
            system.dim,
            system.input_arity * basis.n_b(),
            system.n_extra
        )));
    }

    let scenario = cfg
        .scenario
        .unwrap_or_default()
        .merge(example.map(example_scenario))?;
    if scenario.x0.len() != system.dim
        || scenario.signal.len() != system.input_arity
        || scenario.extra.len() != system.n_extra
    {
        return Err(CliError::Config(format!(
            "scenario needs x0 of length {}, {} signal expressions and {} extra values",
            system.dim, system.input_arity, system.n_extra
        )));
    }
    if !(scenario.delta > 0.0) || !(scenario.t_end > scenario.t0) || scenario.reference_substeps == 0 {
        return Err(CliError::Config(
            "scenario needs delta > 0, t_end > t0 and reference_substeps >= 1".into(),
        ));
    }

    let model = cfg
        .model
        .unwrap_or_else(|| example.map_or_else(|| ModelConfig::Network { hidden: default_hidden() }, example_model));
    let train = cfg.train.unwrap_or_default();
    train
        .to_config(0)
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let dataset = cfg.dataset.unwrap_or_default();
    if dataset.size == 0 || dataset.micro_steps == 0 || !(dataset.noise_std >= 0.0) {
        return Err(CliError::Config(
            "dataset needs size >= 1, micro_steps >= 1 and noise_std >= 0".into(),
        ));
    }
    let bounds = cfg.bounds.unwrap_or_else(|| default_bounds(&system_config));
    let out = ov.out.clone().or(cfg.out).unwrap_or_else(|| PathBuf::from("flowmap-out"));
    let checkpoint = cfg.checkpoint.unwrap_or_else(|| out.join("model.json"));
    Ok(Experiment {
        example,
        system_config,
        system,
        basis,
        domains,
        dataset,
        model,
        train,
        scenario,
        bounds,
        seed: ov.seed.or(cfg.seed).unwrap_or(0),
        out,
        checkpoint,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn res(json: &str) -> Result<Experiment> {
        resolve(ExperimentConfig::from_json(json)?, &Overrides::default())
    }

    #[test]
    fn example_defaults() {
        let e = res(r#"{"example": "ex1"}"#).unwrap();
        assert_eq!(e.system.name, "linear_scalar");
        assert_eq!(e.dataset.size, 20_000);
        assert_eq!(e.domains.gamma.len(), 6);
        assert_eq!(e.domains.gamma[0], Interval::new(-5.0, 5.0));
        assert_eq!(e.domains.delta, Interval::new(0.05, 0.15));
        assert_eq!(e.scenario.x0, vec![2.0]);
        assert_eq!(e.model, ModelConfig::Network { hidden: vec![80, 80, 80] });
        assert_eq!(e.bounds.len(), 2);

        let e = res(r#"{"system": "heat22"}"#).unwrap();
        assert_eq!(e.example, Some(ExampleId::Ex4));
        assert_eq!(e.scenario.x0.len(), 20);
        assert_eq!(e.domains.extra.len(), 2);
        assert!(e.bounds.is_empty());
    }

    #[test]
    fn overrides_and_partial_sections() {
        let cfg = ExperimentConfig::from_json(
            r#"{"example": "ex2", "seed": 4, "out": "a", "scenario": {"t_end": 1.0}, "train": {"epochs": 3}}"#,
        )
        .unwrap();
        let e = resolve(
            cfg,
            &Overrides {
                out: Some("b".into()),
                seed: None,
            },
        )
        .unwrap();
        assert_eq!(e.out, PathBuf::from("b"));
        assert_eq!(e.checkpoint, PathBuf::from("b/model.json"));
        assert_eq!(e.seed, 4);
        assert_eq!(e.scenario.t_end, 1.0);
        assert_eq!(e.scenario.signal, vec!["sin(t/3)+cos(t)+2".to_string()]);
        assert_eq!(e.train.epochs, 3);
        assert_eq!(e.train.batch_size, 256);
    }

    #[test]
    fn rejects_bad_configs() {
        let msg = |j: &str| res(j).unwrap_err().to_string();
        assert!(msg(r#"{"system": "pendulum"}"#).contains("linear_scalar, predator_prey"));
        assert!(msg(r#"{"example": "ex1", "bogus": 1}"#).contains("unknown field"));
        assert!(msg(r#"{"example": "ex9"}"#).contains("unknown variant"));
        assert!(res(r#"{"example": "ex1", "train": {"epochs": 1, "lr": 2}}"#).is_err());
        assert!(res(r#"{"example": "ex1", "basis": {"kind": "spline", "degree": 2}}"#).is_err());
        assert!(res(r#"{"example": "ex1", "basis": {"kind": "taylor", "degree": 3}}"#).is_err());
        assert!(res(r#"{"example": "ex1", "system": "predator_prey"}"#).is_err());
        assert!(res(r#"{"example": "ex1", "scenario": {"x0": [1, 2]}}"#).is_err());
        assert!(res(r#"{}"#).is_err());
        assert!(res(r#"{"example": "ex1", "train": {"learning_rate": -1}}"#).is_err());
        assert_eq!(res(r#"{"system": "nope"}"#).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn custom_system_requires_domains_and_scenario() {
        let base = r#""system": {"name": "decay", "dim": 1, "inputs": 1, "rhs": ["-x0 + g0"]}"#;
        assert!(res(&format!("{{{base}}}")).is_err());
        let full = format!(
            r#"{{{base}, "domains": {{"state": [[-1, 1]], "gamma": [[0, 1], [0, 1], [0, 1]], "delta": [0.1, 0.1]}},
                "scenario": {{"x0": [0.5], "signal": ["sin(t)"], "t_end": 2}}}}"#
        );
        let e = res(&full).unwrap();
        assert_eq!(e.system.name, "decay");
        assert_eq!(e.scenario.delta, 0.1);
        assert!(e.bounds.is_empty());
    }

    #[test]
    fn heat_initial_state_is_sine() {
        let u = heat_initial_state(22);
        assert_eq!(u.len(), 20);
        assert!((u[0] - (std::f64::consts::PI / 21.0).sin()).abs() < 1e-15);
    }
}
