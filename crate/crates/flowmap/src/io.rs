//! On-disk formats: CSV tables, dataset sidecars, model checkpoints.
//!
//! Floats in CSV are written with 17 significant digits and JSON uses the
//! shortest round-trip representation, so every write/read cycle is
//! lossless.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use flowmap_core::dataset::{DatasetMeta, InputLayout, Interval, TrainingSample, TrainingSet};
use flowmap_core::dynamics::Trajectory;
use flowmap_core::flownet::{Activation, InputNorm, NetParams, ResidualNet};
use flowmap_core::input_param::BasisSpec;
use flowmap_core::poly_model::{total_degree_indices, PolyFitInfo, PolyModel};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{BasisConfig, DomainsConfig};
use crate::error::{CliError, Result};

pub const FORMAT_VERSION: u32 = 1;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|source| CliError::Write {
            path: dir.to_path_buf(),
            source,
        }),
        _ => Ok(()),
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    ensure_parent(path)?;
    fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    text.push('\n');
    write_text(path, &text)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| CliError::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Writes a numeric table with a header row.
pub fn write_csv<'a, I>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    ensure_parent(path)?;
    let err = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(err)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "{}", header.join(",")).map_err(err)?;
    let mut line = String::new();
    for row in rows {
        line.clear();
        for (i, v) in row.iter().enumerate() {
            if i > 0 {
                line.push(',');
            }
            line.push_str(&fmt_f64(*v));
        }
        writeln!(w, "{line}").map_err(err)?;
    }
    w.flush().map_err(err)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_csv(path: &Path) -> Result<Table> {
    let text = read_text(path)?;
    let bad = |reason: String| CliError::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or_else(|| bad("empty file".into()))?
        .split(',')
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("line {}: {e}", i + 2)))?;
        if row.len() != header.len() {
            return Err(bad(format!(
                "line {}: {} fields, header has {}",
                i + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn names(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (0..n).map(move |i| format!("{prefix}{i}"))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let header: Vec<String> = std::iter::once("t".to_string()).chain(names("x_", traj.dim())).collect();
    let rows: Vec<Vec<f64>> = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(t, x)| std::iter::once(*t).chain(x.iter().copied()).collect())
        .collect();
    write_csv(path, &header, rows.iter().map(Vec::as_slice))
}

pub fn read_trajectory(path: &Path) -> Result<Trajectory> {
    let table = read_csv(path)?;
    if table.header.first().map(String::as_str) != Some("t") {
        return Err(CliError::Format {
            path: path.to_path_buf(),
            reason: "first column must be `t`".into(),
        });
    }
    Ok(Trajectory {
        times: table.rows.iter().map(|r| r[0]).collect(),
        states: table.rows.iter().map(|r| r[1..].to_vec()).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutRecord {
    pub dim: usize,
    pub input_arity: usize,
    pub basis: BasisConfig,
    pub n_extra: usize,
    pub include_delta: bool,
}

impl LayoutRecord {
    pub fn from_layout(l: &InputLayout) -> Self {
        Self {
            dim: l.dim,
            input_arity: l.input_arity,
            basis: BasisConfig::from_spec(l.basis),
            n_extra: l.n_extra,
            include_delta: l.include_delta,
        }
    }

    pub fn to_layout(&self) -> Result<InputLayout> {
        let basis: BasisSpec = self.basis.to_spec()?;
        Ok(InputLayout {
            dim: self.dim,
            input_arity: self.input_arity,
            basis,
            n_extra: self.n_extra,
            include_delta: self.include_delta,
        })
    }
}

/// JSON metadata stored next to a dataset CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSidecar {
    pub format_version: u32,
    pub system: String,
    pub layout: LayoutRecord,
    pub domains: Option<DomainsConfig>,
    pub seed: Option<u64>,
    pub micro_steps: usize,
    pub dropped: usize,
    pub noise_std: f64,
    pub samples: usize,
}

pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn dataset_header(l: &InputLayout) -> Vec<String> {
    names("x_", l.dim)
        .chain(names("g_", l.n_gamma()))
        .chain(names("p_", l.n_extra))
        .chain(std::iter::once("delta".to_string()))
        .chain(names("y_", l.dim))
        .collect()
}

/// Writes the dataset CSV and its JSON sidecar (`<name>.json`).
pub fn write_dataset(path: &Path, set: &TrainingSet, noise_std: f64) -> Result<()> {
    let l = &set.layout;
    let rows: Vec<Vec<f64>> = set
        .samples
        .iter()
        .map(|s| {
            s.x_in
                .iter()
                .chain(&s.gamma)
                .chain(&s.extra)
                .chain(std::iter::once(&s.delta))
                .chain(&s.x_out)
                .copied()
                .collect()
        })
        .collect();
    write_csv(path, &dataset_header(l), rows.iter().map(Vec::as_slice))?;
    let sidecar = DatasetSidecar {
        format_version: FORMAT_VERSION,
        system: set.meta.system.clone(),
        layout: LayoutRecord::from_layout(l),
        domains: set.domains.as_ref().map(DomainsConfig::from_domains),
        seed: set.seed,
        micro_steps: set.meta.micro_steps,
        dropped: set.meta.dropped,
        noise_std,
        samples: set.len(),
    };
    write_json(&sidecar_path(path), &sidecar)
}

pub fn read_dataset(path: &Path) -> Result<(TrainingSet, DatasetSidecar)> {
    let side: DatasetSidecar = read_json(&sidecar_path(path))?;
    let layout = side.layout.to_layout()?;
    let table = read_csv(path)?;
    let bad = |reason: String| CliError::Format {
        path: path.to_path_buf(),
        reason,
    };
    if table.header != dataset_header(&layout) {
        return Err(bad("header does not match the sidecar layout".into()));
    }
    if table.rows.len() != side.samples {
        return Err(bad(format!(
            "{} rows, sidecar records {}",
            table.rows.len(),
            side.samples
        )));
    }
    let (d, ng, ne) = (layout.dim, layout.n_gamma(), layout.n_extra);
    let samples = table
        .rows
        .iter()
        .map(|r| {
            let (x, r) = r.split_at(d);
            let (g, r) = r.split_at(ng);
            let (p, r) = r.split_at(ne);
            TrainingSample {
                x_in: x.to_vec(),
                gamma: g.to_vec(),
                delta: r[0],
                extra: p.to_vec(),
                x_out: r[1..].to_vec(),
            }
        })
        .collect();
    let set = TrainingSet {
        samples,
        layout,
        domains: side.domains.as_ref().map(DomainsConfig::to_domains),
        seed: side.seed,
        meta: DatasetMeta {
            system: side.system.clone(),
            micro_steps: side.micro_steps,
            dropped: side.dropped,
        },
    };
    Ok((set, side))
}

/// Per-epoch losses; validation is NaN when no split was held out.
pub fn write_loss(path: &Path, first_epoch: usize, train: &[f64], val: &[f64]) -> Result<()> {
    let header = ["epoch", "train_mse", "val_mse"].map(String::from);
    let rows: Vec<[f64; 3]> = train
        .iter()
        .zip(val)
        .enumerate()
        .map(|(i, (t, v))| [(first_epoch + i) as f64, *t, *v])
        .collect();
    write_csv(path, &header, rows.iter().map(|r| r.as_slice()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitInfoRecord {
    pub n_samples: usize,
    pub n_features: usize,
    pub rank: usize,
    pub residual_mse: f64,
}

/// Training provenance kept with a network checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingRecord {
    pub epochs_completed: usize,
    pub seed: u64,
    pub dataset_samples: usize,
    /// `None` before any epoch or without a validation split.
    pub final_train_mse: Option<f64>,
    pub final_val_mse: Option<f64>,
}

/// A serialized one-step model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Checkpoint {
    Network {
        format_version: u32,
        system: String,
        layout: LayoutRecord,
        layer_sizes: Vec<usize>,
        activation: String,
        /// Flat augmented row-major layer matrices, bias last in each row.
        weights: Vec<f64>,
        norm_center: Vec<f64>,
        norm_half_width: Vec<f64>,
        training: TrainingRecord,
    },
    /// Index set is the total-degree set for (input width, degree) in
    /// lexicographic order and is rebuilt on load.
    Polynomial {
        format_version: u32,
        system: String,
        layout: LayoutRecord,
        degree: usize,
        method: String,
        domain_box: Vec<[f64; 2]>,
        coeffs: Vec<f64>,
        fit: Option<FitInfoRecord>,
    },
}

pub enum LoadedModel {
    Network(ResidualNet, TrainingRecord),
    Polynomial(PolyModel),
}

impl LoadedModel {
    pub fn layout(&self) -> InputLayout {
        match self {
            LoadedModel::Network(n, _) => n.layout,
            LoadedModel::Polynomial(p) => p.layout,
        }
    }
}

impl Checkpoint {
    pub fn system(&self) -> &str {
        match self {
            Checkpoint::Network { system, .. } | Checkpoint::Polynomial { system, .. } => system,
        }
    }

    pub fn from_network(net: &ResidualNet, system: &str, training: TrainingRecord) -> Self {
        Checkpoint::Network {
            format_version: FORMAT_VERSION,
            system: system.to_string(),
            layout: LayoutRecord::from_layout(&net.layout),
            layer_sizes: net.params.layer_sizes.clone(),
            activation: net.params.activation.name().to_string(),
            weights: net.params.weights.clone(),
            norm_center: net.norm.center.clone(),
            norm_half_width: net.norm.half_width.clone(),
            training,
        }
    }

    pub fn from_poly(model: &PolyModel, system: &str) -> Self {
        Checkpoint::Polynomial {
            format_version: FORMAT_VERSION,
            system: system.to_string(),
            layout: LayoutRecord::from_layout(&model.layout),
            degree: model.degree,
            method: "householder-qr-column-pivoting".into(),
            domain_box: model.domain_box.iter().map(|iv| [iv.lo, iv.hi]).collect(),
            coeffs: model.coeffs.clone(),
            fit: model.fit_info.as_ref().map(|f| FitInfoRecord {
                n_samples: f.n_samples,
                n_features: f.n_features,
                rank: f.rank,
                residual_mse: f.residual_mse,
            }),
        }
    }

    pub fn into_model(self, path: &Path) -> Result<LoadedModel> {
        let bad = |reason: String| CliError::Format {
            path: path.to_path_buf(),
            reason,
        };
        match self {
            Checkpoint::Network {
                format_version,
                layout,
                layer_sizes,
                activation,
                weights,
                norm_center,
                norm_half_width,
                training,
                ..
            } => {
                check_version(format_version, &bad)?;
                if activation != Activation::Tanh.name() {
                    return Err(bad(format!("unsupported activation `{activation}`")));
                }
                let params = NetParams {
                    layer_sizes,
                    weights,
                    activation: Activation::Tanh,
                };
                let norm = InputNorm {
                    center: norm_center,
                    half_width: norm_half_width,
                };
                let net = ResidualNet::new(params, norm, layout.to_layout()?).map_err(|e| bad(e.to_string()))?;
                Ok(LoadedModel::Network(net, training))
            }
            Checkpoint::Polynomial {
                format_version,
                layout,
                degree,
                domain_box,
                coeffs,
                fit,
                ..
            } => {
                check_version(format_version, &bad)?;
                let layout = layout.to_layout()?;
                let index_set = total_degree_indices(layout.width(), degree)?;
                if coeffs.len() != index_set.len() * layout.dim || domain_box.len() != layout.width() {
                    return Err(bad("coefficient or domain size does not match the layout".into()));
                }
                Ok(LoadedModel::Polynomial(PolyModel {
                    layout,
                    degree,
                    index_set,
                    coeffs,
                    domain_box: domain_box.iter().map(|p| Interval::new(p[0], p[1])).collect(),
                    fit_info: fit.map(|f| PolyFitInfo {
                        n_samples: f.n_samples,
                        n_features: f.n_features,
                        rank: f.rank,
                        residual_mse: f.residual_mse,
                    }),
                }))
            }
        }
    }
}

fn check_version(v: u32, bad: &impl Fn(String) -> CliError) -> Result<()> {
    if v != FORMAT_VERSION {
        return Err(bad(format!("unsupported format version {v}")));
    }
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(LoadedModel, String)> {
    let ck: Checkpoint = read_json(path)?;
    let system = ck.system().to_string();
    Ok((ck.into_model(path)?, system))
}

#[cfg(test)]
mod tests {
    use super::*;
    use flowmap_core::dataset::{build_training_set, SamplingDomains};
    use flowmap_core::dynamics::linear_scalar;
    use flowmap_core::input_param::BasisKind;
    use flowmap_core::poly_model::fit;
    use flowmap_core::trainer::network_for;

    fn small_set() -> TrainingSet {
        let domains = SamplingDomains {
            state: vec![Interval::new(-2.0, 2.0)],
            gamma: vec![Interval::new(-5.0, 5.0); 6],
            delta: Interval::new(0.05, 0.15),
            extra: vec![],
        };
        let basis = BasisSpec::new(BasisKind::LagrangeEquispaced, 2);
        build_training_set(&linear_scalar(), &domains, 50, 3, basis, 20).unwrap()
    }

    #[test]
    fn dataset_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d/dataset.csv");
        let set = small_set();
        write_dataset(&path, &set, 0.0).unwrap();
        let (back, side) = read_dataset(&path).unwrap();
        assert_eq!(back, set);
        assert_eq!(side.samples, 50);
        let header = read_text(&path).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header, "x_0,g_0,g_1,g_2,g_3,g_4,g_5,delta,y_0");
    }

    #[test]
    fn checkpoints_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let set = small_set();
        let net = network_for(&set, &[7, 5], 9).unwrap();
        let rec = TrainingRecord {
            epochs_completed: 0,
            seed: 9,
            dataset_samples: set.len(),
            final_train_mse: None,
            final_val_mse: Some(0.5),
        };
        let path = dir.path().join("net.json");
        write_json(&path, &Checkpoint::from_network(&net, "linear_scalar", rec)).unwrap();
        match load_model(&path).unwrap() {
            (LoadedModel::Network(back, r), sys) => {
                assert_eq!(back, net);
                assert_eq!(r.final_val_mse, Some(0.5));
                assert_eq!(sys, "linear_scalar");
            }
            _ => panic!("expected a network"),
        }

        let poly = fit(&set, 2).unwrap();
        let path = dir.path().join("poly.json");
        write_json(&path, &Checkpoint::from_poly(&poly, "linear_scalar")).unwrap();
        match load_model(&path).unwrap().0 {
            LoadedModel::Polynomial(back) => assert_eq!(back, poly),
            _ => panic!("expected a polynomial"),
        }
    }

    #[test]
    fn trajectory_round_trip_and_bad_csv() {
        let dir = tempfile::tempdir().unwrap();
        let traj = Trajectory {
            times: vec![0.0, 0.1, 0.2],
            states: vec![vec![1.0, 1.0 / 3.0], vec![2.0, -0.0], vec![3.0, 1e-300]],
        };
        let path = dir.path().join("traj.csv");
        write_trajectory(&path, &traj).unwrap();
        assert_eq!(read_trajectory(&path).unwrap(), traj);

        let bad = dir.path().join("bad.csv");
        write_text(&bad, "t,x_0\n0.0,1.0,2.0\n").unwrap();
        assert!(matches!(read_csv(&bad), Err(CliError::Format { .. })));
    }
}
