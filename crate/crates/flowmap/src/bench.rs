//! End-to-end benchmark: data generation, training and rollout for one
//! configured example, with a summary table.

use std::fmt::Write as _;
use std::time::Instant;

use flowmap_core::poly_model;
use serde::Serialize;

use crate::commands::{evaluate, gen_data, train_on, write_prediction, MetricsRecord, TrainSummary};
use crate::config::{Experiment, ModelConfig};
use crate::error::{CliError, Result};
use crate::io::{self, Checkpoint};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub label: String,
    pub train: TrainSummary,
    pub metrics: MetricsRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchSummary {
    pub example: Option<String>,
    pub system: String,
    pub seed: u64,
    pub samples: usize,
    pub dropped: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchSummary {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<16} {:>8} {:>12} {:>12} {:>12} {:>12} {:>6}",
            "model", "samples", "train_mse", "linf", "rel_linf", "terminal", "ood"
        );
        for r in &self.rows {
            let mse = r.train.final_train_mse.map_or("-".to_string(), |v| format!("{v:.3e}"));
            let _ = writeln!(
                s,
                "{:<16} {:>8} {:>12} {:>12.3e} {:>12.3e} {:>12.3e} {:>6}",
                r.label,
                r.train.samples,
                mse,
                r.metrics.linf,
                r.metrics.rel_linf,
                r.metrics.terminal,
                r.metrics.out_of_domain_steps
            );
        }
        s
    }
}

pub fn bench(exp: &Experiment) -> Result<BenchSummary> {
    let clock = Instant::now();
    let set = gen_data(exp)?;
    eprintln!("generated {} samples in {:.1?}", set.len(), clock.elapsed());

    let mut rows = Vec::new();
    match &exp.model {
        ModelConfig::Network { .. } => {
            let clock = Instant::now();
            let train = train_on(exp, &set, &exp.checkpoint)?;
            eprintln!("trained in {:.1?}", clock.elapsed());
            let (model, _) = io::load_model(&exp.checkpoint)?;
            let out = evaluate(exp, &model, "network")?;
            write_prediction(&exp.out, "", &out)?;
            rows.push(BenchRow {
                label: "network".into(),
                train,
                metrics: out.record,
            });
        }
        ModelConfig::Polynomial { degree, sweep } => {
            let degrees = if sweep.is_empty() { vec![*degree] } else { sweep.clone() };
            let mut table = Vec::new();
            for p in degrees {
                let clock = Instant::now();
                let model = poly_model::fit(&set, p)?;
                eprintln!("fitted degree {p} in {:.1?}", clock.elapsed());
                let info = model.fit_info.clone().expect("fit records diagnostics");
                io::write_json(
                    &exp.out.join(format!("model_p{p}.json")),
                    &Checkpoint::from_poly(&model, &exp.system.name),
                )?;
                let label = format!("polynomial-p{p}");
                let out = evaluate(exp, &model, &label)?;
                write_prediction(&exp.out, &format!("_p{p}"), &out)?;
                table.push([
                    p as f64,
                    info.n_features as f64,
                    info.rank as f64,
                    info.residual_mse,
                    out.record.linf,
                    out.record.rel_linf,
                    out.record.terminal,
                ]);
                rows.push(BenchRow {
                    label,
                    train: TrainSummary {
                        model: "polynomial",
                        samples: set.len(),
                        epochs_completed: None,
                        final_train_mse: Some(info.residual_mse),
                        final_val_mse: None,
                        poly_rank: Some(info.rank),
                        poly_features: Some(info.n_features),
                    },
                    metrics: out.record,
                });
            }
            let header = ["degree", "features", "rank", "residual_mse", "linf", "rel_linf", "terminal"].map(String::from);
            io::write_csv(
                &exp.out.join("error_vs_degree.csv"),
                &header,
                table.iter().map(|r| r.as_slice()),
            )?;
        }
    }

    let summary = BenchSummary {
        example: exp.example.map(|e| e.name().to_string()),
        system: exp.system.name.clone(),
        seed: exp.seed,
        samples: set.len(),
        dropped: set.meta.dropped,
        rows,
    };
    io::write_json(&exp.out.join("summary.json"), &summary)?;
    io::write_text(&exp.out.join("summary.txt"), &summary.table())?;
    if let Some(r) = summary.rows.iter().find(|r| !r.metrics.completed) {
        return Err(CliError::Numeric(format!("{} prediction became non-finite", r.label)));
    }
    Ok(summary)
}
