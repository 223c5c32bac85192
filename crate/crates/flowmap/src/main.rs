use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use flowmap::config::{resolve, ExperimentConfig, Overrides};
use flowmap::{bench, commands, CliError, Result};

#[derive(Parser)]
#[command(name = "flowmap", version, about = "Learn flow maps of input-driven dynamical systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the scenario and write its trajectory.
    Simulate(Common),
    /// Sample and integrate training pairs.
    GenData(Common),
    /// Train the configured model on the generated dataset.
    Train(Common),
    /// Roll a trained model out over the scenario and compare.
    Predict(Common),
    /// Compute error bounds and check them empirically.
    Bounds(Common),
    /// Run data generation, training and prediction end to end.
    Bench(Common),
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("FLOWMAP_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("FLOWMAP_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot start thread pool: {e}")))
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let (Command::Simulate(c)
    | Command::GenData(c)
    | Command::Train(c)
    | Command::Predict(c)
    | Command::Bounds(c)
    | Command::Bench(c)) = &cli.command;
    let cfg = ExperimentConfig::load(&c.config)?;
    let exp = resolve(
        cfg,
        &Overrides {
            out: c.out.clone(),
            seed: c.seed,
        },
    )?;
    match cli.command {
        Command::Simulate(_) => {
            let traj = commands::simulate(&exp)?;
            println!("wrote {} states to {}", traj.len(), exp.out.join("trajectory.csv").display());
        }
        Command::GenData(_) => {
            let set = commands::gen_data(&exp)?;
            println!(
                "wrote {} samples ({} dropped) to {}",
                set.len(),
                set.meta.dropped,
                exp.dataset_path().display()
            );
        }
        Command::Train(_) => {
            let s = commands::train(&exp)?;
            let mse = s.final_train_mse.map_or("n/a".to_string(), |v| format!("{v:.4e}"));
            println!("trained {} on {} samples, final mse {mse}", s.model, s.samples);
            println!("checkpoint: {}", exp.checkpoint.display());
        }
        Command::Predict(_) => {
            let out = commands::predict(&exp)?;
            let r = &out.record;
            println!(
                "{} steps: linf {:.4e}, rel_linf {:.4e}, terminal {:.4e}, out-of-domain steps {}",
                r.steps, r.linf, r.rel_linf, r.terminal, r.out_of_domain_steps
            );
        }
        Command::Bounds(_) => {
            let results = commands::bounds(&exp)?;
            for (i, r) in results.iter().enumerate() {
                println!("check {i}: {}", serde_json::to_string(r).unwrap_or_default());
            }
        }
        Command::Bench(_) => {
            let s = bench::bench(&exp)?;
            print!("{}", s.table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
