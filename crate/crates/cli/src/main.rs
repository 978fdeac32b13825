use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use roofkit_core::config::Config;
use roofkit_core::pipeline::{run_eval, run_pipeline};
use roofkit_core::synth::{generate_scene, SceneSpec};

/// Roofline extraction and LoD2 reconstruction from orthophotos, footprints
/// and point clouds.
#[derive(Parser)]
#[command(name = "roofkit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reconstruct every footprint listed in the config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        workers: Option<usize>,
        /// Write per-stage debug artifacts here.
        #[arg(long)]
        debug_dir: Option<PathBuf>,
    },
    /// Compare candidate models with reference models.
    Eval {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write a synthetic scene with ground truth and a ready-to-run config.
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Scene description (JSON); defaults to four buildings, one per shape.
        #[arg(long)]
        spec: Option<PathBuf>,
        /// Lay out this many buildings on a grid instead.
        #[arg(long, conflicts_with = "spec")]
        buildings: Option<usize>,
        /// Gaussian z-noise on the point cloud, metres.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
}

const EXIT_NO_SUCCESS: u8 = 1;
const EXIT_SETUP: u8 = 2;

fn load_config(path: &PathBuf) -> Result<Config, ExitCode> {
    Config::load(path).map_err(|e| {
        error!("{e}");
        ExitCode::from(EXIT_SETUP)
    })
}

fn run(cli: Cli) -> Result<(), ExitCode> {
    match cli.command {
        Command::Run { config, workers, debug_dir } => {
            let mut cfg = load_config(&config)?;
            if let Some(d) = debug_dir {
                cfg.output.debug_dir = Some(d);
            }
            let summary = run_pipeline(&cfg, workers).map_err(|e| {
                error!("{e}");
                ExitCode::from(EXIT_SETUP)
            })?;
            println!(
                "{}/{} buildings reconstructed, {:.2} s, {:.2} buildings/s",
                summary.succeeded, summary.buildings, summary.wall_seconds, summary.buildings_per_second
            );
            if summary.succeeded == 0 {
                return Err(ExitCode::from(EXIT_NO_SUCCESS));
            }
        }
        Command::Eval { config } => {
            let cfg = load_config(&config)?;
            let s = run_eval(&cfg).map_err(|e| {
                error!("{e}");
                ExitCode::from(EXIT_SETUP)
            })?;
            println!(
                "{} buildings: faces {:.2}, mean {:.4} m, rmse {:.4} m",
                s.aggregate.buildings, s.aggregate.faces, s.aggregate.mean, s.aggregate.rmse
            );
            for id in &s.unmatched {
                println!("unmatched: {id}");
            }
            if s.reports.is_empty() && !s.failures.is_empty() {
                return Err(ExitCode::from(EXIT_NO_SUCCESS));
            }
        }
        Command::Synth { out, spec, buildings, noise } => {
            let scene = match (spec, buildings) {
                (Some(p), _) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| {
                        error!("cannot read {}: {e}", p.display());
                        ExitCode::from(EXIT_SETUP)
                    })?;
                    serde_json::from_str(&text).map_err(|e| {
                        error!("{}: {e}", p.display());
                        ExitCode::from(EXIT_SETUP)
                    })?
                }
                (None, Some(n)) => SceneSpec::grid(n, noise),
                (None, None) => SceneSpec::four_shapes(noise),
            };
            let files = generate_scene(&scene, &out).map_err(|e| {
                error!("{e}");
                ExitCode::from(EXIT_SETUP)
            })?;
            println!("scene written; run it with: roofkit run --config {}", files.config.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
