//! Thin command-line front end over [`twinsense::pipeline`].
//!
//! Exit codes: 0 success, 2 usage/config error, 3 contract violation or
//! bad data, 4 numeric failure. `TWINSENSE_THREADS` caps internal
//! parallelism.

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use twinsense::pipeline::{
    init_thread_cap, run_allan, run_calibrate, run_inspect, run_score, run_sensitivity,
    run_simulate, run_train, AllanArgs, CalibrateArgs, ScoreArgs, SensitivityArgs, SignalKind,
    SimulateArgs, TrainArgs,
};
use twinsense::sim::ImpulseSchedule;
use twinsense::{Error, Result};

#[derive(Parser)]
#[command(
    name = "twinsense",
    version,
    about = "Synthetic TOF force sensing: GAN digital twin, anomaly scoring, and sensitivity metrology"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic TOF dataset from a TOML config
    Simulate {
        /// Simulation config (TOML); missing keys use defaults
        #[arg(long)]
        config: PathBuf,
        /// Output dataset path (.twds)
        #[arg(long)]
        out: PathBuf,
        /// Number of shots to render
        #[arg(long)]
        shots: usize,
        /// zero | const:<N*s> | cycle:<a,b,...>
        #[arg(long, default_value = "zero")]
        impulse_schedule: String,
        /// Overrides the config file's seed
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Train the digital twin (GAN) and its encoder on force-free data
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Models directory to create
        #[arg(long)]
        out: PathBuf,
        /// desk | full | micro
        #[arg(long, default_value = "desk")]
        profile: String,
        #[arg(long)]
        gan_seed: Option<u64>,
        #[arg(long)]
        encoder_seed: Option<u64>,
    },
    /// Score every shot of a dataset with the trained models
    Score {
        #[arg(long)]
        dataset: PathBuf,
        /// Models directory from `train`
        #[arg(long)]
        models: PathBuf,
        /// Mixing weight in [-1, 1]
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// Score table destination (CSV)
        #[arg(long)]
        out: PathBuf,
        /// Optional score histogram (SVG)
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Sweep lambda and report the sensitivity-optimal mixing weight
    Calibrate {
        /// Force-free dataset (sets sigma0)
        #[arg(long)]
        force_free: PathBuf,
        /// Multi-level forced dataset (sets the response slope)
        #[arg(long)]
        forced: PathBuf,
        #[arg(long)]
        models: PathBuf,
        /// Curve table destination (CSV)
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// One-sigma force sensitivity of a signal extractor
    Sensitivity {
        /// com | anomaly
        #[arg(long)]
        signal: String,
        #[arg(long)]
        force_free: PathBuf,
        #[arg(long)]
        forced: PathBuf,
        /// Required for --signal anomaly
        #[arg(long)]
        models: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0)]
        lambda: f64,
        /// Report destination (JSON)
        #[arg(long)]
        out: PathBuf,
    },
    /// Overlapping Allan deviation of a per-shot signal
    Allan {
        /// Score table from `score` (uses the A column)
        #[arg(long)]
        scores: Option<PathBuf>,
        /// Dataset (uses the COM momentum along x)
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Sample spacing in seconds; defaults to the cycle time
        #[arg(long)]
        t0: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Print an artifact's provenance, verifying its hashes
    Inspect { path: PathBuf },
}

/// CLI-boundary value errors are usage errors (exit 2), whatever the
/// library classifies them as.
fn usage(e: Error) -> Error {
    Error::Config(e.to_string())
}

fn run() -> Result<()> {
    init_thread_cap()?;
    match Cli::parse().command {
        Command::Simulate {
            config,
            out,
            shots,
            impulse_schedule,
            seed,
        } => {
            let schedule: ImpulseSchedule = impulse_schedule.parse().map_err(usage)?;
            let m = run_simulate(&SimulateArgs {
                config,
                out,
                shots,
                schedule,
                seed,
            })?;
            println!(
                "wrote dataset {} ({} shots, schedule {})",
                m.outputs["dataset"].path, m.parameters["shots"], m.parameters["impulse_schedule"]
            );
        }
        Command::Train {
            dataset,
            out,
            profile,
            gan_seed,
            encoder_seed,
        } => {
            let m = run_train(&TrainArgs {
                dataset,
                out_dir: out,
                profile,
                gan_seed,
                encoder_seed,
            })?;
            println!(
                "trained {} profile: generator {}, encoder {}",
                m.parameters["profile"],
                m.outputs["generator"].sha256,
                m.outputs["encoder"].sha256
            );
            if let Some(w) = m.parameters.get("training_warnings") {
                eprintln!("warning: {w}");
            }
        }
        Command::Score {
            dataset,
            models,
            lambda,
            out,
            svg,
        } => {
            let (series, m) = run_score(&ScoreArgs {
                dataset,
                models,
                lambda,
                out,
                svg,
            })?;
            println!(
                "scored {} shots at lambda {}: mean {:.6} std {:.6} skewness {:+.4} -> {}",
                series.rows.len(),
                series.lambda,
                series.mean,
                series.std,
                series.skewness,
                m.outputs["scores"].path
            );
        }
        Command::Calibrate {
            force_free,
            forced,
            models,
            out,
            svg,
        } => {
            let (cal, m) = run_calibrate(&CalibrateArgs {
                force_free,
                forced,
                models,
                out,
                svg,
                grid: None,
            })?;
            println!(
                "lambda_op {} with S {:.4e} N/sqrt(Hz) (fit r2 {:.4}) -> {}",
                cal.lambda_op, cal.estimate.s, cal.estimate.fit_r2, m.outputs["curve"].path
            );
        }
        Command::Sensitivity {
            signal,
            force_free,
            forced,
            models,
            lambda,
            out,
        } => {
            let signal: SignalKind = signal.parse()?;
            let (report, m) = run_sensitivity(&SensitivityArgs {
                signal,
                force_free,
                forced,
                models,
                lambda,
                out,
            })?;
            println!(
                "{} sensitivity {:.4e} N/sqrt(Hz) (sigma0 {:.4e}, slope {:.4e}/N, r2 {:.4}) -> {}",
                report.signal,
                report.estimate.s,
                report.estimate.sigma0,
                report.estimate.slope,
                report.estimate.fit_r2,
                m.outputs["report"].path
            );
        }
        Command::Allan {
            scores,
            dataset,
            t0,
            out,
            svg,
        } => {
            let (series, m) = run_allan(&AllanArgs {
                scores,
                dataset,
                t0,
                out,
                svg,
            })?;
            let slope = series
                .loglog_slope
                .map_or_else(|| "n/a".to_string(), |s| format!("{s:.3}"));
            println!(
                "allan deviation over {} cluster sizes, log-log slope {} -> {}",
                series.taus.len(),
                slope,
                m.outputs["table"].path
            );
        }
        Command::Inspect { path } => {
            print!("{}", run_inspect(&path)?);
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
