//! Command-line front end for the two-stage uncertainty propagation
//! pipeline: dataset synthesis, training, evaluation, and report emission.
//!
//! Exit codes: 0 success, 2 config error, 3 missing artifact, 4 numerical
//! failure, 1 anything else.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use uncprop_core::error::Error;

use commands::{Context, Overrides};

#[derive(Parser)]
#[command(
    name = "uncprop",
    about = "Propagate aleatoric uncertainty through a two-stage imaging pipeline",
    version
)]
struct Cli {
    /// Path to the run configuration document.
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,

    /// Override the evaluation master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the number of Monte Carlo samples during evaluation.
    #[arg(long, global = true)]
    mc_samples: Option<usize>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads (falls back to UNCPROP_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic dataset directory.
    Synth,
    /// Train the upstream heteroscedastic reconstructor.
    TrainUpstream,
    /// Train the downstream predictor through the frozen upstream.
    TrainDownstream,
    /// Run the evaluation sweep and emit sweep_report.csv / scatter.csv.
    Evaluate,
    /// Pretty-print an existing sweep report.
    Report,
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config(_)
        | Error::InvalidParam { .. }
        | Error::Mask(_)
        | Error::Shape { .. }
        | Error::Empty(_)
        | Error::Json(_) => 2,
        Error::MissingArtifact(_) => 3,
        Error::Diverged { .. } | Error::NonFinite(_) => 4,
        _ => 1,
    }
}

/// Held for the lifetime of a command; one process per output directory.
struct DirLock {
    path: PathBuf,
}

impl DirLock {
    fn acquire(dir: &PathBuf) -> Result<Self, Error> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match std::fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
        {
            Ok(_) => Ok(Self { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(
                format!(
                    "output directory {} is locked by another run (remove {} if stale)",
                    dir.display(),
                    path.display()
                ),
            )),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for DirLock {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn configure_threads(flag: Option<usize>) {
    let threads = flag.or_else(|| {
        std::env::var("UNCPROP_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    configure_threads(cli.threads);
    let ctx = Context::new(
        &cli.config,
        Overrides {
            seed: cli.seed,
            mc_samples: cli.mc_samples,
            out: cli.out,
        },
    )?;
    let _lock = DirLock::acquire(&ctx.out_dir)?;
    match cli.command {
        Command::Synth => commands::cmd_synth(&ctx),
        Command::TrainUpstream => commands::cmd_train_upstream(&ctx),
        Command::TrainDownstream => commands::cmd_train_downstream(&ctx),
        Command::Evaluate => commands::cmd_evaluate(&ctx),
        Command::Report => commands::cmd_report(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
