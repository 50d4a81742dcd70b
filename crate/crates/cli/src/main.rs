//! graspforge: train, evaluate and run the grasp-detection stack.

mod commands;
mod manifest;
mod viz;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

/// Exit codes: 0 success, 2 usage, 3 data or checkpoint problems,
/// 4 configuration mismatch, 5 internal errors.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: msg.into(),
        }
    }
    pub fn data(msg: impl Into<String>) -> Self {
        CliError {
            code: 3,
            message: msg.into(),
        }
    }
    pub fn config(msg: impl Into<String>) -> Self {
        CliError {
            code: 4,
            message: msg.into(),
        }
    }
    pub fn internal(msg: impl Into<String>) -> Self {
        CliError {
            code: 5,
            message: msg.into(),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<graspforge_core::train::TrainError> for CliError {
    fn from(e: graspforge_core::train::TrainError) -> Self {
        use graspforge_core::train::TrainError as TE;
        match &e {
            TE::ModalityMismatch { .. } => CliError::config(e.to_string()),
            TE::Dataset(_) | TE::DatasetEmpty | TE::EmptyValidation => {
                CliError::data(e.to_string())
            }
            TE::Model(m) => model_error(m, e.to_string()),
            _ => CliError::internal(e.to_string()),
        }
    }
}

fn model_error(m: &graspforge_core::model::ModelError, msg: String) -> CliError {
    use graspforge_core::model::ModelError as ME;
    match m {
        ME::CorruptCheckpoint(_) | ME::VersionMismatch { .. } | ME::Io(_) => CliError::data(msg),
        ME::ConfigMismatch(_) | ME::WrongChannelCount { .. } | ME::WrongSpatialSize { .. } => {
            CliError::config(msg)
        }
        _ => CliError::internal(msg),
    }
}

impl From<graspforge_core::model::ModelError> for CliError {
    fn from(e: graspforge_core::model::ModelError) -> Self {
        let msg = e.to_string();
        model_error(&e, msg)
    }
}

impl From<graspforge_core::dataset::DatasetError> for CliError {
    fn from(e: graspforge_core::dataset::DatasetError) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<graspforge_core::sim::SimError> for CliError {
    fn from(e: graspforge_core::sim::SimError) -> Self {
        CliError::internal(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::data(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "graspforge",
    about = "Antipodal grasp detection: training, evaluation, inference and simulation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train models (one per seed) and keep the best-by-validation checkpoints.
    Train(commands::train::TrainArgs),
    /// Evaluate checkpoints with the rectangle metric over a validation split.
    Eval(commands::eval::EvalArgs),
    /// Run single-image inference: grasp list, overlay and heatmaps.
    Infer(commands::infer::InferArgs),
    /// Generate a synthetic scene dataset with analytic ground truth.
    Synth(commands::synth::SynthArgs),
    /// Run simulated pick-and-place clutter trials with a trained model.
    Simulate(commands::simulate::SimulateArgs),
    /// Measure forward-pass latency statistics.
    Bench(commands::bench::BenchArgs),
    /// Re-run a previous command from its manifest.
    Rerun(commands::rerun::RerunArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    graspforge_core::init_threads(None);
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => commands::train::run(&args),
        Command::Eval(args) => commands::eval::run(&args),
        Command::Infer(args) => commands::infer::run(&args),
        Command::Synth(args) => commands::synth::run(&args),
        Command::Simulate(args) => commands::simulate::run(&args),
        Command::Bench(args) => commands::bench::run(&args),
        Command::Rerun(args) => commands::rerun::run(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
