use std::path::PathBuf;

use clap::Args;
use graspforge_core::train::TrainConfig;

use crate::manifest::read_manifest;
use crate::CliError;

#[derive(Args, Debug)]
pub struct RerunArgs {
    /// Manifest of a previous run.
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory override; defaults to the manifest's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Replays a run from its recorded configuration. Outputs are
/// bit-identical to the original apart from manifest timestamps.
pub fn run(args: &RerunArgs) -> Result<(), CliError> {
    let manifest = read_manifest(&args.manifest)?;
    let default_dir = args
        .manifest
        .parent()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let out = args.out.clone().unwrap_or(default_dir);
    let cfg = manifest.config;
    match manifest.command.as_str() {
        "train" => {
            let mut train_cfg: TrainConfig = serde_json::from_value(cfg)
                .map_err(|e| CliError::data(format!("bad train config in manifest: {e}")))?;
            train_cfg.out_dir = out;
            super::train::run_with_config(&train_cfg)
        }
        "synth" => {
            let args = super::synth::SynthArgs {
                count: field_usize(&cfg, "count")?,
                seed: field_u64(&cfg, "seed")?,
                size: field_usize(&cfg, "size")?,
                objects: field_usize(&cfg, "objects")?,
                out,
            };
            super::synth::run(&args)
        }
        "simulate" => {
            let args = super::simulate::SimulateArgs {
                checkpoint: field_path(&cfg, "checkpoint")?,
                objects: field_usize(&cfg, "objects")?,
                trials: field_usize(&cfg, "trials")?,
                seed: field_u64(&cfg, "seed")?,
                max_attempts: field_usize(&cfg, "max_attempts")?,
                snapshots: cfg
                    .get("snapshots")
                    .and_then(|v| v.as_bool())
                    .unwrap_or(false),
                out,
            };
            super::simulate::run(&args)
        }
        "bench" => {
            let args = super::bench::BenchArgs {
                n: field_usize(&cfg, "n")?,
                checkpoint: cfg
                    .get("checkpoint")
                    .and_then(|v| v.as_str())
                    .map(PathBuf::from),
                size: field_usize(&cfg, "size")?,
                base_width: field_usize(&cfg, "base_width")?,
                channels: field_usize(&cfg, "channels")?,
                out,
            };
            super::bench::run(&args)
        }
        other => Err(CliError::usage(format!(
            "rerun does not support the {other:?} command (train, synth, simulate and bench are replayable)"
        ))),
    }
}

fn field_usize(v: &serde_json::Value, key: &str) -> Result<usize, CliError> {
    v.get(key)
        .and_then(|x| x.as_u64())
        .map(|x| x as usize)
        .ok_or_else(|| CliError::data(format!("manifest config lacks {key}")))
}

fn field_u64(v: &serde_json::Value, key: &str) -> Result<u64, CliError> {
    v.get(key)
        .and_then(|x| x.as_u64())
        .ok_or_else(|| CliError::data(format!("manifest config lacks {key}")))
}

fn field_path(v: &serde_json::Value, key: &str) -> Result<PathBuf, CliError> {
    v.get(key)
        .and_then(|x| x.as_str())
        .map(PathBuf::from)
        .ok_or_else(|| CliError::data(format!("manifest config lacks {key}")))
}
