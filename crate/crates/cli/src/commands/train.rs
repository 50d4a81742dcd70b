use std::path::PathBuf;

use clap::Args;
use graspforge_core::dataset::Modality;
use graspforge_core::model::ModelConfig;
use graspforge_core::train::{self, evaluate_checkpoints, load_samples, TrainConfig};

use super::{parse_seeds, DatasetArgs, SplitArgs};
use crate::manifest::{ensure_run_dir, now_rfc3339, write_manifest};
use crate::CliError;

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Input modality: d, rgb or rgbd.
    #[arg(long, default_value = "rgbd")]
    pub modality: String,
    /// Comma-separated training seeds.
    #[arg(long, default_value = "1,2,3")]
    pub seed: String,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Network input resolution (multiple of 4).
    #[arg(long)]
    pub size: Option<usize>,
    #[arg(long)]
    pub base_width: Option<usize>,
    #[arg(long)]
    pub blocks: Option<usize>,
    #[arg(long)]
    pub dropout: Option<f64>,
    /// Gripper-opening normalization in pixels.
    #[arg(long)]
    pub w_max: Option<f64>,
    /// Enable rotation/zoom/crop augmentation.
    #[arg(long)]
    pub augment: bool,
    #[arg(long)]
    pub val_every: Option<usize>,
    /// JSON config file; flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value = "runs/train")]
    pub out: PathBuf,
}

/// Resolution order: built-in defaults, then the config file, then flags.
pub fn resolve_config(args: &TrainArgs) -> Result<TrainConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let body = std::fs::read_to_string(path)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
            serde_json::from_str::<TrainConfig>(&body)
                .map_err(|e| CliError::data(format!("{}: {e}", path.display())))?
        }
        None => TrainConfig::synthetic_desk(args.out.clone()),
    };
    cfg.out_dir = args.out.clone();
    cfg.dataset = args.dataset.to_spec()?;
    cfg.split = args.split.to_spec()?;
    cfg.modality = args
        .modality
        .parse::<Modality>()
        .map_err(CliError::usage)?;
    cfg.seeds = parse_seeds(&args.seed)?;
    if let Some(v) = args.epochs {
        cfg.epochs = v;
    }
    if let Some(v) = args.lr {
        cfg.learning_rate = v;
    }
    if let Some(v) = args.batch_size {
        cfg.batch_size = v;
    }
    if let Some(v) = args.val_every {
        cfg.val_every = v;
    }
    let model = ModelConfig {
        input_channels: cfg.modality.channels(),
        input_size: args.size.unwrap_or(cfg.model.input_size),
        base_width: args.base_width.unwrap_or(cfg.model.base_width),
        num_residual_blocks: args.blocks.unwrap_or(cfg.model.num_residual_blocks),
        dropout_rate: args.dropout.unwrap_or(cfg.model.dropout_rate),
    };
    cfg.model = model;
    if let Some(v) = args.w_max {
        cfg.w_max_px = v;
    } else if args.size.is_some()
        && matches!(cfg.dataset, graspforge_core::train::DatasetSpec::Synthetic { .. })
    {
        cfg.w_max_px = graspforge_core::dataset::synth_w_max_px(cfg.model.input_size);
    }
    if args.augment {
        cfg.augment = true;
    }
    cfg.model_config()
        .validate()
        .map_err(|e| CliError::usage(e.to_string()))?;
    Ok(cfg)
}

pub fn run(args: &TrainArgs) -> Result<(), CliError> {
    let cfg = resolve_config(args)?;
    run_with_config(&cfg)
}

pub fn run_with_config(cfg: &TrainConfig) -> Result<(), CliError> {
    let started = now_rfc3339();
    ensure_run_dir(&cfg.out_dir)?;
    if cfg.learning_rate == 0.0 {
        log::warn!("--lr 0: parameters will stay at their initialization");
    }
    let outcome = train::train(cfg)?;
    for seed in &outcome.per_seed {
        log::info!(
            "seed {}: best val accuracy {:.1}%, final loss {:.4}, checkpoint {}",
            seed.seed,
            100.0 * seed.best_val_accuracy,
            seed.final_loss,
            seed.checkpoint.display()
        );
    }
    // Merged report over all seed checkpoints on the shared validation split.
    let samples = load_samples(&cfg.dataset, cfg.model.input_size)?;
    let paths: Vec<PathBuf> = outcome
        .per_seed
        .iter()
        .map(|s| s.checkpoint.clone())
        .collect();
    let report =
        evaluate_checkpoints(&paths, &samples, &outcome.val_ids, cfg.modality, cfg.w_max_px)?;
    std::fs::write(
        cfg.out_dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    std::fs::write(
        cfg.out_dir.join("outcome.json"),
        serde_json::to_string_pretty(&outcome)?,
    )?;
    log::info!(
        "mean validation accuracy over {} seed(s): {:.1}%",
        report.per_seed.len(),
        100.0 * report.mean_accuracy
    );
    write_manifest(
        &cfg.out_dir,
        "train",
        serde_json::to_value(cfg)?,
        &cfg.seeds,
        started,
    )
}
