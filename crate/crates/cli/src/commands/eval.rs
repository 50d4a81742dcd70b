use std::path::PathBuf;

use clap::Args;
use graspforge_core::dataset::{make_splits, Modality};
use graspforge_core::train::{evaluate_checkpoints, load_samples, EvalReport};

use super::{DatasetArgs, SplitArgs};
use crate::manifest::{ensure_run_dir, now_rfc3339, write_manifest};
use crate::CliError;

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Checkpoint files, repeatable (one per seed).
    #[arg(long, required = true)]
    pub checkpoint: Vec<PathBuf>,
    #[command(flatten)]
    pub dataset: DatasetArgs,
    #[command(flatten)]
    pub split: SplitArgs,
    /// Input modality: d, rgb or rgbd.
    #[arg(long, default_value = "rgbd")]
    pub modality: String,
    /// Gripper-opening normalization in pixels. Defaults to half the
    /// checkpoint's input size for synthetic data, 150 otherwise.
    #[arg(long)]
    pub w_max: Option<f64>,
    #[arg(long, default_value = "runs/eval")]
    pub out: PathBuf,
}

fn print_table(report: &EvalReport, split_label: &str) {
    println!("Algorithm          Split  Seed  Accuracy (%)");
    for seed in &report.per_seed {
        println!(
            "graspforge-{:<7}{:<7}{:<6}{:.1}",
            report.modality, split_label, seed.seed, 100.0 * seed.accuracy
        );
    }
    println!(
        "graspforge-{:<7}{:<7}mean  {:.1}",
        report.modality,
        split_label,
        100.0 * report.mean_accuracy
    );
    println!("mean forward latency: {:.1} ms", report.mean_latency_ms);
}

pub fn run(args: &EvalArgs) -> Result<(), CliError> {
    let started = now_rfc3339();
    ensure_run_dir(&args.out)?;
    let modality: Modality = args.modality.parse().map_err(CliError::usage)?;
    // Input size comes from the first checkpoint's config.
    let (probe, _) = graspforge_core::model::load_checkpoint(&args.checkpoint[0])?;
    let input_size = probe.config().input_size;
    let spec = args.dataset.to_spec()?;
    let samples = load_samples(&spec, input_size)?;
    let split = args.split.to_spec()?;
    let (_, val_ids) = make_splits(&samples, &split)?;
    let w_max = args.w_max.unwrap_or(match &spec {
        graspforge_core::train::DatasetSpec::Synthetic { .. }
        | graspforge_core::train::DatasetSpec::SyntheticDir { .. } => {
            graspforge_core::dataset::synth_w_max_px(input_size)
        }
        _ => 150.0,
    });
    let report = evaluate_checkpoints(&args.checkpoint, &samples, &val_ids, modality, w_max)?;
    print_table(&report, &args.split.split);
    std::fs::write(
        args.out.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    let config = serde_json::json!({
        "checkpoints": args.checkpoint,
        "dataset": spec,
        "split": split,
        "modality": modality,
        "w_max": w_max,
    });
    write_manifest(&args.out, "eval", config, &[], started)
}
