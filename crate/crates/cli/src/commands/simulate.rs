use std::path::PathBuf;

use clap::Args;
use graspforge_core::dataset::{render_scene, synth_scene, Modality};
use graspforge_core::model::load_checkpoint;
use graspforge_core::sim::{run_clutter_trial, TrialConfig};

use crate::manifest::{ensure_run_dir, now_rfc3339, write_manifest};
use crate::CliError;

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Objects per scene.
    #[arg(long, default_value_t = 3)]
    pub objects: usize,
    #[arg(long, default_value_t = 10)]
    pub trials: usize,
    /// Base seed; trial t uses seed + t.
    #[arg(long, default_value_t = 100)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub max_attempts: usize,
    /// Save a PNG snapshot of each trial's opening scene.
    #[arg(long)]
    pub snapshots: bool,
    #[arg(long, default_value = "runs/simulate")]
    pub out: PathBuf,
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let started = now_rfc3339();
    ensure_run_dir(&args.out)?;
    let (model, _) = load_checkpoint(&args.checkpoint)?;
    let modality = match model.config().input_channels {
        1 => Modality::D,
        3 => Modality::Rgb,
        _ => Modality::Rgbd,
    };
    let mut rates = Vec::new();
    let mut total_successes = 0usize;
    let mut total_attempts = 0usize;
    for t in 0..args.trials {
        let cfg = TrialConfig {
            modality,
            ..TrialConfig::new(args.seed + t as u64, args.objects, args.max_attempts)
        };
        if args.snapshots {
            let scene = synth_scene(cfg.seed, model.config().input_size, args.objects);
            let (rgb, _) = render_scene(&scene.objects, model.config().input_size);
            rgb.save(args.out.join(format!("trial_{t:03}_scene.png")))
                .map_err(|e| CliError::internal(e.to_string()))?;
        }
        let report = run_clutter_trial(&model, &cfg)?;
        log::info!(
            "trial {t}: {}/{} attempts succeeded, {} object(s) left",
            report.successes,
            report.attempts,
            report.objects_remaining
        );
        total_successes += report.successes;
        total_attempts += report.attempts;
        rates.push(report.success_rate);
        std::fs::write(
            args.out.join(format!("trial_{t:03}.json")),
            serde_json::to_string_pretty(&report)?,
        )?;
    }
    let summary = serde_json::json!({
        "trials": args.trials,
        "objects": args.objects,
        "grasp_success_rate": if total_attempts > 0 {
            total_successes as f64 / total_attempts as f64
        } else { 0.0 },
        "per_trial_rates": rates,
    });
    std::fs::write(
        args.out.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    println!(
        "grasp success rate: {:.1}% over {} attempts in {} trials",
        100.0 * total_successes as f64 / total_attempts.max(1) as f64,
        total_attempts,
        args.trials
    );
    let config = serde_json::json!({
        "checkpoint": args.checkpoint,
        "objects": args.objects,
        "trials": args.trials,
        "seed": args.seed,
        "max_attempts": args.max_attempts,
        "snapshots": args.snapshots,
    });
    write_manifest(&args.out, "simulate", config, &[args.seed], started)
}
