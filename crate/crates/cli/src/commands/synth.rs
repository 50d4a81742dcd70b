use std::path::PathBuf;

use clap::Args;
use graspforge_core::dataset::{save_synth_dataset, synth_dataset};

use crate::manifest::{ensure_run_dir, now_rfc3339, write_manifest};
use crate::CliError;

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 64)]
    pub count: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Image size in pixels (multiple of 4).
    #[arg(long, default_value_t = 48)]
    pub size: usize,
    /// Maximum objects per scene.
    #[arg(long, default_value_t = 3)]
    pub objects: usize,
    #[arg(long, default_value = "runs/synth")]
    pub out: PathBuf,
}

pub fn run(args: &SynthArgs) -> Result<(), CliError> {
    if args.objects == 0 || args.objects > 5 {
        return Err(CliError::usage("--objects must be between 1 and 5"));
    }
    let started = now_rfc3339();
    ensure_run_dir(&args.out)?;
    let scenes = synth_dataset(args.seed, args.count, args.size, args.objects);
    save_synth_dataset(&args.out, &scenes)?;
    log::info!(
        "wrote {} scenes ({} grasp rectangles) to {}",
        scenes.len(),
        scenes
            .iter()
            .map(|s| s.sample.rectangles.len())
            .sum::<usize>(),
        args.out.display()
    );
    let config = serde_json::json!({
        "count": args.count,
        "seed": args.seed,
        "size": args.size,
        "objects": args.objects,
    });
    write_manifest(&args.out, "synth", config, &[args.seed], started)
}
