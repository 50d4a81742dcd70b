use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use graspforge_core::model::{load_checkpoint, Model, ModelConfig};
use graspforge_core::Tensor32;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::manifest::{ensure_run_dir, now_rfc3339, write_manifest};
use crate::CliError;

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Number of timed forward passes.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Time a trained checkpoint instead of a fresh default model.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Input resolution for the fresh model.
    #[arg(long, default_value_t = 224)]
    pub size: usize,
    #[arg(long, default_value_t = 32)]
    pub base_width: usize,
    /// Input channels for the fresh model (1, 3 or 4).
    #[arg(long, default_value_t = 4)]
    pub channels: usize,
    #[arg(long, default_value = "runs/bench")]
    pub out: PathBuf,
}

pub fn run(args: &BenchArgs) -> Result<(), CliError> {
    if args.n == 0 {
        return Err(CliError::usage("--n must be positive"));
    }
    let started = now_rfc3339();
    ensure_run_dir(&args.out)?;
    let model = match &args.checkpoint {
        Some(path) => load_checkpoint(path)?.0,
        None => Model::<f32>::build(
            &ModelConfig {
                input_channels: args.channels,
                base_width: args.base_width,
                input_size: args.size,
                ..ModelConfig::default()
            },
            0,
        )?,
    };
    let cfg = model.config().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let input = Tensor32::rand_uniform(
        &[1, cfg.input_channels, cfg.input_size, cfg.input_size],
        -1.0,
        1.0,
        &mut rng,
    );
    // warm-up pass
    let _ = model.forward_eval(&input)?;
    let mut samples_ms: Vec<f64> = Vec::with_capacity(args.n);
    for _ in 0..args.n {
        let t = Instant::now();
        let _ = model.forward_eval(&input)?;
        samples_ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    let mut sorted = samples_ms.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pct = |p: f64| sorted[((p * (sorted.len() - 1) as f64).round()) as usize];
    let mean = samples_ms.iter().sum::<f64>() / samples_ms.len() as f64;
    let report = serde_json::json!({
        "n": args.n,
        "input_size": cfg.input_size,
        "input_channels": cfg.input_channels,
        "base_width": cfg.base_width,
        "param_count": model.param_count(),
        "mean_ms": mean,
        "median_ms": pct(0.5),
        "p95_ms": pct(0.95),
        "min_ms": sorted[0],
        "max_ms": sorted[sorted.len() - 1],
        "samples_ms": samples_ms,
    });
    println!(
        "forward latency over {} runs at {}x{}: mean {:.1} ms, median {:.1} ms, p95 {:.1} ms",
        args.n,
        cfg.input_size,
        cfg.input_size,
        mean,
        pct(0.5),
        pct(0.95)
    );
    std::fs::write(
        args.out.join("latency.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    let config = serde_json::json!({
        "n": args.n,
        "checkpoint": args.checkpoint,
        "size": args.size,
        "base_width": args.base_width,
        "channels": args.channels,
    });
    write_manifest(&args.out, "bench", config, &[], started)
}
