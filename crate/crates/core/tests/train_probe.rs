use graspforge_core::train::{train, DatasetSpec, TrainConfig};
use std::time::Instant;

#[test]
fn probe_small_synthetic_run() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = TrainConfig::synthetic_desk(tmp.path().to_path_buf());
    cfg.dataset = DatasetSpec::Synthetic { count: 80, max_objects: 2, seed: 9000 };
    cfg.epochs = 8;
    cfg.seeds = vec![1];
    cfg.val_every = 2;
    let t = Instant::now();
    let out = train(&cfg).unwrap();
    println!(
        "probe: best val acc {:.3}, final loss {:.4}, {} steps in {:.1}s",
        out.per_seed[0].best_val_accuracy,
        out.per_seed[0].final_loss,
        out.per_seed[0].steps,
        t.elapsed().as_secs_f64()
    );
}
