use graspforge_core::train::{train, TrainConfig};
use std::time::Instant;

#[test]
fn probe_full_desk_single_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = TrainConfig::synthetic_desk(tmp.path().to_path_buf());
    cfg.seeds = vec![1];
    cfg.val_every = 2;
    let t = Instant::now();
    let out = train(&cfg).unwrap();
    println!(
        "desk probe: best val acc {:.3}, final loss {:.4}, {} steps in {:.0}s",
        out.per_seed[0].best_val_accuracy,
        out.per_seed[0].final_loss,
        out.per_seed[0].steps,
        t.elapsed().as_secs_f64()
    );
}
