use graspforge_core::model::{Model, ModelConfig};
use graspforge_core::Tensor;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

#[test]
fn probe_full_size_latency() {
    let model = Model::<f32>::build(&ModelConfig::default(), 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Tensor::<f32>::rand_uniform(&[1, 4, 224, 224], -1.0, 1.0, &mut rng);
    let _ = model.forward_eval(&x).unwrap(); // warm
    for _ in 0..3 {
        let t = Instant::now();
        let _ = model.forward_eval(&x).unwrap();
        println!("forward 224: {:.0} ms", t.elapsed().as_secs_f64() * 1e3);
    }
    // desk-scale step estimate: batch-8 train fwd at 48px, width 16
    let desk = Model::<f32>::build(&ModelConfig::desk(4, 48), 0).unwrap();
    let xb = Tensor::<f32>::rand_uniform(&[8, 4, 48, 48], -1.0, 1.0, &mut rng);
    let mut r2 = ChaCha8Rng::seed_from_u64(2);
    let _ = desk.forward_train(&xb, &mut r2).unwrap();
    for _ in 0..3 {
        let t = Instant::now();
        let maps = desk.forward_train(&xb, &mut r2).unwrap();
        let s = graspforge_core::tensor::sum(&maps.quality);
        let fwd = t.elapsed().as_secs_f64() * 1e3;
        let t2 = Instant::now();
        s.backward().unwrap();
        println!("desk batch8 fwd {fwd:.0} ms, bwd {:.0} ms", t2.elapsed().as_secs_f64() * 1e3);
        desk.zero_grad();
    }
}
