use std::time::Instant;
use graspforge_core::tensor::{conv2d, Tensor, sum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn probe_single_res_conv_backward() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Tensor::<f32>::rand_uniform(&[8, 64, 12, 12], -1.0, 1.0, &mut rng);
    let x = Tensor::new(x.to_vec(), x.shape(), true);
    let w = { let t = Tensor::<f32>::rand_uniform(&[64, 64, 3, 3], -1.0, 1.0, &mut rng); Tensor::new(t.to_vec(), t.shape(), true) };
    let b = Tensor::new(vec![0.0f32; 64], &[64], true);
    for round in 0..3 {
        let y = conv2d(&x, &w, &b, 1, 1).unwrap();
        let l = sum(&y);
        let t = Instant::now();
        l.backward().unwrap();
        println!("round {round}: single res conv bwd {:.2} ms", t.elapsed().as_secs_f64()*1e3);
        x.clear_grad(); w.clear_grad(); b.clear_grad();
    }
    // without input gradient
    let x2 = Tensor::new(x.to_vec(), x.shape(), false);
    for round in 0..2 {
        let y = conv2d(&x2, &w, &b, 1, 1).unwrap();
        let l = sum(&y);
        let t = Instant::now();
        l.backward().unwrap();
        println!("round {round}: no-dx res conv bwd {:.2} ms", t.elapsed().as_secs_f64()*1e3);
        w.clear_grad(); b.clear_grad();
    }
}
