//! Finite-difference verification of backward rules.
//!
//! Double precision only: central differences with step 1e-5 leave
//! truncation and roundoff error far below the 1e-4 acceptance bar.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{mul, sum, Tensor};

const FD_STEP: f64 = 1e-5;

#[derive(Debug)]
pub struct GradCheckReport {
    /// Max relative error between analytic and numeric gradient, one entry
    /// per input tensor in argument order.
    pub max_rel_error: Vec<f64>,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    fn from_errors(errors: Vec<f64>, tolerance: f64) -> Self {
        let passed = errors.iter().all(|&e| e < tolerance);
        GradCheckReport {
            max_rel_error: errors,
            tolerance,
            passed,
        }
    }
}

/// Checks `op` on random inputs with the given shapes.
///
/// Elements are sampled with magnitude in [0.2, 1.0), bounded away from
/// zero so ops with a kink at the origin (relu) are probed on smooth
/// ground. Ops with kinks elsewhere need hand-placed inputs; use
/// [`finite_diff_check_with`].
pub fn finite_diff_check<F>(
    op: F,
    input_shapes: &[&[usize]],
    tolerance: f64,
    seed: u64,
) -> GradCheckReport
where
    F: Fn(&[Tensor<f64>]) -> Tensor<f64>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs: Vec<Tensor<f64>> = input_shapes
        .iter()
        .map(|shape| {
            let n: usize = shape.iter().product();
            let data = (0..n)
                .map(|_| {
                    let mag = rng.gen_range(0.2..1.0);
                    if rng.gen::<bool>() {
                        mag
                    } else {
                        -mag
                    }
                })
                .collect();
            Tensor::new(data, shape, true)
        })
        .collect();
    finite_diff_check_with(op, inputs, tolerance, seed)
}

/// Checks `op` on caller-provided inputs (must require gradients).
///
/// A non-scalar output is reduced through a fixed random projection so
/// every output element participates in the checked objective.
pub fn finite_diff_check_with<F>(
    op: F,
    inputs: Vec<Tensor<f64>>,
    tolerance: f64,
    seed: u64,
) -> GradCheckReport
where
    F: Fn(&[Tensor<f64>]) -> Tensor<f64>,
{
    let mut proj_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let probe = op(&inputs);
    let projection = Tensor::rand_uniform(probe.shape(), 0.5, 1.5, &mut proj_rng);
    let objective = |xs: &[Tensor<f64>]| -> f64 {
        let out = op(xs);
        sum(&mul(&out, &projection).expect("projection shape matches op output")).item()
    };

    // Analytic pass.
    for t in &inputs {
        t.clear_grad();
    }
    let loss = sum(&mul(&op(&inputs), &projection).unwrap());
    loss.backward().expect("scalar objective");
    let analytic: Vec<Vec<f64>> = inputs
        .iter()
        .map(|t| t.grad().unwrap_or_else(|| vec![0.0; t.len()]))
        .collect();

    // Numeric pass: central differences, one element at a time.
    let mut errors = Vec::with_capacity(inputs.len());
    for (idx, t) in inputs.iter().enumerate() {
        let mut max_err = 0.0f64;
        for j in 0..t.len() {
            let orig = t.to_vec()[j];
            t.update_data(|d| d[j] = orig + FD_STEP);
            let plus = objective(&inputs);
            t.update_data(|d| d[j] = orig - FD_STEP);
            let minus = objective(&inputs);
            t.update_data(|d| d[j] = orig);
            let numeric = (plus - minus) / (2.0 * FD_STEP);
            let a = analytic[idx][j];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if err > max_err {
                max_err = err;
            }
        }
        errors.push(max_err);
    }
    GradCheckReport::from_errors(errors, tolerance)
}
