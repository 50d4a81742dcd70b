//! Pointwise ops, residual addition and reductions.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Tensor, TensorError};
use crate::Scalar;

/// Elementwise max(0, x). The subgradient at exactly 0 is 0.
pub fn relu<S: Scalar>(input: &Tensor<S>) -> Tensor<S> {
    let data: Vec<S> = input.with_data(|d| {
        d.iter()
            .map(|&v| if v > S::zero() { v } else { S::zero() })
            .collect()
    });
    let input_c = input.clone();
    Tensor::from_op(
        data,
        input.shape(),
        vec![input.clone()],
        Box::new(move |grad_out| {
            if input_c.requires_grad() {
                let dx: Vec<S> = input_c.with_data(|d| {
                    d.iter()
                        .zip(grad_out)
                        .map(|(&v, &g)| if v > S::zero() { g } else { S::zero() })
                        .collect()
                });
                input_c.accumulate_grad(&dx);
            }
        }),
    )
}

/// Logistic squashing into (0, 1).
pub fn sigmoid<S: Scalar>(input: &Tensor<S>) -> Tensor<S> {
    let data: Vec<S> =
        input.with_data(|d| d.iter().map(|&v| S::one() / (S::one() + (-v).exp())).collect());
    let out_data = data.clone();
    let input_c = input.clone();
    Tensor::from_op(
        data,
        input.shape(),
        vec![input.clone()],
        Box::new(move |grad_out| {
            if input_c.requires_grad() {
                let dx: Vec<S> = out_data
                    .iter()
                    .zip(grad_out)
                    .map(|(&y, &g)| g * y * (S::one() - y))
                    .collect();
                input_c.accumulate_grad(&dx);
            }
        }),
    )
}

/// Odd symmetric squashing into (-1, 1).
pub fn tanh<S: Scalar>(input: &Tensor<S>) -> Tensor<S> {
    let data: Vec<S> = input.with_data(|d| d.iter().map(|&v| v.tanh()).collect());
    let out_data = data.clone();
    let input_c = input.clone();
    Tensor::from_op(
        data,
        input.shape(),
        vec![input.clone()],
        Box::new(move |grad_out| {
            if input_c.requires_grad() {
                let dx: Vec<S> = out_data
                    .iter()
                    .zip(grad_out)
                    .map(|(&y, &g)| g * (S::one() - y * y))
                    .collect();
                input_c.accumulate_grad(&dx);
            }
        }),
    )
}

/// Inverted dropout: keeps each element with probability 1-rate and scales
/// kept elements by 1/(1-rate). Mask draws come from `rng` in element order.
pub fn dropout<S: Scalar>(input: &Tensor<S>, rate: f64, rng: &mut ChaCha8Rng) -> Tensor<S> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if rate == 0.0 {
        return scale(input, 1.0);
    }
    let keep = S::from_f64(1.0 / (1.0 - rate));
    let mask: Vec<S> = (0..input.len())
        .map(|_| {
            if rng.gen::<f64>() < rate {
                S::zero()
            } else {
                keep
            }
        })
        .collect();
    let data: Vec<S> =
        input.with_data(|d| d.iter().zip(&mask).map(|(&v, &m)| v * m).collect());
    let input_c = input.clone();
    Tensor::from_op(
        data,
        input.shape(),
        vec![input.clone()],
        Box::new(move |grad_out| {
            if input_c.requires_grad() {
                let dx: Vec<S> = grad_out.iter().zip(&mask).map(|(&g, &m)| g * m).collect();
                input_c.accumulate_grad(&dx);
            }
        }),
    )
}

/// Elementwise sum of two same-shape tensors.
pub fn add<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>, TensorError> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "add",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let data: Vec<S> =
        a.with_data(|da| b.with_data(|db| da.iter().zip(db).map(|(&x, &y)| x + y).collect()));
    let (ac, bc) = (a.clone(), b.clone());
    Ok(Tensor::from_op(
        data,
        a.shape(),
        vec![a.clone(), b.clone()],
        Box::new(move |grad_out| {
            if ac.requires_grad() {
                ac.accumulate_grad(grad_out);
            }
            if bc.requires_grad() {
                bc.accumulate_grad(grad_out);
            }
        }),
    ))
}

/// Elementwise product of two same-shape tensors.
pub fn mul<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>) -> Result<Tensor<S>, TensorError> {
    if a.shape() != b.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "mul",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let data: Vec<S> =
        a.with_data(|da| b.with_data(|db| da.iter().zip(db).map(|(&x, &y)| x * y).collect()));
    let (ac, bc) = (a.clone(), b.clone());
    Ok(Tensor::from_op(
        data,
        a.shape(),
        vec![a.clone(), b.clone()],
        Box::new(move |grad_out| {
            if ac.requires_grad() {
                let dx: Vec<S> =
                    bc.with_data(|db| grad_out.iter().zip(db).map(|(&g, &y)| g * y).collect());
                ac.accumulate_grad(&dx);
            }
            if bc.requires_grad() {
                let dy: Vec<S> =
                    ac.with_data(|da| grad_out.iter().zip(da).map(|(&g, &x)| g * x).collect());
                bc.accumulate_grad(&dy);
            }
        }),
    ))
}

/// Multiplies every element by a constant.
pub fn scale<S: Scalar>(input: &Tensor<S>, factor: f64) -> Tensor<S> {
    let f = S::from_f64(factor);
    let data: Vec<S> = input.with_data(|d| d.iter().map(|&v| v * f).collect());
    let input_c = input.clone();
    Tensor::from_op(
        data,
        input.shape(),
        vec![input.clone()],
        Box::new(move |grad_out| {
            if input_c.requires_grad() {
                let dx: Vec<S> = grad_out.iter().map(|&g| g * f).collect();
                input_c.accumulate_grad(&dx);
            }
        }),
    )
}

/// Sum of all elements, in row-major order, to a scalar tensor.
pub fn sum<S: Scalar>(input: &Tensor<S>) -> Tensor<S> {
    let total = input.with_data(|d| {
        let mut acc = S::zero();
        for v in d {
            acc += *v;
        }
        acc
    });
    let input_c = input.clone();
    let n = input.len();
    Tensor::from_op(
        vec![total],
        &[1],
        vec![input.clone()],
        Box::new(move |grad_out| {
            if input_c.requires_grad() {
                input_c.accumulate_grad(&vec![grad_out[0]; n]);
            }
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn relu_clamps_and_zeroes_negatives() {
        let x = Tensor::<f64>::new(vec![-1.0, 0.0, 2.0], &[3], false);
        assert_eq!(relu(&x).to_vec(), vec![0.0, 0.0, 2.0]);
        let neg = Tensor::<f64>::new(vec![-3.0, -0.5], &[2], false);
        assert_eq!(relu(&neg).to_vec(), vec![0.0, 0.0]);
    }

    #[test]
    fn relu_gradient_uses_zero_subgradient_at_zero() {
        // finite differences on [-1, 2] give [0, 1]
        let x = Tensor::<f64>::new(vec![-1.0, 2.0], &[2], true);
        let l = sum(&relu(&x));
        l.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![0.0, 1.0]);
        let z = Tensor::<f64>::new(vec![0.0], &[1], true);
        let l = sum(&relu(&z));
        l.backward().unwrap();
        assert_eq!(z.grad().unwrap(), vec![0.0]);
    }

    #[test]
    fn sigmoid_and_tanh_ranges() {
        let x = Tensor::<f64>::new(vec![-50.0, -1.0, 0.0, 1.0, 50.0], &[5], false);
        for v in sigmoid(&x).to_vec() {
            assert!((0.0..=1.0).contains(&v));
        }
        for v in tanh(&x).to_vec() {
            assert!((-1.0..=1.0).contains(&v));
        }
        assert!((sigmoid(&Tensor::<f64>::scalar(0.0)).item() - 0.5).abs() < 1e-15);
        assert_eq!(tanh(&Tensor::<f64>::scalar(0.0)).item(), 0.0);
    }

    #[test]
    fn add_rejects_shape_mismatch() {
        let a = Tensor::<f64>::zeros(&[2, 2]);
        let b = Tensor::<f64>::zeros(&[4]);
        assert!(matches!(
            add(&a, &b),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn mul_gradients_swap_operands() {
        let a = Tensor::<f64>::new(vec![2.0, 3.0], &[2], true);
        let b = Tensor::<f64>::new(vec![5.0, 7.0], &[2], true);
        let l = sum(&mul(&a, &b).unwrap());
        l.backward().unwrap();
        assert_eq!(a.grad().unwrap(), vec![5.0, 7.0]);
        assert_eq!(b.grad().unwrap(), vec![2.0, 3.0]);
    }

    #[test]
    fn dropout_scales_kept_elements() {
        let x = Tensor::<f32>::new(vec![1.0; 1000], &[1000], false);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let y = dropout(&x, 0.4, &mut rng);
        let v = y.to_vec();
        let kept = v.iter().filter(|&&e| e != 0.0).count();
        for &e in &v {
            assert!(e == 0.0 || (e - 1.0 / 0.6).abs() < 1e-6);
        }
        // around 60% kept
        assert!((450..750).contains(&kept), "kept {kept}");
        // same seed, same mask
        let mut rng2 = ChaCha8Rng::seed_from_u64(3);
        let y2 = dropout(&x, 0.4, &mut rng2);
        assert_eq!(y.to_vec(), y2.to_vec());
    }
}
