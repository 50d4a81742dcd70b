//! Smooth L1 (Huber) loss.

use super::{Tensor, TensorError};
use crate::Scalar;

/// Mean over all elements of
/// `z = 0.5*d^2` when `|d| < 1`, else `|d| - 0.5`, with `d = prediction - target`.
///
/// Differentiable with respect to `prediction`; the two branches meet at
/// `|d| = 1` with matching value (0.5) and slope (1).
pub fn smooth_l1<S: Scalar>(
    prediction: &Tensor<S>,
    target: &Tensor<S>,
) -> Result<Tensor<S>, TensorError> {
    if prediction.shape() != target.shape() {
        return Err(TensorError::ShapeMismatch {
            op: "smooth_l1",
            lhs: prediction.shape().to_vec(),
            rhs: target.shape().to_vec(),
        });
    }
    let n = prediction.len();
    let half = S::from_f64(0.5);
    let total = prediction.with_data(|p| {
        target.with_data(|t| {
            let mut acc = S::zero();
            for (&pv, &tv) in p.iter().zip(t.iter()) {
                let d = pv - tv;
                let a = d.abs();
                acc += if a < S::one() { half * d * d } else { a - half };
            }
            acc
        })
    });
    let mean = total / S::from_f64(n as f64);

    let parents = vec![prediction.clone(), target.clone()];
    let (pred_c, targ_c) = (prediction.clone(), target.clone());
    let backward = Box::new(move |grad_out: &[S]| {
        let go = grad_out[0] / S::from_f64(n as f64);
        let dd: Vec<S> = pred_c.with_data(|p| {
            targ_c.with_data(|t| {
                p.iter()
                    .zip(t.iter())
                    .map(|(&pv, &tv)| {
                        let d = pv - tv;
                        // clamp(d, -1, 1): quadratic branch slope d, linear branch sign(d)
                        let s = if d > S::one() {
                            S::one()
                        } else if d < -S::one() {
                            -S::one()
                        } else {
                            d
                        };
                        s * go
                    })
                    .collect()
            })
        });
        if pred_c.requires_grad() {
            pred_c.accumulate_grad(&dd);
        }
        if targ_c.requires_grad() {
            let neg: Vec<S> = dd.iter().map(|&v| -v).collect();
            targ_c.accumulate_grad(&neg);
        }
    });
    Ok(Tensor::from_op(vec![mean], &[1], parents, backward))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_loss(d: f64) -> f64 {
        let p = Tensor::new(vec![d; 6], &[2, 3], false);
        let t = Tensor::new(vec![0.0; 6], &[2, 3], false);
        smooth_l1(&p, &t).unwrap().item()
    }

    #[test]
    fn quadratic_branch_value() {
        assert!((uniform_loss(0.5) - 0.125).abs() < 1e-12);
    }

    #[test]
    fn linear_branch_value() {
        assert!((uniform_loss(2.0) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn branches_join_continuously_at_one() {
        // value 0.5 at |d| = 1 from both sides, one-sided slopes both 1
        assert!((uniform_loss(1.0) - 0.5).abs() < 1e-12);
        let eps = 1e-7;
        let below = uniform_loss(1.0 - eps);
        let above = uniform_loss(1.0 + eps);
        assert!((below - 0.5).abs() < 2.0 * eps);
        assert!((above - 0.5).abs() < 2.0 * eps);
        let slope_below = (uniform_loss(1.0) - uniform_loss(1.0 - eps)) / eps;
        let slope_above = (uniform_loss(1.0 + eps) - uniform_loss(1.0)) / eps;
        assert!((slope_below - 1.0).abs() < 1e-6, "{slope_below}");
        assert!((slope_above - 1.0).abs() < 1e-6, "{slope_above}");
    }

    #[test]
    fn exact_match_gives_zero_loss_and_zero_gradient() {
        let p = Tensor::new(vec![0.3, -0.7, 1.4], &[3], true);
        let t = Tensor::new(vec![0.3, -0.7, 1.4], &[3], false);
        let l = smooth_l1(&p, &t).unwrap();
        assert_eq!(l.item(), 0.0);
        l.backward().unwrap();
        assert_eq!(p.grad().unwrap(), vec![0.0, 0.0, 0.0]);
    }

    #[test]
    fn mismatched_shapes_error() {
        let p = Tensor::<f32>::zeros(&[2, 2]);
        let t = Tensor::<f32>::zeros(&[3]);
        assert!(matches!(
            smooth_l1(&p, &t),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }
}
