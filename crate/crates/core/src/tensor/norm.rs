//! Batch normalization over (B, C, H, W) tensors.

use std::cell::RefCell;

use super::{Tensor, TensorError};
use crate::Scalar;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BatchNormMode {
    Train,
    Eval,
}

/// Per-channel running mean/variance, updated in train mode with
/// `running = (1 - momentum) * running + momentum * batch_stat`
/// (unbiased variance for the running update, biased for normalization).
pub struct RunningStats<S: Scalar> {
    pub mean: RefCell<Vec<S>>,
    pub var: RefCell<Vec<S>>,
}

impl<S: Scalar> RunningStats<S> {
    pub fn new(channels: usize) -> Self {
        RunningStats {
            mean: RefCell::new(vec![S::zero(); channels]),
            var: RefCell::new(vec![S::one(); channels]),
        }
    }

    pub fn channels(&self) -> usize {
        self.mean.borrow().len()
    }
}

/// Batch normalization. Gamma and beta are per-channel (C) tensors.
///
/// Train mode normalizes with batch statistics and updates `running`;
/// eval mode normalizes with the stored running statistics.
pub fn batch_norm2d<S: Scalar>(
    input: &Tensor<S>,
    gamma: &Tensor<S>,
    beta: &Tensor<S>,
    running: &RunningStats<S>,
    mode: BatchNormMode,
    momentum: f64,
    epsilon: f64,
) -> Result<Tensor<S>, TensorError> {
    if epsilon <= 0.0 {
        return Err(TensorError::InvalidArgument {
            op: "batch_norm2d",
            reason: format!("epsilon must be positive, got {epsilon}"),
        });
    }
    let s = input.shape();
    if s.len() != 4 {
        return Err(TensorError::InvalidArgument {
            op: "batch_norm2d",
            reason: format!("expected a 4-D tensor, got shape {s:?}"),
        });
    }
    let (b, c, h, w) = (s[0], s[1], s[2], s[3]);
    if gamma.shape() != [c] || beta.shape() != [c] || running.channels() != c {
        return Err(TensorError::ShapeMismatch {
            op: "batch_norm2d gamma/beta",
            lhs: vec![c],
            rhs: gamma.shape().to_vec(),
        });
    }
    let n = b * h * w;
    if mode == BatchNormMode::Train && n <= 1 {
        return Err(TensorError::DegenerateBatch {
            batch: b,
            height: h,
            width: w,
        });
    }

    let plane = h * w;
    let x = input.to_vec();
    let g = gamma.to_vec();
    let bt = beta.to_vec();

    // Per-channel statistics used for this pass.
    let (mean, var) = match mode {
        BatchNormMode::Train => {
            let mut mean = vec![S::zero(); c];
            let mut var = vec![S::zero(); c];
            let inv_n = S::from_f64(1.0 / n as f64);
            for ch in 0..c {
                let mut acc = S::zero();
                for bi in 0..b {
                    let base = (bi * c + ch) * plane;
                    for v in &x[base..base + plane] {
                        acc += *v;
                    }
                }
                mean[ch] = acc * inv_n;
                let mut vs = S::zero();
                for bi in 0..b {
                    let base = (bi * c + ch) * plane;
                    for v in &x[base..base + plane] {
                        let d = *v - mean[ch];
                        vs += d * d;
                    }
                }
                var[ch] = vs * inv_n;
            }
            // Update running stats (unbiased variance).
            let m = S::from_f64(momentum);
            let one_m = S::one() - m;
            let unbias = S::from_f64(n as f64 / (n as f64 - 1.0));
            let mut rm = running.mean.borrow_mut();
            let mut rv = running.var.borrow_mut();
            for ch in 0..c {
                rm[ch] = one_m * rm[ch] + m * mean[ch];
                rv[ch] = one_m * rv[ch] + m * var[ch] * unbias;
            }
            (mean, var)
        }
        BatchNormMode::Eval => (running.mean.borrow().clone(), running.var.borrow().clone()),
    };

    let eps = S::from_f64(epsilon);
    let inv_std: Vec<S> = var.iter().map(|&v| S::one() / (v + eps).sqrt()).collect();

    let mut out = vec![S::zero(); x.len()];
    let mut xhat = vec![S::zero(); x.len()];
    for bi in 0..b {
        for ch in 0..c {
            let base = (bi * c + ch) * plane;
            let (mu, is, ga, be) = (mean[ch], inv_std[ch], g[ch], bt[ch]);
            for i in base..base + plane {
                let xh = (x[i] - mu) * is;
                xhat[i] = xh;
                out[i] = ga * xh + be;
            }
        }
    }

    let parents = vec![input.clone(), gamma.clone(), beta.clone()];
    let (input_c, gamma_c, beta_c) = (input.clone(), gamma.clone(), beta.clone());
    let backward = Box::new(move |grad_out: &[S]| {
        let mut dgamma = vec![S::zero(); c];
        let mut dbeta = vec![S::zero(); c];
        for bi in 0..b {
            for ch in 0..c {
                let base = (bi * c + ch) * plane;
                let mut dg = S::zero();
                let mut db = S::zero();
                for i in base..base + plane {
                    dg += grad_out[i] * xhat[i];
                    db += grad_out[i];
                }
                dgamma[ch] += dg;
                dbeta[ch] += db;
            }
        }
        if gamma_c.requires_grad() {
            gamma_c.accumulate_grad(&dgamma);
        }
        if beta_c.requires_grad() {
            beta_c.accumulate_grad(&dbeta);
        }
        if input_c.requires_grad() {
            let gv = gamma_c.to_vec();
            let mut dx = vec![S::zero(); b * c * plane];
            match mode {
                BatchNormMode::Train => {
                    // dx = gamma * inv_std * (dy - mean(dy) - xhat * mean(dy*xhat))
                    let inv_n = S::from_f64(1.0 / n as f64);
                    for ch in 0..c {
                        let mean_dy = dbeta[ch] * inv_n;
                        let mean_dy_xhat = dgamma[ch] * inv_n;
                        let k = gv[ch] * inv_std[ch];
                        for bi in 0..b {
                            let base = (bi * c + ch) * plane;
                            for i in base..base + plane {
                                dx[i] = k * (grad_out[i] - mean_dy - xhat[i] * mean_dy_xhat);
                            }
                        }
                    }
                }
                BatchNormMode::Eval => {
                    for ch in 0..c {
                        let k = gv[ch] * inv_std[ch];
                        for bi in 0..b {
                            let base = (bi * c + ch) * plane;
                            for i in base..base + plane {
                                dx[i] = k * grad_out[i];
                            }
                        }
                    }
                }
            }
            input_c.accumulate_grad(&dx);
        }
    });
    Ok(Tensor::from_op(out, s, parents, backward))
}
