//! Dense-tensor engine with reverse-mode automatic differentiation.
//!
//! Covers exactly the operation set the grasp network needs: 2-D
//! convolution and its transpose, batch normalization, pointwise
//! activations, dropout, smooth-L1 loss, plus an Adam optimizer and a
//! finite-difference gradient checker.
//!
//! Tensors are immutable once produced by an op; a computation graph is
//! confined to one logical thread (handles are `Rc`-backed). Parallelism
//! lives *inside* ops, over disjoint output regions, so results are
//! bit-identical regardless of thread count.

mod conv;

/// Raw kernel entry points for performance probes in the test suite.
#[doc(hidden)]
pub mod bench_hooks {
    use crate::Scalar;
    pub fn matmul_hook<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize, p: bool) -> Vec<S> {
        super::matmul::matmul(a, b, m, k, n, p)
    }
}
mod gradcheck;
mod loss;
mod matmul;
mod norm;
mod ops;
mod optim;

pub use conv::{conv2d, conv_transpose2d};
pub use gradcheck::{finite_diff_check, finite_diff_check_with, GradCheckReport};
pub use loss::smooth_l1;
pub use norm::{batch_norm2d, BatchNormMode, RunningStats};
pub use ops::{add, dropout, mul, relu, scale, sigmoid, sum, tanh};
pub use optim::{adam_step, AdamConfig, Parameter};

use std::cell::RefCell;
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use thiserror::Error;

use crate::Scalar;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("{op}: kernel {kernel} with stride {stride}, padding {padding} yields a zero-extent output for input extent {input}")]
    ZeroExtentOutput {
        op: &'static str,
        input: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
    },
    #[error("conv_transpose2d: output_padding {output_padding} must be smaller than stride {stride}")]
    InvalidOutputPadding {
        output_padding: usize,
        stride: usize,
    },
    #[error("batch_norm2d: train mode needs more than one element per channel, got batch {batch} x {height}x{width}")]
    DegenerateBatch {
        batch: usize,
        height: usize,
        width: usize,
    },
    #[error("parameter {name} has no gradient; run backward() before the optimizer step")]
    MissingGradient { name: String },
    #[error("backward() requires a scalar tensor, got shape {shape:?}")]
    NonScalarBackward { shape: Vec<usize> },
    #[error("{op}: invalid argument: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
}

static NEXT_TENSOR_ID: AtomicU64 = AtomicU64::new(1);

type BackwardFn<S> = Box<dyn Fn(&[S])>;

struct Node<S: Scalar> {
    parents: Vec<Tensor<S>>,
    backward: BackwardFn<S>,
}

struct Inner<S: Scalar> {
    id: u64,
    shape: Vec<usize>,
    data: RefCell<Vec<S>>,
    grad: RefCell<Option<Vec<S>>>,
    requires_grad: bool,
    node: Option<Node<S>>,
}

/// Dense n-dimensional array with optional gradient tracking.
///
/// Cloning a `Tensor` clones the handle, not the storage.
pub struct Tensor<S: Scalar> {
    inner: Rc<Inner<S>>,
}

impl<S: Scalar> Clone for Tensor<S> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Rc::clone(&self.inner),
        }
    }
}

impl<S: Scalar> fmt::Debug for Tensor<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.inner.id)
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}

impl<S: Scalar> Tensor<S> {
    pub fn new(data: Vec<S>, shape: &[usize], requires_grad: bool) -> Self {
        assert_eq!(
            data.len(),
            shape.iter().product::<usize>(),
            "data length {} does not match shape {:?}",
            data.len(),
            shape
        );
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_TENSOR_ID.fetch_add(1, Ordering::Relaxed),
                shape: shape.to_vec(),
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                node: None,
            }),
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Tensor::new(vec![S::zero(); shape.iter().product()], shape, false)
    }

    pub fn scalar(value: S) -> Self {
        Tensor::new(vec![value], &[1], false)
    }

    /// Uniform sample in `[lo, hi)`, drawn in row-major element order.
    pub fn rand_uniform<R: Rng>(shape: &[usize], lo: f64, hi: f64, rng: &mut R) -> Self {
        let n = shape.iter().product();
        let data = (0..n)
            .map(|_| S::from_f64(rng.gen_range(lo..hi)))
            .collect();
        Tensor::new(data, shape, false)
    }

    /// Internal constructor for op outputs carrying a backward rule.
    fn from_op(data: Vec<S>, shape: &[usize], parents: Vec<Tensor<S>>, backward: BackwardFn<S>) -> Self {
        debug_assert_eq!(data.len(), shape.iter().product::<usize>());
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        let node = requires_grad.then_some(Node { parents, backward });
        Tensor {
            inner: Rc::new(Inner {
                id: NEXT_TENSOR_ID.fetch_add(1, Ordering::Relaxed),
                shape: shape.to_vec(),
                data: RefCell::new(data),
                grad: RefCell::new(None),
                requires_grad,
                node,
            }),
        }
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn len(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    /// Copies out the element data.
    pub fn to_vec(&self) -> Vec<S> {
        self.inner.data.borrow().clone()
    }

    /// Runs `f` over the element data without copying.
    pub fn with_data<T>(&self, f: impl FnOnce(&[S]) -> T) -> T {
        f(&self.inner.data.borrow())
    }

    pub fn item(&self) -> S {
        assert_eq!(self.len(), 1, "item() on non-scalar tensor");
        self.inner.data.borrow()[0]
    }

    /// Current gradient, if one has been accumulated.
    pub fn grad(&self) -> Option<Vec<S>> {
        self.inner.grad.borrow().clone()
    }

    pub fn clear_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Overwrites the element data. Only meaningful for leaves (parameter
    /// updates, checkpoint restore, finite-difference probing).
    pub fn set_data(&self, data: &[S]) {
        let mut d = self.inner.data.borrow_mut();
        assert_eq!(d.len(), data.len());
        d.copy_from_slice(data);
    }

    /// Applies `f` to the mutable element data of a leaf tensor.
    pub fn update_data(&self, f: impl FnOnce(&mut [S])) {
        f(&mut self.inner.data.borrow_mut());
    }

    fn accumulate_grad(&self, delta: &[S]) {
        let mut slot = self.inner.grad.borrow_mut();
        match slot.as_mut() {
            Some(g) => {
                for (gi, di) in g.iter_mut().zip(delta) {
                    *gi += *di;
                }
            }
            None => *slot = Some(delta.to_vec()),
        }
    }

    /// Reverse-mode sweep from a scalar tensor: seeds d(self)/d(self) = 1
    /// and accumulates gradients into every tensor that requires them.
    /// Gradients add up across calls until cleared.
    pub fn backward(&self) -> Result<(), TensorError> {
        if self.len() != 1 {
            return Err(TensorError::NonScalarBackward {
                shape: self.shape().to_vec(),
            });
        }
        self.backward_with(&[S::one()]);
        Ok(())
    }

    /// Reverse-mode sweep with an explicit output gradient.
    pub(crate) fn backward_with(&self, seed: &[S]) {
        assert_eq!(seed.len(), self.len());
        if !self.requires_grad() {
            return;
        }
        // Post-order DFS gives children before parents; walking the list in
        // reverse propagates every tensor's full gradient before its own
        // backward rule fires.
        let order = self.topo_order();
        self.accumulate_grad(seed);
        for t in order.iter().rev() {
            if let Some(node) = &t.inner.node {
                // Non-leaf gradients are consumed by the sweep; only leaves
                // retain theirs across backward calls.
                let grad = t.inner.grad.borrow_mut().take();
                if let Some(g) = grad.as_ref() {
                    (node.backward)(g);
                }
            }
        }
    }

    fn topo_order(&self) -> Vec<Tensor<S>> {
        let mut order = Vec::new();
        let mut seen = HashSet::new();
        // Iterative DFS; the second stack entry flags the post-visit.
        let mut stack: Vec<(Tensor<S>, bool)> = vec![(self.clone(), false)];
        while let Some((t, post)) = stack.pop() {
            if post {
                order.push(t);
                continue;
            }
            if !seen.insert(t.inner.id) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(node) = &t.inner.node {
                for p in &node.parents {
                    if p.requires_grad() && !seen.contains(&p.inner.id) {
                        stack.push((p.clone(), false));
                    }
                }
            }
        }
        order
    }
}

/// Checks that every element is finite; returns the offending index otherwise.
pub fn find_non_finite<S: Scalar>(t: &Tensor<S>) -> Option<usize> {
    t.with_data(|d| d.iter().position(|v| !v.is_finite()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn new_checks_shape_product() {
        let t = Tensor::<f64>::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[2, 3], false);
        assert_eq!(t.len(), 6);
        assert_eq!(t.shape(), &[2, 3]);
    }

    #[test]
    #[should_panic]
    fn new_rejects_wrong_length() {
        let _ = Tensor::<f64>::new(vec![1.0; 5], &[2, 3], false);
    }

    #[test]
    fn backward_requires_scalar() {
        let t = Tensor::<f64>::new(vec![1.0, 2.0], &[2], true);
        assert!(matches!(
            t.backward(),
            Err(TensorError::NonScalarBackward { .. })
        ));
    }

    #[test]
    fn grad_accumulates_across_backward_calls() {
        let x = Tensor::<f64>::new(vec![3.0], &[1], true);
        let y = scale(&x, 2.0);
        y.backward().unwrap();
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![4.0]);
        x.clear_grad();
        assert!(x.grad().is_none());
    }

    #[test]
    fn diamond_graph_sums_both_paths() {
        // y = x*2 + x*3 -> dy/dx = 5
        let x = Tensor::<f64>::new(vec![1.0], &[1], true);
        let a = scale(&x, 2.0);
        let b = scale(&x, 3.0);
        let y = add(&a, &b).unwrap();
        y.backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![5.0]);
    }

    #[test]
    fn no_grad_leaves_are_skipped() {
        let x = Tensor::<f64>::new(vec![1.0], &[1], false);
        let y = scale(&x, 2.0);
        assert!(!y.requires_grad());
        assert!(y.inner.node.is_none());
    }
}
