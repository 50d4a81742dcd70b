//! Antipodal grasp detection from n-channel images.
//!
//! The crate is organized around a small dense-tensor engine with
//! reverse-mode automatic differentiation ([`tensor`]), a generative
//! residual convolutional network built on top of it ([`model`]), the
//! grasp representation and evaluation math ([`geometry`]), dataset
//! ingestion and synthetic scene generation ([`dataset`]), a training
//! and evaluation harness ([`train`]), and a simulated pick-and-place
//! control chain ([`sim`]).
//!
//! All numeric kernels are generic over the scalar type through
//! [`Scalar`]; training and inference run in `f32`, gradient checking
//! in `f64`. Concrete aliases are exported at the crate root.

pub mod dataset;
pub mod geometry;
pub mod model;
pub mod sim;
pub mod tensor;
pub mod train;

mod scalar;

pub use scalar::Scalar;
pub use tensor::Tensor;

/// Single-precision tensor, the default for training and inference.
pub type Tensor32 = Tensor<f32>;
/// Double-precision tensor, used for gradient checking.
pub type Tensor64 = Tensor<f64>;

/// Caps the global worker-thread pool. Returns the effective thread count.
///
/// Reads `GRASP_FORGE_THREADS` when `requested` is `None`. Safe to call
/// more than once; only the first call takes effect.
pub fn init_threads(requested: Option<usize>) -> usize {
    let n = requested.or_else(|| {
        std::env::var("GRASP_FORGE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global();
    }
    rayon::current_num_threads()
}
