//! The generative residual convolutional network.
//!
//! Topology: a three-layer conv stem (large-kernel stride-1 entry, two
//! stride-2 downsamples reaching a quarter of the input resolution),
//! a run of constant-width residual blocks, a mirrored transposed-conv
//! decoder restoring the input resolution, and four parallel one-channel
//! heads: grasp quality, cos(2*theta), sin(2*theta) and gripper width.
//! Quality and width squash through a logistic, the angle pair through
//! tanh.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, TrainMeta};

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::tensor::{
    add, batch_norm2d, conv2d, conv_transpose2d, dropout, relu, sigmoid, tanh, BatchNormMode,
    Parameter, RunningStats, Tensor, TensorError,
};
use crate::Scalar;

const BN_MOMENTUM: f64 = 0.1;
const BN_EPSILON: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model config: {0}")]
    InvalidConfig(String),
    #[error("input has {got} channels, model expects {expected}")]
    WrongChannelCount { expected: usize, got: usize },
    #[error("input spatial size {got}x{got} does not match configured {expected}x{expected}")]
    WrongSpatialSize { expected: usize, got: usize },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("checkpoint format version {found} not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint config mismatch: {0}")]
    ConfigMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

/// Network hyperparameters. The defaults build the full-size model:
/// stem widths base..4*base, five residual blocks, 224x224 input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// 1 = depth, 3 = RGB, 4 = RGB-D.
    pub input_channels: usize,
    /// Channel count after the first convolution.
    pub base_width: usize,
    pub num_residual_blocks: usize,
    pub input_size: usize,
    pub dropout_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            input_channels: 4,
            base_width: 32,
            num_residual_blocks: 5,
            input_size: 224,
            dropout_rate: 0.1,
        }
    }
}

impl ModelConfig {
    /// Small preset for desk-scale synthetic training on a CPU.
    pub fn desk(input_channels: usize, input_size: usize) -> Self {
        ModelConfig {
            input_channels,
            base_width: 16,
            num_residual_blocks: 5,
            input_size,
            dropout_rate: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !matches!(self.input_channels, 1 | 3 | 4) {
            return Err(ModelError::InvalidConfig(format!(
                "input_channels must be 1, 3 or 4, got {}",
                self.input_channels
            )));
        }
        if self.base_width < 2 {
            return Err(ModelError::InvalidConfig(format!(
                "base_width must be at least 2, got {}",
                self.base_width
            )));
        }
        if self.num_residual_blocks < 1 {
            return Err(ModelError::InvalidConfig(
                "num_residual_blocks must be at least 1".into(),
            ));
        }
        if self.input_size % 4 != 0 || self.input_size < 16 {
            return Err(ModelError::InvalidConfig(format!(
                "input_size must be a multiple of 4 and at least 16, got {}",
                self.input_size
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(ModelError::InvalidConfig(format!(
                "dropout_rate must be in [0, 1), got {}",
                self.dropout_rate
            )));
        }
        Ok(())
    }
}

/// The four per-pixel output maps, each (B, 1, H, W).
pub struct GraspMapTensors<S: Scalar> {
    pub quality: Tensor<S>,
    pub cos2t: Tensor<S>,
    pub sin2t: Tensor<S>,
    pub width: Tensor<S>,
}

impl<S: Scalar> GraspMapTensors<S> {
    /// Extracts one batch item as plain f32 grasp maps.
    pub fn to_maps(&self, batch: usize) -> crate::geometry::GraspMaps {
        let shape = self.quality.shape().to_vec();
        let (h, w) = (shape[2], shape[3]);
        let plane = h * w;
        let slice_of = |t: &Tensor<S>| -> crate::geometry::Image2<f32> {
            let data = t.with_data(|d| {
                d[batch * plane..(batch + 1) * plane]
                    .iter()
                    .map(|v| Scalar::to_f32(*v))
                    .collect::<Vec<f32>>()
            });
            crate::geometry::Image2::from_vec(w, h, data)
        };
        crate::geometry::GraspMaps {
            quality: slice_of(&self.quality),
            cos2t: slice_of(&self.cos2t),
            sin2t: slice_of(&self.sin2t),
            width: slice_of(&self.width),
        }
    }
}

/// Fan-in-scaled uniform init: U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
fn init_weight<S: Scalar>(shape: &[usize], fan_in: usize, rng: &mut ChaCha8Rng) -> Tensor<S> {
    let bound = 1.0 / (fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| S::from_f64(rng.gen_range(-bound..bound)))
        .collect();
    Tensor::new(data, shape, true)
}

struct ConvLayer<S: Scalar> {
    weight: Parameter<S>,
    bias: Parameter<S>,
    stride: usize,
    padding: usize,
}

impl<S: Scalar> ConvLayer<S> {
    fn new(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let weight = init_weight(&[out_ch, in_ch, kernel, kernel], in_ch * kernel * kernel, rng);
        let bias = Tensor::new(vec![S::zero(); out_ch], &[out_ch], true);
        ConvLayer {
            weight: Parameter::new(weight, format!("{name}.weight")),
            bias: Parameter::new(bias, format!("{name}.bias")),
            stride,
            padding,
        }
    }

    fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>, TensorError> {
        conv2d(
            x,
            self.weight.tensor(),
            self.bias.tensor(),
            self.stride,
            self.padding,
        )
    }
}

struct ConvTransposeLayer<S: Scalar> {
    weight: Parameter<S>,
    bias: Parameter<S>,
    stride: usize,
    padding: usize,
    output_padding: usize,
}

impl<S: Scalar> ConvTransposeLayer<S> {
    fn new(
        name: &str,
        in_ch: usize,
        out_ch: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        output_padding: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let weight = init_weight(&[in_ch, out_ch, kernel, kernel], in_ch * kernel * kernel, rng);
        let bias = Tensor::new(vec![S::zero(); out_ch], &[out_ch], true);
        ConvTransposeLayer {
            weight: Parameter::new(weight, format!("{name}.weight")),
            bias: Parameter::new(bias, format!("{name}.bias")),
            stride,
            padding,
            output_padding,
        }
    }

    fn forward(&self, x: &Tensor<S>) -> Result<Tensor<S>, TensorError> {
        conv_transpose2d(
            x,
            self.weight.tensor(),
            self.bias.tensor(),
            self.stride,
            self.padding,
            self.output_padding,
        )
    }
}

struct NormLayer<S: Scalar> {
    gamma: Parameter<S>,
    beta: Parameter<S>,
    running: RunningStats<S>,
}

impl<S: Scalar> NormLayer<S> {
    fn new(name: &str, channels: usize) -> Self {
        let gamma = Tensor::new(vec![S::one(); channels], &[channels], true);
        let beta = Tensor::new(vec![S::zero(); channels], &[channels], true);
        NormLayer {
            gamma: Parameter::new(gamma, format!("{name}.gamma")),
            beta: Parameter::new(beta, format!("{name}.beta")),
            running: RunningStats::new(channels),
        }
    }

    fn forward(&self, x: &Tensor<S>, mode: BatchNormMode) -> Result<Tensor<S>, TensorError> {
        batch_norm2d(
            x,
            self.gamma.tensor(),
            self.beta.tensor(),
            &self.running,
            mode,
            BN_MOMENTUM,
            BN_EPSILON,
        )
    }
}

/// Two 3x3 convolutions with batch norm and an identity skip.
pub(crate) struct ResidualBlock<S: Scalar> {
    conv1: ConvLayer<S>,
    bn1: NormLayer<S>,
    conv2: ConvLayer<S>,
    bn2: NormLayer<S>,
}

impl<S: Scalar> ResidualBlock<S> {
    fn new(name: &str, channels: usize, rng: &mut ChaCha8Rng) -> Self {
        ResidualBlock {
            conv1: ConvLayer::new(&format!("{name}.conv1"), channels, channels, 3, 1, 1, rng),
            bn1: NormLayer::new(&format!("{name}.bn1"), channels),
            conv2: ConvLayer::new(&format!("{name}.conv2"), channels, channels, 3, 1, 1, rng),
            bn2: NormLayer::new(&format!("{name}.bn2"), channels),
        }
    }

    fn forward(&self, x: &Tensor<S>, mode: BatchNormMode) -> Result<Tensor<S>, TensorError> {
        let h = relu(&self.bn1.forward(&self.conv1.forward(x)?, mode)?);
        let h = self.bn2.forward(&self.conv2.forward(&h)?, mode)?;
        add(x, &h)
    }
}

pub struct Model<S: Scalar> {
    config: ModelConfig,
    conv1: ConvLayer<S>,
    bn1: NormLayer<S>,
    conv2: ConvLayer<S>,
    bn2: NormLayer<S>,
    conv3: ConvLayer<S>,
    bn3: NormLayer<S>,
    blocks: Vec<ResidualBlock<S>>,
    up1: ConvTransposeLayer<S>,
    bn4: NormLayer<S>,
    up2: ConvTransposeLayer<S>,
    bn5: NormLayer<S>,
    up3: ConvTransposeLayer<S>,
    head_quality: ConvLayer<S>,
    head_cos: ConvLayer<S>,
    head_sin: ConvLayer<S>,
    head_width: ConvLayer<S>,
}

impl<S: Scalar> Model<S> {
    /// Builds the network with fan-in-scaled uniform weight init drawn
    /// from the given seed.
    pub fn build(config: &ModelConfig, init_seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(init_seed);
        let rng = &mut rng;
        let n = config.input_channels;
        let w = config.base_width;
        let blocks = (0..config.num_residual_blocks)
            .map(|_| ())
            .collect::<Vec<_>>();
        // Construction order fixes the weight-draw order.
        let conv1 = ConvLayer::new("conv1", n, w, 9, 1, 4, rng);
        let bn1 = NormLayer::new("bn1", w);
        let conv2 = ConvLayer::new("conv2", w, 2 * w, 4, 2, 1, rng);
        let bn2 = NormLayer::new("bn2", 2 * w);
        let conv3 = ConvLayer::new("conv3", 2 * w, 4 * w, 4, 2, 1, rng);
        let bn3 = NormLayer::new("bn3", 4 * w);
        let blocks = blocks
            .iter()
            .enumerate()
            .map(|(i, _)| ResidualBlock::new(&format!("res{}", i + 1), 4 * w, rng))
            .collect();
        let up1 = ConvTransposeLayer::new("up1", 4 * w, 2 * w, 4, 2, 1, 1, rng);
        let bn4 = NormLayer::new("bn4", 2 * w);
        let up2 = ConvTransposeLayer::new("up2", 2 * w, w, 4, 2, 2, 1, rng);
        let bn5 = NormLayer::new("bn5", w);
        let up3 = ConvTransposeLayer::new("up3", w, w, 9, 1, 4, 0, rng);
        let head_quality = ConvLayer::new("head_q", w, 1, 2, 1, 0, rng);
        let head_cos = ConvLayer::new("head_cos", w, 1, 2, 1, 0, rng);
        let head_sin = ConvLayer::new("head_sin", w, 1, 2, 1, 0, rng);
        let head_width = ConvLayer::new("head_w", w, 1, 2, 1, 0, rng);
        Ok(Model {
            config: config.clone(),
            conv1,
            bn1,
            conv2,
            bn2,
            conv3,
            bn3,
            blocks,
            up1,
            bn4,
            up2,
            bn5,
            up3,
            head_quality,
            head_cos,
            head_sin,
            head_width,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    /// Trainable parameters in a fixed order.
    pub fn parameters(&self) -> Vec<&Parameter<S>> {
        let mut out: Vec<&Parameter<S>> = vec![
            &self.conv1.weight,
            &self.conv1.bias,
            &self.bn1.gamma,
            &self.bn1.beta,
            &self.conv2.weight,
            &self.conv2.bias,
            &self.bn2.gamma,
            &self.bn2.beta,
            &self.conv3.weight,
            &self.conv3.bias,
            &self.bn3.gamma,
            &self.bn3.beta,
        ];
        for b in &self.blocks {
            out.push(&b.conv1.weight);
            out.push(&b.conv1.bias);
            out.push(&b.bn1.gamma);
            out.push(&b.bn1.beta);
            out.push(&b.conv2.weight);
            out.push(&b.conv2.bias);
            out.push(&b.bn2.gamma);
            out.push(&b.bn2.beta);
        }
        out.extend([
            &self.up1.weight,
            &self.up1.bias,
            &self.bn4.gamma,
            &self.bn4.beta,
            &self.up2.weight,
            &self.up2.bias,
            &self.bn5.gamma,
            &self.bn5.beta,
            &self.up3.weight,
            &self.up3.bias,
            &self.head_quality.weight,
            &self.head_quality.bias,
            &self.head_cos.weight,
            &self.head_cos.bias,
            &self.head_sin.weight,
            &self.head_sin.bias,
            &self.head_width.weight,
            &self.head_width.bias,
        ]);
        out
    }

    /// Batch-norm running statistics as named slices, for persistence.
    pub(crate) fn running_stats(&self) -> Vec<(String, &RunningStats<S>)> {
        let mut out = vec![
            ("bn1".to_string(), &self.bn1.running),
            ("bn2".to_string(), &self.bn2.running),
            ("bn3".to_string(), &self.bn3.running),
        ];
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("res{}.bn1", i + 1), &b.bn1.running));
            out.push((format!("res{}.bn2", i + 1), &b.bn2.running));
        }
        out.push(("bn4".to_string(), &self.bn4.running));
        out.push(("bn5".to_string(), &self.bn5.running));
        out
    }

    /// Total trainable element count. This is a pure function of the config.
    pub fn param_count(&self) -> usize {
        self.parameters().iter().map(|p| p.len()).sum()
    }

    pub fn zero_grad(&self) {
        for p in self.parameters() {
            p.zero_grad();
        }
    }

    fn check_input(&self, image: &Tensor<S>) -> Result<(), ModelError> {
        let s = image.shape();
        if s.len() != 4 {
            return Err(ModelError::InvalidConfig(format!(
                "expected a (B, C, H, W) input, got shape {s:?}"
            )));
        }
        if s[1] != self.config.input_channels {
            return Err(ModelError::WrongChannelCount {
                expected: self.config.input_channels,
                got: s[1],
            });
        }
        if s[2] != self.config.input_size || s[3] != self.config.input_size {
            return Err(ModelError::WrongSpatialSize {
                expected: self.config.input_size,
                got: s[2],
            });
        }
        Ok(())
    }

    /// Inference forward pass: running statistics, no dropout.
    pub fn forward_eval(&self, image: &Tensor<S>) -> Result<GraspMapTensors<S>, ModelError> {
        let start = Instant::now();
        let out = self.forward_inner(image, None, &mut None)?;
        log::debug!(
            "eval forward: {:?} in {:.1} ms",
            image.shape(),
            start.elapsed().as_secs_f64() * 1e3
        );
        Ok(out)
    }

    /// Training forward pass: batch statistics and dropout, with mask
    /// draws taken from `rng`.
    pub fn forward_train(
        &self,
        image: &Tensor<S>,
        rng: &mut ChaCha8Rng,
    ) -> Result<GraspMapTensors<S>, ModelError> {
        self.forward_inner(image, Some(rng), &mut None)
    }

    /// Eval forward recording every stage's output shape.
    pub fn forward_traced(
        &self,
        image: &Tensor<S>,
    ) -> Result<(GraspMapTensors<S>, Vec<(String, Vec<usize>)>), ModelError> {
        let mut trace = Some(Vec::new());
        let out = self.forward_inner(image, None, &mut trace)?;
        Ok((out, trace.unwrap()))
    }

    fn forward_inner(
        &self,
        image: &Tensor<S>,
        mut train_rng: Option<&mut ChaCha8Rng>,
        trace: &mut Option<Vec<(String, Vec<usize>)>>,
    ) -> Result<GraspMapTensors<S>, ModelError> {
        self.check_input(image)?;
        let mode = if train_rng.is_some() {
            BatchNormMode::Train
        } else {
            BatchNormMode::Eval
        };
        fn record<S: Scalar>(
            trace: &mut Option<Vec<(String, Vec<usize>)>>,
            name: String,
            t: &Tensor<S>,
        ) {
            if let Some(tr) = trace.as_mut() {
                tr.push((name, t.shape().to_vec()));
            }
        }

        let x = relu(&self.bn1.forward(&self.conv1.forward(image)?, mode)?);
        record(trace, "conv1".into(), &x);
        let x = relu(&self.bn2.forward(&self.conv2.forward(&x)?, mode)?);
        record(trace, "conv2".into(), &x);
        let mut x = relu(&self.bn3.forward(&self.conv3.forward(&x)?, mode)?);
        record(trace, "stem".into(), &x);
        for (i, b) in self.blocks.iter().enumerate() {
            x = b.forward(&x, mode)?;
            record(trace, format!("res{}", i + 1), &x);
        }
        let x = relu(&self.bn4.forward(&self.up1.forward(&x)?, mode)?);
        record(trace, "up1".into(), &x);
        let x = relu(&self.bn5.forward(&self.up2.forward(&x)?, mode)?);
        record(trace, "up2".into(), &x);
        let x = self.up3.forward(&x)?;
        record(trace, "up3".into(), &x);

        // Independent dropout mask per head, fixed draw order.
        let head_input = |rng: &mut Option<&mut ChaCha8Rng>| -> Tensor<S> {
            match rng {
                Some(r) if self.config.dropout_rate > 0.0 => {
                    dropout(&x, self.config.dropout_rate, r)
                }
                _ => x.clone(),
            }
        };
        let quality = sigmoid(&self.head_quality.forward(&head_input(&mut train_rng))?);
        let cos2t = tanh(&self.head_cos.forward(&head_input(&mut train_rng))?);
        let sin2t = tanh(&self.head_sin.forward(&head_input(&mut train_rng))?);
        let width = sigmoid(&self.head_width.forward(&head_input(&mut train_rng))?);
        record(trace, "quality".into(), &quality);
        Ok(GraspMapTensors {
            quality,
            cos2t,
            sin2t,
            width,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ModelConfig {
        ModelConfig {
            input_channels: 1,
            base_width: 4,
            num_residual_blocks: 1,
            input_size: 16,
            dropout_rate: 0.0,
        }
    }

    #[test]
    fn default_config_hits_the_published_parameter_budget() {
        let model = Model::<f32>::build(&ModelConfig::default(), 0).unwrap();
        assert_eq!(model.param_count(), 1_900_900);
    }

    #[test]
    fn parameter_count_grows_with_base_width() {
        let a = Model::<f32>::build(&ModelConfig::default(), 0).unwrap();
        let wider = ModelConfig {
            base_width: 64,
            ..ModelConfig::default()
        };
        let b = Model::<f32>::build(&wider, 0).unwrap();
        assert!(b.param_count() > a.param_count());
    }

    #[test]
    fn zero_residual_blocks_is_rejected() {
        let cfg = ModelConfig {
            num_residual_blocks: 0,
            ..ModelConfig::default()
        };
        assert!(matches!(
            Model::<f32>::build(&cfg, 0),
            Err(ModelError::InvalidConfig(_))
        ));
    }

    #[test]
    fn forward_restores_input_resolution_and_traces_stem() {
        let cfg = ModelConfig {
            input_channels: 4,
            base_width: 4,
            num_residual_blocks: 2,
            input_size: 32,
            dropout_rate: 0.1,
        };
        let model = Model::<f32>::build(&cfg, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::<f32>::rand_uniform(&[1, 4, 32, 32], -1.0, 1.0, &mut rng);
        let (maps, trace) = model.forward_traced(&x).unwrap();
        assert_eq!(maps.quality.shape(), &[1, 1, 32, 32]);
        assert_eq!(maps.width.shape(), &[1, 1, 32, 32]);
        let stem = trace.iter().find(|(n, _)| n == "stem").unwrap();
        assert_eq!(stem.1[2], 8); // quarter of the input resolution
    }

    #[test]
    fn head_ranges_hold_for_wild_inputs() {
        let model = Model::<f32>::build(&tiny(), 1).unwrap();
        let data: Vec<f32> = (0..16 * 16)
            .map(|i| if i % 3 == 0 { 1e4 } else { -977.0 })
            .collect();
        let x = Tensor::new(data, &[1, 1, 16, 16], false);
        let maps = model.forward_eval(&x).unwrap();
        maps.quality.with_data(|d| {
            assert!(d.iter().all(|v| (0.0..=1.0).contains(v)));
        });
        maps.width.with_data(|d| {
            assert!(d.iter().all(|v| (0.0..=1.0).contains(v)));
        });
        maps.cos2t.with_data(|d| {
            assert!(d.iter().all(|v| (-1.0..=1.0).contains(v)));
        });
        maps.sin2t.with_data(|d| {
            assert!(d.iter().all(|v| (-1.0..=1.0).contains(v)));
        });
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let model = Model::<f32>::build(&tiny(), 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Tensor::<f32>::rand_uniform(&[1, 1, 16, 16], -1.0, 1.0, &mut rng);
        let a = model.forward_eval(&x).unwrap();
        let b = model.forward_eval(&x).unwrap();
        assert_eq!(a.quality.to_vec(), b.quality.to_vec());
        assert_eq!(a.sin2t.to_vec(), b.sin2t.to_vec());
    }

    #[test]
    fn wrong_channel_count_is_reported() {
        let model = Model::<f32>::build(&tiny(), 2).unwrap();
        let x = Tensor::<f32>::zeros(&[1, 3, 16, 16]);
        assert!(matches!(
            model.forward_eval(&x),
            Err(ModelError::WrongChannelCount {
                expected: 1,
                got: 3
            })
        ));
    }

    #[test]
    fn zeroed_residual_block_is_identity() {
        let model = Model::<f32>::build(&tiny(), 4).unwrap();
        let block = &model.blocks[0];
        for p in [
            &block.conv1.weight,
            &block.conv1.bias,
            &block.bn1.gamma,
            &block.bn1.beta,
            &block.conv2.weight,
            &block.conv2.bias,
            &block.bn2.gamma,
            &block.bn2.beta,
        ] {
            p.tensor().update_data(|d| d.fill(0.0));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Tensor::<f32>::rand_uniform(&[2, 16, 8, 8], -1.0, 1.0, &mut rng);
        let y = block.forward(&x, BatchNormMode::Train).unwrap();
        assert_eq!(y.to_vec(), x.to_vec());
    }
}
