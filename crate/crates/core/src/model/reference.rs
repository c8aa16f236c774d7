//! Reference architectures: a 4-conv 1-D waveform CNN and a 13-conv
//! depthwise-separable logmel CNN, with deterministically seeded weights.
//!
//! Hyperparameters are configurable; the defaults reproduce the stated
//! layer counts and input/output shapes, not any particular capacity.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::model::graph::{InputKind, ModelGraph};
use crate::model::layer::{Conv1d, Conv2d, Dense, DepthwiseConv2d, Layer, Padding, Pool};
use crate::model::tensor::Tensor;
use crate::scalar::{cast, Scalar};

/// He-initialized weight tensor; biases in the reference models are zero,
/// which keeps LRP conservation exact.
fn he_tensor<T: Scalar>(rng: &mut ChaCha8Rng, shape: Vec<usize>, fan_in: usize) -> Tensor<T> {
    let std = (2.0 / fan_in as f64).sqrt();
    let dist = Normal::new(0.0, std).unwrap();
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| cast::<T>(dist.sample(rng))).collect();
    Tensor::new(shape, data).unwrap()
}

/// One conv1d stage: (out_channels, kernel, stride, pool after relu).
#[derive(Debug, Clone, Copy)]
pub struct WaveStage {
    pub channels: usize,
    pub kernel: usize,
    pub stride: usize,
    pub pool: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct WaveformCnnConfig {
    pub name: String,
    pub input_len: usize,
    pub class_count: usize,
    pub stages: Vec<WaveStage>,
    pub seed: u64,
}

impl Default for WaveformCnnConfig {
    fn default() -> Self {
        Self {
            name: "ref-1dcnn".into(),
            input_len: 16000,
            class_count: 10,
            stages: vec![
                WaveStage { channels: 16, kernel: 64, stride: 8, pool: Some(4) },
                WaveStage { channels: 32, kernel: 32, stride: 2, pool: Some(4) },
                WaveStage { channels: 64, kernel: 16, stride: 2, pool: Some(2) },
                WaveStage { channels: 128, kernel: 8, stride: 2, pool: None },
            ],
            seed: 0x1dcc,
        }
    }
}

/// Waveform 1-D CNN skeleton: four conv1d stages, each relu(+maxpool),
/// closed by global average pooling and a dense head.
pub fn build_waveform_cnn<T: Scalar>(cfg: &WaveformCnnConfig) -> ModelGraph<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut layers: Vec<Layer<T>> = Vec::new();
    let mut in_ch = 1usize;
    for stage in &cfg.stages {
        layers.push(Layer::Conv1d(Conv1d {
            weights: he_tensor(
                &mut rng,
                vec![stage.channels, in_ch, stage.kernel],
                in_ch * stage.kernel,
            ),
            bias: vec![T::zero(); stage.channels],
            stride: stage.stride,
            padding: Padding::Valid,
        }));
        layers.push(Layer::Relu);
        if let Some(p) = stage.pool {
            layers.push(Layer::MaxPool(Pool { size: p, stride: p }));
        }
        in_ch = stage.channels;
    }
    layers.push(Layer::GlobalAvgPool);
    layers.push(Layer::Dense(Dense {
        weights: he_tensor(&mut rng, vec![in_ch, cfg.class_count], in_ch),
        bias: vec![T::zero(); cfg.class_count],
    }));
    ModelGraph {
        name: cfg.name.clone(),
        input: InputKind::Waveform { len: cfg.input_len },
        class_count: cfg.class_count,
        layers,
    }
}

/// One depthwise-separable block: depthwise 3x3 (given stride) + pointwise
/// 1x1 to `channels`.
#[derive(Debug, Clone, Copy)]
pub struct SeparableBlock {
    pub channels: usize,
    pub stride: usize,
}

#[derive(Debug, Clone)]
pub struct LogmelCnnConfig {
    pub name: String,
    pub filters: usize,
    pub frames: usize,
    pub class_count: usize,
    pub stem_channels: usize,
    pub blocks: Vec<SeparableBlock>,
    pub seed: u64,
}

impl Default for LogmelCnnConfig {
    fn default() -> Self {
        Self {
            name: "ref-logmel-dscnn".into(),
            filters: 64,
            frames: 20,
            class_count: 10,
            stem_channels: 8,
            // 1 stem conv + 6 blocks x 2 convs = 13 conv layers.
            blocks: vec![
                SeparableBlock { channels: 16, stride: 1 },
                SeparableBlock { channels: 32, stride: 2 },
                SeparableBlock { channels: 32, stride: 1 },
                SeparableBlock { channels: 64, stride: 2 },
                SeparableBlock { channels: 64, stride: 1 },
                SeparableBlock { channels: 128, stride: 2 },
            ],
            seed: 0x2dcc,
        }
    }
}

/// YAMNet-style logmel classifier: a strided 3x3 stem followed by
/// depthwise-separable pairs, global average pooling, and a dense head.
pub fn build_logmel_cnn<T: Scalar>(cfg: &LogmelCnnConfig) -> ModelGraph<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut layers: Vec<Layer<T>> = Vec::new();
    layers.push(Layer::Conv2d(Conv2d {
        weights: he_tensor(&mut rng, vec![cfg.stem_channels, 1, 3, 3], 9),
        bias: vec![T::zero(); cfg.stem_channels],
        stride: 2,
        padding: Padding::Same,
    }));
    layers.push(Layer::Relu);
    let mut in_ch = cfg.stem_channels;
    for block in &cfg.blocks {
        layers.push(Layer::DepthwiseConv2d(DepthwiseConv2d {
            weights: he_tensor(&mut rng, vec![in_ch, 3, 3], 9),
            bias: vec![T::zero(); in_ch],
            stride: block.stride,
            padding: Padding::Same,
        }));
        layers.push(Layer::Relu);
        layers.push(Layer::Conv2d(Conv2d {
            weights: he_tensor(&mut rng, vec![block.channels, in_ch, 1, 1], in_ch),
            bias: vec![T::zero(); block.channels],
            stride: 1,
            padding: Padding::Valid,
        }));
        layers.push(Layer::Relu);
        in_ch = block.channels;
    }
    layers.push(Layer::GlobalAvgPool);
    layers.push(Layer::Dense(Dense {
        weights: he_tensor(&mut rng, vec![in_ch, cfg.class_count], in_ch),
        bias: vec![T::zero(); cfg.class_count],
    }));
    ModelGraph {
        name: cfg.name.clone(),
        input: InputKind::Logmel { filters: cfg.filters, frames: cfg.frames },
        class_count: cfg.class_count,
        layers,
    }
}

/// Both reference architectures with default hyperparameters.
pub fn build_reference_architectures<T: Scalar>() -> (ModelGraph<T>, ModelGraph<T>) {
    (build_waveform_cnn(&Default::default()), build_logmel_cnn(&Default::default()))
}

/// Small 3-conv fixture used across tests: accepts a 16000-sample
/// waveform, ~10k parameters, seeded weights.
pub fn build_tiny_1d<T: Scalar>(seed: u64) -> ModelGraph<T> {
    build_waveform_cnn(&WaveformCnnConfig {
        name: "tiny-1d".into(),
        input_len: 16000,
        class_count: 10,
        stages: vec![
            WaveStage { channels: 8, kernel: 32, stride: 16, pool: Some(4) },
            WaveStage { channels: 16, kernel: 16, stride: 4, pool: Some(2) },
            WaveStage { channels: 32, kernel: 16, stride: 2, pool: None },
        ],
        seed,
    })
}
