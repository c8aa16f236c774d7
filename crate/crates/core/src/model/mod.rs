//! Feed-forward CNN inference with full activation traces.

pub mod graph;
pub mod layer;
pub mod manifest;
pub mod reference;
pub mod tensor;

pub use graph::{ForwardTrace, InputKind, ModelGraph};
pub use layer::{Conv1d, Conv2d, Dense, DepthwiseConv2d, Layer, LayerKind, Padding, Pool};
pub use manifest::{load_model, save_model};
pub use reference::{
    build_logmel_cnn, build_reference_architectures, build_tiny_1d, build_waveform_cnn,
    LogmelCnnConfig, WaveformCnnConfig,
};
pub use tensor::Tensor;
