//! Explaining audio-event classifiers with layer-wise relevance
//! propagation, including a virtual DFT inspection layer that relocates
//! waveform relevance into the time-frequency and mel domains.

pub mod analysis;
pub mod augment;
pub mod dftlrp;
pub mod error;
pub mod grid;
pub mod lrp;
pub mod model;
pub mod render;
pub mod scalar;
pub mod signal;
pub mod util;

#[cfg(any(test, feature = "oracles"))]
pub mod oracles;

pub use error::{Error, Result};
pub use grid::Grid;
pub use scalar::Scalar;

// Concrete aliases for the two supported precisions. Pipelines that do not
// need genericity can name these directly.
pub type WaveformF32 = signal::Waveform<f32>;
pub type WaveformF64 = signal::Waveform<f64>;
pub type SpectrogramF32 = signal::Spectrogram<f32>;
pub type SpectrogramF64 = signal::Spectrogram<f64>;
pub type MelFilterbankF32 = signal::MelFilterbank<f32>;
pub type MelFilterbankF64 = signal::MelFilterbank<f64>;
pub type TensorF32 = model::Tensor<f32>;
pub type TensorF64 = model::Tensor<f64>;
pub type ModelGraphF32 = model::ModelGraph<f32>;
pub type ModelGraphF64 = model::ModelGraph<f64>;
pub type RelevanceMapF32 = lrp::RelevanceMap<f32>;
pub type RelevanceMapF64 = lrp::RelevanceMap<f64>;
