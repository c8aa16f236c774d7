//! Chain-structured model graph and the activation trace LRP consumes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::layer::Layer;
use crate::model::tensor::Tensor;
use crate::scalar::Scalar;

/// What the first layer expects, in the pipeline's terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputKind {
    /// `[1, len]` mono waveform.
    Waveform { len: usize },
    /// `[1, filters, frames]` logmel image.
    Logmel { filters: usize, frames: usize },
}

impl InputKind {
    pub fn shape(&self) -> Vec<usize> {
        match *self {
            InputKind::Waveform { len } => vec![1, len],
            InputKind::Logmel { filters, frames } => vec![1, filters, frames],
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModelGraph<T> {
    pub name: String,
    pub input: InputKind,
    pub class_count: usize,
    pub layers: Vec<Layer<T>>,
}

/// Activations captured during a forward pass: `activations[i]` is the
/// input to layer `i`; the last entry is the logits.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T> {
    pub activations: Vec<Tensor<T>>,
}

impl<T: Scalar> ForwardTrace<T> {
    pub fn logits(&self) -> &Tensor<T> {
        self.activations.last().expect("trace always holds the input")
    }

    pub fn layer_input(&self, index: usize) -> &Tensor<T> {
        &self.activations[index]
    }

    pub fn layer_output(&self, index: usize) -> &Tensor<T> {
        &self.activations[index + 1]
    }

    /// Index of the highest logit; ties break to the lower index.
    pub fn predicted_class(&self) -> usize {
        let logits = self.logits().data();
        let mut best = 0;
        for (i, &v) in logits.iter().enumerate() {
            if v > logits[best] {
                best = i;
            }
        }
        best
    }
}

impl<T: Scalar> ModelGraph<T> {
    /// Checks that layer shapes compose from the input descriptor down to
    /// exactly `class_count` logits.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::Manifest("model has no layers".into()));
        }
        let mut shape = self.input.shape();
        for (index, layer) in self.layers.iter().enumerate() {
            shape = layer.output_shape(&shape).map_err(|e| Error::Layer {
                index,
                kind: layer.kind().as_str().into(),
                message: e.to_string(),
            })?;
        }
        if shape != [self.class_count] {
            return Err(Error::shape(
                "model output",
                format!("[{}] logits", self.class_count),
                format!("{shape:?}"),
            ));
        }
        Ok(())
    }

    pub fn forward(&self, input: &Tensor<T>) -> Result<ForwardTrace<T>> {
        if input.shape() != self.input.shape() {
            return Err(Error::shape(
                "model input",
                format!("{:?}", self.input.shape()),
                format!("{:?}", input.shape()),
            ));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(input.clone());
        for (index, layer) in self.layers.iter().enumerate() {
            let next = layer.forward(activations.last().unwrap()).map_err(|e| Error::Layer {
                index,
                kind: layer.kind().as_str().into(),
                message: e.to_string(),
            })?;
            activations.push(next);
        }
        Ok(ForwardTrace { activations })
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.parameter_count()).sum()
    }
}
