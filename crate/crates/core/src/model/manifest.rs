//! Model persistence: a JSON manifest describing the layer chain plus a
//! companion blob of little-endian f32 weights, CRC-32-checked.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::graph::{InputKind, ModelGraph};
use crate::model::layer::{Conv1d, Conv2d, Dense, DepthwiseConv2d, Layer, LayerKind, Padding, Pool};
use crate::model::tensor::Tensor;
use crate::scalar::{cast, Scalar};
use crate::util::crc32;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorRef {
    offset: u64,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerEntry {
    kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    stride: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    padding: Option<Padding>,
    #[serde(skip_serializing_if = "Option::is_none")]
    size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    weights: Option<TensorRef>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bias: Option<TensorRef>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    name: String,
    input: InputKind,
    class_count: usize,
    blob: String,
    blob_crc32: u32,
    layers: Vec<LayerEntry>,
}

struct BlobWriter {
    bytes: Vec<u8>,
}

impl BlobWriter {
    fn push<T: Scalar>(&mut self, tensor: &Tensor<T>) -> TensorRef {
        let offset = self.bytes.len() as u64;
        for &v in tensor.data() {
            self.bytes.extend_from_slice(&(v.to_f64().unwrap() as f32).to_le_bytes());
        }
        TensorRef { offset, shape: tensor.shape().to_vec() }
    }

    fn push_vec<T: Scalar>(&mut self, values: &[T]) -> TensorRef {
        let offset = self.bytes.len() as u64;
        for &v in values {
            self.bytes.extend_from_slice(&(v.to_f64().unwrap() as f32).to_le_bytes());
        }
        TensorRef { offset, shape: vec![values.len()] }
    }
}

struct BlobReader<'a> {
    bytes: &'a [u8],
}

impl<'a> BlobReader<'a> {
    fn take<T: Scalar>(&mut self, r: &TensorRef) -> Result<Tensor<T>> {
        let count: usize = r.shape.iter().product();
        let needed = r.offset + count as u64 * 4;
        if needed > self.bytes.len() as u64 {
            return Err(Error::BlobTooShort { needed, actual: self.bytes.len() as u64 });
        }
        let start = r.offset as usize;
        let data = self.bytes[start..start + count * 4]
            .chunks_exact(4)
            .map(|c| cast::<T>(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
            .collect();
        Tensor::new(r.shape.clone(), data)
    }

    fn take_vec<T: Scalar>(&mut self, r: &TensorRef) -> Result<Vec<T>> {
        Ok(self.take::<T>(r)?.into_data())
    }
}

fn require<V>(field: Option<V>, kind: &str, what: &str) -> Result<V> {
    field.ok_or_else(|| Error::Manifest(format!("{kind} layer missing {what}")))
}

/// Writes `manifest_path` (JSON) and `blob_path` (f32 LE weights); the
/// manifest records the blob's file name and CRC-32.
pub fn save_model<T: Scalar>(
    model: &ModelGraph<T>,
    manifest_path: &Path,
    blob_path: &Path,
) -> Result<()> {
    model.validate()?;
    let mut blob = BlobWriter { bytes: Vec::new() };
    let mut layers = Vec::with_capacity(model.layers.len());
    for layer in &model.layers {
        let mut entry = LayerEntry {
            kind: layer.kind().as_str().into(),
            stride: None,
            padding: None,
            size: None,
            weights: None,
            bias: None,
        };
        match layer {
            Layer::Dense(l) => {
                entry.weights = Some(blob.push(&l.weights));
                entry.bias = Some(blob.push_vec(&l.bias));
            }
            Layer::Conv1d(l) => {
                entry.stride = Some(l.stride);
                entry.padding = Some(l.padding);
                entry.weights = Some(blob.push(&l.weights));
                entry.bias = Some(blob.push_vec(&l.bias));
            }
            Layer::Conv2d(l) => {
                entry.stride = Some(l.stride);
                entry.padding = Some(l.padding);
                entry.weights = Some(blob.push(&l.weights));
                entry.bias = Some(blob.push_vec(&l.bias));
            }
            Layer::DepthwiseConv2d(l) => {
                entry.stride = Some(l.stride);
                entry.padding = Some(l.padding);
                entry.weights = Some(blob.push(&l.weights));
                entry.bias = Some(blob.push_vec(&l.bias));
            }
            Layer::MaxPool(p) | Layer::AvgPool(p) => {
                entry.size = Some(p.size);
                entry.stride = Some(p.stride);
            }
            Layer::Relu | Layer::Flatten | Layer::GlobalAvgPool => {}
        }
        layers.push(entry);
    }

    let blob_name = blob_path
        .file_name()
        .ok_or_else(|| Error::Manifest("blob path has no file name".into()))?
        .to_string_lossy()
        .into_owned();
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        name: model.name.clone(),
        input: model.input,
        class_count: model.class_count,
        blob: blob_name,
        blob_crc32: crc32(&blob.bytes),
        layers,
    };
    fs::write(blob_path, &blob.bytes)?;
    fs::write(manifest_path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Loads a model from its manifest; the blob is resolved relative to the
/// manifest's directory.
pub fn load_model<T: Scalar>(manifest_path: &Path) -> Result<ModelGraph<T>> {
    let manifest: Manifest = serde_json::from_str(&fs::read_to_string(manifest_path)?)?;
    if manifest.schema_version != SCHEMA_VERSION {
        return Err(Error::Manifest(format!(
            "unsupported schema version {}",
            manifest.schema_version
        )));
    }
    let blob_path = manifest_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&manifest.blob);
    let bytes = fs::read(&blob_path)?;

    let total: u64 = manifest
        .layers
        .iter()
        .flat_map(|l| [&l.weights, &l.bias])
        .flatten()
        .map(|r| r.shape.iter().product::<usize>() as u64 * 4)
        .sum();
    if (bytes.len() as u64) < total {
        return Err(Error::BlobTooShort { needed: total, actual: bytes.len() as u64 });
    }
    if bytes.len() as u64 > total {
        return Err(Error::Manifest(format!(
            "blob longer than manifest requires: {} bytes for {total}",
            bytes.len()
        )));
    }
    let actual_crc = crc32(&bytes);
    if actual_crc != manifest.blob_crc32 {
        return Err(Error::ChecksumMismatch { expected: manifest.blob_crc32, actual: actual_crc });
    }

    let mut reader = BlobReader { bytes: &bytes };
    let mut layers = Vec::with_capacity(manifest.layers.len());
    for entry in &manifest.layers {
        let kind = LayerKind::parse(&entry.kind)?;
        let layer = match kind {
            LayerKind::Dense => Layer::Dense(Dense {
                weights: reader.take(&require(entry.weights.clone(), "dense", "weights")?)?,
                bias: reader.take_vec(&require(entry.bias.clone(), "dense", "bias")?)?,
            }),
            LayerKind::Conv1d => Layer::Conv1d(Conv1d {
                weights: reader.take(&require(entry.weights.clone(), "conv1d", "weights")?)?,
                bias: reader.take_vec(&require(entry.bias.clone(), "conv1d", "bias")?)?,
                stride: require(entry.stride, "conv1d", "stride")?,
                padding: entry.padding.unwrap_or(Padding::Valid),
            }),
            LayerKind::Conv2d => Layer::Conv2d(Conv2d {
                weights: reader.take(&require(entry.weights.clone(), "conv2d", "weights")?)?,
                bias: reader.take_vec(&require(entry.bias.clone(), "conv2d", "bias")?)?,
                stride: require(entry.stride, "conv2d", "stride")?,
                padding: entry.padding.unwrap_or(Padding::Same),
            }),
            LayerKind::DepthwiseConv2d => Layer::DepthwiseConv2d(DepthwiseConv2d {
                weights: reader
                    .take(&require(entry.weights.clone(), "depthwise_conv2d", "weights")?)?,
                bias: reader.take_vec(&require(entry.bias.clone(), "depthwise_conv2d", "bias")?)?,
                stride: require(entry.stride, "depthwise_conv2d", "stride")?,
                padding: entry.padding.unwrap_or(Padding::Same),
            }),
            LayerKind::Relu => Layer::Relu,
            LayerKind::MaxPool => Layer::MaxPool(Pool {
                size: require(entry.size, "maxpool", "size")?,
                stride: require(entry.stride, "maxpool", "stride")?,
            }),
            LayerKind::AvgPool => Layer::AvgPool(Pool {
                size: require(entry.size, "avgpool", "size")?,
                stride: require(entry.stride, "avgpool", "stride")?,
            }),
            LayerKind::Flatten => Layer::Flatten,
            LayerKind::GlobalAvgPool => Layer::GlobalAvgPool,
        };
        layers.push(layer);
    }

    let model = ModelGraph {
        name: manifest.name,
        input: manifest.input,
        class_count: manifest.class_count,
        layers,
    };
    model.validate()?;
    Ok(model)
}
