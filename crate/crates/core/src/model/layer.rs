//! Layer kinds, their forward passes, and the input adjoints (vector-
//! Jacobian products) the LRP backward pass is built from.
//!
//! Activation layouts: 1-D data is `[channels, length]`, 2-D data is
//! `[channels, height, width]`, dense inputs are flat `[n]`.
//! Weight layouts: conv1d `[out_ch, in_ch, k]`, conv2d
//! `[out_ch, in_ch, kh, kw]`, depthwise `[ch, kh, kw]`, dense `[in, out]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::tensor::Tensor;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Padding {
    Valid,
    Same,
}

/// Resolves output extent and left pad for one spatial dimension.
fn padded_extent(len: usize, k: usize, stride: usize, padding: Padding) -> Result<(usize, usize)> {
    match padding {
        Padding::Valid => {
            if len < k {
                return Err(Error::InvalidArgument(format!(
                    "kernel {k} exceeds input extent {len} under valid padding"
                )));
            }
            Ok(((len - k) / stride + 1, 0))
        }
        Padding::Same => {
            let out = len.div_ceil(stride);
            let needed = ((out - 1) * stride + k).saturating_sub(len);
            Ok((out, needed / 2))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    Conv1d,
    Conv2d,
    DepthwiseConv2d,
    Relu,
    MaxPool,
    AvgPool,
    Flatten,
    GlobalAvgPool,
}

impl LayerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LayerKind::Dense => "dense",
            LayerKind::Conv1d => "conv1d",
            LayerKind::Conv2d => "conv2d",
            LayerKind::DepthwiseConv2d => "depthwise_conv2d",
            LayerKind::Relu => "relu",
            LayerKind::MaxPool => "maxpool",
            LayerKind::AvgPool => "avgpool",
            LayerKind::Flatten => "flatten",
            LayerKind::GlobalAvgPool => "global_avgpool",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "dense" => LayerKind::Dense,
            "conv1d" => LayerKind::Conv1d,
            "conv2d" => LayerKind::Conv2d,
            "depthwise_conv2d" => LayerKind::DepthwiseConv2d,
            "relu" => LayerKind::Relu,
            "maxpool" => LayerKind::MaxPool,
            "avgpool" => LayerKind::AvgPool,
            "flatten" => LayerKind::Flatten,
            "global_avgpool" => LayerKind::GlobalAvgPool,
            other => return Err(Error::UnknownLayerKind(other.to_string())),
        })
    }

    /// Layers that own weights and redistribute relevance via an LRP rule,
    /// as opposed to structural layers with fixed backward behavior.
    pub fn is_linear(self) -> bool {
        matches!(
            self,
            LayerKind::Dense | LayerKind::Conv1d | LayerKind::Conv2d | LayerKind::DepthwiseConv2d
        )
    }
}

#[derive(Debug, Clone)]
pub struct Dense<T> {
    pub weights: Tensor<T>, // [in, out]
    pub bias: Vec<T>,       // [out]
}

#[derive(Debug, Clone)]
pub struct Conv1d<T> {
    pub weights: Tensor<T>, // [out_ch, in_ch, k]
    pub bias: Vec<T>,
    pub stride: usize,
    pub padding: Padding,
}

#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub weights: Tensor<T>, // [out_ch, in_ch, kh, kw]
    pub bias: Vec<T>,
    pub stride: usize,
    pub padding: Padding,
}

#[derive(Debug, Clone)]
pub struct DepthwiseConv2d<T> {
    pub weights: Tensor<T>, // [ch, kh, kw]
    pub bias: Vec<T>,
    pub stride: usize,
    pub padding: Padding,
}

/// Spatial pooling window applied to every spatial dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pool {
    pub size: usize,
    pub stride: usize,
}

#[derive(Debug, Clone)]
pub enum Layer<T> {
    Dense(Dense<T>),
    Conv1d(Conv1d<T>),
    Conv2d(Conv2d<T>),
    DepthwiseConv2d(DepthwiseConv2d<T>),
    Relu,
    MaxPool(Pool),
    AvgPool(Pool),
    Flatten,
    GlobalAvgPool,
}

impl<T: Scalar> Dense<T> {
    fn dims(&self) -> (usize, usize) {
        (self.weights.shape()[0], self.weights.shape()[1])
    }

    pub fn forward_with(&self, x: &Tensor<T>, w: &Tensor<T>, bias: Option<&[T]>) -> Result<Tensor<T>> {
        let (n_in, n_out) = (w.shape()[0], w.shape()[1]);
        if x.shape() != [n_in] {
            return Err(Error::shape("dense input", format!("[{n_in}]"), format!("{:?}", x.shape())));
        }
        let mut out = match bias {
            Some(b) => b.to_vec(),
            None => vec![T::zero(); n_out],
        };
        for (i, &a) in x.data().iter().enumerate() {
            if a == T::zero() {
                continue;
            }
            let row = &w.data()[i * n_out..(i + 1) * n_out];
            for (o, &wij) in out.iter_mut().zip(row) {
                *o += a * wij;
            }
        }
        Tensor::new(vec![n_out], out)
    }

    pub fn vjp_with(&self, w: &Tensor<T>, ct: &Tensor<T>) -> Result<Tensor<T>> {
        let (n_in, n_out) = (w.shape()[0], w.shape()[1]);
        if ct.shape() != [n_out] {
            return Err(Error::shape("dense cotangent", format!("[{n_out}]"), format!("{:?}", ct.shape())));
        }
        let data = (0..n_in)
            .map(|i| {
                let row = &w.data()[i * n_out..(i + 1) * n_out];
                row.iter().zip(ct.data()).map(|(&wij, &c)| wij * c).sum()
            })
            .collect();
        Tensor::new(vec![n_in], data)
    }
}

impl<T: Scalar> Conv1d<T> {
    fn dims(&self) -> (usize, usize, usize) {
        let s = self.weights.shape();
        (s[0], s[1], s[2])
    }

    fn out_shape(&self, input: &[usize]) -> Result<(usize, usize)> {
        let (out_ch, in_ch, k) = self.dims();
        if input.len() != 2 || input[0] != in_ch {
            return Err(Error::shape("conv1d input", format!("[{in_ch}, len]"), format!("{input:?}")));
        }
        let (out_len, pad) = padded_extent(input[1], k, self.stride, self.padding)?;
        let _ = out_ch;
        Ok((out_len, pad))
    }

    pub fn forward_with(&self, x: &Tensor<T>, w: &Tensor<T>, bias: Option<&[T]>) -> Result<Tensor<T>> {
        let (out_ch, in_ch, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
        let (out_len, pad) = self.out_shape(x.shape())?;
        let l = x.shape()[1];
        let mut out = Tensor::zeros(vec![out_ch, out_len]);
        for oc in 0..out_ch {
            let b = bias.map_or(T::zero(), |b| b[oc]);
            for o in 0..out_len {
                let start = (o * self.stride) as isize - pad as isize;
                let mut acc = b;
                for ic in 0..in_ch {
                    let wbase = (oc * in_ch + ic) * k;
                    let xbase = ic * l;
                    for j in 0..k {
                        let idx = start + j as isize;
                        if idx >= 0 && (idx as usize) < l {
                            acc += w.data()[wbase + j] * x.data()[xbase + idx as usize];
                        }
                    }
                }
                out.data_mut()[oc * out_len + o] = acc;
            }
        }
        Ok(out)
    }

    pub fn vjp_with(&self, x_shape: &[usize], w: &Tensor<T>, ct: &Tensor<T>) -> Result<Tensor<T>> {
        let (out_ch, in_ch, k) = (w.shape()[0], w.shape()[1], w.shape()[2]);
        let (out_len, pad) = self.out_shape(x_shape)?;
        if ct.shape() != [out_ch, out_len] {
            return Err(Error::shape(
                "conv1d cotangent",
                format!("[{out_ch}, {out_len}]"),
                format!("{:?}", ct.shape()),
            ));
        }
        let l = x_shape[1];
        let mut gx = Tensor::zeros(vec![in_ch, l]);
        for oc in 0..out_ch {
            for o in 0..out_len {
                let c = ct.data()[oc * out_len + o];
                if c == T::zero() {
                    continue;
                }
                let start = (o * self.stride) as isize - pad as isize;
                for ic in 0..in_ch {
                    let wbase = (oc * in_ch + ic) * k;
                    let xbase = ic * l;
                    for j in 0..k {
                        let idx = start + j as isize;
                        if idx >= 0 && (idx as usize) < l {
                            gx.data_mut()[xbase + idx as usize] += w.data()[wbase + j] * c;
                        }
                    }
                }
            }
        }
        Ok(gx)
    }
}

impl<T: Scalar> Conv2d<T> {
    fn out_shape(&self, input: &[usize]) -> Result<(usize, usize, usize, usize)> {
        let s = self.weights.shape();
        let (in_ch, kh, kw) = (s[1], s[2], s[3]);
        if input.len() != 3 || input[0] != in_ch {
            return Err(Error::shape("conv2d input", format!("[{in_ch}, h, w]"), format!("{input:?}")));
        }
        let (oh, ph) = padded_extent(input[1], kh, self.stride, self.padding)?;
        let (ow, pw) = padded_extent(input[2], kw, self.stride, self.padding)?;
        Ok((oh, ow, ph, pw))
    }

    pub fn forward_with(&self, x: &Tensor<T>, w: &Tensor<T>, bias: Option<&[T]>) -> Result<Tensor<T>> {
        let s = w.shape();
        let (out_ch, in_ch, kh, kw) = (s[0], s[1], s[2], s[3]);
        let (oh, ow, ph, pw) = self.out_shape(x.shape())?;
        let (h, wid) = (x.shape()[1], x.shape()[2]);
        let mut out = Tensor::zeros(vec![out_ch, oh, ow]);
        for oc in 0..out_ch {
            let b = bias.map_or(T::zero(), |b| b[oc]);
            for oy in 0..oh {
                for ox in 0..ow {
                    let sy = (oy * self.stride) as isize - ph as isize;
                    let sx = (ox * self.stride) as isize - pw as isize;
                    let mut acc = b;
                    for ic in 0..in_ch {
                        for jy in 0..kh {
                            let y = sy + jy as isize;
                            if y < 0 || y as usize >= h {
                                continue;
                            }
                            let wbase = ((oc * in_ch + ic) * kh + jy) * kw;
                            let xbase = (ic * h + y as usize) * wid;
                            for jx in 0..kw {
                                let xx = sx + jx as isize;
                                if xx >= 0 && (xx as usize) < wid {
                                    acc += w.data()[wbase + jx] * x.data()[xbase + xx as usize];
                                }
                            }
                        }
                    }
                    out.data_mut()[(oc * oh + oy) * ow + ox] = acc;
                }
            }
        }
        Ok(out)
    }

    pub fn vjp_with(&self, x_shape: &[usize], w: &Tensor<T>, ct: &Tensor<T>) -> Result<Tensor<T>> {
        let s = w.shape();
        let (out_ch, in_ch, kh, kw) = (s[0], s[1], s[2], s[3]);
        let (oh, ow, ph, pw) = self.out_shape(x_shape)?;
        if ct.shape() != [out_ch, oh, ow] {
            return Err(Error::shape(
                "conv2d cotangent",
                format!("[{out_ch}, {oh}, {ow}]"),
                format!("{:?}", ct.shape()),
            ));
        }
        let (h, wid) = (x_shape[1], x_shape[2]);
        let mut gx = Tensor::zeros(vec![in_ch, h, wid]);
        for oc in 0..out_ch {
            for oy in 0..oh {
                for ox in 0..ow {
                    let c = ct.data()[(oc * oh + oy) * ow + ox];
                    if c == T::zero() {
                        continue;
                    }
                    let sy = (oy * self.stride) as isize - ph as isize;
                    let sx = (ox * self.stride) as isize - pw as isize;
                    for ic in 0..in_ch {
                        for jy in 0..kh {
                            let y = sy + jy as isize;
                            if y < 0 || y as usize >= h {
                                continue;
                            }
                            let wbase = ((oc * in_ch + ic) * kh + jy) * kw;
                            let xbase = (ic * h + y as usize) * wid;
                            for jx in 0..kw {
                                let xx = sx + jx as isize;
                                if xx >= 0 && (xx as usize) < wid {
                                    gx.data_mut()[xbase + xx as usize] += w.data()[wbase + jx] * c;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(gx)
    }
}

impl<T: Scalar> DepthwiseConv2d<T> {
    fn out_shape(&self, input: &[usize]) -> Result<(usize, usize, usize, usize)> {
        let s = self.weights.shape();
        let (ch, kh, kw) = (s[0], s[1], s[2]);
        if input.len() != 3 || input[0] != ch {
            return Err(Error::shape(
                "depthwise_conv2d input",
                format!("[{ch}, h, w]"),
                format!("{input:?}"),
            ));
        }
        let (oh, ph) = padded_extent(input[1], kh, self.stride, self.padding)?;
        let (ow, pw) = padded_extent(input[2], kw, self.stride, self.padding)?;
        Ok((oh, ow, ph, pw))
    }

    pub fn forward_with(&self, x: &Tensor<T>, w: &Tensor<T>, bias: Option<&[T]>) -> Result<Tensor<T>> {
        let s = w.shape();
        let (ch, kh, kw) = (s[0], s[1], s[2]);
        let (oh, ow, ph, pw) = self.out_shape(x.shape())?;
        let (h, wid) = (x.shape()[1], x.shape()[2]);
        let mut out = Tensor::zeros(vec![ch, oh, ow]);
        for c in 0..ch {
            let b = bias.map_or(T::zero(), |b| b[c]);
            for oy in 0..oh {
                for ox in 0..ow {
                    let sy = (oy * self.stride) as isize - ph as isize;
                    let sx = (ox * self.stride) as isize - pw as isize;
                    let mut acc = b;
                    for jy in 0..kh {
                        let y = sy + jy as isize;
                        if y < 0 || y as usize >= h {
                            continue;
                        }
                        let wbase = (c * kh + jy) * kw;
                        let xbase = (c * h + y as usize) * wid;
                        for jx in 0..kw {
                            let xx = sx + jx as isize;
                            if xx >= 0 && (xx as usize) < wid {
                                acc += w.data()[wbase + jx] * x.data()[xbase + xx as usize];
                            }
                        }
                    }
                    out.data_mut()[(c * oh + oy) * ow + ox] = acc;
                }
            }
        }
        Ok(out)
    }

    pub fn vjp_with(&self, x_shape: &[usize], w: &Tensor<T>, ct: &Tensor<T>) -> Result<Tensor<T>> {
        let s = w.shape();
        let (ch, kh, kw) = (s[0], s[1], s[2]);
        let (oh, ow, ph, pw) = self.out_shape(x_shape)?;
        if ct.shape() != [ch, oh, ow] {
            return Err(Error::shape(
                "depthwise cotangent",
                format!("[{ch}, {oh}, {ow}]"),
                format!("{:?}", ct.shape()),
            ));
        }
        let (h, wid) = (x_shape[1], x_shape[2]);
        let mut gx = Tensor::zeros(vec![ch, h, wid]);
        for c in 0..ch {
            for oy in 0..oh {
                for ox in 0..ow {
                    let g = ct.data()[(c * oh + oy) * ow + ox];
                    if g == T::zero() {
                        continue;
                    }
                    let sy = (oy * self.stride) as isize - ph as isize;
                    let sx = (ox * self.stride) as isize - pw as isize;
                    for jy in 0..kh {
                        let y = sy + jy as isize;
                        if y < 0 || y as usize >= h {
                            continue;
                        }
                        let wbase = (c * kh + jy) * kw;
                        let xbase = (c * h + y as usize) * wid;
                        for jx in 0..kw {
                            let xx = sx + jx as isize;
                            if xx >= 0 && (xx as usize) < wid {
                                gx.data_mut()[xbase + xx as usize] += w.data()[wbase + jx] * g;
                            }
                        }
                    }
                }
            }
        }
        Ok(gx)
    }
}

/// Iterates pooling windows of a `[C, spatial...]` tensor (1 or 2 spatial
/// dims), yielding (output flat index, member input flat indices).
fn pool_windows(shape: &[usize], pool: Pool) -> Result<(Vec<usize>, Vec<Vec<usize>>)> {
    match shape.len() {
        2 => {
            let (ch, l) = (shape[0], shape[1]);
            if l < pool.size {
                return Err(Error::InvalidArgument(format!(
                    "pool window {} exceeds input extent {l}",
                    pool.size
                )));
            }
            let out_l = (l - pool.size) / pool.stride + 1;
            let mut windows = Vec::with_capacity(ch * out_l);
            for c in 0..ch {
                for o in 0..out_l {
                    windows.push((0..pool.size).map(|j| c * l + o * pool.stride + j).collect());
                }
            }
            Ok((vec![ch, out_l], windows))
        }
        3 => {
            let (ch, h, w) = (shape[0], shape[1], shape[2]);
            if h < pool.size || w < pool.size {
                return Err(Error::InvalidArgument(format!(
                    "pool window {} exceeds input extent {h}x{w}",
                    pool.size
                )));
            }
            let (oh, ow) = ((h - pool.size) / pool.stride + 1, (w - pool.size) / pool.stride + 1);
            let mut windows = Vec::with_capacity(ch * oh * ow);
            for c in 0..ch {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut members = Vec::with_capacity(pool.size * pool.size);
                        for jy in 0..pool.size {
                            for jx in 0..pool.size {
                                members.push(
                                    (c * h + oy * pool.stride + jy) * w + ox * pool.stride + jx,
                                );
                            }
                        }
                        windows.push(members);
                    }
                }
            }
            Ok((vec![ch, oh, ow], windows))
        }
        other => Err(Error::InvalidArgument(format!(
            "pooling expects rank 2 or 3 input, got rank {other}"
        ))),
    }
}

impl<T: Scalar> Layer<T> {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Dense(_) => LayerKind::Dense,
            Layer::Conv1d(_) => LayerKind::Conv1d,
            Layer::Conv2d(_) => LayerKind::Conv2d,
            Layer::DepthwiseConv2d(_) => LayerKind::DepthwiseConv2d,
            Layer::Relu => LayerKind::Relu,
            Layer::MaxPool(_) => LayerKind::MaxPool,
            Layer::AvgPool(_) => LayerKind::AvgPool,
            Layer::Flatten => LayerKind::Flatten,
            Layer::GlobalAvgPool => LayerKind::GlobalAvgPool,
        }
    }

    pub fn weights(&self) -> Option<&Tensor<T>> {
        match self {
            Layer::Dense(l) => Some(&l.weights),
            Layer::Conv1d(l) => Some(&l.weights),
            Layer::Conv2d(l) => Some(&l.weights),
            Layer::DepthwiseConv2d(l) => Some(&l.weights),
            _ => None,
        }
    }

    pub fn bias(&self) -> Option<&[T]> {
        match self {
            Layer::Dense(l) => Some(&l.bias),
            Layer::Conv1d(l) => Some(&l.bias),
            Layer::Conv2d(l) => Some(&l.bias),
            Layer::DepthwiseConv2d(l) => Some(&l.bias),
            _ => None,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.weights().map_or(0, |w| w.len()) + self.bias().map_or(0, |b| b.len())
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Dense(l) => {
                let (n_in, n_out) = l.dims();
                if input != [n_in] {
                    return Err(Error::shape("dense input", format!("[{n_in}]"), format!("{input:?}")));
                }
                Ok(vec![n_out])
            }
            Layer::Conv1d(l) => {
                let (out_len, _) = l.out_shape(input)?;
                Ok(vec![l.dims().0, out_len])
            }
            Layer::Conv2d(l) => {
                let (oh, ow, _, _) = l.out_shape(input)?;
                Ok(vec![l.weights.shape()[0], oh, ow])
            }
            Layer::DepthwiseConv2d(l) => {
                let (oh, ow, _, _) = l.out_shape(input)?;
                Ok(vec![l.weights.shape()[0], oh, ow])
            }
            Layer::Relu => Ok(input.to_vec()),
            Layer::MaxPool(p) | Layer::AvgPool(p) => Ok(pool_windows(input, *p)?.0),
            Layer::Flatten => Ok(vec![input.iter().product()]),
            Layer::GlobalAvgPool => {
                if input.len() < 2 {
                    return Err(Error::InvalidArgument(
                        "global_avgpool expects channels + spatial dims".into(),
                    ));
                }
                Ok(vec![input[0]])
            }
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Dense(l) => l.forward_with(x, &l.weights, Some(&l.bias)),
            Layer::Conv1d(l) => l.forward_with(x, &l.weights, Some(&l.bias)),
            Layer::Conv2d(l) => l.forward_with(x, &l.weights, Some(&l.bias)),
            Layer::DepthwiseConv2d(l) => l.forward_with(x, &l.weights, Some(&l.bias)),
            Layer::Relu => Ok(x.map(|v| if v > T::zero() { v } else { T::zero() })),
            Layer::MaxPool(p) => {
                let (shape, windows) = pool_windows(x.shape(), *p)?;
                let data = windows
                    .iter()
                    .map(|w| w.iter().map(|&i| x.data()[i]).fold(T::neg_infinity(), T::max))
                    .collect();
                Tensor::new(shape, data)
            }
            Layer::AvgPool(p) => {
                let (shape, windows) = pool_windows(x.shape(), *p)?;
                let scale = T::one() / T::from_usize(windows[0].len()).unwrap();
                let data = windows
                    .iter()
                    .map(|w| w.iter().map(|&i| x.data()[i]).sum::<T>() * scale)
                    .collect();
                Tensor::new(shape, data)
            }
            Layer::Flatten => x.reshaped(vec![x.len()]),
            Layer::GlobalAvgPool => {
                let shape = self.output_shape(x.shape())?;
                let ch = shape[0];
                let spatial = x.len() / ch;
                let scale = T::one() / T::from_usize(spatial).unwrap();
                let data = (0..ch)
                    .map(|c| {
                        x.data()[c * spatial..(c + 1) * spatial].iter().copied().sum::<T>() * scale
                    })
                    .collect();
                Tensor::new(shape, data)
            }
        }
    }

    /// Input adjoint of the layer at `x` for cotangent `ct`: the gradient
    /// of `<ct, layer(x)>` with respect to `x`.
    pub fn vjp(&self, x: &Tensor<T>, ct: &Tensor<T>) -> Result<Tensor<T>> {
        match self {
            Layer::Dense(l) => l.vjp_with(&l.weights, ct),
            Layer::Conv1d(l) => l.vjp_with(x.shape(), &l.weights, ct),
            Layer::Conv2d(l) => l.vjp_with(x.shape(), &l.weights, ct),
            Layer::DepthwiseConv2d(l) => l.vjp_with(x.shape(), &l.weights, ct),
            Layer::Relu => {
                let mut gx = ct.clone();
                for (g, &v) in gx.data_mut().iter_mut().zip(x.data()) {
                    if v <= T::zero() {
                        *g = T::zero();
                    }
                }
                Ok(gx)
            }
            Layer::MaxPool(p) => {
                let (_, windows) = pool_windows(x.shape(), *p)?;
                let mut gx = Tensor::zeros(x.shape().to_vec());
                for (w, &c) in windows.iter().zip(ct.data()) {
                    let winner = *w
                        .iter()
                        .max_by(|&&a, &&b| x.data()[a].partial_cmp(&x.data()[b]).unwrap())
                        .unwrap();
                    gx.data_mut()[winner] += c;
                }
                Ok(gx)
            }
            Layer::AvgPool(p) => {
                let (_, windows) = pool_windows(x.shape(), *p)?;
                let mut gx = Tensor::zeros(x.shape().to_vec());
                let scale = T::one() / T::from_usize(windows[0].len()).unwrap();
                for (w, &c) in windows.iter().zip(ct.data()) {
                    for &i in w {
                        gx.data_mut()[i] += c * scale;
                    }
                }
                Ok(gx)
            }
            Layer::Flatten => ct.reshaped(x.shape().to_vec()),
            Layer::GlobalAvgPool => {
                let ch = x.shape()[0];
                let spatial = x.len() / ch;
                let scale = T::one() / T::from_usize(spatial).unwrap();
                let mut gx = Tensor::zeros(x.shape().to_vec());
                for c in 0..ch {
                    for i in 0..spatial {
                        gx.data_mut()[c * spatial + i] = ct.data()[c] * scale;
                    }
                }
                Ok(gx)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
        Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
    }

    #[test]
    fn dense_hand_example() {
        // y = Wx with W = [[1,2],[3,4]], x = [1,1] -> [3, 7]. In the
        // [in, out] layout that is W^T stored row-major.
        let layer = Layer::Dense(Dense {
            weights: t(&[2, 2], &[1.0, 3.0, 2.0, 4.0]),
            bias: vec![0.0, 0.0],
        });
        let y = layer.forward(&t(&[2], &[1.0, 1.0])).unwrap();
        assert_eq!(y.data(), &[3.0, 7.0]);
    }

    #[test]
    fn relu_clamps() {
        let y = Layer::<f64>::Relu.forward(&t(&[3], &[-1.0, 0.0, 2.0])).unwrap();
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn conv1d_hand_example() {
        // kernel [1,-1], stride 1, valid, input [3,1,4] -> [3-1, 1-4] = [2,-3]
        let layer = Layer::Conv1d(Conv1d {
            weights: t(&[1, 1, 2], &[1.0, -1.0]),
            bias: vec![0.0],
            stride: 1,
            padding: Padding::Valid,
        });
        let y = layer.forward(&t(&[1, 3], &[3.0, 1.0, 4.0])).unwrap();
        assert_eq!(y.shape(), &[1, 2]);
        assert_eq!(y.data(), &[2.0, -3.0]);
    }

    #[test]
    fn same_padding_preserves_extent_at_stride_one() {
        let layer = Layer::Conv2d(Conv2d {
            weights: Tensor::zeros(vec![2, 1, 3, 3]),
            bias: vec![0.0; 2],
            stride: 1,
            padding: Padding::Same,
        });
        assert_eq!(layer.output_shape(&[1, 8, 5]).unwrap(), vec![2, 8, 5]);

        let strided = Layer::Conv2d(Conv2d {
            weights: Tensor::zeros(vec![2, 1, 3, 3]),
            bias: vec![0.0; 2],
            stride: 2,
            padding: Padding::Same,
        });
        assert_eq!(strided.output_shape(&[1, 8, 5]).unwrap(), vec![2, 4, 3]);
    }

    #[test]
    fn maxpool_takes_window_maxima() {
        let layer = Layer::<f64>::MaxPool(Pool { size: 2, stride: 2 });
        let y = layer.forward(&t(&[1, 6], &[1.0, 5.0, 2.0, 2.0, -3.0, -1.0])).unwrap();
        assert_eq!(y.data(), &[5.0, 2.0, -1.0]);
    }

    #[test]
    fn global_avgpool_averages_spatial() {
        let layer = Layer::<f64>::GlobalAvgPool;
        let y = layer.forward(&t(&[2, 2, 2], &[1.0, 2.0, 3.0, 4.0, 10.0, 10.0, 20.0, 20.0])).unwrap();
        assert_eq!(y.data(), &[2.5, 15.0]);
    }

    #[test]
    fn linearity_without_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let w: Vec<f64> = (0..2 * 3 * 5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let layer = Layer::Conv1d(Conv1d {
            weights: t(&[2, 3, 5], &w),
            bias: vec![0.0; 2],
            stride: 2,
            padding: Padding::Valid,
        });
        let x: Vec<f64> = (0..3 * 17).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x1 = t(&[3, 17], &x);
        let x3 = x1.map(|v| 3.0 * v);
        let y1 = layer.forward(&x1).unwrap();
        let y3 = layer.forward(&x3).unwrap();
        for (a, b) in y1.data().iter().zip(y3.data()) {
            assert!((3.0 * a - b).abs() <= 1e-6 * b.abs().max(1e-9));
        }
    }

    /// Central finite differences of `<ct, layer(x)>` against the analytic vjp.
    fn check_gradient(layer: &Layer<f64>, x: &Tensor<f64>, tol: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        let out_shape = layer.output_shape(x.shape()).unwrap();
        let ct_len: usize = out_shape.iter().product();
        let ct_data: Vec<f64> = (0..ct_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let ct = Tensor::new(out_shape, ct_data).unwrap();
        let analytic = layer.vjp(x, &ct).unwrap();

        let objective = |input: &Tensor<f64>| -> f64 {
            layer
                .forward(input)
                .unwrap()
                .data()
                .iter()
                .zip(ct.data())
                .map(|(&y, &c)| y * c)
                .sum()
        };
        let step = 1e-4;
        for i in 0..x.len() {
            let mut plus = x.clone();
            plus.data_mut()[i] += step;
            let mut minus = x.clone();
            minus.data_mut()[i] -= step;
            let fd = (objective(&plus) - objective(&minus)) / (2.0 * step);
            let a = analytic.data()[i];
            assert!(
                (fd - a).abs() <= tol * a.abs().max(1.0),
                "index {i}: fd {fd} vs analytic {a}"
            );
        }
    }

    #[test]
    fn finite_difference_gradients_all_kinds() {
        let mut rng = ChaCha8Rng::seed_from_u64(57);
        let mut rand_t = |shape: &[usize]| {
            let n: usize = shape.iter().product();
            Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .unwrap()
        };

        let dense = Layer::Dense(Dense { weights: rand_t(&[6, 4]), bias: vec![0.1; 4] });
        check_gradient(&dense, &rand_t(&[6]), 1e-3);

        let conv1 = Layer::Conv1d(Conv1d {
            weights: rand_t(&[2, 3, 4]),
            bias: vec![0.2; 2],
            stride: 2,
            padding: Padding::Valid,
        });
        check_gradient(&conv1, &rand_t(&[3, 12]), 1e-3);

        let conv2 = Layer::Conv2d(Conv2d {
            weights: rand_t(&[2, 2, 3, 3]),
            bias: vec![-0.3; 2],
            stride: 2,
            padding: Padding::Same,
        });
        check_gradient(&conv2, &rand_t(&[2, 7, 6]), 1e-3);

        let dw = Layer::DepthwiseConv2d(DepthwiseConv2d {
            weights: rand_t(&[3, 3, 3]),
            bias: vec![0.05; 3],
            stride: 1,
            padding: Padding::Same,
        });
        check_gradient(&dw, &rand_t(&[3, 5, 5]), 1e-3);

        check_gradient(&Layer::Relu, &rand_t(&[11]).reshaped(vec![11]).unwrap(), 1e-3);
        check_gradient(&Layer::MaxPool(Pool { size: 2, stride: 2 }), &rand_t(&[2, 8]), 1e-3);
        check_gradient(&Layer::AvgPool(Pool { size: 2, stride: 2 }), &rand_t(&[1, 6, 6]), 1e-3);
        check_gradient(&Layer::Flatten, &rand_t(&[2, 3, 4]), 1e-3);
        check_gradient(&Layer::GlobalAvgPool, &rand_t(&[4, 5]), 1e-3);
    }

    #[test]
    fn depthwise_pointwise_equals_separable_full_conv() {
        // A full conv whose kernel is u x v^T per (out, in) pair equals
        // depthwise-by-v? Simplest equivalence: depthwise(k) then pointwise
        // 1x1 mixing equals a full conv2d with w[o][i][y][x] = p[o][i]*d[i][y][x].
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        let (ch_in, ch_out, kh, kw) = (3, 2, 3, 3);
        let d: Vec<f64> = (0..ch_in * kh * kw).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let p: Vec<f64> = (0..ch_out * ch_in).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let dw = Layer::Conv2d(Conv2d {
            weights: t(&[ch_out, ch_in, kh, kw], &{
                let mut full = vec![0.0; ch_out * ch_in * kh * kw];
                for o in 0..ch_out {
                    for i in 0..ch_in {
                        for y in 0..kh {
                            for x in 0..kw {
                                full[((o * ch_in + i) * kh + y) * kw + x] =
                                    p[o * ch_in + i] * d[(i * kh + y) * kw + x];
                            }
                        }
                    }
                }
                full
            }),
            bias: vec![0.0; ch_out],
            stride: 1,
            padding: Padding::Valid,
        });

        let depth = Layer::DepthwiseConv2d(DepthwiseConv2d {
            weights: t(&[ch_in, kh, kw], &d),
            bias: vec![0.0; ch_in],
            stride: 1,
            padding: Padding::Valid,
        });
        let point = Layer::Conv2d(Conv2d {
            weights: t(&[ch_out, ch_in, 1, 1], &p),
            bias: vec![0.0; ch_out],
            stride: 1,
            padding: Padding::Valid,
        });

        let x_data: Vec<f64> = (0..ch_in * 6 * 7).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = t(&[ch_in, 6, 7], &x_data);
        let direct = dw.forward(&x).unwrap();
        let pair = point.forward(&depth.forward(&x).unwrap()).unwrap();
        assert_eq!(direct.shape(), pair.shape());
        for (a, b) in direct.data().iter().zip(pair.data()) {
            assert!((a - b).abs() < 1e-6 * a.abs().max(1.0));
        }
    }

    #[test]
    fn shape_errors_are_reported() {
        let layer = Layer::Conv1d(Conv1d {
            weights: Tensor::<f64>::zeros(vec![1, 2, 3]),
            bias: vec![0.0],
            stride: 1,
            padding: Padding::Valid,
        });
        assert!(layer.forward(&t(&[1, 5], &[0.0; 5])).is_err()); // wrong channels
        assert!(layer.forward(&t(&[2, 2], &[0.0; 4])).is_err()); // shorter than kernel
    }
}
