//! Minimal deterministic tensor/layer engine with manual forward/backward.
//!
//! Supports the layer kinds used by the desk-scale architectures: dense,
//! 3x3-style same-padding convolutions, ReLU, 2x2 max pooling, global
//! average pooling, and non-affine batch normalization. No learned biases.
//!
//! Gradients are reported with respect to the *effective* (masked) weight
//! of every parameterized layer, which is what the score search needs.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Dense { fan_in: usize, fan_out: usize },
    Conv2d { c_in: usize, c_out: usize, kh: usize, kw: usize },
    Relu,
    MaxPool2x2,
    AvgPoolGlobal,
    /// Non-affine batch normalization: running statistics, no scale/shift.
    BatchNorm { channels: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerSpec {
    pub kind: LayerKind,
}

impl LayerSpec {
    pub fn dense(fan_in: usize, fan_out: usize) -> Self {
        LayerSpec { kind: LayerKind::Dense { fan_in, fan_out } }
    }

    pub fn conv2d(c_in: usize, c_out: usize, kh: usize, kw: usize) -> Self {
        assert!(kh >= 1 && kw >= 1, "conv kernel extents must be >= 1");
        LayerSpec { kind: LayerKind::Conv2d { c_in, c_out, kh, kw } }
    }

    pub fn relu() -> Self {
        LayerSpec { kind: LayerKind::Relu }
    }

    pub fn maxpool() -> Self {
        LayerSpec { kind: LayerKind::MaxPool2x2 }
    }

    pub fn avgpool_global() -> Self {
        LayerSpec { kind: LayerKind::AvgPoolGlobal }
    }

    pub fn batchnorm(channels: usize) -> Self {
        LayerSpec { kind: LayerKind::BatchNorm { channels } }
    }

    pub fn has_params(&self) -> bool {
        matches!(self.kind, LayerKind::Dense { .. } | LayerKind::Conv2d { .. })
    }

    /// Fan-in used by the initializers; for conv layers C_in * k_h * k_w.
    pub fn fan_in(&self) -> usize {
        match self.kind {
            LayerKind::Dense { fan_in, .. } => fan_in,
            LayerKind::Conv2d { c_in, kh, kw, .. } => c_in * kh * kw,
            _ => 0,
        }
    }

    pub fn fan_out(&self) -> usize {
        match self.kind {
            LayerKind::Dense { fan_out, .. } => fan_out,
            LayerKind::Conv2d { c_out, .. } => c_out,
            _ => 0,
        }
    }

    pub fn kernel(&self) -> Option<(usize, usize)> {
        match self.kind {
            LayerKind::Conv2d { kh, kw, .. } => Some((kh, kw)),
            _ => None,
        }
    }

    pub fn param_count(&self) -> usize {
        match self.kind {
            LayerKind::Dense { fan_in, fan_out } => fan_in * fan_out,
            LayerKind::Conv2d { c_in, c_out, kh, kw } => c_in * c_out * kh * kw,
            _ => 0,
        }
    }

    /// Row-major parameter shape; flat index order is canonical.
    pub fn param_shape(&self) -> Vec<usize> {
        match self.kind {
            LayerKind::Dense { fan_in, fan_out } => vec![fan_out, fan_in],
            LayerKind::Conv2d { c_in, c_out, kh, kw } => vec![c_out, c_in, kh, kw],
            _ => vec![0],
        }
    }

    /// Density scale used by the ERK allocation strategy.
    pub fn erk_scale(&self) -> f64 {
        match self.kind {
            LayerKind::Dense { fan_in, fan_out } => {
                (fan_in + fan_out) as f64 / (fan_in * fan_out) as f64
            }
            LayerKind::Conv2d { c_in, c_out, kh, kw } => {
                (c_in + c_out + kh + kw) as f64 / (c_in * c_out * kh * kw) as f64
            }
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchSpec {
    pub layers: Vec<LayerSpec>,
    pub input_shape: Vec<usize>,
    pub num_classes: usize,
}

impl ArchSpec {
    /// Indices of parameterized layers, in network order.
    pub fn param_layers(&self) -> Vec<usize> {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, l)| l.has_params())
            .map(|(i, _)| i)
            .collect()
    }

    pub fn total_params(&self) -> usize {
        self.layers.iter().map(|l| l.param_count()).sum()
    }

    /// Fresh per-layer slots for parameters: empty tensors where the layer
    /// has none.
    pub fn zero_params(&self) -> Vec<Tensor> {
        self.layers
            .iter()
            .map(|l| if l.has_params() { Tensor::zeros(&l.param_shape()) } else { Tensor::empty() })
            .collect()
    }

    pub fn ones_masks(&self) -> Vec<Tensor> {
        self.layers
            .iter()
            .map(|l| if l.has_params() { Tensor::ones(&l.param_shape()) } else { Tensor::empty() })
            .collect()
    }

    pub fn fresh_bn(&self) -> Vec<Option<BatchNormState>> {
        self.layers
            .iter()
            .map(|l| match l.kind {
                LayerKind::BatchNorm { channels } => Some(BatchNormState::new(channels)),
                _ => None,
            })
            .collect()
    }
}

/// Running statistics for non-affine batch normalization. These are the only
/// per-model state that cannot be regenerated from seed, so they get stored
/// at pack time.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNormState {
    pub running_mean: Vec<f32>,
    pub running_var: Vec<f32>,
    pub momentum: f32,
    pub eps: f32,
}

impl BatchNormState {
    pub fn new(channels: usize) -> Self {
        BatchNormState {
            running_mean: vec![0.0; channels],
            running_var: vec![1.0; channels],
            momentum: 0.9,
            eps: 1e-5,
        }
    }
}

enum Aux {
    None,
    Relu,
    /// Flat input index of each pooled maximum.
    PoolArg(Vec<usize>),
    Bn {
        xhat: Vec<f32>,
        inv_std: Vec<f32>,
        trained: bool,
    },
}

/// Activation record from a forward pass, sufficient for backward.
pub struct Cache {
    inputs: Vec<Tensor>,
    aux: Vec<Aux>,
    mode: Mode,
    batch: usize,
}

fn check_finite(t: &Tensor, layer: usize, kind: &'static str) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(Error::NonFinite { layer, kind })
    }
}

fn effective(w: &Tensor, m: &Tensor, layer: usize) -> Result<Tensor> {
    if w.shape != m.shape {
        return Err(Error::shape(
            layer,
            format!("mask shape {:?} vs param shape {:?}", m.shape, w.shape),
        ));
    }
    w.hadamard(m)
}

/// Run the network forward. Parameterized layers use the elementwise product
/// of `params` and `masks` as their effective weights.
pub fn forward(
    arch: &ArchSpec,
    params: &[Tensor],
    masks: &[Tensor],
    bn: &mut [Option<BatchNormState>],
    input: &Tensor,
    mode: Mode,
) -> Result<(Tensor, Cache)> {
    if params.len() != arch.layers.len() || masks.len() != arch.layers.len() {
        return Err(Error::shape(None, "params/masks length != layer count".to_string()));
    }
    if input.shape.len() < 2 {
        return Err(Error::shape(None, format!("input must be batched, got {:?}", input.shape)));
    }
    let batch = input.shape[0];
    let mut x = input.clone();
    let mut inputs = Vec::with_capacity(arch.layers.len());
    let mut aux = Vec::with_capacity(arch.layers.len());

    for (li, layer) in arch.layers.iter().enumerate() {
        inputs.push(x.clone());
        let (y, a) = match layer.kind {
            LayerKind::Dense { fan_in, fan_out } => {
                let w = effective(&params[li], &masks[li], li)?;
                (dense_forward(&w, &x, fan_in, fan_out, li)?, Aux::None)
            }
            LayerKind::Conv2d { c_in, c_out, kh, kw } => {
                let w = effective(&params[li], &masks[li], li)?;
                (conv_forward(&w, &x, c_in, c_out, kh, kw, li)?, Aux::None)
            }
            LayerKind::Relu => {
                let data = x.data.iter().map(|v| v.max(0.0)).collect();
                (Tensor { shape: x.shape.clone(), data }, Aux::Relu)
            }
            LayerKind::MaxPool2x2 => {
                let (y, arg) = maxpool_forward(&x, li)?;
                (y, Aux::PoolArg(arg))
            }
            LayerKind::AvgPoolGlobal => (avgpool_forward(&x, li)?, Aux::None),
            LayerKind::BatchNorm { channels } => {
                let state = bn[li]
                    .as_mut()
                    .ok_or_else(|| Error::shape(li, "batchnorm state missing".to_string()))?;
                let (y, xhat, inv_std, trained) = bn_forward(&x, channels, state, mode, li)?;
                (y, Aux::Bn { xhat, inv_std, trained })
            }
        };
        check_finite(&y, li, kind_name(layer))?;
        aux.push(a);
        x = y;
    }

    if x.len() != batch * arch.num_classes {
        return Err(Error::shape(
            None,
            format!("final output shape {:?}, expected ({batch}, {})", x.shape, arch.num_classes),
        ));
    }
    Ok((x, Cache { inputs, aux, mode, batch }))
}

fn kind_name(l: &LayerSpec) -> &'static str {
    match l.kind {
        LayerKind::Dense { .. } => "dense",
        LayerKind::Conv2d { .. } => "conv2d",
        LayerKind::Relu => "relu",
        LayerKind::MaxPool2x2 => "maxpool2x2",
        LayerKind::AvgPoolGlobal => "avgpool_global",
        LayerKind::BatchNorm { .. } => "batchnorm_nonaffine",
    }
}

/// Backpropagate `grad_logits` through a cached forward pass.
///
/// Returns, for every parameterized layer, the gradient with respect to the
/// effective (masked) weight, and the gradient with respect to the input.
pub fn backward(
    arch: &ArchSpec,
    params: &[Tensor],
    masks: &[Tensor],
    cache: &Cache,
    grad_logits: &Tensor,
) -> Result<(Vec<Tensor>, Tensor)> {
    let mut gy = grad_logits.clone();
    if gy.len() != cache.batch * arch.num_classes {
        return Err(Error::shape(None, format!("grad_logits shape {:?}", gy.shape)));
    }
    let mut grads: Vec<Tensor> = vec![Tensor::empty(); arch.layers.len()];

    for li in (0..arch.layers.len()).rev() {
        let x = &cache.inputs[li];
        let layer = &arch.layers[li];
        gy = match layer.kind {
            LayerKind::Dense { fan_in, fan_out } => {
                let w = effective(&params[li], &masks[li], li)?;
                let (gw, gx) = dense_backward(&w, x, &gy, fan_in, fan_out)?;
                grads[li] = gw;
                gx
            }
            LayerKind::Conv2d { c_in, c_out, kh, kw } => {
                let w = effective(&params[li], &masks[li], li)?;
                let (gw, gx) = conv_backward(&w, x, &gy, c_in, c_out, kh, kw)?;
                grads[li] = gw;
                gx
            }
            LayerKind::Relu => {
                let data =
                    x.data.iter().zip(&gy.data).map(|(v, g)| if *v > 0.0 { *g } else { 0.0 }).collect();
                Tensor { shape: x.shape.clone(), data }
            }
            LayerKind::MaxPool2x2 => {
                let Aux::PoolArg(arg) = &cache.aux[li] else {
                    return Err(Error::shape(li, "cache mismatch".to_string()));
                };
                let mut gx = vec![0.0; x.len()];
                for (o, &src) in arg.iter().enumerate() {
                    gx[src] += gy.data[o];
                }
                Tensor { shape: x.shape.clone(), data: gx }
            }
            LayerKind::AvgPoolGlobal => {
                let (h, w) = (x.shape[2], x.shape[3]);
                let scale = 1.0 / (h * w) as f32;
                let mut gx = vec![0.0; x.len()];
                for (bc, g) in gy.data.iter().enumerate() {
                    let base = bc * h * w;
                    for p in 0..h * w {
                        gx[base + p] = g * scale;
                    }
                }
                Tensor { shape: x.shape.clone(), data: gx }
            }
            LayerKind::BatchNorm { channels } => {
                let Aux::Bn { xhat, inv_std, trained } = &cache.aux[li] else {
                    return Err(Error::shape(li, "cache mismatch".to_string()));
                };
                bn_backward(x, &gy, xhat, inv_std, *trained, channels)?
            }
        };
    }
    let _ = cache.mode;
    Ok((grads, gy))
}

fn dense_forward(
    w: &Tensor,
    x: &Tensor,
    fan_in: usize,
    fan_out: usize,
    li: usize,
) -> Result<Tensor> {
    let batch = x.shape[0];
    let feat: usize = x.shape[1..].iter().product();
    if feat != fan_in {
        return Err(Error::shape(li, format!("dense expects fan_in {fan_in}, input has {feat}")));
    }
    let mut out = vec![0.0f32; batch * fan_out];
    for b in 0..batch {
        let xi = &x.data[b * fan_in..(b + 1) * fan_in];
        let oi = &mut out[b * fan_out..(b + 1) * fan_out];
        for (o, oo) in oi.iter_mut().enumerate() {
            let wr = &w.data[o * fan_in..(o + 1) * fan_in];
            let mut acc = 0.0f32;
            for i in 0..fan_in {
                acc += wr[i] * xi[i];
            }
            *oo = acc;
        }
    }
    Tensor::new(vec![batch, fan_out], out)
}

fn dense_backward(
    w: &Tensor,
    x: &Tensor,
    gy: &Tensor,
    fan_in: usize,
    fan_out: usize,
) -> Result<(Tensor, Tensor)> {
    let batch = x.shape[0];
    let mut gw = vec![0.0f32; fan_out * fan_in];
    let mut gx = vec![0.0f32; batch * fan_in];
    for b in 0..batch {
        let xi = &x.data[b * fan_in..(b + 1) * fan_in];
        let gyi = &gy.data[b * fan_out..(b + 1) * fan_out];
        let gxi = &mut gx[b * fan_in..(b + 1) * fan_in];
        for o in 0..fan_out {
            let g = gyi[o];
            if g == 0.0 {
                continue;
            }
            let wr = &w.data[o * fan_in..(o + 1) * fan_in];
            let gwr = &mut gw[o * fan_in..(o + 1) * fan_in];
            for i in 0..fan_in {
                gwr[i] += g * xi[i];
                gxi[i] += g * wr[i];
            }
        }
    }
    Ok((Tensor::new(vec![fan_out, fan_in], gw)?, Tensor { shape: x.shape.clone(), data: gx }))
}

/// Stride-1 convolution with same padding (pad = floor(k/2) per side).
fn conv_forward(
    w: &Tensor,
    x: &Tensor,
    c_in: usize,
    c_out: usize,
    kh: usize,
    kw: usize,
    li: usize,
) -> Result<Tensor> {
    if x.shape.len() != 4 || x.shape[1] != c_in {
        return Err(Error::shape(li, format!("conv expects (B,{c_in},H,W), got {:?}", x.shape)));
    }
    let (batch, h, wd) = (x.shape[0], x.shape[2], x.shape[3]);
    let (ph, pw) = (kh / 2, kw / 2);
    let mut out = vec![0.0f32; batch * c_out * h * wd];
    for b in 0..batch {
        for o in 0..c_out {
            let obase = (b * c_out + o) * h * wd;
            for i in 0..c_in {
                let ibase = (b * c_in + i) * h * wd;
                for r in 0..kh {
                    for s in 0..kw {
                        let wv = w.data[((o * c_in + i) * kh + r) * kw + s];
                        if wv == 0.0 {
                            continue;
                        }
                        // input row = out row + r - ph
                        for oy in 0..h {
                            let iy = oy + r;
                            if iy < ph || iy - ph >= h {
                                continue;
                            }
                            let iy = iy - ph;
                            let orow = obase + oy * wd;
                            let irow = ibase + iy * wd;
                            let (ox0, ix0) = if s >= pw { (0, s - pw) } else { (pw - s, 0) };
                            let span = (wd - ix0).min(wd - ox0);
                            for k in 0..span {
                                out[orow + ox0 + k] += wv * x.data[irow + ix0 + k];
                            }
                        }
                    }
                }
            }
        }
    }
    Tensor::new(vec![batch, c_out, h, wd], out)
}

fn conv_backward(
    w: &Tensor,
    x: &Tensor,
    gy: &Tensor,
    c_in: usize,
    c_out: usize,
    kh: usize,
    kw: usize,
) -> Result<(Tensor, Tensor)> {
    let (batch, h, wd) = (x.shape[0], x.shape[2], x.shape[3]);
    let (ph, pw) = (kh / 2, kw / 2);
    let mut gw = vec![0.0f32; c_out * c_in * kh * kw];
    let mut gx = vec![0.0f32; x.len()];
    for b in 0..batch {
        for o in 0..c_out {
            let obase = (b * c_out + o) * h * wd;
            for i in 0..c_in {
                let ibase = (b * c_in + i) * h * wd;
                for r in 0..kh {
                    for s in 0..kw {
                        let widx = ((o * c_in + i) * kh + r) * kw + s;
                        let wv = w.data[widx];
                        let mut acc = 0.0f32;
                        for oy in 0..h {
                            let iy = oy + r;
                            if iy < ph || iy - ph >= h {
                                continue;
                            }
                            let iy = iy - ph;
                            let orow = obase + oy * wd;
                            let irow = ibase + iy * wd;
                            let (ox0, ix0) = if s >= pw { (0, s - pw) } else { (pw - s, 0) };
                            let span = (wd - ix0).min(wd - ox0);
                            for k in 0..span {
                                let g = gy.data[orow + ox0 + k];
                                acc += g * x.data[irow + ix0 + k];
                                if wv != 0.0 {
                                    gx[irow + ix0 + k] += g * wv;
                                }
                            }
                        }
                        gw[widx] += acc;
                    }
                }
            }
        }
    }
    Ok((
        Tensor::new(vec![c_out, c_in, kh, kw], gw)?,
        Tensor { shape: x.shape.clone(), data: gx },
    ))
}

fn maxpool_forward(x: &Tensor, li: usize) -> Result<(Tensor, Vec<usize>)> {
    if x.shape.len() != 4 {
        return Err(Error::shape(li, format!("maxpool expects (B,C,H,W), got {:?}", x.shape)));
    }
    let (batch, c, h, w) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let (oh, ow) = (h / 2, w / 2);
    if oh == 0 || ow == 0 {
        return Err(Error::shape(li, format!("maxpool input too small: {:?}", x.shape)));
    }
    let mut out = vec![0.0f32; batch * c * oh * ow];
    let mut arg = vec![0usize; out.len()];
    for bc in 0..batch * c {
        let ibase = bc * h * w;
        let obase = bc * oh * ow;
        for oy in 0..oh {
            for ox in 0..ow {
                let mut best = f32::NEG_INFINITY;
                let mut bi = 0usize;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let idx = ibase + (oy * 2 + dy) * w + ox * 2 + dx;
                        let v = x.data[idx];
                        if v > best {
                            best = v;
                            bi = idx;
                        }
                    }
                }
                out[obase + oy * ow + ox] = best;
                arg[obase + oy * ow + ox] = bi;
            }
        }
    }
    Ok((Tensor::new(vec![batch, c, oh, ow], out)?, arg))
}

fn avgpool_forward(x: &Tensor, li: usize) -> Result<Tensor> {
    if x.shape.len() != 4 {
        return Err(Error::shape(li, format!("avgpool expects (B,C,H,W), got {:?}", x.shape)));
    }
    let (batch, c, h, w) = (x.shape[0], x.shape[1], x.shape[2], x.shape[3]);
    let scale = 1.0 / (h * w) as f32;
    let mut out = vec![0.0f32; batch * c];
    for bc in 0..batch * c {
        let mut acc = 0.0f32;
        for p in 0..h * w {
            acc += x.data[bc * h * w + p];
        }
        out[bc] = acc * scale;
    }
    Tensor::new(vec![batch, c], out)
}

/// Channel-wise normalization. In train mode uses batch statistics and folds
/// them into the running statistics; in eval mode uses running statistics.
fn bn_forward(
    x: &Tensor,
    channels: usize,
    state: &mut BatchNormState,
    mode: Mode,
    li: usize,
) -> Result<(Tensor, Vec<f32>, Vec<f32>, bool)> {
    let spatial = match x.shape.len() {
        2 => 1,
        4 => x.shape[2] * x.shape[3],
        _ => return Err(Error::shape(li, format!("batchnorm on shape {:?}", x.shape))),
    };
    if x.shape[1] != channels {
        return Err(Error::shape(li, format!("batchnorm expects {channels} channels, got {}", x.shape[1])));
    }
    let batch = x.shape[0];
    let count = (batch * spatial) as f32;

    let (mean, var) = match mode {
        Mode::Train => {
            let mut mean = vec![0.0f32; channels];
            let mut var = vec![0.0f32; channels];
            for b in 0..batch {
                for c in 0..channels {
                    let base = (b * channels + c) * spatial;
                    for p in 0..spatial {
                        mean[c] += x.data[base + p];
                    }
                }
            }
            for m in mean.iter_mut() {
                *m /= count;
            }
            for b in 0..batch {
                for c in 0..channels {
                    let base = (b * channels + c) * spatial;
                    for p in 0..spatial {
                        let d = x.data[base + p] - mean[c];
                        var[c] += d * d;
                    }
                }
            }
            for v in var.iter_mut() {
                *v /= count;
            }
            let m = state.momentum;
            for c in 0..channels {
                state.running_mean[c] = m * state.running_mean[c] + (1.0 - m) * mean[c];
                state.running_var[c] = m * state.running_var[c] + (1.0 - m) * var[c];
            }
            (mean, var)
        }
        Mode::Eval => (state.running_mean.clone(), state.running_var.clone()),
    };

    let inv_std: Vec<f32> = var.iter().map(|v| 1.0 / (v + state.eps).sqrt()).collect();
    let mut out = vec![0.0f32; x.len()];
    for b in 0..batch {
        for c in 0..channels {
            let base = (b * channels + c) * spatial;
            for p in 0..spatial {
                out[base + p] = (x.data[base + p] - mean[c]) * inv_std[c];
            }
        }
    }
    let xhat = out.clone();
    Ok((Tensor { shape: x.shape.clone(), data: out }, xhat, inv_std, mode == Mode::Train))
}

fn bn_backward(
    x: &Tensor,
    gy: &Tensor,
    xhat: &[f32],
    inv_std: &[f32],
    trained: bool,
    channels: usize,
) -> Result<Tensor> {
    let spatial = if x.shape.len() == 4 { x.shape[2] * x.shape[3] } else { 1 };
    let batch = x.shape[0];
    let count = (batch * spatial) as f32;
    let mut gx = vec![0.0f32; x.len()];
    if !trained {
        // Eval-mode stats are constants.
        for b in 0..batch {
            for c in 0..channels {
                let base = (b * channels + c) * spatial;
                for p in 0..spatial {
                    gx[base + p] = gy.data[base + p] * inv_std[c];
                }
            }
        }
        return Ok(Tensor { shape: x.shape.clone(), data: gx });
    }
    let mut sum_g = vec![0.0f32; channels];
    let mut sum_gx = vec![0.0f32; channels];
    for b in 0..batch {
        for c in 0..channels {
            let base = (b * channels + c) * spatial;
            for p in 0..spatial {
                sum_g[c] += gy.data[base + p];
                sum_gx[c] += gy.data[base + p] * xhat[base + p];
            }
        }
    }
    for b in 0..batch {
        for c in 0..channels {
            let base = (b * channels + c) * spatial;
            for p in 0..spatial {
                let i = base + p;
                gx[i] = inv_std[c]
                    * (gy.data[i] - sum_g[c] / count - xhat[i] * sum_gx[c] / count);
            }
        }
    }
    Ok(Tensor { shape: x.shape.clone(), data: gx })
}

/// Mean cross-entropy over the batch with a numerically stable log-sum-exp,
/// plus the gradient with respect to the logits.
pub fn cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<(f32, Tensor)> {
    let batch = logits.shape[0];
    let classes: usize = logits.shape[1..].iter().product();
    if labels.len() != batch {
        return Err(Error::shape(None, format!("{} labels for batch {batch}", labels.len())));
    }
    let mut loss = 0.0f64;
    let mut grad = vec![0.0f32; logits.len()];
    for b in 0..batch {
        let label = labels[b];
        if label >= classes {
            return Err(Error::LabelOutOfRange { label, num_classes: classes });
        }
        let row = &logits.data[b * classes..(b + 1) * classes];
        let max = row.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        let mut denom = 0.0f32;
        for &v in row {
            denom += (v - max).exp();
        }
        let lse = max + denom.ln();
        loss += (lse - row[label]) as f64;
        let grow = &mut grad[b * classes..(b + 1) * classes];
        for (c, g) in grow.iter_mut().enumerate() {
            let p = (row[c] - lse).exp();
            *g = (p - if c == label { 1.0 } else { 0.0 }) / batch as f32;
        }
    }
    Ok((
        (loss / batch as f64) as f32,
        Tensor { shape: logits.shape.clone(), data: grad },
    ))
}
