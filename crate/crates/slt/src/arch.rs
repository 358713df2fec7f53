//! Named architecture builders.
//!
//! All architectures follow the edge-popup conventions: 3x3 same-padding
//! convolutions, 2x2 max pooling, no learned biases. `width` scales channel
//! counts and dense hidden widths (>= 1 channel is always kept).

use crate::error::{Error, Result};
use crate::nn::{ArchSpec, LayerSpec};

fn scaled(base: usize, width: f32) -> usize {
    ((base as f32 * width).round() as usize).max(1)
}

/// VGG-like Conv6: conv 64,64, pool, 128,128, pool, 256,256, pool,
/// dense 256,256,num_classes.
pub fn conv6(width: f32, input_shape: &[usize], num_classes: usize) -> Result<ArchSpec> {
    let (c, h, w) = spatial_input(input_shape)?;
    let (c1, c2, c3, d) = (scaled(64, width), scaled(128, width), scaled(256, width), scaled(256, width));
    if h / 8 == 0 || w / 8 == 0 {
        return Err(Error::Config(format!("input {h}x{w} too small for conv6")));
    }
    let flat = c3 * (h / 8) * (w / 8);
    Ok(ArchSpec {
        layers: vec![
            LayerSpec::conv2d(c, c1, 3, 3),
            LayerSpec::relu(),
            LayerSpec::conv2d(c1, c1, 3, 3),
            LayerSpec::relu(),
            LayerSpec::maxpool(),
            LayerSpec::conv2d(c1, c2, 3, 3),
            LayerSpec::relu(),
            LayerSpec::conv2d(c2, c2, 3, 3),
            LayerSpec::relu(),
            LayerSpec::maxpool(),
            LayerSpec::conv2d(c2, c3, 3, 3),
            LayerSpec::relu(),
            LayerSpec::conv2d(c3, c3, 3, 3),
            LayerSpec::relu(),
            LayerSpec::maxpool(),
            LayerSpec::dense(flat, d),
            LayerSpec::relu(),
            LayerSpec::dense(d, d),
            LayerSpec::relu(),
            LayerSpec::dense(d, num_classes),
        ],
        input_shape: input_shape.to_vec(),
        num_classes,
    })
}

/// Conv2: conv 64,64, pool, dense 256,256,num_classes.
pub fn conv2(width: f32, input_shape: &[usize], num_classes: usize) -> Result<ArchSpec> {
    let (c, h, w) = spatial_input(input_shape)?;
    let (c1, d) = (scaled(64, width), scaled(256, width));
    if h / 2 == 0 || w / 2 == 0 {
        return Err(Error::Config(format!("input {h}x{w} too small for conv2")));
    }
    let flat = c1 * (h / 2) * (w / 2);
    Ok(ArchSpec {
        layers: vec![
            LayerSpec::conv2d(c, c1, 3, 3),
            LayerSpec::relu(),
            LayerSpec::conv2d(c1, c1, 3, 3),
            LayerSpec::relu(),
            LayerSpec::maxpool(),
            LayerSpec::dense(flat, d),
            LayerSpec::relu(),
            LayerSpec::dense(d, d),
            LayerSpec::relu(),
            LayerSpec::dense(d, num_classes),
        ],
        input_shape: input_shape.to_vec(),
        num_classes,
    })
}

/// Conv2 with non-affine batch normalization after each conv layer.
pub fn conv2_bn(width: f32, input_shape: &[usize], num_classes: usize) -> Result<ArchSpec> {
    let (c, h, w) = spatial_input(input_shape)?;
    let (c1, d) = (scaled(64, width), scaled(256, width));
    if h / 2 == 0 || w / 2 == 0 {
        return Err(Error::Config(format!("input {h}x{w} too small for conv2_bn")));
    }
    let flat = c1 * (h / 2) * (w / 2);
    Ok(ArchSpec {
        layers: vec![
            LayerSpec::conv2d(c, c1, 3, 3),
            LayerSpec::batchnorm(c1),
            LayerSpec::relu(),
            LayerSpec::conv2d(c1, c1, 3, 3),
            LayerSpec::batchnorm(c1),
            LayerSpec::relu(),
            LayerSpec::maxpool(),
            LayerSpec::dense(flat, d),
            LayerSpec::relu(),
            LayerSpec::dense(d, num_classes),
        ],
        input_shape: input_shape.to_vec(),
        num_classes,
    })
}

/// Two-layer dense network for toy tasks: dense hidden, relu, dense out.
pub fn dense2(width: f32, input_shape: &[usize], num_classes: usize) -> Result<ArchSpec> {
    let feat: usize = input_shape.iter().product();
    let hidden = scaled(64, width);
    Ok(ArchSpec {
        layers: vec![
            LayerSpec::dense(feat, hidden),
            LayerSpec::relu(),
            LayerSpec::dense(hidden, num_classes),
        ],
        input_shape: input_shape.to_vec(),
        num_classes,
    })
}

fn spatial_input(shape: &[usize]) -> Result<(usize, usize, usize)> {
    match shape {
        [c, h, w] => Ok((*c, *h, *w)),
        other => Err(Error::Config(format!("expected (C,H,W) input shape, got {other:?}"))),
    }
}

/// Look up an architecture by its config-file name.
pub fn by_name(name: &str, width: f32, input_shape: &[usize], num_classes: usize) -> Result<ArchSpec> {
    match name {
        "conv6" => conv6(width, input_shape, num_classes),
        "conv2" => conv2(width, input_shape, num_classes),
        "conv2_bn" => conv2_bn(width, input_shape, num_classes),
        "dense2" => dense2(width, input_shape, num_classes),
        other => Err(Error::Config(format!("unknown architecture '{other}'"))),
    }
}
