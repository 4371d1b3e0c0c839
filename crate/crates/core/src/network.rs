//! Layer and network descriptions plus the trusted reference engine.
//!
//! The reference engine computes every layer with exact integer arithmetic
//! and serves as the oracle all crossbar backends are checked against:
//! binary layers through [`xnor_popcount_dot`], full-precision boundary
//! layers through plain multiply-accumulate. Networks keep the usual binary
//! convention of full-precision first and last layers with binary hidden
//! layers in between.

use crate::bits::{xnor_popcount_dot, BitMatrix, BitVector, DotResult};
use crate::error::{Result, SimError};

/// Logical activation shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Flat(usize),
    Chw {
        channels: usize,
        height: usize,
        width: usize,
    },
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Flat(n) => n,
            Shape::Chw {
                channels,
                height,
                width,
            } => channels * height * width,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl std::fmt::Display for Shape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Shape::Flat(n) => write!(f, "[{n}]"),
            Shape::Chw {
                channels,
                height,
                width,
            } => write!(f, "[{channels}x{height}x{width}]"),
        }
    }
}

/// Convolution geometry; the lowered kernel vector has length
/// `in_channels * kernel_h * kernel_w`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub pad: usize,
}

impl ConvGeometry {
    pub fn lowered_len(&self) -> usize {
        self.in_channels * self.kernel_h * self.kernel_w
    }

    /// Output spatial dims for an input of `height x width`.
    pub fn out_dims(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        if self.stride == 0 {
            return Err(SimError::InvalidConfig {
                detail: "conv stride must be >= 1".into(),
            });
        }
        let h = height + 2 * self.pad;
        let w = width + 2 * self.pad;
        if h < self.kernel_h || w < self.kernel_w {
            return Err(SimError::InvalidConfig {
                detail: format!(
                    "kernel {}x{} does not fit padded input {h}x{w}",
                    self.kernel_h, self.kernel_w
                ),
            });
        }
        Ok((
            (h - self.kernel_h) / self.stride + 1,
            (w - self.kernel_w) / self.stride + 1,
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerKind {
    Dense { inputs: usize, outputs: usize },
    Conv2d(ConvGeometry),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Binary,
    Full,
}

/// Full-precision weights, column-major: column `j` holds output neuron `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<i32>,
}

impl IntMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<i32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(SimError::InvalidConfig {
                detail: format!(
                    "{rows}x{cols} integer matrix needs {} values, got {}",
                    rows * cols,
                    data.len()
                ),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> i32 {
        self.data[col * self.rows + row]
    }

    pub fn data(&self) -> &[i32] {
        &self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights {
    Binary(BitMatrix),
    Full(IntMatrix),
}

/// One layer: kind (dense or conv), weights, and per-output thresholds.
///
/// Thresholds are per output neuron for dense layers and per output channel
/// for convolutions. Binary layers use them as the sign-activation cutoff;
/// full layers use them to binarize their output when it feeds a binary
/// layer (the final layer's thresholds are unused).
#[derive(Debug, Clone, PartialEq)]
pub struct BnnLayer {
    pub kind: LayerKind,
    pub weights: LayerWeights,
    pub thresholds: Vec<i32>,
}

impl BnnLayer {
    pub fn precision(&self) -> Precision {
        match self.weights {
            LayerWeights::Binary(_) => Precision::Binary,
            LayerWeights::Full(_) => Precision::Full,
        }
    }

    /// Lowered weight-vector length (rows of the weight matrix).
    pub fn input_len(&self) -> usize {
        match self.kind {
            LayerKind::Dense { inputs, .. } => inputs,
            LayerKind::Conv2d(g) => g.lowered_len(),
        }
    }

    /// Number of weight vectors (columns of the weight matrix).
    pub fn output_units(&self) -> usize {
        match self.kind {
            LayerKind::Dense { outputs, .. } => outputs,
            LayerKind::Conv2d(g) => g.out_channels,
        }
    }

    fn weight_dims(&self) -> (usize, usize) {
        match &self.weights {
            LayerWeights::Binary(m) => (m.rows(), m.cols()),
            LayerWeights::Full(m) => (m.rows(), m.cols()),
        }
    }

    fn validate(&self, index: usize) -> Result<()> {
        let (rows, cols) = self.weight_dims();
        if rows != self.input_len() || cols != self.output_units() {
            return Err(SimError::ShapeMismatch {
                layer: index,
                detail: format!(
                    "weight matrix is {rows}x{cols}, layer geometry wants {}x{}",
                    self.input_len(),
                    self.output_units()
                ),
            });
        }
        if self.thresholds.len() != self.output_units() {
            return Err(SimError::ShapeMismatch {
                layer: index,
                detail: format!(
                    "{} thresholds for {} output units",
                    self.thresholds.len(),
                    self.output_units()
                ),
            });
        }
        Ok(())
    }

    /// Shape produced when fed an activation of `input` shape.
    pub fn output_shape(&self, index: usize, input: &Shape) -> Result<Shape> {
        match self.kind {
            LayerKind::Dense { inputs, outputs } => {
                if input.len() != inputs {
                    return Err(SimError::ShapeMismatch {
                        layer: index,
                        detail: format!("dense layer wants {inputs} inputs, got {input}"),
                    });
                }
                Ok(Shape::Flat(outputs))
            }
            LayerKind::Conv2d(g) => match *input {
                Shape::Chw {
                    channels,
                    height,
                    width,
                } if channels == g.in_channels => {
                    let (oh, ow) = g.out_dims(height, width).map_err(|_| {
                        SimError::ShapeMismatch {
                            layer: index,
                            detail: format!(
                                "kernel {}x{} stride {} pad {} does not fit {input}",
                                g.kernel_h, g.kernel_w, g.stride, g.pad
                            ),
                        }
                    })?;
                    Ok(Shape::Chw {
                        channels: g.out_channels,
                        height: oh,
                        width: ow,
                    })
                }
                _ => Err(SimError::ShapeMismatch {
                    layer: index,
                    detail: format!("conv layer wants {} input channels, got {input}", g.in_channels),
                }),
            },
        }
    }
}

/// An activation tensor: packed bits for binary layers, exact integers for
/// full-precision boundary layers.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Bits { bits: BitVector, shape: Shape },
    Ints { values: Vec<i64>, shape: Shape },
}

impl Tensor {
    pub fn shape(&self) -> Shape {
        match self {
            Tensor::Bits { shape, .. } | Tensor::Ints { shape, .. } => *shape,
        }
    }

    pub fn flat_bits(bits: BitVector) -> Self {
        let shape = Shape::Flat(bits.len());
        Tensor::Bits { bits, shape }
    }

    pub fn flat_ints(values: Vec<i64>) -> Self {
        let shape = Shape::Flat(values.len());
        Tensor::Ints { values, shape }
    }

    /// Decode to integers: bits become bipolar +/-1, integers pass through.
    pub fn to_i64(&self) -> Vec<i64> {
        match self {
            Tensor::Bits { bits, .. } => {
                bits.iter().map(|b| 2 * i64::from(b) - 1).collect()
            }
            Tensor::Ints { values, .. } => values.clone(),
        }
    }
}

/// An ordered stack of layers with validated composition.
#[derive(Debug, Clone, PartialEq)]
pub struct BnnNetwork {
    layers: Vec<BnnLayer>,
    input_shape: Shape,
    class_count: usize,
}

impl BnnNetwork {
    /// Validates the boundary-precision convention (first and last layers
    /// full, all hidden layers binary), per-layer weight geometry, shape
    /// composition, and that the final layer emits `class_count` scores.
    pub fn new(layers: Vec<BnnLayer>, input_shape: Shape, class_count: usize) -> Result<Self> {
        if layers.is_empty() {
            return Err(SimError::InvalidConfig {
                detail: "network needs at least one layer".into(),
            });
        }
        let last = layers.len() - 1;
        for (i, layer) in layers.iter().enumerate() {
            layer.validate(i)?;
            let boundary = i == 0 || i == last;
            match (boundary, layer.precision()) {
                (true, Precision::Binary) => {
                    return Err(SimError::ShapeMismatch {
                        layer: i,
                        detail: "first and last layers must be full precision".into(),
                    })
                }
                (false, Precision::Full) => {
                    return Err(SimError::ShapeMismatch {
                        layer: i,
                        detail: "hidden layers must be binary".into(),
                    })
                }
                _ => {}
            }
        }
        let mut shape = input_shape;
        for (i, layer) in layers.iter().enumerate() {
            shape = layer.output_shape(i, &shape)?;
        }
        if shape.len() != class_count {
            return Err(SimError::ShapeMismatch {
                layer: last,
                detail: format!("final layer emits {shape}, expected {class_count} class scores"),
            });
        }
        Ok(Self {
            layers,
            input_shape,
            class_count,
        })
    }

    pub fn layers(&self) -> &[BnnLayer] {
        &self.layers
    }

    pub fn input_shape(&self) -> Shape {
        self.input_shape
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }
}

/// Lower a bit feature map into patch columns so a convolution becomes one
/// dot product per (output pixel, kernel) pair.
///
/// Patch row index is `c * kh * kw + ky * kw + kx`; patch column `p` maps to
/// output pixel `(p / out_w, p % out_w)`. Padded positions contribute 0-bits
/// (bipolar -1), the same convention the sliding-window reference uses.
pub fn im2col_bits(
    geom: &ConvGeometry,
    input: &BitVector,
    height: usize,
    width: usize,
) -> Result<(BitMatrix, (usize, usize))> {
    let expect = geom.in_channels * height * width;
    if input.len() != expect {
        return Err(SimError::LengthMismatch {
            context: "im2col input feature map",
            left: input.len(),
            right: expect,
        });
    }
    let (oh, ow) = geom.out_dims(height, width)?;
    let mut patches = BitMatrix::zeros(geom.lowered_len(), oh * ow);
    for_each_patch_index(geom, height, width, |patch, row, src| {
        if let Some(idx) = src {
            if input.get(idx) {
                patches.set(row, patch, true);
            }
        }
    });
    Ok((patches, (oh, ow)))
}

/// Patch columns of a lowered integer feature map, one `Vec` per patch.
pub type IntPatches = Vec<Vec<i64>>;

/// Integer twin of [`im2col_bits`] for full-precision convolutions; padded
/// positions contribute 0.
pub fn im2col_ints(
    geom: &ConvGeometry,
    input: &[i64],
    height: usize,
    width: usize,
) -> Result<(IntPatches, (usize, usize))> {
    let expect = geom.in_channels * height * width;
    if input.len() != expect {
        return Err(SimError::LengthMismatch {
            context: "im2col input feature map",
            left: input.len(),
            right: expect,
        });
    }
    let (oh, ow) = geom.out_dims(height, width)?;
    let mut patches = vec![vec![0i64; geom.lowered_len()]; oh * ow];
    for_each_patch_index(geom, height, width, |patch, row, src| {
        if let Some(idx) = src {
            patches[patch][row] = input[idx];
        }
    });
    Ok((patches, (oh, ow)))
}

/// Visit every (patch, patch-row) cell with its source index in the input
/// feature map, or `None` for padding.
fn for_each_patch_index<F: FnMut(usize, usize, Option<usize>)>(
    geom: &ConvGeometry,
    height: usize,
    width: usize,
    mut f: F,
) {
    let (oh, ow) = geom
        .out_dims(height, width)
        .expect("caller validated geometry");
    for oy in 0..oh {
        for ox in 0..ow {
            let patch = oy * ow + ox;
            for c in 0..geom.in_channels {
                for ky in 0..geom.kernel_h {
                    for kx in 0..geom.kernel_w {
                        let row = c * geom.kernel_h * geom.kernel_w + ky * geom.kernel_w + kx;
                        let y = (oy * geom.stride + ky) as isize - geom.pad as isize;
                        let x = (ox * geom.stride + kx) as isize - geom.pad as isize;
                        let src = if y >= 0 && (y as usize) < height && x >= 0 && (x as usize) < width
                        {
                            Some(c * height * width + y as usize * width + x as usize)
                        } else {
                            None
                        };
                        f(patch, row, src);
                    }
                }
            }
        }
    }
}

/// Pre-activation values and the resulting activation of one layer.
#[derive(Debug, Clone)]
pub struct LayerEval {
    /// Binary layers: the bipolar dot per output neuron. Full layers: the
    /// exact multiply-accumulate sums.
    pub pre_activation: Vec<i64>,
    pub output: Tensor,
}

/// Run one layer on the reference engine.
///
/// Binary layers emit bits (`dot >= threshold`); full layers emit exact
/// integer sums, leaving any binarization to the network-level composition.
pub fn reference_layer_forward(layer: &BnnLayer, input: &Tensor) -> Result<LayerEval> {
    match (&layer.weights, layer.kind) {
        (LayerWeights::Binary(w), LayerKind::Dense { inputs, .. }) => {
            let bits = match input {
                Tensor::Bits { bits, .. } => bits,
                Tensor::Ints { .. } => {
                    return Err(SimError::ShapeMismatch {
                        layer: 0,
                        detail: "binary layer fed integer activations".into(),
                    })
                }
            };
            if bits.len() != inputs {
                return Err(SimError::LengthMismatch {
                    context: "dense layer input",
                    left: bits.len(),
                    right: inputs,
                });
            }
            let dots = binary_dots(w, std::slice::from_ref(bits))?;
            let pre = dots[0].iter().map(|d| d.value).collect::<Vec<_>>();
            let out = threshold_bits(&pre, &layer.thresholds, 1);
            Ok(LayerEval {
                pre_activation: pre,
                output: Tensor::flat_bits(out),
            })
        }
        (LayerWeights::Binary(w), LayerKind::Conv2d(g)) => {
            let (bits, (h, wd)) = expect_chw_bits(input)?;
            let (patches, (oh, ow)) = im2col_bits(&g, bits, h, wd)?;
            let cols: Vec<BitVector> = (0..patches.cols()).map(|p| patches.column(p)).collect();
            let dots = binary_dots(w, &cols)?;
            // Neuron order: channel-major over output pixels.
            let mut pre = Vec::with_capacity(g.out_channels * oh * ow);
            for o in 0..g.out_channels {
                pre.extend(dots.iter().map(|per_patch| per_patch[o].value));
            }
            let out = threshold_bits(&pre, &layer.thresholds, oh * ow);
            Ok(LayerEval {
                pre_activation: pre,
                output: Tensor::Bits {
                    bits: out,
                    shape: Shape::Chw {
                        channels: g.out_channels,
                        height: oh,
                        width: ow,
                    },
                },
            })
        }
        (LayerWeights::Full(w), LayerKind::Dense { inputs, .. }) => {
            let x = input.to_i64();
            if x.len() != inputs {
                return Err(SimError::LengthMismatch {
                    context: "dense layer input",
                    left: x.len(),
                    right: inputs,
                });
            }
            let sums: Vec<i64> = (0..w.cols())
                .map(|j| (0..w.rows()).map(|i| x[i] * i64::from(w.get(i, j))).sum())
                .collect();
            Ok(LayerEval {
                pre_activation: sums.clone(),
                output: Tensor::flat_ints(sums),
            })
        }
        (LayerWeights::Full(w), LayerKind::Conv2d(g)) => {
            let shape = input.shape();
            let (h, wd) = match shape {
                Shape::Chw { channels, height, width } if channels == g.in_channels => {
                    (height, width)
                }
                _ => {
                    return Err(SimError::ShapeMismatch {
                        layer: 0,
                        detail: format!("conv layer wants {} channels, got {shape}", g.in_channels),
                    })
                }
            };
            let x = input.to_i64();
            let (patches, (oh, ow)) = im2col_ints(&g, &x, h, wd)?;
            let mut sums = Vec::with_capacity(g.out_channels * oh * ow);
            for o in 0..g.out_channels {
                for patch in &patches {
                    let s: i64 = patch
                        .iter()
                        .enumerate()
                        .map(|(i, &v)| v * i64::from(w.get(i, o)))
                        .sum();
                    sums.push(s);
                }
            }
            Ok(LayerEval {
                pre_activation: sums.clone(),
                output: Tensor::Ints {
                    values: sums,
                    shape: Shape::Chw {
                        channels: g.out_channels,
                        height: oh,
                        width: ow,
                    },
                },
            })
        }
    }
}

fn expect_chw_bits(input: &Tensor) -> Result<(&BitVector, (usize, usize))> {
    match input {
        Tensor::Bits {
            bits,
            shape: Shape::Chw { height, width, .. },
        } => Ok((bits, (*height, *width))),
        _ => Err(SimError::ShapeMismatch {
            layer: 0,
            detail: format!("conv layer wants a CHW bit tensor, got {}", input.shape()),
        }),
    }
}

/// Dots of every input vector against every weight column.
fn binary_dots(w: &BitMatrix, inputs: &[BitVector]) -> Result<Vec<Vec<DotResult>>> {
    let mut all = Vec::with_capacity(inputs.len());
    for input in inputs {
        let mut per = Vec::with_capacity(w.cols());
        for j in 0..w.cols() {
            per.push(xnor_popcount_dot(input, &w.column(j))?);
        }
        all.push(per);
    }
    Ok(all)
}

/// Threshold pre-activations into bits; `group` is the number of consecutive
/// neurons sharing one threshold (pixels per channel for convs, 1 for dense).
pub fn threshold_bits(pre: &[i64], thresholds: &[i32], group: usize) -> BitVector {
    let mut out = BitVector::zeros(pre.len());
    for (i, &v) in pre.iter().enumerate() {
        if v >= i64::from(thresholds[i / group]) {
            out.set(i, true);
        }
    }
    out
}

/// Full forward pass evidence: per-layer evaluations, final scores, and the
/// arg-max class (ties break to the lowest index).
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub layers: Vec<LayerEval>,
    pub scores: Vec<i64>,
    pub predicted_class: usize,
}

/// Reference inference: compose [`reference_layer_forward`] across the
/// network, binarizing full-layer outputs (with that layer's thresholds)
/// whenever they feed a binary layer.
pub fn reference_infer(net: &BnnNetwork, input: &Tensor) -> Result<ForwardTrace> {
    if input.shape().len() != net.input_shape().len() {
        return Err(SimError::ShapeMismatch {
            layer: 0,
            detail: format!(
                "input {} does not match network input {}",
                input.shape(),
                net.input_shape()
            ),
        });
    }
    let mut acts = input.clone();
    let mut evals = Vec::with_capacity(net.layers().len());
    for (i, layer) in net.layers().iter().enumerate() {
        let eval = reference_layer_forward(layer, &acts).map_err(|e| relabel_layer(e, i))?;
        let next_is_binary = net
            .layers()
            .get(i + 1)
            .is_some_and(|l| l.precision() == Precision::Binary);
        acts = match (&eval.output, next_is_binary) {
            (Tensor::Ints { values, shape }, true) => {
                let group = shape.len() / layer.output_units();
                Tensor::Bits {
                    bits: threshold_bits(values, &layer.thresholds, group),
                    shape: *shape,
                }
            }
            (out, _) => out.clone(),
        };
        evals.push(eval);
    }
    let scores = match &acts {
        Tensor::Ints { values, .. } => values.clone(),
        Tensor::Bits { .. } => {
            return Err(SimError::ShapeMismatch {
                layer: net.layers().len() - 1,
                detail: "final layer must emit integer scores".into(),
            })
        }
    };
    let predicted_class = argmax(&scores);
    Ok(ForwardTrace {
        layers: evals,
        scores,
        predicted_class,
    })
}

fn relabel_layer(e: SimError, layer: usize) -> SimError {
    match e {
        SimError::ShapeMismatch { detail, .. } => SimError::ShapeMismatch { layer, detail },
        other => other,
    }
}

/// Lowest index of the maximum score.
pub fn argmax(scores: &[i64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}
