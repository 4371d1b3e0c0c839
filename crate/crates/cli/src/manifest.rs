//! Network manifests: a JSON description of layer geometry whose weight and
//! threshold payloads live in the binary weights file, referenced by
//! (offset, length) into its data section.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use xbarsim_core::network::{
    BnnLayer, BnnNetwork, ConvGeometry, IntMatrix, LayerKind, LayerWeights, Precision, Shape,
};

use crate::error::{CliError, Result};
use crate::format;

pub const MANIFEST_VERSION: u32 = 1;

/// Byte range inside the weights file data section.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlobRef {
    pub offset: u64,
    pub length: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionSpec {
    Binary,
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        precision: PrecisionSpec,
        inputs: usize,
        outputs: usize,
        weights: BlobRef,
        thresholds: BlobRef,
    },
    Conv2d {
        precision: PrecisionSpec,
        in_channels: usize,
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
        stride: usize,
        pad: usize,
        weights: BlobRef,
        thresholds: BlobRef,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkManifest {
    pub format_version: u32,
    /// `[n]` for flat inputs or `[channels, height, width]`.
    pub input_shape: Vec<usize>,
    pub class_count: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkManifest {
    pub fn input_shape(&self, path: &Path) -> Result<Shape> {
        match self.input_shape.as_slice() {
            [n] => Ok(Shape::Flat(*n)),
            [c, h, w] => Ok(Shape::Chw {
                channels: *c,
                height: *h,
                width: *w,
            }),
            other => Err(CliError::format(
                path,
                format!(
                    "input_shape must have 1 or 3 entries, got {}",
                    other.len()
                ),
            )),
        }
    }
}

fn slice_blob<'a>(
    data: &'a [u8],
    blob: &BlobRef,
    layer: usize,
    what: &str,
    path: &Path,
) -> Result<&'a [u8]> {
    let start = blob.offset as usize;
    let end = start.checked_add(blob.length as usize);
    match end {
        Some(end) if end <= data.len() => Ok(&data[start..end]),
        _ => Err(CliError::format(
            path,
            format!(
                "layer {layer}: {what} reference {}+{} exceeds weights data ({} bytes)",
                blob.offset,
                blob.length,
                data.len()
            ),
        )),
    }
}

fn decode_layer(
    spec: &LayerSpec,
    data: &[u8],
    layer: usize,
    weights_path: &Path,
) -> Result<BnnLayer> {
    let (precision, kind, weights_ref, thresholds_ref) = match spec {
        LayerSpec::Dense {
            precision,
            inputs,
            outputs,
            weights,
            thresholds,
        } => (
            *precision,
            LayerKind::Dense {
                inputs: *inputs,
                outputs: *outputs,
            },
            weights,
            thresholds,
        ),
        LayerSpec::Conv2d {
            precision,
            in_channels,
            out_channels,
            kernel_h,
            kernel_w,
            stride,
            pad,
            weights,
            thresholds,
        } => (
            *precision,
            LayerKind::Conv2d(ConvGeometry {
                in_channels: *in_channels,
                out_channels: *out_channels,
                kernel_h: *kernel_h,
                kernel_w: *kernel_w,
                stride: *stride,
                pad: *pad,
            }),
            weights,
            thresholds,
        ),
    };
    let (rows, cols) = match kind {
        LayerKind::Dense { inputs, outputs } => (inputs, outputs),
        LayerKind::Conv2d(g) => (g.lowered_len(), g.out_channels),
    };
    let weights = match precision {
        PrecisionSpec::Binary => {
            let bytes = slice_blob(data, weights_ref, layer, "weight", weights_path)?;
            let w = format::unpack_bit_matrix(bytes, rows, cols).ok_or_else(|| {
                CliError::format(
                    weights_path,
                    format!(
                        "layer {layer}: binary weight blob is {} bytes, expected {} for {rows}x{cols}",
                        bytes.len(),
                        format::bytes_per_bit_vector(rows) * cols
                    ),
                )
            })?;
            LayerWeights::Binary(w)
        }
        PrecisionSpec::Full => {
            let bytes = slice_blob(data, weights_ref, layer, "weight", weights_path)?;
            let values = format::unpack_i32s(bytes).filter(|v| v.len() == rows * cols);
            let values = values.ok_or_else(|| {
                CliError::format(
                    weights_path,
                    format!(
                        "layer {layer}: full weight blob is {} bytes, expected {} for {rows}x{cols}",
                        bytes.len(),
                        4 * rows * cols
                    ),
                )
            })?;
            LayerWeights::Full(IntMatrix::new(rows, cols, values).map_err(CliError::Sim)?)
        }
    };
    let tbytes = slice_blob(data, thresholds_ref, layer, "threshold", weights_path)?;
    let thresholds = format::unpack_i32s(tbytes)
        .filter(|t| t.len() == cols)
        .ok_or_else(|| {
            CliError::format(
                weights_path,
                format!(
                    "layer {layer}: threshold blob is {} bytes, expected {}",
                    tbytes.len(),
                    4 * cols
                ),
            )
        })?;
    Ok(BnnLayer {
        kind,
        weights,
        thresholds,
    })
}

/// Load and validate a network from a manifest and its weights file.
pub fn load_network(manifest_path: &Path, weights_path: &Path) -> Result<BnnNetwork> {
    let manifest_bytes =
        fs::read(manifest_path).map_err(CliError::io(manifest_path))?;
    let manifest: NetworkManifest = serde_json::from_slice(&manifest_bytes)
        .map_err(|e| CliError::format(manifest_path, format!("malformed manifest: {e}")))?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(CliError::format(
            manifest_path,
            format!("unsupported manifest version {}", manifest.format_version),
        ));
    }
    let weights_bytes = fs::read(weights_path).map_err(CliError::io(weights_path))?;
    let data = format::decode_weights_file(weights_path, &weights_bytes)?;
    let layers = manifest
        .layers
        .iter()
        .enumerate()
        .map(|(i, spec)| decode_layer(spec, data, i, weights_path))
        .collect::<Result<Vec<_>>>()?;
    let input_shape = manifest.input_shape(manifest_path)?;
    BnnNetwork::new(layers, input_shape, manifest.class_count).map_err(|e| {
        CliError::format(manifest_path, format!("invalid network: {e}"))
    })
}

/// Serialize a network to canonical manifest + weights bytes: blobs laid out
/// layer by layer (weights before thresholds), manifest as pretty JSON with
/// a trailing newline. Loading and re-saving reproduces both byte for byte.
pub fn save_network(net: &BnnNetwork) -> (Vec<u8>, Vec<u8>) {
    let mut data = Vec::new();
    let mut specs = Vec::with_capacity(net.layers().len());
    for layer in net.layers() {
        let weight_bytes = match &layer.weights {
            LayerWeights::Binary(w) => format::pack_bit_matrix(w),
            LayerWeights::Full(w) => format::pack_i32s(w.data()),
        };
        let weights = BlobRef {
            offset: data.len() as u64,
            length: weight_bytes.len() as u64,
        };
        data.extend_from_slice(&weight_bytes);
        let threshold_bytes = format::pack_i32s(&layer.thresholds);
        let thresholds = BlobRef {
            offset: data.len() as u64,
            length: threshold_bytes.len() as u64,
        };
        data.extend_from_slice(&threshold_bytes);
        let precision = match layer.precision() {
            Precision::Binary => PrecisionSpec::Binary,
            Precision::Full => PrecisionSpec::Full,
        };
        specs.push(match layer.kind {
            LayerKind::Dense { inputs, outputs } => LayerSpec::Dense {
                precision,
                inputs,
                outputs,
                weights,
                thresholds,
            },
            LayerKind::Conv2d(g) => LayerSpec::Conv2d {
                precision,
                in_channels: g.in_channels,
                out_channels: g.out_channels,
                kernel_h: g.kernel_h,
                kernel_w: g.kernel_w,
                stride: g.stride,
                pad: g.pad,
                weights,
                thresholds,
            },
        });
    }
    let manifest = NetworkManifest {
        format_version: MANIFEST_VERSION,
        input_shape: match net.input_shape() {
            Shape::Flat(n) => vec![n],
            Shape::Chw {
                channels,
                height,
                width,
            } => vec![channels, height, width],
        },
        class_count: net.class_count(),
        layers: specs,
    };
    let mut manifest_bytes =
        serde_json::to_vec_pretty(&manifest).expect("manifest serialization cannot fail");
    manifest_bytes.push(b'\n');
    (manifest_bytes, format::encode_weights_file(&data))
}

/// Write manifest and weights files to disk.
pub fn write_network(net: &BnnNetwork, manifest_path: &Path, weights_path: &Path) -> Result<()> {
    let (manifest_bytes, weights_bytes) = save_network(net);
    fs::write(manifest_path, manifest_bytes).map_err(CliError::io(manifest_path))?;
    fs::write(weights_path, weights_bytes).map_err(CliError::io(weights_path))?;
    Ok(())
}
