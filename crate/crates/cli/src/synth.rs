//! Seeded synthetic workload generation: MLPs and small CNNs with random
//! binarized hidden weights and full-precision boundary layers, plus
//! matching random input sets. Identical seeds produce identical files.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xbarsim_core::bits::BitMatrix;
use xbarsim_core::network::{
    BnnLayer, BnnNetwork, ConvGeometry, IntMatrix, LayerKind, LayerWeights, Shape,
};

use crate::error::{CliError, Result};
use crate::format::InputSet;

const FULL_WEIGHT_RANGE: std::ops::RangeInclusive<i32> = -4..=4;
const INPUT_RANGE: std::ops::RangeInclusive<i32> = -8..=8;

fn random_bit_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> BitMatrix {
    let mut w = BitMatrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            if rng.gen::<bool>() {
                w.set(i, j, true);
            }
        }
    }
    w
}

fn random_int_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> IntMatrix {
    let data = (0..rows * cols)
        .map(|_| rng.gen_range(FULL_WEIGHT_RANGE))
        .collect();
    IntMatrix::new(rows, cols, data).expect("sized by construction")
}

/// Thresholds near zero keep hidden activations balanced instead of
/// saturating to all-ones or all-zeros.
fn binary_thresholds(rng: &mut ChaCha8Rng, units: usize, fan_in: usize) -> Vec<i32> {
    let spread = (fan_in as i32 / 4).max(1);
    (0..units).map(|_| rng.gen_range(-spread..=spread)).collect()
}

/// Generate an MLP from a width chain: `widths[0]` inputs, `widths.last()`
/// class scores, full-precision end layers, binary layers in between.
pub fn gen_mlp(widths: &[usize], seed: u64) -> Result<BnnNetwork> {
    if widths.len() < 4 {
        return Err(CliError::Config(
            "mlp needs at least 4 widths (input, two boundary layers, one binary hidden layer)"
                .into(),
        ));
    }
    if widths.contains(&0) {
        return Err(CliError::Config("widths must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let last = widths.len() - 2;
    let mut layers = Vec::with_capacity(widths.len() - 1);
    for (i, pair) in widths.windows(2).enumerate() {
        let (inputs, outputs) = (pair[0], pair[1]);
        let kind = LayerKind::Dense { inputs, outputs };
        let layer = if i == 0 || i == last {
            BnnLayer {
                kind,
                weights: LayerWeights::Full(random_int_matrix(&mut rng, inputs, outputs)),
                thresholds: (0..outputs).map(|_| rng.gen_range(-2..=2)).collect(),
            }
        } else {
            BnnLayer {
                kind,
                weights: LayerWeights::Binary(random_bit_matrix(&mut rng, inputs, outputs)),
                thresholds: binary_thresholds(&mut rng, outputs, inputs),
            }
        };
        layers.push(layer);
    }
    let net = BnnNetwork::new(layers, Shape::Flat(widths[0]), *widths.last().unwrap())
        .map_err(CliError::Sim)?;
    Ok(net)
}

/// Generate a CNN: a full-precision input convolution, binary hidden
/// convolutions following the channel chain (3x3 kernels, stride 1, pad 1,
/// so spatial dims are preserved), and a full-precision dense classifier.
pub fn gen_cnn(
    channels: &[usize],
    image: (usize, usize),
    classes: usize,
    seed: u64,
) -> Result<BnnNetwork> {
    if channels.len() < 3 {
        return Err(CliError::Config(
            "cnn needs at least 3 channel counts (input, one binary conv, one more conv)".into(),
        ));
    }
    if channels.contains(&0) || classes == 0 {
        return Err(CliError::Config("channel counts and classes must be positive".into()));
    }
    let (height, width) = image;
    if height < 3 || width < 3 {
        return Err(CliError::Config("image must be at least 3x3".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::new();
    for (i, pair) in channels.windows(2).enumerate() {
        let geom = ConvGeometry {
            in_channels: pair[0],
            out_channels: pair[1],
            kernel_h: 3,
            kernel_w: 3,
            stride: 1,
            pad: 1,
        };
        let rows = geom.lowered_len();
        let layer = if i == 0 {
            BnnLayer {
                kind: LayerKind::Conv2d(geom),
                weights: LayerWeights::Full(random_int_matrix(&mut rng, rows, pair[1])),
                thresholds: (0..pair[1]).map(|_| rng.gen_range(-2..=2)).collect(),
            }
        } else {
            BnnLayer {
                kind: LayerKind::Conv2d(geom),
                weights: LayerWeights::Binary(random_bit_matrix(&mut rng, rows, pair[1])),
                thresholds: binary_thresholds(&mut rng, pair[1], rows),
            }
        };
        layers.push(layer);
    }
    let flat = channels.last().unwrap() * height * width;
    layers.push(BnnLayer {
        kind: LayerKind::Dense {
            inputs: flat,
            outputs: classes,
        },
        weights: LayerWeights::Full(random_int_matrix(&mut rng, flat, classes)),
        thresholds: vec![0; classes],
    });
    let net = BnnNetwork::new(
        layers,
        Shape::Chw {
            channels: channels[0],
            height,
            width,
        },
        classes,
    )
    .map_err(CliError::Sim)?;
    Ok(net)
}

/// Random full-precision input vectors matching the network's input shape.
pub fn gen_inputs(net: &BnnNetwork, count: usize, seed: u64) -> InputSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1234_5678_9abc_def0);
    let len = net.input_shape().len();
    InputSet::Ints(
        (0..count)
            .map(|_| (0..len).map(|_| rng.gen_range(INPUT_RANGE)).collect())
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifest::save_network;

    #[test]
    fn mlp_generation_is_deterministic() {
        let a = gen_mlp(&[8, 16, 16, 4], 42).unwrap();
        let b = gen_mlp(&[8, 16, 16, 4], 42).unwrap();
        assert_eq!(save_network(&a), save_network(&b));
        let c = gen_mlp(&[8, 16, 16, 4], 43).unwrap();
        assert_ne!(save_network(&a), save_network(&c));
    }

    #[test]
    fn mlp_rejects_short_chains() {
        assert!(gen_mlp(&[8, 4], 0).is_err());
        assert!(gen_mlp(&[8, 16, 4], 0).is_err());
    }

    #[test]
    fn cnn_shapes_compose() {
        let net = gen_cnn(&[1, 4, 4], (6, 6), 3, 9).unwrap();
        assert_eq!(net.layers().len(), 3);
        assert_eq!(net.class_count(), 3);
        let inputs = gen_inputs(&net, 2, 9);
        assert_eq!(inputs.vector_len(), 36);
    }

    #[test]
    fn inputs_are_seed_stable() {
        let net = gen_mlp(&[8, 16, 16, 4], 1).unwrap();
        assert_eq!(gen_inputs(&net, 3, 5), gen_inputs(&net, 3, 5));
        assert_ne!(gen_inputs(&net, 3, 5), gen_inputs(&net, 3, 6));
    }
}
