//! End-to-end execution: full-precision boundary layers run on the host
//! reference engine, binary hidden layers run on the configured crossbar
//! backend, and every binary layer's pre-threshold dots are available for
//! validation against the reference path.

use serde::{Deserialize, Serialize};

use xbarsim_core::bits::{BitVector, DotResult};
use xbarsim_core::engine::{AdcModel, EngineConfig, StepTrace, DEFAULT_COUNTER_BITS};
use xbarsim_core::error::SimError;
use xbarsim_core::mapping::{self, CrossbarDims, MappedLayer, MappingKind};
use xbarsim_core::network::{
    im2col_bits, reference_infer, reference_layer_forward, threshold_bits, BnnNetwork, LayerKind,
    LayerWeights, Precision, Shape, Tensor,
};
use xbarsim_core::report::{energy_report, CostReport, HostCost, TechConstants};
use xbarsim_core::wdm::{execute_layer_opcm, WdmConfig};

use crate::error::{CliError, Result};
use crate::format::InputSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Epcm,
    Opcm,
}

impl std::fmt::Display for Backend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Backend::Epcm => write!(f, "epcm"),
            Backend::Opcm => write!(f, "opcm"),
        }
    }
}

/// One (mapping, backend, crossbar, ADC, WDM) configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub mapping: MappingKind,
    pub backend: Backend,
    pub dims: CrossbarDims,
    /// `None` for an ideal ADC, `Some(bits)` for quantized readout.
    pub adc_bits: Option<u32>,
    /// Wavelength capacity; ignored by the electronic backend.
    pub wdm_capacity: usize,
    pub tech: TechConstants,
    pub seed: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mapping == MappingKind::CustBinary && self.backend == Backend::Opcm {
            return Err(CliError::Config(
                "the custbinary mapping has no photonic execution path".into(),
            ));
        }
        if self.backend == Backend::Opcm && self.wdm_capacity < 1 {
            return Err(CliError::Config("WDM capacity must be >= 1".into()));
        }
        Ok(())
    }

    pub fn design_label(&self) -> String {
        format!("{}-{}", self.mapping, self.backend)
    }

    fn engine_config(&self) -> EngineConfig {
        let adc = match self.adc_bits {
            None => AdcModel::ideal(self.dims.rows()),
            Some(bits) => AdcModel::quantized(self.dims.rows(), bits),
        };
        EngineConfig {
            adc,
            counter_bits: DEFAULT_COUNTER_BITS,
        }
    }

    fn wdm(&self) -> WdmConfig {
        WdmConfig {
            capacity: self.wdm_capacity,
            ..self.tech.wdm
        }
    }
}

/// Everything a simulated forward pass produced.
#[derive(Debug)]
pub struct SimRun {
    pub predictions: Vec<usize>,
    pub scores: Vec<Vec<i64>>,
    /// One trace per simulated binary layer, in layer order.
    pub layer_traces: Vec<(usize, StepTrace)>,
    /// Simulated pre-threshold dots per binary layer: `[input][neuron]` in
    /// the reference engine's neuron order.
    pub binary_pre: Vec<(usize, Vec<Vec<i64>>)>,
    pub host: HostCost,
    /// Compiled layouts per binary layer (kept for inspection dumps).
    pub mapped_layers: Vec<(usize, MappedLayer)>,
}

/// Convert a loaded input set into activation tensors for the network.
pub fn inputs_to_tensors(net: &BnnNetwork, inputs: &InputSet) -> Result<Vec<Tensor>> {
    let shape = net.input_shape();
    let want = shape.len();
    let got = inputs.vector_len();
    if !inputs.is_empty() && want != got {
        return Err(CliError::Config(format!(
            "input vectors have {got} elements but the network wants {shape}"
        )));
    }
    Ok(match inputs {
        InputSet::Bits(vectors) => vectors
            .iter()
            .map(|bits| Tensor::Bits {
                bits: bits.clone(),
                shape,
            })
            .collect(),
        InputSet::Ints(vectors) => vectors
            .iter()
            .map(|v| Tensor::Ints {
                values: v.iter().map(|&x| i64::from(x)).collect(),
                shape,
            })
            .collect(),
    })
}

fn full_layer_macs(layer: &xbarsim_core::network::BnnLayer, input_shape: &Shape) -> u64 {
    match layer.kind {
        LayerKind::Dense { inputs, outputs } => (inputs * outputs) as u64,
        LayerKind::Conv2d(g) => {
            let (h, w) = match *input_shape {
                Shape::Chw { height, width, .. } => (height, width),
                Shape::Flat(_) => return 0,
            };
            let (oh, ow) = g.out_dims(h, w).unwrap_or((0, 0));
            (g.lowered_len() * g.out_channels * oh * ow) as u64
        }
    }
}

/// Run the network: boundary layers on the host, binary layers on the
/// configured backend. Per-input work inside each binary layer fans out to
/// worker threads; all outputs and traces are merged in input order.
pub fn simulate_network(
    config: &RunConfig,
    net: &BnnNetwork,
    inputs: &[Tensor],
) -> Result<SimRun> {
    config.validate()?;
    let engine_cfg = config.engine_config();
    let wdm = config.wdm();

    let mut acts: Vec<Tensor> = inputs.to_vec();
    let mut layer_traces = Vec::new();
    let mut binary_pre = Vec::new();
    let mut mapped_layers = Vec::new();
    let mut host = HostCost::default();

    for (li, layer) in net.layers().iter().enumerate() {
        match layer.precision() {
            Precision::Full => {
                host.full_layers += 1;
                let next_is_binary = net
                    .layers()
                    .get(li + 1)
                    .is_some_and(|l| l.precision() == Precision::Binary);
                for act in acts.iter_mut() {
                    host.mac_ops += full_layer_macs(layer, &act.shape());
                    let eval = reference_layer_forward(layer, act)
                        .map_err(|e| relabel(e, li))
                        .map_err(CliError::Sim)?;
                    *act = match (&eval.output, next_is_binary) {
                        (Tensor::Ints { values, shape }, true) => {
                            let group = shape.len() / layer.output_units();
                            Tensor::Bits {
                                bits: threshold_bits(values, &layer.thresholds, group),
                                shape: *shape,
                            }
                        }
                        (out, _) => out.clone(),
                    };
                }
            }
            Precision::Binary => {
                let w = match &layer.weights {
                    LayerWeights::Binary(w) => w,
                    LayerWeights::Full(_) => unreachable!("validated at construction"),
                };
                let mapped = mapping::layout(config.mapping, w, config.dims)
                    .map_err(CliError::Sim)?;

                // Gather drive vectors: activations directly for dense
                // layers, lowered patches for convolutions.
                let mut drive_inputs: Vec<BitVector> = Vec::new();
                let mut out_geometry = None;
                for (i, act) in acts.iter().enumerate() {
                    match (layer.kind, act) {
                        (LayerKind::Dense { .. }, Tensor::Bits { bits, .. }) => {
                            drive_inputs.push(bits.clone());
                        }
                        (
                            LayerKind::Conv2d(g),
                            Tensor::Bits {
                                bits,
                                shape: Shape::Chw { height, width, .. },
                            },
                        ) => {
                            let (patches, dims_out) = im2col_bits(&g, bits, *height, *width)
                                .map_err(|e| input_context(e, i))?;
                            out_geometry = Some(dims_out);
                            for p in 0..patches.cols() {
                                drive_inputs.push(patches.column(p));
                            }
                        }
                        _ => {
                            return Err(CliError::Sim(SimError::ShapeMismatch {
                                layer: li,
                                detail: format!(
                                    "binary layer fed a non-bit activation for input {i}"
                                ),
                            }))
                        }
                    }
                }
                let (dots, trace) = match config.backend {
                    Backend::Epcm => {
                        xbarsim_core::engine::execute_layer(&mapped, &drive_inputs, &engine_cfg)
                            .map_err(CliError::Sim)?
                    }
                    Backend::Opcm => {
                        execute_layer_opcm(&mapped, &drive_inputs, &wdm, &engine_cfg)
                            .map_err(CliError::Sim)?
                    }
                };

                // Back to per-input activations and reference neuron order.
                let mut layer_pre = Vec::with_capacity(acts.len());
                match layer.kind {
                    LayerKind::Dense { .. } => {
                        for (i, act) in acts.iter_mut().enumerate() {
                            let pre: Vec<i64> =
                                dots[i].iter().map(|d: &DotResult| d.value).collect();
                            let bits = threshold_bits(&pre, &layer.thresholds, 1);
                            *act = Tensor::flat_bits(bits);
                            layer_pre.push(pre);
                        }
                    }
                    LayerKind::Conv2d(g) => {
                        let (oh, ow) = out_geometry.expect("conv produced geometry");
                        let pixels = oh * ow;
                        for (i, act) in acts.iter_mut().enumerate() {
                            let base = i * pixels;
                            let mut pre = Vec::with_capacity(g.out_channels * pixels);
                            for o in 0..g.out_channels {
                                pre.extend(
                                    dots[base..base + pixels].iter().map(|d| d[o].value),
                                );
                            }
                            let bits = threshold_bits(&pre, &layer.thresholds, pixels);
                            *act = Tensor::Bits {
                                bits,
                                shape: Shape::Chw {
                                    channels: g.out_channels,
                                    height: oh,
                                    width: ow,
                                },
                            };
                            layer_pre.push(pre);
                        }
                    }
                }
                binary_pre.push((li, layer_pre));
                layer_traces.push((li, trace));
                mapped_layers.push((li, mapped));
            }
        }
    }

    let mut predictions = Vec::with_capacity(acts.len());
    let mut scores = Vec::with_capacity(acts.len());
    for (i, act) in acts.iter().enumerate() {
        match act {
            Tensor::Ints { values, .. } => {
                predictions.push(xbarsim_core::network::argmax(values));
                scores.push(values.clone());
            }
            Tensor::Bits { .. } => {
                return Err(CliError::Config(format!(
                    "input {i}: network did not end in integer scores"
                )))
            }
        }
    }
    Ok(SimRun {
        predictions,
        scores,
        layer_traces,
        binary_pre,
        host,
        mapped_layers,
    })
}

fn relabel(e: SimError, layer: usize) -> SimError {
    match e {
        SimError::ShapeMismatch { detail, .. } => SimError::ShapeMismatch { layer, detail },
        other => other,
    }
}

fn input_context(e: SimError, input: usize) -> CliError {
    CliError::Config(format!("input {input}: {e}"))
}

/// Outcome of `run`: predictions plus the cost report.
pub struct RunOutcome {
    pub sim: SimRun,
    pub report: CostReport,
}

pub fn run(
    config: &RunConfig,
    net: &BnnNetwork,
    inputs: &[Tensor],
    workload: &str,
    workload_hash: &str,
) -> Result<RunOutcome> {
    let sim = simulate_network(config, net, inputs)?;
    let report = energy_report(
        &config.design_label(),
        workload,
        workload_hash,
        &sim.layer_traces,
        sim.host,
        &config.tech,
    )
    .map_err(CliError::Sim)?;
    Ok(RunOutcome { sim, report })
}

/// First point where the simulated dots diverge from the reference engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Divergence {
    pub layer: usize,
    pub input_index: usize,
    pub neuron: usize,
    pub simulated: i64,
    pub expected: i64,
    /// Present when the run used a quantized ADC; names the resolution so
    /// quantization-induced divergence is recognizable.
    pub adc_note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub design: String,
    pub checked_layers: usize,
    pub checked_values: u64,
    pub divergence: Option<Divergence>,
}

/// Compare every binary layer's simulated pre-threshold dots against the
/// reference engine, reporting the first divergence or a pass.
pub fn validate(config: &RunConfig, net: &BnnNetwork, inputs: &[Tensor]) -> Result<ValidationReport> {
    let sim = simulate_network(config, net, inputs)?;
    validate_sim(config, net, inputs, &sim)
}

/// Validation against an existing simulation result (lets tests corrupt a
/// mapped tile between simulation and checking).
pub fn validate_sim(
    config: &RunConfig,
    net: &BnnNetwork,
    inputs: &[Tensor],
    sim: &SimRun,
) -> Result<ValidationReport> {
    let adc_note = config.adc_bits.map(|bits| {
        let delta = config.dims.rows() as f64 / ((1u64 << bits) - 1).max(1) as f64;
        format!("quantized ADC: {bits} bits, step {delta} over full scale {}", config.dims.rows())
    });
    let mut checked_values = 0u64;
    // reference forward per input, reused across layers
    let mut reference = Vec::with_capacity(inputs.len());
    for input in inputs {
        reference.push(reference_infer(net, input).map_err(CliError::Sim)?);
    }
    for (layer, per_input) in &sim.binary_pre {
        for (input_index, pre) in per_input.iter().enumerate() {
            let expected = &reference[input_index].layers[*layer].pre_activation;
            for (neuron, (&got, &want)) in pre.iter().zip(expected).enumerate() {
                checked_values += 1;
                if got != want {
                    return Ok(ValidationReport {
                        passed: false,
                        design: config.design_label(),
                        checked_layers: sim.binary_pre.len(),
                        checked_values,
                        divergence: Some(Divergence {
                            layer: *layer,
                            input_index,
                            neuron,
                            simulated: got,
                            expected: want,
                            adc_note,
                        }),
                    });
                }
            }
        }
    }
    Ok(ValidationReport {
        passed: true,
        design: config.design_label(),
        checked_layers: sim.binary_pre.len(),
        checked_values,
        divergence: None,
    })
}

/// JSON-friendly dump of a compiled layer's tile grid.
#[derive(Debug, Serialize)]
pub struct MappingDump {
    pub layer_index: usize,
    pub mapping: String,
    pub crossbar: String,
    pub m: usize,
    pub n: usize,
    pub row_tiles: usize,
    pub col_tiles: usize,
    pub tiles: Vec<TileDump>,
}

#[derive(Debug, Serialize)]
pub struct TileDump {
    pub tile_id: usize,
    pub row_range: [usize; 2],
    pub col_range: [usize; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub complement_row_offset: Option<usize>,
    /// Used region of the cell array, one string of 0/1 per physical row.
    pub cells: Vec<String>,
}

pub fn dump_mappings(sim: &SimRun, config: &RunConfig) -> Vec<MappingDump> {
    sim.mapped_layers
        .iter()
        .map(|(layer_index, mapped)| MappingDump {
            layer_index: *layer_index,
            mapping: mapped.kind().to_string(),
            crossbar: format!("{}x{}", config.dims.rows(), config.dims.cols()),
            m: mapped.m(),
            n: mapped.n(),
            row_tiles: mapped.row_tiles(),
            col_tiles: mapped.col_tiles(),
            tiles: mapped
                .tiles()
                .iter()
                .map(|t| TileDump {
                    tile_id: t.tile_id,
                    row_range: [t.row_range.start, t.row_range.end],
                    col_range: [t.col_range.start, t.col_range.end],
                    complement_row_offset: t.complement_row_offset,
                    cells: (0..t.rows_used())
                        .map(|r| {
                            (0..t.cols_used())
                                .map(|c| if t.cells.get(r, c) { '1' } else { '0' })
                                .collect()
                        })
                        .collect(),
                })
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use crate::synth;

    fn config(mapping: MappingKind, backend: Backend) -> RunConfig {
        RunConfig {
            mapping,
            backend,
            dims: CrossbarDims::new(16, 16).unwrap(),
            adc_bits: None,
            wdm_capacity: 16,
            tech: TechConstants::default(),
            seed: 7,
        }
    }

    fn workload() -> (BnnNetwork, Vec<Tensor>) {
        let net = synth::gen_mlp(&[6, 8, 8, 3], 11).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inputs: Vec<Tensor> = (0..4)
            .map(|_| Tensor::flat_ints((0..6).map(|_| rng.gen_range(-8..=8)).collect()))
            .collect();
        (net, inputs)
    }

    #[test]
    fn custbinary_opcm_is_rejected() {
        let cfg = config(MappingKind::CustBinary, Backend::Opcm);
        let err = cfg.validate().unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn predictions_match_reference_on_all_backends() {
        let (net, inputs) = workload();
        let mut expected = Vec::new();
        for input in &inputs {
            expected.push(reference_infer(&net, input).unwrap().predicted_class);
        }
        for (mapping, backend) in [
            (MappingKind::Tacit, Backend::Epcm),
            (MappingKind::Tacit, Backend::Opcm),
            (MappingKind::CustBinary, Backend::Epcm),
        ] {
            let sim = simulate_network(&config(mapping, backend), &net, &inputs).unwrap();
            assert_eq!(sim.predictions, expected, "{mapping}-{backend}");
        }
    }

    #[test]
    fn validate_passes_under_ideal_adc() {
        let (net, inputs) = workload();
        let report = validate(&config(MappingKind::Tacit, Backend::Epcm), &net, &inputs).unwrap();
        assert!(report.passed);
        assert!(report.checked_values > 0);
    }

    #[test]
    fn corrupted_tile_bit_is_detected_with_coordinates() {
        let (net, inputs) = workload();
        let cfg = config(MappingKind::Tacit, Backend::Epcm);
        // Simulate with one flipped cell in the first binary layer's tile.
        let mut sim = simulate_network(&cfg, &net, &inputs).unwrap();
        // Re-run the binary layer by hand with a corrupted mapping: flip a
        // stored weight bit and recompute that layer's dots for input 0.
        let (layer_idx, mapped) = {
            let (li, m) = &sim.mapped_layers[0];
            (*li, m.clone())
        };
        let mut corrupted = mapped;
        corrupted.tile_mut(0, 0).flip_cell(0, 0);
        let layer_input: Vec<BitVector> = {
            // reference activations entering the corrupted layer
            let trace = reference_infer(&net, &inputs[0]).unwrap();
            match &trace.layers[layer_idx - 1].output {
                Tensor::Ints { values, .. } => {
                    let l = &net.layers()[layer_idx - 1];
                    vec![threshold_bits(values, &l.thresholds, 1)]
                }
                Tensor::Bits { bits, .. } => vec![bits.clone()],
            }
        };
        let engine_cfg = EngineConfig::ideal(cfg.dims.rows());
        let (dots, _) =
            xbarsim_core::engine::execute_layer(&corrupted, &layer_input, &engine_cfg).unwrap();
        sim.binary_pre[0].1[0] = dots[0].iter().map(|d| d.value).collect();

        let report = validate_sim(&cfg, &net, &inputs, &sim).unwrap();
        assert!(!report.passed);
        let d = report.divergence.unwrap();
        assert_eq!(d.layer, layer_idx);
        assert_eq!(d.input_index, 0);
        assert_eq!(d.neuron, 0, "flipped bit sits in weight vector 0");
        assert_ne!(d.simulated, d.expected);
    }

    #[test]
    fn quantized_adc_with_too_few_bits_fails_with_diagnostics() {
        let (net, inputs) = workload();
        let mut cfg = config(MappingKind::Tacit, Backend::Epcm);
        cfg.adc_bits = Some(1); // step = 16 over full scale: sums collapse
        let report = validate(&cfg, &net, &inputs).unwrap();
        assert!(!report.passed);
        let d = report.divergence.unwrap();
        let note = d.adc_note.unwrap();
        assert!(note.contains("1 bits"), "{note}");
    }

    #[test]
    fn mapping_dump_covers_every_binary_layer() {
        let (net, inputs) = workload();
        let cfg = config(MappingKind::CustBinary, Backend::Epcm);
        let sim = simulate_network(&cfg, &net, &inputs).unwrap();
        let dumps = dump_mappings(&sim, &cfg);
        assert_eq!(dumps.len(), 1);
        assert_eq!(dumps[0].mapping, "custbinary");
        assert!(!dumps[0].tiles.is_empty());
        // serializes cleanly
        let json = serde_json::to_string(&dumps).unwrap();
        assert!(json.contains("tile_id"));
    }
}
