//! Photonic crossbar execution with wavelength division multiplexing.
//!
//! Up to `K` input drive vectors ride distinct wavelengths through one
//! tacit-mapped tile simultaneously, fusing `K` vector-matrix multiplies
//! into a single matrix-matrix step. Wavelengths are ideal (no crosstalk),
//! so results are bit-exact against the electronic path; what changes is
//! the step count and the power drawn by the optical transmitter and the
//! receive-side transimpedance amplifiers.

use serde::{Deserialize, Serialize};

use crate::bits::{BitVector, DotResult};
use crate::engine::{vmm_step, AdcModel, EngineConfig, StepKind, StepRecord, StepTrace};
use crate::error::{Result, SimError};
use crate::mapping::{MappedLayer, MappingKind, TilePlacement};
use crate::par::try_map_indexed;

/// Per-output transimpedance amplifier draw in mW.
pub const TIA_MW_PER_OUTPUT: f64 = 2.0;

/// Modulator draw per wavelength-row in mW.
pub const MODULATOR_MW: f64 = 3.0;

/// Tuning draw per wavelength group in mW.
pub const TUNING_MW: f64 = 45.0;

/// Wavelength multiplexing configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WdmConfig {
    /// Maximum drive vectors combined per step (the WDM capacity K).
    pub capacity: usize,
    /// Seconds per photonic step.
    pub step_time_s: f64,
    /// Laser power in mW.
    pub laser_power_mw: f64,
}

impl Default for WdmConfig {
    fn default() -> Self {
        Self {
            capacity: 16,
            step_time_s: 1e-9,
            laser_power_mw: 0.0,
        }
    }
}

impl WdmConfig {
    pub fn with_capacity(capacity: usize) -> Self {
        Self {
            capacity,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.capacity < 1 {
            return Err(SimError::InvalidConfig {
                detail: "WDM capacity must be >= 1".into(),
            });
        }
        Ok(())
    }
}

/// Up to `capacity` equal-length drive vectors on distinct wavelengths.
#[derive(Debug, Clone, PartialEq)]
pub struct WdmBatch {
    drives: Vec<BitVector>,
    wavelengths: Vec<u32>,
    /// Index of the first input this batch carries (batches keep input order).
    pub start_index: usize,
}

impl WdmBatch {
    pub fn new(drives: Vec<BitVector>, capacity: usize, start_index: usize) -> Result<Self> {
        if drives.len() > capacity {
            return Err(SimError::BatchTooLarge {
                size: drives.len(),
                capacity,
            });
        }
        if let Some(first) = drives.first() {
            for d in &drives[1..] {
                if d.len() != first.len() {
                    return Err(SimError::LengthMismatch {
                        context: "wdm batch drives",
                        left: first.len(),
                        right: d.len(),
                    });
                }
            }
        }
        let wavelengths = (0..drives.len() as u32).collect();
        Ok(Self {
            drives,
            wavelengths,
            start_index,
        })
    }

    pub fn drives(&self) -> &[BitVector] {
        &self.drives
    }

    pub fn wavelengths(&self) -> &[u32] {
        &self.wavelengths
    }

    pub fn len(&self) -> usize {
        self.drives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drives.is_empty()
    }
}

/// Split equal-length inputs into `ceil(len / K)` batches in input order;
/// the last batch may be partial.
pub fn wdm_batch(inputs: &[BitVector], capacity: usize) -> Result<Vec<WdmBatch>> {
    if capacity < 1 {
        return Err(SimError::InvalidConfig {
            detail: "WDM capacity must be >= 1".into(),
        });
    }
    if let Some(first) = inputs.first() {
        for v in &inputs[1..] {
            if v.len() != first.len() {
                return Err(SimError::LengthMismatch {
                    context: "wdm batch inputs",
                    left: first.len(),
                    right: v.len(),
                });
            }
        }
    }
    inputs
        .chunks(capacity)
        .enumerate()
        .map(|(b, chunk)| WdmBatch::new(chunk.to_vec(), capacity, b * capacity))
        .collect()
}

/// One wavelength-fused matrix-matrix multiply: row `b` of the result is
/// exactly what a lone VMM of `drives[b]` would produce (ideal wavelength
/// separability). Records one step carrying the batch occupancy, one ADC
/// conversion and one TIA activation per used column.
pub fn mmm_step(
    tile: &TilePlacement,
    batch: &WdmBatch,
    adc: &AdcModel,
) -> Result<(Vec<Vec<f64>>, StepRecord)> {
    if tile.kind != MappingKind::Tacit {
        return Err(SimError::UnsupportedBackend {
            detail: "mmm_step requires a tacit-mapped tile".into(),
        });
    }
    let mut out = Vec::with_capacity(batch.len());
    let mut rec = StepRecord {
        input_index: batch.start_index,
        kind: StepKind::Mmm,
        tile_id: tile.tile_id,
        steps: u64::from(adc.columns_per_adc),
        duration: u64::from(adc.columns_per_adc),
        wavelength_count: batch.len() as u32,
        rows_driven: tile.rows_used() as u32,
        adc_conversions: tile.cols_used() as u64,
        sa_activations: 0,
        counter_increments: 0,
        tree_reductions: 0,
    };
    rec.sa_activations = 0;
    for drive in batch.drives() {
        let (sums, _) = vmm_step(tile, drive, adc)?;
        out.push(sums);
    }
    Ok((out, rec))
}

/// Receive-side TIA power for a crossbar with `n_columns` outputs.
pub fn crossbar_tia_power(n_columns: usize) -> f64 {
    n_columns as f64 * TIA_MW_PER_OUTPUT
}

/// Transmitter power in mW for drive length `m_drive` at capacity `K`:
/// laser, per-(wavelength x row) modulators, and comb tuning.
///
/// The tuning term `(3KM + 1) / K * 45` is evaluated with an exact integer
/// numerator and a single division, i.e. the correctly rounded rational
/// value.
pub fn transmitter_power(cfg: &WdmConfig, m_drive: usize) -> f64 {
    let km = (cfg.capacity * m_drive) as u64;
    let modulators = MODULATOR_MW * km as f64;
    let tuning = (3 * km + 1) as f64 * TUNING_MW / cfg.capacity as f64;
    cfg.laser_power_mw + modulators + tuning
}

/// Execute a tacit-mapped layer on the photonic backend.
///
/// Inputs are grouped into wavelength batches; each batch fires one MMM per
/// tile (column-tiles concurrently, row-tiles sequentially), so the step
/// count is `ceil(inputs / K) * row_tiles`. A partial batch still costs one
/// full step. Outputs are bit-exact against the electronic tacit path.
pub fn execute_layer_opcm(
    mapped: &MappedLayer,
    inputs: &[BitVector],
    wdm: &WdmConfig,
    cfg: &EngineConfig,
) -> Result<(Vec<Vec<DotResult>>, StepTrace)> {
    if mapped.kind() != MappingKind::Tacit {
        return Err(SimError::UnsupportedBackend {
            detail: "the photonic backend supports only the tacit mapping".into(),
        });
    }
    wdm.validate()?;
    let chunks: Vec<&[BitVector]> = inputs.chunks(wdm.capacity).collect();
    let per_batch = try_map_indexed(&chunks, |b, chunk| {
        let start = b * wdm.capacity;
        let mut acc = vec![vec![0.0f64; mapped.n()]; chunk.len()];
        let mut records = Vec::with_capacity(mapped.row_tiles() * mapped.col_tiles());
        for rt in 0..mapped.row_tiles() {
            let drives: Vec<BitVector> = chunk
                .iter()
                .map(|input| Ok(mapped.encode_input_tacit(input)?.swap_remove(rt)))
                .collect::<Result<_>>()?;
            let batch = WdmBatch::new(drives, wdm.capacity, start)?;
            for ct in 0..mapped.col_tiles() {
                let tile = mapped.tile(rt, ct);
                let (mat, mut rec) = mmm_step(tile, &batch, &cfg.adc)?;
                if ct > 0 {
                    rec.steps = 0; // concurrent with col-tile 0 of this batch
                }
                for (bi, sums) in mat.into_iter().enumerate() {
                    for (k, s) in sums.into_iter().enumerate() {
                        acc[bi][tile.col_range.start + k] += s;
                    }
                }
                records.push(rec);
            }
        }
        let dots: Vec<Vec<DotResult>> = acc
            .into_iter()
            .map(|per| {
                per.into_iter()
                    .map(|a| DotResult::from_accumulated(a, mapped.post_len()))
                    .collect()
            })
            .collect();
        Ok((dots, records))
    })?;

    let mut outputs = Vec::with_capacity(inputs.len());
    let mut trace = StepTrace::new();
    for (dots, records) in per_batch {
        outputs.extend(dots);
        for r in records {
            trace.push(r);
        }
    }
    Ok((outputs, trace))
}
