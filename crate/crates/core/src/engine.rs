//! Electronic crossbar execution: analog column MACs behind an ADC model
//! for the tacit layout, sense-amplifier row reads plus digital popcount
//! for custbinary, with every step and peripheral activation recorded.
//!
//! A *step* is one crossbar activation epoch. Tiles belonging to the same
//! epoch (the column-tiles of one drive) are recorded individually for
//! energy accounting but only the first advances the step counter.

use serde::{Deserialize, Serialize};

use crate::bits::{BitVector, DotResult};
use crate::error::{Result, SimError};
use crate::mapping::{MappedLayer, MappingKind, TilePlacement};
use crate::par::try_map_indexed;

/// ADC transfer function applied to every analog column sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdcMode {
    /// Exact integer readout.
    Ideal,
    /// `round(v / delta) * delta` with `delta = max_level / (2^bits - 1)`,
    /// clipped to `[0, max_level]`.
    Quantized { bits: u32 },
}

/// ADC model; full scale equals the crossbar row count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdcModel {
    pub mode: AdcMode,
    pub max_level: usize,
    /// Columns multiplexed onto one ADC; a VMM with `c > 1` costs `c`
    /// sub-steps. 1 means fully parallel, non-shared readout.
    pub columns_per_adc: u32,
}

impl AdcModel {
    /// Ideal readout for a crossbar with `rows` wordlines; the implied
    /// resolution is `ceil(log2(rows + 1))` bits.
    pub fn ideal(rows: usize) -> Self {
        Self {
            mode: AdcMode::Ideal,
            max_level: rows,
            columns_per_adc: 1,
        }
    }

    pub fn quantized(rows: usize, bits: u32) -> Self {
        Self {
            mode: AdcMode::Quantized { bits },
            max_level: rows,
            columns_per_adc: 1,
        }
    }

    /// Implied resolution in bits.
    pub fn bits(&self) -> u32 {
        match self.mode {
            AdcMode::Ideal => usize::BITS - self.max_level.leading_zeros(),
            AdcMode::Quantized { bits } => bits,
        }
    }

    /// Convert a raw integer column sum to the ADC output domain.
    pub fn convert(&self, raw: u64) -> f64 {
        match self.mode {
            AdcMode::Ideal => raw as f64,
            AdcMode::Quantized { bits } => {
                let levels = (1u64 << bits) - 1;
                if levels == 0 {
                    return 0.0;
                }
                let delta = self.max_level as f64 / levels as f64;
                let q = (raw as f64 / delta).round() * delta;
                q.clamp(0.0, self.max_level as f64)
            }
        }
    }
}

/// What one trace record represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    /// Analog vector-matrix multiply (electronic, tacit layout).
    Vmm,
    /// Wavelength-fused matrix-matrix multiply (photonic, tacit layout).
    Mmm,
    /// Sense-amplifier row read (electronic, custbinary layout).
    PcsaRead,
}

impl StepKind {
    /// Photonic records are timed with the optical step time.
    pub fn is_optical(self) -> bool {
        matches!(self, StepKind::Mmm)
    }
}

/// One crossbar activation.
///
/// `steps` counts epochs this activation *advances*: 0 marks an activation
/// running concurrently with the one that opened the epoch (column-tiles of
/// the same drive). `duration` is the epochs the activation spans, which is
/// what power-over-time energy terms integrate.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepRecord {
    pub input_index: usize,
    pub kind: StepKind,
    pub tile_id: usize,
    pub steps: u64,
    pub duration: u64,
    pub wavelength_count: u32,
    pub rows_driven: u32,
    pub adc_conversions: u64,
    pub sa_activations: u64,
    pub counter_increments: u64,
    pub tree_reductions: u64,
}

impl StepRecord {
    fn new(kind: StepKind, tile_id: usize) -> Self {
        Self {
            input_index: 0,
            kind,
            tile_id,
            steps: 0,
            duration: 1,
            wavelength_count: 1,
            rows_driven: 0,
            adc_conversions: 0,
            sa_activations: 0,
            counter_increments: 0,
            tree_reductions: 0,
        }
    }
}

/// Aggregate counters over a trace.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceTotals {
    pub steps: u64,
    pub electronic_steps: u64,
    pub optical_steps: u64,
    pub adc_conversions: u64,
    pub sa_activations: u64,
    pub counter_increments: u64,
    pub tree_reductions: u64,
    pub crossbar_activations: u64,
}

/// Ordered record of crossbar activity, merged deterministically (input
/// order, then generation order within an input).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepTrace {
    records: Vec<StepRecord>,
}

impl StepTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: StepRecord) {
        self.records.push(record);
    }

    pub fn extend(&mut self, other: StepTrace) {
        self.records.extend(other.records);
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    pub fn totals(&self) -> TraceTotals {
        let mut t = TraceTotals::default();
        for r in &self.records {
            t.steps += r.steps;
            if r.kind.is_optical() {
                t.optical_steps += r.steps;
            } else {
                t.electronic_steps += r.steps;
            }
            t.adc_conversions += r.adc_conversions;
            t.sa_activations += r.sa_activations;
            t.counter_increments += r.counter_increments;
            t.tree_reductions += r.tree_reductions;
            t.crossbar_activations += 1;
        }
        t
    }

    /// Activation count per tile id (one entry per tile that ever fired).
    pub fn activations_by_tile(&self) -> std::collections::BTreeMap<usize, u64> {
        let mut map = std::collections::BTreeMap::new();
        for r in &self.records {
            *map.entry(r.tile_id).or_insert(0u64) += 1;
        }
        map
    }
}

/// One analog VMM on a tacit tile: column `j` accumulates
/// `sum_i drive_i * cell_ij` and passes through the ADC.
///
/// Records one step (`columns_per_adc` sub-steps when ADCs are shared) and
/// one conversion per used column. Quantized-mode clipping is silent.
pub fn vmm_step(
    tile: &TilePlacement,
    drive: &BitVector,
    adc: &AdcModel,
) -> Result<(Vec<f64>, StepRecord)> {
    if tile.kind != MappingKind::Tacit {
        return Err(SimError::UnsupportedBackend {
            detail: "vmm_step requires a tacit-mapped tile".into(),
        });
    }
    let rows_used = tile.rows_used();
    if drive.len() != rows_used {
        return Err(SimError::LengthMismatch {
            context: "vmm drive",
            left: drive.len(),
            right: rows_used,
        });
    }
    let cols_used = tile.cols_used();
    let mut sums = Vec::with_capacity(cols_used);
    for j in 0..cols_used {
        let raw = drive.and_popcount_prefix(&tile.cells.column(j));
        sums.push(adc.convert(raw));
    }
    let mut rec = StepRecord::new(StepKind::Vmm, tile.tile_id);
    rec.steps = u64::from(adc.columns_per_adc);
    rec.duration = u64::from(adc.columns_per_adc);
    rec.rows_driven = rows_used as u32;
    rec.adc_conversions = cols_used as u64;
    Ok((sums, rec))
}

/// One sense-amplifier read of a custbinary row: bit `i` of the result is
/// `xnor(in_i, w_i)`, sensed from the `(in, !in)` drive pair against the
/// stored `(w, !w)` device pair. Records one step and one SA activation per
/// bit read.
pub fn pcsa_read(
    tile: &TilePlacement,
    row: usize,
    interleaved_drive: &BitVector,
) -> Result<(BitVector, StepRecord)> {
    if tile.kind != MappingKind::CustBinary {
        return Err(SimError::UnsupportedBackend {
            detail: "pcsa_read requires a custbinary-mapped tile".into(),
        });
    }
    if row >= tile.rows_used() {
        return Err(SimError::RowOutOfRange {
            tile_id: tile.tile_id,
            row,
            rows_used: tile.rows_used(),
        });
    }
    let cols_used = tile.cols_used();
    if interleaved_drive.len() != 2 * cols_used {
        return Err(SimError::LengthMismatch {
            context: "interleaved pcsa drive",
            left: interleaved_drive.len(),
            right: 2 * cols_used,
        });
    }
    let mut bits = BitVector::zeros(cols_used);
    for i in 0..cols_used {
        let w = tile.cells.get(row, i);
        let a = interleaved_drive.get(2 * i);
        let a_bar = interleaved_drive.get(2 * i + 1);
        // The sense amplifier sees both device currents: (a & w) | (abar & !w).
        if (a && w) || (a_bar && !w) {
            bits.set(i, true);
        }
    }
    let mut rec = StepRecord::new(StepKind::PcsaRead, tile.tile_id);
    rec.steps = 1;
    rec.rows_driven = 1;
    rec.sa_activations = cols_used as u64;
    Ok((bits, rec))
}

/// Digital per-crossbar popcount with a bounded counter.
///
/// Errors when the count does not fit in `counter_bits`, naming the tile;
/// saturating silently would corrupt the dot product.
pub fn local_popcount(bits: &BitVector, counter_bits: u32, tile_id: usize) -> Result<u64> {
    if counter_bits == 0 || counter_bits >= 64 {
        return Err(SimError::InvalidConfig {
            detail: format!("counter width {counter_bits} out of range (1..=63)"),
        });
    }
    let count = bits.popcount();
    if count >= 1u64 << counter_bits {
        return Err(SimError::CounterOverflow {
            tile_id,
            count,
            width: counter_bits,
        });
    }
    Ok(count)
}

/// Tree reduction of per-crossbar popcounts into a global count.
pub fn global_popcount_tree(local_counts: &[u64]) -> u64 {
    local_counts.iter().sum()
}

/// Electronic execution parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub adc: AdcModel,
    /// Width of the per-crossbar popcount counters used by custbinary.
    pub counter_bits: u32,
}

impl EngineConfig {
    pub fn ideal(dims_rows: usize) -> Self {
        Self {
            adc: AdcModel::ideal(dims_rows),
            counter_bits: DEFAULT_COUNTER_BITS,
        }
    }
}

/// Digital popcount counter width; counts up to 31 bits per readout.
pub const DEFAULT_COUNTER_BITS: u32 = 5;

/// Execute a mapped layer on the electronic backend for a batch of inputs.
///
/// The path is selected by the layer's mapping: one VMM per (input,
/// row-tile) for tacit with column-tiles firing concurrently, one PCSA row
/// read per (input, weight vector) for custbinary with the local counters
/// and the global tree pipelined into the read step. Outputs are the exact
/// dot products under an ideal ADC.
///
/// Inputs fan out across worker threads; records merge in input order.
pub fn execute_layer(
    mapped: &MappedLayer,
    inputs: &[BitVector],
    cfg: &EngineConfig,
) -> Result<(Vec<Vec<DotResult>>, StepTrace)> {
    match mapped.kind() {
        MappingKind::Tacit => execute_tacit(mapped, inputs, cfg),
        MappingKind::CustBinary => execute_custbinary(mapped, inputs, cfg),
    }
}

fn execute_tacit(
    mapped: &MappedLayer,
    inputs: &[BitVector],
    cfg: &EngineConfig,
) -> Result<(Vec<Vec<DotResult>>, StepTrace)> {
    let per_input = try_map_indexed(inputs, |idx, input| {
        let drives = mapped.encode_input_tacit(input)?;
        let mut acc = vec![0.0f64; mapped.n()];
        let mut records = Vec::with_capacity(mapped.row_tiles() * mapped.col_tiles());
        for (rt, drive) in drives.iter().enumerate() {
            for ct in 0..mapped.col_tiles() {
                let tile = mapped.tile(rt, ct);
                let (sums, mut rec) = vmm_step(tile, drive, &cfg.adc)?;
                rec.input_index = idx;
                if ct > 0 {
                    rec.steps = 0; // concurrent with col-tile 0 of this drive
                }
                for (k, s) in sums.into_iter().enumerate() {
                    acc[tile.col_range.start + k] += s;
                }
                records.push(rec);
            }
        }
        let dots = acc
            .into_iter()
            .map(|a| DotResult::from_accumulated(a, mapped.post_len()))
            .collect::<Vec<_>>();
        Ok((dots, records))
    })?;
    Ok(merge(per_input))
}

fn execute_custbinary(
    mapped: &MappedLayer,
    inputs: &[BitVector],
    cfg: &EngineConfig,
) -> Result<(Vec<Vec<DotResult>>, StepTrace)> {
    // A tile driving more columns than the counter can count would have to
    // saturate at runtime; reject the configuration before any step runs.
    let max = (1u64 << cfg.counter_bits) - 1;
    for tile in mapped.tiles() {
        if tile.cols_used() as u64 > max {
            return Err(SimError::CounterBudget {
                tile_id: tile.tile_id,
                columns: tile.cols_used(),
                width: cfg.counter_bits,
                max,
            });
        }
    }
    let per_input = try_map_indexed(inputs, |idx, input| {
        let drives = mapped.encode_input_custbinary(input)?;
        let mut dots = Vec::with_capacity(mapped.n());
        let mut records = Vec::new();
        for rt in 0..mapped.row_tiles() {
            let vectors_in_tile = mapped.tile(rt, 0).rows_used();
            for row in 0..vectors_in_tile {
                let mut locals = Vec::with_capacity(mapped.col_tiles());
                for (ct, drive) in drives.iter().enumerate() {
                    let tile = mapped.tile(rt, ct);
                    let (bits, mut rec) = pcsa_read(tile, row, drive)?;
                    let count = local_popcount(&bits, cfg.counter_bits, tile.tile_id)?;
                    rec.input_index = idx;
                    rec.counter_increments = count;
                    if ct > 0 {
                        rec.steps = 0; // connected crossbars read in parallel
                    }
                    locals.push(count);
                    records.push(rec);
                }
                let total = if locals.len() > 1 {
                    // Global tree reduction, pipelined into the read step.
                    if let Some(last) = records.last_mut() {
                        last.tree_reductions += 1;
                    }
                    global_popcount_tree(&locals)
                } else {
                    locals[0]
                };
                dots.push(DotResult::from_popcount(total, mapped.post_len()));
            }
        }
        Ok((dots, records))
    })?;
    Ok(merge(per_input))
}

pub(crate) fn merge(
    per_input: Vec<(Vec<DotResult>, Vec<StepRecord>)>,
) -> (Vec<Vec<DotResult>>, StepTrace) {
    let mut outputs = Vec::with_capacity(per_input.len());
    let mut trace = StepTrace::new();
    for (dots, records) in per_input {
        outputs.push(dots);
        for r in records {
            trace.push(r);
        }
    }
    (outputs, trace)
}
