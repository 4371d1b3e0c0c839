//! Error type shared by all simulator stages.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimError {
    /// Two bit vectors that must be the same length are not.
    #[error("length mismatch in {context}: {left} vs {right}")]
    LengthMismatch {
        context: &'static str,
        left: usize,
        right: usize,
    },

    /// Layer input/output shapes do not compose.
    #[error("shape mismatch at layer {layer}: {detail}")]
    ShapeMismatch { layer: usize, detail: String },

    /// A weight matrix with zero rows or columns cannot be mapped.
    #[error("cannot map empty weight matrix ({m} x {n})")]
    EmptyMatrix { m: usize, n: usize },

    /// Crossbar dimensions too small for the requested mapping.
    #[error("crossbar {rows}x{cols} unusable: {detail}")]
    Capacity {
        rows: usize,
        cols: usize,
        detail: &'static str,
    },

    /// A sense-amplifier read addressed a row outside the mapped region.
    #[error("tile {tile_id}: row {row} out of range ({rows_used} rows used)")]
    RowOutOfRange {
        tile_id: usize,
        row: usize,
        rows_used: usize,
    },

    /// A popcount result does not fit in the configured counter width.
    #[error("tile {tile_id}: popcount {count} overflows {width}-bit counter")]
    CounterOverflow {
        tile_id: usize,
        count: u64,
        width: u32,
    },

    /// A tile drives more columns than the per-column counter can ever count.
    #[error(
        "tile {tile_id}: {columns} logical columns exceed the {width}-bit counter \
         budget (max {max}); widen the counter or narrow the crossbar"
    )]
    CounterBudget {
        tile_id: usize,
        columns: usize,
        width: u32,
        max: u64,
    },

    /// A wavelength batch exceeds the multiplexing capacity.
    #[error("batch of {size} drive vectors exceeds WDM capacity K={capacity}")]
    BatchTooLarge { size: usize, capacity: usize },

    /// The (mapping, backend) combination has no execution path.
    #[error("unsupported backend: {detail}")]
    UnsupportedBackend { detail: String },

    /// A run was configured with inconsistent or out-of-range parameters.
    #[error("invalid configuration: {detail}")]
    InvalidConfig { detail: String },

    /// compare() was asked to normalize reports from different workloads.
    #[error("workload mismatch: {detail}")]
    WorkloadMismatch { detail: String },
}
