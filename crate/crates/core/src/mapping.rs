//! Mapping compilers: place a binary weight matrix onto crossbar tiles and
//! derive the matching input drive schedules.
//!
//! Two layouts are supported:
//!
//! * **Tacit** — each weight vector sits vertically in one column with its
//!   complement directly below; the input drive is the vector concatenated
//!   with its complement, so one analog column MAC yields the XNOR+Popcount
//!   of every mapped vector in a single step.
//! * **CustBinary** — each weight vector occupies one row of 2T2R logical
//!   cells storing `(w, !w)` pairs; the drive interleaves `(in, !in)` and a
//!   precharge sense amplifier reads the XNOR bits one row per step, with
//!   digital counters finishing the popcount.
//!
//! Matrices larger than one crossbar are tiled row-major with zero-padded
//! partial tiles; padded cells and drive lines contribute nothing to any
//! column sum, so tiling never changes a result.

use std::ops::Range;

use crate::bits::{BitMatrix, BitVector};
use crate::error::{Result, SimError};

/// Physical crossbar size: `rows` wordlines by `cols` logical cells per row.
///
/// A logical cell is one 1T1R device under the tacit layout and one 2T2R
/// device pair under custbinary, which keeps device budgets comparable:
/// both layouts spend exactly `2 * m * n` devices on an `m x n` matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossbarDims {
    rows: usize,
    cols: usize,
}

impl CrossbarDims {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows < 2 {
            return Err(SimError::Capacity {
                rows,
                cols,
                detail: "need at least 2 rows to hold a weight bit and its complement",
            });
        }
        if cols < 1 {
            return Err(SimError::Capacity {
                rows,
                cols,
                detail: "need at least 1 column",
            });
        }
        Ok(Self { rows, cols })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MappingKind {
    Tacit,
    CustBinary,
}

impl std::fmt::Display for MappingKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MappingKind::Tacit => write!(f, "tacit"),
            MappingKind::CustBinary => write!(f, "custbinary"),
        }
    }
}

/// One programmed crossbar tile.
///
/// `row_range`/`col_range` address the slice of the logical `m x n` weight
/// matrix this tile covers (elements x vectors), independent of how the
/// mapping orients that slice on the physical array. `cells` stores one bit
/// per physical cell for tacit and one logical bit per 2T2R pair for
/// custbinary (the pair always holds the bit and its complement).
#[derive(Debug, Clone, PartialEq)]
pub struct TilePlacement {
    pub tile_id: usize,
    pub kind: MappingKind,
    pub cells: BitMatrix,
    pub row_range: Range<usize>,
    pub col_range: Range<usize>,
    /// Tacit only: row offset from a weight bit to its complement, equal to
    /// the mapped slice length.
    pub complement_row_offset: Option<usize>,
}

impl TilePlacement {
    /// Physical rows carrying data: twice the element slice for tacit (bit
    /// plus complement), one row per mapped weight vector for custbinary.
    pub fn rows_used(&self) -> usize {
        match self.kind {
            MappingKind::Tacit => 2 * self.row_range.len(),
            MappingKind::CustBinary => self.col_range.len(),
        }
    }

    /// Logical columns carrying data: mapped vectors for tacit, mapped
    /// elements for custbinary.
    pub fn cols_used(&self) -> usize {
        match self.kind {
            MappingKind::Tacit => self.col_range.len(),
            MappingKind::CustBinary => self.row_range.len(),
        }
    }

    /// Devices programmed in this tile (counting both devices of a pair).
    pub fn devices_used(&self) -> usize {
        2 * self.row_range.len() * self.col_range.len()
    }

    /// Recover the weight bit for logical matrix coordinates inside this
    /// tile's ranges.
    pub fn decode_weight(&self, row: usize, col: usize) -> bool {
        debug_assert!(self.row_range.contains(&row) && self.col_range.contains(&col));
        let r = row - self.row_range.start;
        let c = col - self.col_range.start;
        match self.kind {
            MappingKind::Tacit => self.cells.get(r, c),
            MappingKind::CustBinary => self.cells.get(c, r),
        }
    }

    /// Flip one stored cell bit. Fault-injection hook for validation tests;
    /// never called by the execution paths.
    pub fn flip_cell(&mut self, row: usize, col: usize) {
        let bit = self.cells.get(row, col);
        self.cells.set(row, col, !bit);
    }
}

/// A weight matrix compiled onto a grid of tiles, plus everything the
/// executors need: the drive schedule (via the `encode_input` methods) and
/// the `post_len` constant for the final `2x - len` transform, applied once
/// per output after all partial popcounts are accumulated.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedLayer {
    kind: MappingKind,
    dims: CrossbarDims,
    m: usize,
    n: usize,
    row_tiles: usize,
    col_tiles: usize,
    tiles: Vec<TilePlacement>,
    post_len: usize,
}

impl MappedLayer {
    pub fn kind(&self) -> MappingKind {
        self.kind
    }

    pub fn dims(&self) -> CrossbarDims {
        self.dims
    }

    /// Weight vector length.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Weight vector count.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row_tiles(&self) -> usize {
        self.row_tiles
    }

    pub fn col_tiles(&self) -> usize {
        self.col_tiles
    }

    pub fn tiles(&self) -> &[TilePlacement] {
        &self.tiles
    }

    /// Grid lookup: tile covering row-tile `rt`, col-tile `ct`.
    pub fn tile(&self, rt: usize, ct: usize) -> &TilePlacement {
        &self.tiles[rt * self.col_tiles + ct]
    }

    pub fn tile_mut(&mut self, rt: usize, ct: usize) -> &mut TilePlacement {
        &mut self.tiles[rt * self.col_tiles + ct]
    }

    /// The vector-length constant of the dot-product post-processing.
    pub fn post_len(&self) -> usize {
        self.post_len
    }

    /// Total devices programmed across all tiles.
    pub fn devices_used(&self) -> usize {
        self.tiles.iter().map(TilePlacement::devices_used).sum()
    }

    /// Reassemble the logical weight matrix from the tile grid.
    pub fn decode(&self) -> BitMatrix {
        let mut w = BitMatrix::zeros(self.m, self.n);
        for tile in &self.tiles {
            for row in tile.row_range.clone() {
                for col in tile.col_range.clone() {
                    if tile.decode_weight(row, col) {
                        w.set(row, col, true);
                    }
                }
            }
        }
        w
    }

    /// Per-row-tile drive vectors for the tacit layout (see
    /// [`tacit_encode_input`]).
    pub fn encode_input_tacit(&self, in_bits: &BitVector) -> Result<Vec<BitVector>> {
        tacit_encode_input(in_bits, self)
    }

    /// Per-col-tile interleaved drives for custbinary (see
    /// [`custbinary_encode_input`]).
    pub fn encode_input_custbinary(&self, in_bits: &BitVector) -> Result<Vec<BitVector>> {
        custbinary_encode_input(in_bits, self)
    }

    /// Element slice covered by row-tile `rt` (tacit orientation).
    pub fn tacit_row_slice(&self, rt: usize) -> Range<usize> {
        let cap = self.dims.rows() / 2;
        let start = rt * cap;
        start..(start + cap).min(self.m)
    }

    /// Element slice covered by col-tile `ct` (custbinary orientation).
    pub fn custbinary_col_slice(&self, ct: usize) -> Range<usize> {
        let start = ct * self.dims.cols();
        start..(start + self.dims.cols()).min(self.m)
    }
}

/// Compile with the given mapping kind.
pub fn layout(kind: MappingKind, w: &BitMatrix, dims: CrossbarDims) -> Result<MappedLayer> {
    match kind {
        MappingKind::Tacit => tacit_layout(w, dims),
        MappingKind::CustBinary => custbinary_layout(w, dims),
    }
}

fn check_nonempty(w: &BitMatrix) -> Result<()> {
    if w.rows() == 0 || w.cols() == 0 {
        return Err(SimError::EmptyMatrix {
            m: w.rows(),
            n: w.cols(),
        });
    }
    Ok(())
}

/// Vertical layout: weight vector j in column j, complement directly below.
///
/// Each tile holds up to `rows/2` elements of up to `cols` vectors, so the
/// grid is `ceil(m / (rows/2))` row-tiles by `ceil(n / cols)` col-tiles.
pub fn tacit_layout(w: &BitMatrix, dims: CrossbarDims) -> Result<MappedLayer> {
    check_nonempty(w)?;
    let (m, n) = (w.rows(), w.cols());
    let slice_cap = dims.rows() / 2;
    let row_tiles = m.div_ceil(slice_cap);
    let col_tiles = n.div_ceil(dims.cols());
    let mut tiles = Vec::with_capacity(row_tiles * col_tiles);
    for rt in 0..row_tiles {
        let r0 = rt * slice_cap;
        let r1 = (r0 + slice_cap).min(m);
        let slice_len = r1 - r0;
        for ct in 0..col_tiles {
            let c0 = ct * dims.cols();
            let c1 = (c0 + dims.cols()).min(n);
            let mut cells = BitMatrix::zeros(dims.rows(), dims.cols());
            for (c, col) in (c0..c1).enumerate() {
                for (r, row) in (r0..r1).enumerate() {
                    let bit = w.get(row, col);
                    cells.set(r, c, bit);
                    cells.set(slice_len + r, c, !bit);
                }
            }
            tiles.push(TilePlacement {
                tile_id: rt * col_tiles + ct,
                kind: MappingKind::Tacit,
                cells,
                row_range: r0..r1,
                col_range: c0..c1,
                complement_row_offset: Some(slice_len),
            });
        }
    }
    Ok(MappedLayer {
        kind: MappingKind::Tacit,
        dims,
        m,
        n,
        row_tiles,
        col_tiles,
        tiles,
        post_len: m,
    })
}

/// Horizontal layout: weight vector j across row j as `(w, !w)` pairs.
///
/// Each tile holds up to `rows` vectors of up to `cols` elements, so the
/// grid is `ceil(n / rows)` row-tiles by `ceil(m / cols)` col-tiles.
pub fn custbinary_layout(w: &BitMatrix, dims: CrossbarDims) -> Result<MappedLayer> {
    check_nonempty(w)?;
    let (m, n) = (w.rows(), w.cols());
    let row_tiles = n.div_ceil(dims.rows());
    let col_tiles = m.div_ceil(dims.cols());
    let mut tiles = Vec::with_capacity(row_tiles * col_tiles);
    for rt in 0..row_tiles {
        let j0 = rt * dims.rows();
        let j1 = (j0 + dims.rows()).min(n);
        for ct in 0..col_tiles {
            let i0 = ct * dims.cols();
            let i1 = (i0 + dims.cols()).min(m);
            let mut cells = BitMatrix::zeros(dims.rows(), dims.cols());
            for (r, vec_idx) in (j0..j1).enumerate() {
                for (c, elem_idx) in (i0..i1).enumerate() {
                    cells.set(r, c, w.get(elem_idx, vec_idx));
                }
            }
            tiles.push(TilePlacement {
                tile_id: rt * col_tiles + ct,
                kind: MappingKind::CustBinary,
                cells,
                row_range: i0..i1,
                col_range: j0..j1,
                complement_row_offset: None,
            });
        }
    }
    Ok(MappedLayer {
        kind: MappingKind::CustBinary,
        dims,
        m,
        n,
        row_tiles,
        col_tiles,
        tiles,
        post_len: m,
    })
}

/// Tacit drive schedule: for each row-tile slice `s`, the drive is
/// `concat(in[s], complement(in[s]))`, aligned with that tile's weight and
/// complement rows. Each drive is self-contained, so row-tiles never need a
/// global complement block.
pub fn tacit_encode_input(in_bits: &BitVector, layer: &MappedLayer) -> Result<Vec<BitVector>> {
    expect_mapping(layer, MappingKind::Tacit)?;
    check_input_len(in_bits, layer)?;
    let mut drives = Vec::with_capacity(layer.row_tiles);
    for rt in 0..layer.row_tiles {
        let r = layer.tacit_row_slice(rt);
        let slice = in_bits.slice(r.start, r.end);
        let drive = slice.concat(&slice.complement());
        drives.push(drive);
    }
    Ok(drives)
}

/// CustBinary drive schedule: for each col-tile slice, the drive interleaves
/// `(in_i, !in_i)` so each pair lines up with the stored `(w, !w)` devices.
/// Bit `2i` carries the input bit, bit `2i + 1` its complement.
pub fn custbinary_encode_input(
    in_bits: &BitVector,
    layer: &MappedLayer,
) -> Result<Vec<BitVector>> {
    expect_mapping(layer, MappingKind::CustBinary)?;
    check_input_len(in_bits, layer)?;
    let mut drives = Vec::with_capacity(layer.col_tiles);
    for ct in 0..layer.col_tiles {
        let r = layer.custbinary_col_slice(ct);
        let mut drive = BitVector::zeros(2 * r.len());
        for (k, i) in r.enumerate() {
            let bit = in_bits.get(i);
            drive.set(2 * k, bit);
            drive.set(2 * k + 1, !bit);
        }
        drives.push(drive);
    }
    Ok(drives)
}

fn expect_mapping(layer: &MappedLayer, kind: MappingKind) -> Result<()> {
    if layer.kind != kind {
        return Err(SimError::UnsupportedBackend {
            detail: format!("{} drive schedule applied to a {} layout", kind, layer.kind),
        });
    }
    Ok(())
}

fn check_input_len(in_bits: &BitVector, layer: &MappedLayer) -> Result<()> {
    if in_bits.len() != layer.m {
        return Err(SimError::LengthMismatch {
            context: "input drive",
            left: in_bits.len(),
            right: layer.m,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(bits: &[u8]) -> BitVector {
        BitVector::from_ints(bits)
    }

    fn matrix(rows: usize, cols: usize, seed: u64) -> BitMatrix {
        let mut state = seed | 1;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        let mut w = BitMatrix::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                w.set(i, j, next() & 1 == 1);
            }
        }
        w
    }

    #[test]
    fn tacit_single_column_places_weight_then_complement() {
        let w = BitMatrix::from_columns(&[bv(&[1, 0])]).unwrap();
        let mapped = tacit_layout(&w, CrossbarDims::new(4, 1).unwrap()).unwrap();
        assert_eq!(mapped.tiles().len(), 1);
        let tile = mapped.tile(0, 0);
        let col: Vec<bool> = (0..4).map(|r| tile.cells.get(r, 0)).collect();
        assert_eq!(col, vec![true, false, false, true]);
        assert_eq!(tile.complement_row_offset, Some(2));
    }

    #[test]
    fn tacit_three_kernels_fit_one_tile() {
        // m=2, n=3 on a 4x3 crossbar: one tile, 3 columns, 4 rows used.
        let w = matrix(2, 3, 7);
        let mapped = tacit_layout(&w, CrossbarDims::new(4, 3).unwrap()).unwrap();
        assert_eq!((mapped.row_tiles(), mapped.col_tiles()), (1, 1));
        assert_eq!(mapped.tile(0, 0).rows_used(), 4);
        assert_eq!(mapped.tile(0, 0).cols_used(), 3);
    }

    #[test]
    fn tacit_tall_vector_splits_into_row_tiles() {
        // m=5 with 2 elements per tile -> slices of 2, 2, 1.
        let w = matrix(5, 1, 3);
        let mapped = tacit_layout(&w, CrossbarDims::new(4, 4).unwrap()).unwrap();
        assert_eq!(mapped.row_tiles(), 3);
        let lens: Vec<usize> = (0..3).map(|rt| mapped.tacit_row_slice(rt).len()).collect();
        assert_eq!(lens, vec![2, 2, 1]);
    }

    #[test]
    fn tacit_rejects_degenerate_crossbars() {
        assert!(matches!(
            CrossbarDims::new(1, 4),
            Err(SimError::Capacity { .. })
        ));
        assert!(matches!(
            CrossbarDims::new(4, 0),
            Err(SimError::Capacity { .. })
        ));
    }

    #[test]
    fn layout_rejects_empty_matrices() {
        let dims = CrossbarDims::new(4, 4).unwrap();
        assert!(matches!(
            tacit_layout(&BitMatrix::zeros(0, 3), dims),
            Err(SimError::EmptyMatrix { .. })
        ));
        assert!(matches!(
            custbinary_layout(&BitMatrix::zeros(3, 0), dims),
            Err(SimError::EmptyMatrix { .. })
        ));
    }

    #[test]
    fn tacit_drive_concatenates_input_and_complement() {
        let w = matrix(2, 1, 11);
        let mapped = tacit_layout(&w, CrossbarDims::new(4, 1).unwrap()).unwrap();
        let drives = mapped.encode_input_tacit(&bv(&[1, 0])).unwrap();
        assert_eq!(drives, vec![bv(&[1, 0, 0, 1])]);
    }

    #[test]
    fn tacit_drive_all_ones_has_ones_then_zeros() {
        let w = matrix(6, 2, 13);
        let mapped = tacit_layout(&w, CrossbarDims::new(12, 4).unwrap()).unwrap();
        let drives = mapped.encode_input_tacit(&BitVector::ones(6)).unwrap();
        assert_eq!(drives.len(), 1);
        assert_eq!(drives[0], bv(&[1, 1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0]));
    }

    #[test]
    fn tacit_split_drives_are_self_complementary() {
        let w = matrix(5, 1, 17);
        let mapped = tacit_layout(&w, CrossbarDims::new(4, 4).unwrap()).unwrap();
        let drives = mapped.encode_input_tacit(&bv(&[1, 0, 1, 1, 0])).unwrap();
        assert_eq!(drives.len(), 3);
        for drive in &drives {
            let half = drive.len() / 2;
            let top = drive.slice(0, half);
            let bottom = drive.slice(half, drive.len());
            assert_eq!(bottom, top.complement());
        }
    }

    #[test]
    fn custbinary_single_vector_occupies_one_row() {
        let w = BitMatrix::from_columns(&[bv(&[1, 0])]).unwrap();
        let mapped = custbinary_layout(&w, CrossbarDims::new(2, 2).unwrap()).unwrap();
        assert_eq!(mapped.tiles().len(), 1);
        let tile = mapped.tile(0, 0);
        // logical row 0 holds the vector; cell pairs are (1,0) then (0,1)
        assert!(tile.cells.get(0, 0));
        assert!(!tile.cells.get(0, 1));
        assert_eq!(tile.rows_used(), 1);
        assert_eq!(tile.cols_used(), 2);
    }

    #[test]
    fn custbinary_vectors_tile_by_rows() {
        // n=3 vectors with 2 crossbar rows -> 2 row-tiles (2 + 1 vectors).
        let w = matrix(4, 3, 19);
        let mapped = custbinary_layout(&w, CrossbarDims::new(2, 4).unwrap()).unwrap();
        assert_eq!(mapped.row_tiles(), 2);
        assert_eq!(mapped.tile(0, 0).rows_used(), 2);
        assert_eq!(mapped.tile(1, 0).rows_used(), 1);
    }

    #[test]
    fn custbinary_elements_tile_by_columns() {
        // m = cols + 1 -> 2 col-tiles whose local popcounts get tree-summed.
        let w = matrix(5, 2, 23);
        let mapped = custbinary_layout(&w, CrossbarDims::new(4, 4).unwrap()).unwrap();
        assert_eq!(mapped.col_tiles(), 2);
        assert_eq!(mapped.tile(0, 0).cols_used(), 4);
        assert_eq!(mapped.tile(0, 1).cols_used(), 1);
    }

    #[test]
    fn custbinary_drive_interleaves_input_and_complement() {
        let w = matrix(2, 1, 29);
        let mapped = custbinary_layout(&w, CrossbarDims::new(2, 2).unwrap()).unwrap();
        let drives = mapped.encode_input_custbinary(&bv(&[1, 0])).unwrap();
        assert_eq!(drives, vec![bv(&[1, 0, 0, 1])]);

        let zeros = mapped.encode_input_custbinary(&bv(&[0, 0])).unwrap();
        assert_eq!(zeros, vec![bv(&[0, 1, 0, 1])]);
    }

    #[test]
    fn round_trip_decode_recovers_weights() {
        for (m, n, rows, cols) in [
            (1usize, 1usize, 2usize, 1usize),
            (5, 3, 4, 2),
            (64, 64, 32, 32),
            (7, 13, 2, 1),
            (13, 7, 6, 5),
        ] {
            let w = matrix(m, n, (m * 31 + n) as u64);
            let dims = CrossbarDims::new(rows, cols).unwrap();
            for kind in [MappingKind::Tacit, MappingKind::CustBinary] {
                let mapped = layout(kind, &w, dims).unwrap();
                assert_eq!(mapped.decode(), w, "{kind} {m}x{n} on {rows}x{cols}");
            }
        }
    }

    #[test]
    fn both_mappings_spend_the_same_device_budget() {
        let w = matrix(9, 5, 41);
        let dims = CrossbarDims::new(6, 4).unwrap();
        let tacit = tacit_layout(&w, dims).unwrap();
        let cust = custbinary_layout(&w, dims).unwrap();
        assert_eq!(tacit.devices_used(), 2 * 9 * 5);
        assert_eq!(cust.devices_used(), 2 * 9 * 5);
    }

    #[test]
    fn tiling_covers_matrix_without_overlap() {
        for (m, n, rows, cols) in [(5usize, 3usize, 4usize, 2usize), (17, 9, 8, 3), (3, 20, 2, 7)]
        {
            let w = matrix(m, n, 53);
            let dims = CrossbarDims::new(rows, cols).unwrap();
            for kind in [MappingKind::Tacit, MappingKind::CustBinary] {
                let mapped = layout(kind, &w, dims).unwrap();
                let mut covered = vec![0u8; m * n];
                for tile in mapped.tiles() {
                    for r in tile.row_range.clone() {
                        for c in tile.col_range.clone() {
                            covered[r * n + c] += 1;
                        }
                    }
                }
                assert!(covered.iter().all(|&c| c == 1), "{kind} coverage");
            }
        }
    }

    #[test]
    fn drive_schedules_reject_wrong_lengths() {
        let w = matrix(4, 2, 59);
        let dims = CrossbarDims::new(8, 2).unwrap();
        let tacit = tacit_layout(&w, dims).unwrap();
        assert!(matches!(
            tacit.encode_input_tacit(&bv(&[1, 0])),
            Err(SimError::LengthMismatch { .. })
        ));
        let cust = custbinary_layout(&w, dims).unwrap();
        assert!(matches!(
            cust.encode_input_custbinary(&BitVector::ones(5)),
            Err(SimError::LengthMismatch { .. })
        ));
    }
}
