//! Binary file formats for weights and input sets.
//!
//! Both files open with an 8-byte magic and a little-endian `u32` version.
//! Bit payloads pack LSB-first: logical bit `i` is bit `i % 8` of byte
//! `i / 8`. Weight matrices are stored column-major (one weight vector
//! contiguous per column, each padded to a whole byte) so tile extraction
//! is a contiguous read; full-precision payloads are little-endian `i32`.

use std::path::Path;

use xbarsim_core::bits::{BitMatrix, BitVector};

use crate::error::{CliError, Result};

pub const WEIGHTS_MAGIC: [u8; 8] = *b"XBARWGT\0";
pub const INPUTS_MAGIC: [u8; 8] = *b"XBARINP\0";
pub const FORMAT_VERSION: u32 = 1;

/// Header bytes before the weights data section.
pub const WEIGHTS_HEADER_LEN: usize = 16;

/// Input payload encoding flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputEncoding {
    PackedBits,
    Int32,
}

impl InputEncoding {
    fn flag(self) -> u32 {
        match self {
            InputEncoding::PackedBits => 0,
            InputEncoding::Int32 => 1,
        }
    }
}

/// A loaded input set (all vectors share one length).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InputSet {
    Bits(Vec<BitVector>),
    Ints(Vec<Vec<i32>>),
}

impl InputSet {
    pub fn len(&self) -> usize {
        match self {
            InputSet::Bits(v) => v.len(),
            InputSet::Ints(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn vector_len(&self) -> usize {
        match self {
            InputSet::Bits(v) => v.first().map_or(0, BitVector::len),
            InputSet::Ints(v) => v.first().map_or(0, Vec::len),
        }
    }
}

pub fn bytes_per_bit_vector(len: usize) -> usize {
    len.div_ceil(8)
}

/// Pack a bit vector LSB-first.
pub fn pack_bits(v: &BitVector) -> Vec<u8> {
    let mut out = vec![0u8; bytes_per_bit_vector(v.len())];
    for i in 0..v.len() {
        if v.get(i) {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

pub fn unpack_bits(bytes: &[u8], len: usize) -> BitVector {
    let mut v = BitVector::zeros(len);
    for i in 0..len {
        if bytes[i / 8] >> (i % 8) & 1 == 1 {
            v.set(i, true);
        }
    }
    v
}

/// Column-major packed encoding of a binary matrix.
pub fn pack_bit_matrix(w: &BitMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(w.cols() * bytes_per_bit_vector(w.rows()));
    for j in 0..w.cols() {
        out.extend_from_slice(&pack_bits(&w.column(j)));
    }
    out
}

pub fn unpack_bit_matrix(bytes: &[u8], rows: usize, cols: usize) -> Option<BitMatrix> {
    let per_col = bytes_per_bit_vector(rows);
    if bytes.len() != per_col * cols {
        return None;
    }
    let mut w = BitMatrix::zeros(rows, cols);
    for j in 0..cols {
        let col = unpack_bits(&bytes[j * per_col..(j + 1) * per_col], rows);
        for i in 0..rows {
            if col.get(i) {
                w.set(i, j, true);
            }
        }
    }
    Some(w)
}

pub fn pack_i32s(values: &[i32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(values.len() * 4);
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn unpack_i32s(bytes: &[u8]) -> Option<Vec<i32>> {
    if !bytes.len().is_multiple_of(4) {
        return None;
    }
    Some(
        bytes
            .chunks_exact(4)
            .map(|c| i32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect(),
    )
}

/// Wrap a weights data section with its header.
pub fn encode_weights_file(data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(WEIGHTS_HEADER_LEN + data.len());
    out.extend_from_slice(&WEIGHTS_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes()); // reserved
    out.extend_from_slice(data);
    out
}

/// Validate the header and return the data section.
pub fn decode_weights_file<'a>(path: &Path, bytes: &'a [u8]) -> Result<&'a [u8]> {
    if bytes.len() < WEIGHTS_HEADER_LEN {
        return Err(CliError::format(path, "weights file shorter than its header"));
    }
    if bytes[..8] != WEIGHTS_MAGIC {
        return Err(CliError::format(path, "bad weights magic"));
    }
    let version = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]);
    if version != FORMAT_VERSION {
        return Err(CliError::format(
            path,
            format!("unsupported weights version {version}"),
        ));
    }
    Ok(&bytes[WEIGHTS_HEADER_LEN..])
}

pub fn encode_inputs_file(set: &InputSet) -> Vec<u8> {
    let (encoding, count, vector_len) = match set {
        InputSet::Bits(v) => (InputEncoding::PackedBits, v.len(), set.vector_len()),
        InputSet::Ints(v) => (InputEncoding::Int32, v.len(), set.vector_len()),
    };
    let mut out = Vec::new();
    out.extend_from_slice(&INPUTS_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&encoding.flag().to_le_bytes());
    out.extend_from_slice(&(count as u32).to_le_bytes());
    out.extend_from_slice(&(vector_len as u32).to_le_bytes());
    match set {
        InputSet::Bits(vectors) => {
            for v in vectors {
                out.extend_from_slice(&pack_bits(v));
            }
        }
        InputSet::Ints(vectors) => {
            for v in vectors {
                out.extend_from_slice(&pack_i32s(v));
            }
        }
    }
    out
}

pub fn decode_inputs_file(path: &Path, bytes: &[u8]) -> Result<InputSet> {
    const HEADER: usize = 24;
    if bytes.len() < HEADER {
        return Err(CliError::format(path, "inputs file shorter than its header"));
    }
    if bytes[..8] != INPUTS_MAGIC {
        return Err(CliError::format(path, "bad inputs magic"));
    }
    let word = |at: usize| u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
    let version = word(8);
    if version != FORMAT_VERSION {
        return Err(CliError::format(
            path,
            format!("unsupported inputs version {version}"),
        ));
    }
    let encoding = word(12);
    let count = word(16) as usize;
    let vector_len = word(20) as usize;
    let payload = &bytes[HEADER..];
    match encoding {
        0 => {
            let per = bytes_per_bit_vector(vector_len);
            if payload.len() != per * count {
                return Err(CliError::format(
                    path,
                    format!(
                        "bit payload is {} bytes, expected {} ({} vectors of {} bits)",
                        payload.len(),
                        per * count,
                        count,
                        vector_len
                    ),
                ));
            }
            Ok(InputSet::Bits(
                (0..count)
                    .map(|i| unpack_bits(&payload[i * per..(i + 1) * per], vector_len))
                    .collect(),
            ))
        }
        1 => {
            let per = vector_len * 4;
            if payload.len() != per * count {
                return Err(CliError::format(
                    path,
                    format!(
                        "int payload is {} bytes, expected {} ({} vectors of {} ints)",
                        payload.len(),
                        per * count,
                        count,
                        vector_len
                    ),
                ));
            }
            Ok(InputSet::Ints(
                (0..count)
                    .map(|i| unpack_i32s(&payload[i * per..(i + 1) * per]).expect("aligned"))
                    .collect(),
            ))
        }
        other => Err(CliError::format(
            path,
            format!("unknown input encoding flag {other}"),
        )),
    }
}
