//! Packed binary vectors and the XNOR+Popcount dot-product identity.
//!
//! Bits are stored `{0, 1}` and decode to the bipolar value `2b - 1`, so a
//! stored 0 means -1 and a stored 1 means +1. Under that encoding the dot
//! product of two equal-length vectors is
//!
//! ```text
//! dot(a, b) = 2 * popcount(xnor(a, b)) - len
//! ```
//!
//! which is what every crossbar backend in this crate ultimately computes.
//! Bit `i` lives at bit `i % 64` of word `i / 64` (LSB-first); the unused
//! tail of the last word is always zero, which keeps popcounts and word-wise
//! logic exact without per-bit loops.

use crate::error::{Result, SimError};

/// A packed sequence of `{0, 1}` bits with a logical length.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    words: Vec<u64>,
    len: usize,
}

impl BitVector {
    /// All-zeros vector of the given length.
    pub fn zeros(len: usize) -> Self {
        Self {
            words: vec![0; words_for(len)],
            len,
        }
    }

    /// All-ones vector of the given length.
    pub fn ones(len: usize) -> Self {
        let mut v = Self {
            words: vec![u64::MAX; words_for(len)],
            len,
        };
        v.mask_tail();
        v
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b {
                v.words[i / 64] |= 1u64 << (i % 64);
            }
        }
        v
    }

    /// Convenience for `{0, 1}` literals in tests and loaders; any nonzero
    /// value counts as a set bit.
    pub fn from_ints(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            if b != 0 {
                v.words[i / 64] |= 1u64 << (i % 64);
            }
        }
        v
    }

    /// Build a short vector (len <= 64) from the low bits of a word.
    pub fn from_word(word: u64, len: usize) -> Self {
        assert!(len <= 64, "from_word supports at most 64 bits");
        let mut v = Self {
            words: vec![word],
            len,
        };
        if len == 0 {
            v.words.clear();
        }
        v.mask_tail();
        v
    }

    /// Reconstruct from packed words produced by [`BitVector::words`].
    pub fn from_words(words: Vec<u64>, len: usize) -> Self {
        assert_eq!(words.len(), words_for(len));
        let mut v = Self { words, len };
        v.mask_tail();
        v
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    #[inline]
    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: bool) {
        debug_assert!(i < self.len);
        if bit {
            self.words[i / 64] |= 1u64 << (i % 64);
        } else {
            self.words[i / 64] &= !(1u64 << (i % 64));
        }
    }

    pub fn popcount(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    /// Bitwise complement; `popcount(v) + popcount(!v) == len` always holds.
    pub fn complement(&self) -> Self {
        let mut out = Self {
            words: self.words.iter().map(|w| !w).collect(),
            len: self.len,
        };
        out.mask_tail();
        out
    }

    /// Copy of bits `range.start .. range.end`.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        assert!(start <= end && end <= self.len);
        let mut out = Self::zeros(end - start);
        for i in start..end {
            if self.get(i) {
                out.set(i - start, true);
            }
        }
        out
    }

    /// `self` followed by `other`.
    pub fn concat(&self, other: &Self) -> Self {
        let mut out = Self::zeros(self.len + other.len);
        for i in 0..self.len {
            if self.get(i) {
                out.set(i, true);
            }
        }
        for i in 0..other.len {
            if other.get(i) {
                out.set(self.len + i, true);
            }
        }
        out
    }

    /// Iterator over logical bits.
    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// `popcount(self & other)` without materializing the AND.
    ///
    /// `other` may be longer than `self`; the comparison runs over `self`'s
    /// words, whose masked tail guarantees no stray bits leak in.
    pub fn and_popcount_prefix(&self, other: &Self) -> u64 {
        debug_assert!(other.len >= self.len);
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a & b).count_ones()))
            .sum()
    }

    fn mask_tail(&mut self) {
        let rem = self.len % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }
}

impl std::fmt::Display for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.iter() {
            write!(f, "{}", u8::from(b))?;
        }
        Ok(())
    }
}

#[inline]
fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

/// Bitwise XNOR of two equal-length vectors: bit `i` is 1 iff `a[i] == b[i]`.
pub fn xnor(a: &BitVector, b: &BitVector) -> Result<BitVector> {
    check_len(a, b, "xnor")?;
    let mut out = BitVector {
        words: a
            .words
            .iter()
            .zip(&b.words)
            .map(|(x, y)| !(x ^ y))
            .collect(),
        len: a.len,
    };
    out.mask_tail();
    Ok(out)
}

fn check_len(a: &BitVector, b: &BitVector, context: &'static str) -> Result<()> {
    if a.len != b.len {
        return Err(SimError::LengthMismatch {
            context,
            left: a.len,
            right: b.len,
        });
    }
    Ok(())
}

/// Result of one XNOR+Popcount dot product.
///
/// `value` is the bipolar dot product; `popcount_raw` the number of agreeing
/// bit positions. They are tied by `value == 2 * popcount_raw - len`, so
/// `value` always has the same parity as `len` and lies in `[-len, len]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DotResult {
    pub value: i64,
    pub popcount_raw: u64,
}

impl DotResult {
    /// Apply the `2x - len` post-processing to a raw agreement count.
    #[inline]
    pub fn from_popcount(popcount: u64, len: usize) -> Self {
        Self {
            value: 2 * popcount as i64 - len as i64,
            popcount_raw: popcount,
        }
    }

    /// Build from an accumulated (possibly ADC-quantized) agreement count.
    ///
    /// The accumulator is rounded to the nearest integer and clamped to
    /// `[0, len]` before post-processing; under an ideal ADC the value is
    /// already integral and the rounding is exact.
    pub fn from_accumulated(acc: f64, len: usize) -> Self {
        let rounded = acc.round().clamp(0.0, len as f64) as u64;
        Self::from_popcount(rounded, len)
    }
}

/// The full dot-product identity: XNOR, popcount, then `2x - len`.
pub fn xnor_popcount_dot(in_bits: &BitVector, w_bits: &BitVector) -> Result<DotResult> {
    check_len(in_bits, w_bits, "xnor_popcount_dot")?;
    if in_bits.len == 0 {
        return Err(SimError::LengthMismatch {
            context: "xnor_popcount_dot on empty vectors",
            left: 0,
            right: 0,
        });
    }
    let mut popcount = 0u64;
    let rem = in_bits.len % 64;
    let last = in_bits.words.len() - 1;
    for (k, (a, b)) in in_bits.words.iter().zip(&w_bits.words).enumerate() {
        let mut agree = !(a ^ b);
        if k == last && rem != 0 {
            agree &= (1u64 << rem) - 1;
        }
        popcount += u64::from(agree.count_ones());
    }
    Ok(DotResult::from_popcount(popcount, in_bits.len))
}

/// Threshold a scalar vector into bits: bit `i` is 1 iff `x[i] >= threshold`.
///
/// Ties map to 1, i.e. the sign convention is `sign(0) = +1`.
pub fn binarize<T: PartialOrd + Copy>(values: &[T], threshold: T) -> BitVector {
    let mut out = BitVector::zeros(values.len());
    for (i, v) in values.iter().enumerate() {
        if *v >= threshold {
            out.set(i, true);
        }
    }
    out
}

/// A packed bit matrix with column-contiguous storage.
///
/// `rows` is the weight-vector length m and `cols` the number of weight
/// vectors n; `column(j)` is weight vector j. Column storage keeps tile
/// extraction and per-column dot products word-aligned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    words_per_col: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let words_per_col = words_for(rows);
        Self {
            rows,
            cols,
            words_per_col,
            words: vec![0; words_per_col * cols],
        }
    }

    /// Assemble from equal-length column vectors.
    pub fn from_columns(columns: &[BitVector]) -> Result<Self> {
        let rows = columns.first().map_or(0, BitVector::len);
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(SimError::LengthMismatch {
                    context: "BitMatrix::from_columns",
                    left: rows,
                    right: col.len(),
                });
            }
            let base = j * m.words_per_col;
            m.words[base..base + m.words_per_col].copy_from_slice(col.words());
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.rows && col < self.cols);
        let w = col * self.words_per_col + row / 64;
        self.words[w] >> (row % 64) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, bit: bool) {
        debug_assert!(row < self.rows && col < self.cols);
        let w = col * self.words_per_col + row / 64;
        if bit {
            self.words[w] |= 1u64 << (row % 64);
        } else {
            self.words[w] &= !(1u64 << (row % 64));
        }
    }

    /// Copy of column `j` as a vector of length `rows`.
    pub fn column(&self, j: usize) -> BitVector {
        assert!(j < self.cols);
        let base = j * self.words_per_col;
        BitVector::from_words(
            self.words[base..base + self.words_per_col].to_vec(),
            self.rows,
        )
    }

    /// Packed words of column `j` (tail bits beyond `rows` are zero).
    #[inline]
    pub fn column_words(&self, j: usize) -> &[u64] {
        let base = j * self.words_per_col;
        &self.words[base..base + self.words_per_col]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bv(bits: &[u8]) -> BitVector {
        BitVector::from_ints(bits)
    }

    /// Independent oracle: decode bits to bipolar values and multiply.
    fn bipolar_dot(a: &BitVector, b: &BitVector) -> i64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (2 * i64::from(x) - 1) * (2 * i64::from(y) - 1))
            .sum()
    }

    #[test]
    fn xnor_matches_definition() {
        let r = xnor(&bv(&[1, 0]), &bv(&[1, 1])).unwrap();
        assert_eq!(r, bv(&[1, 0]));
    }

    #[test]
    fn xnor_with_self_is_all_ones() {
        let v = bv(&[1, 0, 1, 1, 0, 0, 1]);
        assert_eq!(xnor(&v, &v).unwrap(), BitVector::ones(v.len()));
    }

    #[test]
    fn xnor_with_complement_is_all_zeros() {
        let v = bv(&[1, 0, 1, 1, 0]);
        assert_eq!(xnor(&v, &v.complement()).unwrap(), BitVector::zeros(5));
    }

    #[test]
    fn xnor_rejects_length_mismatch() {
        let err = xnor(&bv(&[1]), &bv(&[1, 0])).unwrap_err();
        assert!(matches!(err, SimError::LengthMismatch { .. }));
    }

    #[test]
    fn complement_is_involutive_and_partitions_popcount() {
        for len in [1usize, 7, 63, 64, 65, 130] {
            let mut v = BitVector::zeros(len);
            for i in (0..len).step_by(3) {
                v.set(i, true);
            }
            let c = v.complement();
            assert_eq!(c.complement(), v);
            assert_eq!(v.popcount() + c.popcount(), len as u64);
        }
    }

    #[test]
    fn dot_simple_cases() {
        // (+1,-1) . (+1,+1) = 0
        let r = xnor_popcount_dot(&bv(&[1, 0]), &bv(&[1, 1])).unwrap();
        assert_eq!(r.popcount_raw, 1);
        assert_eq!(r.value, 0);

        // identical vectors dot to +len
        let v = bv(&[1, 0, 0, 1, 1, 0, 1, 0, 0]);
        let r = xnor_popcount_dot(&v, &v).unwrap();
        assert_eq!(r.value, v.len() as i64);
    }

    #[test]
    fn dot_matches_bipolar_oracle_randomized() {
        // Cheap deterministic generator; lengths cross word boundaries.
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for trial in 0..1000 {
            let len = 1 + (next() as usize) % 256;
            let mut a = BitVector::zeros(len);
            let mut b = BitVector::zeros(len);
            for i in 0..len {
                a.set(i, next() & 1 == 1);
                b.set(i, next() & 1 == 1);
            }
            let dot = xnor_popcount_dot(&a, &b).unwrap();
            assert_eq!(dot.value, bipolar_dot(&a, &b), "trial {trial}, len {len}");
            assert_eq!(
                dot.value,
                2 * dot.popcount_raw as i64 - len as i64,
                "post-processing identity"
            );
        }
    }

    #[test]
    fn dot_complement_symmetry_and_parity() {
        for word in [0u64, 1, 0b1011, 0xffff, 0xdead] {
            let a = BitVector::from_word(word, 16);
            let b = BitVector::from_word(word.rotate_left(3), 16);
            let d = xnor_popcount_dot(&a, &b).unwrap();
            let dc = xnor_popcount_dot(&a, &b.complement()).unwrap();
            assert_eq!(dc.value, -d.value);
            assert_eq!((d.value - 16).rem_euclid(2), 0);
        }
    }

    #[test]
    fn binarize_threshold_and_tie_rule() {
        assert_eq!(binarize(&[0.5, -0.5], 0.0), bv(&[1, 0]));
        assert_eq!(binarize(&[0.0, 0.0], 0.0), bv(&[1, 1]));
    }

    #[test]
    fn binarize_matches_sign_convention() {
        let xs: Vec<i32> = (-20..=20).collect();
        let got = binarize(&xs, 0);
        for (i, &x) in xs.iter().enumerate() {
            let sign_bit = x >= 0;
            assert_eq!(got.get(i), sign_bit, "x = {x}");
        }
    }

    #[test]
    fn matrix_columns_round_trip() {
        let cols = vec![bv(&[1, 0, 1]), bv(&[0, 0, 1]), bv(&[1, 1, 1])];
        let m = BitMatrix::from_columns(&cols).unwrap();
        assert_eq!(m.rows(), 3);
        assert_eq!(m.cols(), 3);
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(&m.column(j), c);
        }
        assert!(m.get(0, 0) && !m.get(1, 0) && m.get(2, 2));
    }

    #[test]
    fn slice_and_concat() {
        let v = bv(&[1, 0, 1, 1, 0, 0, 1]);
        let s = v.slice(2, 5);
        assert_eq!(s, bv(&[1, 1, 0]));
        assert_eq!(s.concat(&bv(&[1, 0])), bv(&[1, 1, 0, 1, 0]));
    }
}
