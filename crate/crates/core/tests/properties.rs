//! Property suites tying the whole pipeline together: the dot-product
//! identity, mapping round-trips, backend equivalence, and trace laws.

use proptest::prelude::*;

use xbarsim_core::bits::{xnor, xnor_popcount_dot, BitMatrix, BitVector};
use xbarsim_core::engine::{execute_layer, EngineConfig};
use xbarsim_core::mapping::{
    custbinary_layout, layout, tacit_layout, CrossbarDims, MappingKind,
};
use xbarsim_core::wdm::{execute_layer_opcm, WdmConfig};

fn bitvec(len: usize) -> impl Strategy<Value = BitVector> {
    prop::collection::vec(any::<bool>(), len).prop_map(|bits| BitVector::from_bools(&bits))
}

/// Decode to bipolar values and multiply: the independent dot oracle.
fn bipolar_dot(a: &BitVector, b: &BitVector) -> i64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (2 * i64::from(x) - 1) * (2 * i64::from(y) - 1))
        .sum()
}

#[test]
fn dot_identity_exhaustive_short_lengths() {
    // Every (a, b) pair up to length 12: 2*popcount(xnor) - len equals the
    // decoded bipolar dot, and the parity/range invariants hold.
    for len in 1..=12usize {
        for a_word in 0..(1u64 << len) {
            let a = BitVector::from_word(a_word, len);
            for b_word in 0..(1u64 << len) {
                let b = BitVector::from_word(b_word, len);
                let dot = xnor_popcount_dot(&a, &b).unwrap();
                let brute = bipolar_dot(&a, &b);
                assert_eq!(dot.value, brute);
                assert!((-(len as i64)..=len as i64).contains(&dot.value));
                assert_eq!((dot.value - len as i64) % 2, 0);
            }
        }
    }
}

#[test]
fn column_mac_identity_exhaustive_short_lengths() {
    // sum(a & w) + sum(!a & !w) == popcount(xnor(a, w))
    for len in 1..=12usize {
        for a_word in 0..(1u64 << len) {
            let a = BitVector::from_word(a_word, len);
            let a_c = a.complement();
            for w_word in 0..(1u64 << len) {
                let w = BitVector::from_word(w_word, len);
                let w_c = w.complement();
                let mac = a.and_popcount_prefix(&w) + a_c.and_popcount_prefix(&w_c);
                let agree = xnor(&a, &w).unwrap().popcount();
                assert_eq!(mac, agree);
            }
        }
    }
}

proptest! {
    #[test]
    fn dot_identity_randomized((a, b) in (1usize..256).prop_flat_map(|len| (bitvec(len), bitvec(len)))) {
        let dot = xnor_popcount_dot(&a, &b).unwrap();
        prop_assert_eq!(dot.value, bipolar_dot(&a, &b));
    }

    #[test]
    fn complement_flips_dot_sign(len in 1usize..128, seed in any::<u64>()) {
        let mut state = seed | 1;
        let mut next = move || { state ^= state << 13; state ^= state >> 7; state ^= state << 17; state };
        let mut a = BitVector::zeros(len);
        let mut b = BitVector::zeros(len);
        for i in 0..len {
            a.set(i, next() & 1 == 1);
            b.set(i, next() & 1 == 1);
        }
        let d = xnor_popcount_dot(&a, &b).unwrap();
        let dc = xnor_popcount_dot(&a, &b.complement()).unwrap();
        prop_assert_eq!(dc.value, -d.value);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mapping_round_trip_and_coverage(
        m in 1usize..=64,
        n in 1usize..=64,
        rows in 2usize..=32,
        cols in 1usize..=32,
        seed in any::<u64>(),
    ) {
        let mut state = seed | 1;
        let mut next = move || { state ^= state << 13; state ^= state >> 7; state ^= state << 17; state };
        let mut w = BitMatrix::zeros(m, n);
        for j in 0..n {
            for i in 0..m {
                w.set(i, j, next() & 1 == 1);
            }
        }
        let dims = CrossbarDims::new(rows, cols).unwrap();
        for kind in [MappingKind::Tacit, MappingKind::CustBinary] {
            let mapped = layout(kind, &w, dims).unwrap();
            prop_assert_eq!(mapped.decode(), w.clone(), "{} round trip", kind);
            prop_assert_eq!(mapped.devices_used(), 2 * m * n, "{} device budget", kind);
            let mut covered = vec![false; m * n];
            for tile in mapped.tiles() {
                for r in tile.row_range.clone() {
                    for c in tile.col_range.clone() {
                        prop_assert!(!covered[r * n + c], "overlap at ({r},{c})");
                        covered[r * n + c] = true;
                    }
                }
            }
            prop_assert!(covered.iter().all(|&c| c));
        }
    }

    #[test]
    fn tacit_drives_are_self_complementary(
        m in 1usize..=64,
        rows in 2usize..=32,
        seed in any::<u64>(),
    ) {
        let mut state = seed | 1;
        let mut next = move || { state ^= state << 13; state ^= state >> 7; state ^= state << 17; state };
        let mut w = BitMatrix::zeros(m, 1);
        let mut input = BitVector::zeros(m);
        for i in 0..m {
            w.set(i, 0, next() & 1 == 1);
            input.set(i, next() & 1 == 1);
        }
        let mapped = tacit_layout(&w, CrossbarDims::new(rows, 1).unwrap()).unwrap();
        for drive in mapped.encode_input_tacit(&input).unwrap() {
            let half = drive.len() / 2;
            prop_assert_eq!(drive.slice(half, drive.len()), drive.slice(0, half).complement());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn backends_agree_with_each_other_and_the_oracle(
        m in 1usize..=48,
        n in 1usize..=24,
        rows in 2usize..=32,
        cols in 1usize..=16,
        k in prop::sample::select(vec![1usize, 4, 16]),
        seed in any::<u64>(),
    ) {
        let mut state = seed | 1;
        let mut next = move || { state ^= state << 13; state ^= state >> 7; state ^= state << 17; state };
        let mut w = BitMatrix::zeros(m, n);
        for j in 0..n {
            for i in 0..m {
                w.set(i, j, next() & 1 == 1);
            }
        }
        let inputs: Vec<BitVector> = (0..3).map(|_| {
            let mut v = BitVector::zeros(m);
            for i in 0..m {
                v.set(i, next() & 1 == 1);
            }
            v
        }).collect();
        let dims = CrossbarDims::new(rows, cols).unwrap();
        let cfg = EngineConfig { counter_bits: 8, ..EngineConfig::ideal(rows) };

        let tacit = tacit_layout(&w, dims).unwrap();
        let cust = custbinary_layout(&w, dims).unwrap();
        let (dots_t, _) = execute_layer(&tacit, &inputs, &cfg).unwrap();
        let (dots_c, _) = execute_layer(&cust, &inputs, &cfg).unwrap();
        let (dots_o, _) = execute_layer_opcm(&tacit, &inputs, &WdmConfig::with_capacity(k), &cfg).unwrap();
        for (v, input) in inputs.iter().enumerate() {
            for j in 0..n {
                let oracle = xnor_popcount_dot(input, &w.column(j)).unwrap();
                prop_assert_eq!(dots_t[v][j], oracle);
                prop_assert_eq!(dots_c[v][j], oracle);
                prop_assert_eq!(dots_o[v][j], oracle);
            }
        }
    }

    #[test]
    fn step_count_law_single_tile(
        m in 1usize..=15,
        n in 1usize..=31,
        inputs in 1usize..=4,
        seed in any::<u64>(),
    ) {
        // single-tile layers: custbinary/tacit step ratio is exactly n
        let mut state = seed | 1;
        let mut next = move || { state ^= state << 13; state ^= state >> 7; state ^= state << 17; state };
        let mut w = BitMatrix::zeros(m, n);
        for j in 0..n {
            for i in 0..m {
                w.set(i, j, next() & 1 == 1);
            }
        }
        let dims = CrossbarDims::new(2 * m.max(n).max(1), m.max(n)).unwrap();
        let ins: Vec<BitVector> = (0..inputs).map(|_| {
            let mut v = BitVector::zeros(m);
            for i in 0..m {
                v.set(i, next() & 1 == 1);
            }
            v
        }).collect();
        let cfg = EngineConfig::ideal(dims.rows());
        let tacit = tacit_layout(&w, dims).unwrap();
        let cust = custbinary_layout(&w, dims).unwrap();
        prop_assert_eq!(tacit.tiles().len(), 1);
        prop_assert_eq!(cust.tiles().len(), 1);
        let (_, trace_t) = execute_layer(&tacit, &ins, &cfg).unwrap();
        let (_, trace_c) = execute_layer(&cust, &ins, &cfg).unwrap();
        prop_assert_eq!(trace_t.totals().steps, inputs as u64);
        prop_assert_eq!(trace_c.totals().steps, (inputs * n) as u64);
    }

    #[test]
    fn padding_never_changes_outputs(
        m in 1usize..=24,
        n in 1usize..=12,
        seed in any::<u64>(),
    ) {
        let mut state = seed | 1;
        let mut next = move || { state ^= state << 13; state ^= state >> 7; state ^= state << 17; state };
        let mut w = BitMatrix::zeros(m, n);
        for j in 0..n {
            for i in 0..m {
                w.set(i, j, next() & 1 == 1);
            }
        }
        let inputs: Vec<BitVector> = (0..2).map(|_| {
            let mut v = BitVector::zeros(m);
            for i in 0..m {
                v.set(i, next() & 1 == 1);
            }
            v
        }).collect();
        let snug = CrossbarDims::new(2 * m, n).unwrap();
        let roomy = CrossbarDims::new(2 * m + 17, n + 9).unwrap();
        for kind in [MappingKind::Tacit, MappingKind::CustBinary] {
            let a = layout(kind, &w, snug).unwrap();
            let b = layout(kind, &w, roomy).unwrap();
            let cfg_a = EngineConfig { counter_bits: 8, ..EngineConfig::ideal(snug.rows()) };
            let cfg_b = EngineConfig { counter_bits: 8, ..EngineConfig::ideal(roomy.rows()) };
            let (dots_a, _) = execute_layer(&a, &inputs, &cfg_a).unwrap();
            let (dots_b, _) = execute_layer(&b, &inputs, &cfg_b).unwrap();
            prop_assert_eq!(dots_a, dots_b, "{} pad invariance", kind);
        }
    }

    #[test]
    fn photonic_activations_per_tile_follow_the_ceiling_rule(
        m in 1usize..=24,
        n in 1usize..=12,
        v in 1usize..=20,
        k in prop::sample::select(vec![1usize, 4, 16]),
        seed in any::<u64>(),
    ) {
        let mut state = seed | 1;
        let mut next = move || { state ^= state << 13; state ^= state >> 7; state ^= state << 17; state };
        let mut w = BitMatrix::zeros(m, n);
        for j in 0..n {
            for i in 0..m {
                w.set(i, j, next() & 1 == 1);
            }
        }
        let dims = CrossbarDims::new(8, 4).unwrap();
        let mapped = tacit_layout(&w, dims).unwrap();
        let inputs: Vec<BitVector> = (0..v).map(|_| {
            let mut vec = BitVector::zeros(m);
            for i in 0..m {
                vec.set(i, next() & 1 == 1);
            }
            vec
        }).collect();
        let cfg = EngineConfig::ideal(8);
        let (_, trace_e) = execute_layer(&mapped, &inputs, &cfg).unwrap();
        let (_, trace_o) = execute_layer_opcm(&mapped, &inputs, &WdmConfig::with_capacity(k), &cfg).unwrap();
        let e = trace_e.activations_by_tile();
        let o = trace_o.activations_by_tile();
        for (tile, &count_e) in &e {
            prop_assert_eq!(o[tile], count_e.div_ceil(k as u64));
        }
    }
}
