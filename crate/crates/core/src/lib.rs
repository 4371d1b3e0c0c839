//! Step-accurate functional simulator for XNOR+Popcount binary-network
//! inference on fixed-size crossbar arrays.
//!
//! The crate is organised around the lifecycle of a binary layer:
//!
//! 1. [`bits`] — packed binary vectors/matrices and the XNOR+Popcount dot
//!    product identity they obey,
//! 2. [`network`] — layer and network descriptions plus a trusted reference
//!    inference engine every simulated backend must match bit-exactly,
//! 3. [`mapping`] — compilers that place a weight matrix onto crossbar tiles
//!    (vertical weight/complement columns, or interleaved 2T2R rows),
//! 4. [`engine`] — the electronic crossbar executor (analog column MACs with
//!    an ADC model, or sense-amplifier row reads with digital popcount),
//! 5. [`wdm`] — the photonic crossbar executor that fuses up to K input
//!    vectors per step via wavelength multiplexing, plus its power models,
//! 6. [`report`] — latency/energy accounting over recorded step traces and
//!    normalized cross-design comparison tables.
//!
//! Everything is deterministic: batch execution may fan out across worker
//! threads (the default `parallel` feature), but results and traces are
//! merged in input order so repeated runs are byte-identical.

pub mod bits;
pub mod engine;
pub mod error;
pub mod mapping;
pub mod network;
pub mod report;
pub mod wdm;

mod par;

pub use bits::{binarize, xnor, xnor_popcount_dot, BitMatrix, BitVector, DotResult};
pub use error::{Result, SimError};
