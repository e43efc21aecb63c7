//! Transmit side: framing, interleaving, 8PSK mapping and pulse shaping.

pub mod constellation;
pub mod frame;
pub mod shaper;
pub mod tx;

use thiserror::Error;

use crate::fec::FecError;

pub use constellation::{slice_8psk, Decision};
pub use frame::{build_frame, deinterleave, interleave, Preamble, INTERLEAVER_COLUMNS};
pub use shaper::PulseShaper;
pub use tx::{Transmitter, TxBurst, TxFrame};

#[derive(Debug, Error)]
pub enum ModemError {
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("length {len} is not divisible by {columns} columns")]
    LengthNotDivisible { len: usize, columns: usize },
    #[error(transparent)]
    Fec(#[from] FecError),
}
