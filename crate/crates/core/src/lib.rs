//! Chunk-parallel receiver for a continuous framed 8PSK waveform.
//!
//! The sample stream is cut into overlapping chunks, each chunk is demodulated
//! independently by one worker (resample, two-pass symbol and phase tracking,
//! coherent frame sync, soft decisions, FEC) and the decoded blocks are put
//! back in order by a reorder buffer keyed on absolute sample numbers.

pub mod bench;
pub mod channel;
pub mod combiner;
pub mod demod;
pub mod distributor;
pub mod dsp;
pub mod fec;
pub mod iq;
pub mod modem;
pub mod monitor;
pub mod numerology;
pub mod profile;
pub mod runtime;
pub mod scenario;

pub use iq::IqBuffer;
pub use numerology::{build_plan, Plan, PlanError};
pub use profile::Profile;
