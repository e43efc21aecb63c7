//! Per-chunk receive chain.

pub mod framesync;
pub mod llr;
pub mod phase;
pub mod pipeline;
pub mod resample;
pub mod timing;

use thiserror::Error;

pub use framesync::{FrameSync, SyncResult};
pub use llr::{llr_map, llr_map_deinterleave};
pub use phase::{track_phase_two_pass, PhaseLoopState, PhaseOutput};
pub use pipeline::{ChunkResult, ChunkStats, DemodPipeline, StageTimes};
pub use resample::Resampler;
pub use timing::{gardner_ted, track_symbols_two_pass, TimingLoopState, TimingOutput};

#[derive(Debug, Error, PartialEq)]
pub enum DemodError {
    #[error("chunk of {got} samples is shorter than the required {need}")]
    ChunkTooShort { got: usize, need: usize },
    #[error("warmup of {warmup} symbols exceeds the {available} symbols available")]
    WarmupExceedsChunk { warmup: usize, available: usize },
    #[error("no preamble peak (peak/mean {ratio:.2} below {threshold})")]
    NoPeak { ratio: f64, threshold: f64 },
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

/// Deinterleaved soft decisions for one frame's payload.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftFrame {
    /// Absolute sample number of the frame's first preamble symbol.
    pub start_sample: u64,
    /// Positive means bit 0.
    pub llrs: Vec<f32>,
    pub noise_var: f64,
}
