//! Named waveform profiles loaded from TOML key/value files.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerology::{build_plan, PacketOverrides, Plan, PlanError, Ratio, WaveformProfile};

const DESK: &str = include_str!("../profiles/desk.toml");
const PAPER: &str = include_str!("../profiles/paper.toml");

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("unknown profile {0:?} (expected \"desk\", \"paper\" or a path to a .toml file)")]
    Unknown(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("parsing profile: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CodecSpec {
    Passthrough,
    /// `matrix` is `builtin:<name>` or a path to an alist file.
    Ldpc { matrix: String },
}

/// Tracking-loop and synchronizer settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverParams {
    /// Normalized timing loop noise bandwidth, cycles/symbol.
    pub timing_bandwidth: f64,
    /// Normalized phase loop noise bandwidth, cycles/symbol.
    pub phase_bandwidth: f64,
    pub damping: f64,
    pub warmup_symbols: usize,
    /// Frames ending this close to the end of a chunk are left to the next chunk.
    pub tail_guard_symbols: usize,
    /// Minimum correlation peak-to-mean power ratio.
    pub sync_threshold: f64,
}

#[derive(Debug, Clone, Deserialize)]
struct ProfileFile {
    name: String,
    samples_per_symbol: [u64; 2],
    preamble_symbols: usize,
    payload_symbols: usize,
    bits_per_symbol: usize,
    #[serde(default = "default_rolloff")]
    rolloff: f64,
    max_clock_offset_ppm: f64,
    preamble_seed: u64,
    packets: PacketOverrides,
    codec: CodecSpec,
    receiver: ReceiverParams,
}

fn default_rolloff() -> f64 {
    0.25
}

/// Everything a profile file configures.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile {
    pub waveform: WaveformProfile,
    pub packets: PacketOverrides,
    pub codec: CodecSpec,
    pub receiver: ReceiverParams,
    pub preamble_seed: u64,
}

impl Profile {
    pub fn parse(text: &str) -> Result<Self, ProfileError> {
        let f: ProfileFile = toml::from_str(text)?;
        if f.samples_per_symbol[1] == 0 {
            return Err(PlanError::InvalidProfile("zero denominator in samples_per_symbol".into()).into());
        }
        let waveform = WaveformProfile {
            name: f.name,
            samples_per_symbol: Ratio::new(f.samples_per_symbol[0], f.samples_per_symbol[1]),
            preamble_symbols: f.preamble_symbols,
            payload_symbols: f.payload_symbols,
            bits_per_symbol: f.bits_per_symbol,
            rolloff: f.rolloff,
            max_clock_offset_ppm: f.max_clock_offset_ppm,
        };
        waveform.validate()?;
        Ok(Self {
            waveform,
            packets: f.packets,
            codec: f.codec,
            receiver: f.receiver,
            preamble_seed: f.preamble_seed,
        })
    }

    pub fn named(name: &str) -> Result<Self, ProfileError> {
        match name {
            "desk" => Self::parse(DESK),
            "paper" => Self::parse(PAPER),
            other => Err(ProfileError::Unknown(other.to_string())),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self, ProfileError> {
        let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Accepts a builtin name or a path, as the `--profile` flag does.
    pub fn resolve(name_or_path: &str) -> Result<Self, ProfileError> {
        match Self::named(name_or_path) {
            Err(ProfileError::Unknown(_)) if Path::new(name_or_path).exists() => {
                Self::from_path(Path::new(name_or_path))
            }
            r => r,
        }
    }

    pub fn desk() -> Self {
        Self::named("desk").expect("builtin desk profile")
    }

    pub fn paper() -> Self {
        Self::named("paper").expect("builtin paper profile")
    }

    pub fn plan(&self, servers: usize) -> Result<Plan, PlanError> {
        build_plan(&self.waveform, &self.packets, servers)
    }
}
