//! Waveform geometry, packetization, chunking and multicast group layout.
//!
//! Every other module consumes a validated [`Plan`] built here. Plans are
//! immutable once built and can be shared freely between threads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Bytes per complex sample on the wire (signed 8-bit I and Q).
pub const BYTES_PER_SAMPLE: usize = 2;

/// Packet payloads must be a whole number of 512-bit vectors.
pub const PAYLOAD_ALIGN_BYTES: usize = 64;

/// Samples added to the clock-offset bound to cover interpolator flush.
pub const EXTRA_SAMPLES_MARGIN: u64 = 8;

/// Frames handed to the FEC decoder at once.
pub const DECODER_BATCH: usize = 16;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanError {
    #[error("frame of {frame_symbols} symbols at {sps} samples/symbol is not a whole number of samples")]
    NonIntegerFrameSamples { frame_symbols: u64, sps: Ratio },
    #[error("overlap of {overlap} samples does not cover one frame plus {extra} extra samples ({required} needed)")]
    OverlapTooSmall { overlap: u64, extra: u64, required: u64 },
    #[error("packet payload of {bytes} bytes is not a multiple of 64")]
    PacketNotMultipleOf64 { bytes: usize },
    #[error("chunk of {chunk} samples cannot hold a decoder batch of 16 frames plus overlap ({required} needed)")]
    ChunkTooSmall { chunk: u64, required: u64 },
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
}

/// Exact rational number, used for the input oversampling ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        assert!(den != 0, "ratio with zero denominator");
        let g = gcd(num, den);
        Self {
            num: num / g,
            den: den / g,
        }
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `value * self` when the product is an integer.
    pub fn mul_exact(&self, value: u64) -> Option<u64> {
        let p = value.checked_mul(self.num)?;
        (p % self.den == 0).then_some(p / self.den)
    }
}

impl std::fmt::Display for Ratio {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}", self.num, self.den)
    }
}

pub(crate) fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.max(1)
}

/// Frame geometry of the received waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformProfile {
    pub name: String,
    /// Nominal input oversampling (1.6 = 8/5 at the digitizer).
    pub samples_per_symbol: Ratio,
    pub preamble_symbols: usize,
    pub payload_symbols: usize,
    pub bits_per_symbol: usize,
    /// RRC excess bandwidth.
    pub rolloff: f64,
    pub max_clock_offset_ppm: f64,
}

impl WaveformProfile {
    pub fn frame_symbols(&self) -> usize {
        self.preamble_symbols + self.payload_symbols
    }

    pub fn payload_bits(&self) -> usize {
        self.payload_symbols * self.bits_per_symbol
    }

    pub fn frame_samples(&self) -> Result<u64, PlanError> {
        let frame_symbols = self.frame_symbols() as u64;
        self.samples_per_symbol
            .mul_exact(frame_symbols)
            .ok_or(PlanError::NonIntegerFrameSamples {
                frame_symbols,
                sps: self.samples_per_symbol,
            })
    }

    pub fn validate(&self) -> Result<(), PlanError> {
        if !(self.rolloff > 0.0 && self.rolloff <= 1.0) {
            return Err(PlanError::InvalidProfile(format!(
                "rolloff {} outside (0, 1]",
                self.rolloff
            )));
        }
        if self.preamble_symbols == 0 || self.payload_symbols == 0 || self.bits_per_symbol == 0 {
            return Err(PlanError::InvalidProfile(
                "preamble, payload and bits per symbol must be nonzero".into(),
            ));
        }
        if self.max_clock_offset_ppm < 0.0 {
            return Err(PlanError::InvalidProfile("negative clock offset bound".into()));
        }
        self.frame_samples().map(|_| ())
    }
}

/// Knobs of the packet/chunk layout that are chosen, not derived.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketOverrides {
    pub samples_per_packet: usize,
    pub packets_per_group: usize,
    pub groups_per_chunk: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PacketPlan {
    /// P
    pub samples_per_packet: usize,
    /// U = 2P
    pub packet_payload_bytes: usize,
    pub packets_per_group: usize,
    pub samples_per_group: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChunkPlan {
    pub groups_per_chunk: usize,
    pub packets_per_chunk: usize,
    /// N
    pub chunk_samples: u64,
    /// k: frames a chunk can hold.
    pub frames_per_chunk: usize,
    /// k - 1: complete frames guaranteed regardless of alignment.
    pub guaranteed_frames: usize,
    /// K: clock-offset slack plus interpolator margin.
    pub extra_samples: u64,
    pub advance_groups: usize,
    pub advance_samples: u64,
    pub overlap_samples: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistributionPlan {
    pub num_servers: usize,
    pub total_groups: u64,
    /// Group indices (mod `total_groups`) each server joins, lead group first.
    pub subscriptions: Vec<Vec<u64>>,
}

impl DistributionPlan {
    pub fn is_subscribed(&self, server: usize, group: u64) -> bool {
        self.subscriptions[server].contains(&group)
    }
}

/// Fully derived numerology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plan {
    pub profile: WaveformProfile,
    pub frame_samples: u64,
    pub packet: PacketPlan,
    pub chunk: ChunkPlan,
    pub distribution: DistributionPlan,
}

pub fn build_plan(
    profile: &WaveformProfile,
    packet: &PacketOverrides,
    servers: usize,
) -> Result<Plan, PlanError> {
    profile.validate()?;
    if servers == 0 {
        return Err(PlanError::InvalidProfile("at least one server is required".into()));
    }
    if packet.samples_per_packet == 0 || packet.packets_per_group == 0 {
        return Err(PlanError::InvalidProfile("empty packet or group".into()));
    }
    if packet.groups_per_chunk < 2 {
        return Err(PlanError::InvalidProfile(
            "a chunk needs at least two groups to overlap its successor".into(),
        ));
    }
    let frame_samples = profile.frame_samples()?;

    let packet_payload_bytes = packet.samples_per_packet * BYTES_PER_SAMPLE;
    if !packet_payload_bytes.is_multiple_of(PAYLOAD_ALIGN_BYTES) {
        return Err(PlanError::PacketNotMultipleOf64 {
            bytes: packet_payload_bytes,
        });
    }
    let samples_per_group = (packet.packets_per_group * packet.samples_per_packet) as u64;
    let packet_plan = PacketPlan {
        samples_per_packet: packet.samples_per_packet,
        packet_payload_bytes,
        packets_per_group: packet.packets_per_group,
        samples_per_group,
    };

    let packets_per_chunk = packet.groups_per_chunk * packet.packets_per_group;
    let chunk_samples = (packets_per_chunk * packet.samples_per_packet) as u64;
    let extra_samples = (chunk_samples as f64 * profile.max_clock_offset_ppm * 1e-6).ceil() as u64
        + EXTRA_SAMPLES_MARGIN;
    let overlap_samples = samples_per_group;
    if overlap_samples < frame_samples + extra_samples {
        return Err(PlanError::OverlapTooSmall {
            overlap: overlap_samples,
            extra: extra_samples,
            required: frame_samples + extra_samples,
        });
    }
    let batch_required = DECODER_BATCH as u64 * frame_samples + overlap_samples;
    if chunk_samples < batch_required {
        return Err(PlanError::ChunkTooSmall {
            chunk: chunk_samples,
            required: batch_required,
        });
    }
    let frames_per_chunk = ((chunk_samples - extra_samples) / frame_samples) as usize;
    let advance_groups = packet.groups_per_chunk - 1;
    let chunk = ChunkPlan {
        groups_per_chunk: packet.groups_per_chunk,
        packets_per_chunk,
        chunk_samples,
        frames_per_chunk,
        guaranteed_frames: frames_per_chunk - 1,
        extra_samples,
        advance_groups,
        advance_samples: advance_groups as u64 * samples_per_group,
        overlap_samples,
    };

    let total_groups = (advance_groups * servers) as u64;
    let subscriptions = (0..servers)
        .map(|s| {
            let lead = (advance_groups * s) as u64;
            let mut groups: Vec<u64> = Vec::with_capacity(packet.groups_per_chunk);
            for g in 0..packet.groups_per_chunk as u64 {
                let idx = (lead + g) % total_groups;
                if !groups.contains(&idx) {
                    groups.push(idx);
                }
            }
            groups
        })
        .collect();

    Ok(Plan {
        profile: profile.clone(),
        frame_samples,
        packet: packet_plan,
        chunk,
        distribution: DistributionPlan {
            num_servers: servers,
            total_groups,
            subscriptions,
        },
    })
}

impl Plan {
    /// Multicast group carrying an absolute packet number.
    pub fn group_of_packet(&self, packet_number: u64) -> u64 {
        (packet_number / self.packet.packets_per_group as u64) % self.distribution.total_groups
    }

    /// Absolute sample number of a packet's first sample.
    pub fn first_sample_of_packet(&self, packet_number: u64) -> u64 {
        packet_number * self.packet.samples_per_packet as u64
    }

    /// First absolute packet of `server`'s chunk in the given cycle.
    pub fn chunk_start_packet(&self, server: usize, cycle: u64) -> u64 {
        let servers = self.distribution.num_servers as u64;
        let group = self.chunk.advance_groups as u64 * (server as u64 + servers * cycle);
        group * self.packet.packets_per_group as u64
    }

    /// Nominal packets per frame (fractional).
    pub fn packets_per_frame(&self) -> f64 {
        self.frame_samples as f64 / self.packet.samples_per_packet as f64
    }
}

pub fn group_of_packet(packet_number: u64, plan: &Plan) -> u64 {
    plan.group_of_packet(packet_number)
}

pub fn first_sample_of_packet(packet_number: u64, plan: &Plan) -> u64 {
    plan.first_sample_of_packet(packet_number)
}
