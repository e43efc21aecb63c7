//! Full loop: transmitter, channel, distribution, worker pool, combiner,
//! scored against the transmitted bits.

use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex32;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{self, measure_esn0, ChannelConfig};
use crate::combiner::DecodedBlock;
use crate::distributor::{distribute, ChunkRecord, DistributorError, NetworkStats};
use crate::fec::{codec_from_spec, FecError};
use crate::modem::{ModemError, Preamble, Transmitter, TxBurst};
use crate::monitor::MonitorHub;
use crate::profile::Profile;
use crate::runtime::{run_pipeline, RunStats, RuntimeConfig, RuntimeError};
use crate::PlanError;

/// RMS amplitude at the digitizer, leaving headroom below 8-bit full scale.
pub const DEFAULT_GAIN: f64 = 0.25;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Fec(#[from] FecError),
    #[error(transparent)]
    Modem(#[from] ModemError),
    #[error(transparent)]
    Distributor(#[from] DistributorError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
}

#[derive(Debug, Clone, Serialize)]
pub struct E2eConfig {
    /// Frames scored.
    pub frames: usize,
    /// Frames sent after the scored ones so the stream does not end inside
    /// the last scored frame's chunk.
    pub tail_frames: usize,
    pub esn0_db: Option<f64>,
    pub clock_offset_ppm: f64,
    /// Carrier offset in cycles per symbol.
    pub carrier_per_symbol: f64,
    pub initial_phase: f64,
    pub gain: f64,
    pub workers: usize,
    pub servers: usize,
    pub loss_rate: f64,
    /// Payload bits and packet loss.
    pub seed: u64,
    /// Channel noise; derived from `seed` when unset.
    pub noise_seed: Option<u64>,
}

impl Default for E2eConfig {
    fn default() -> Self {
        Self {
            frames: 64,
            tail_frames: 0,
            esn0_db: None,
            clock_offset_ppm: 0.0,
            carrier_per_symbol: 0.0,
            initial_phase: 0.0,
            gain: DEFAULT_GAIN,
            workers: 1,
            servers: 1,
            loss_rate: 0.0,
            seed: 1,
            noise_seed: None,
        }
    }
}

impl E2eConfig {
    pub fn channel(&self, profile: &Profile) -> ChannelConfig {
        let sps = profile.waveform.samples_per_symbol.as_f64();
        ChannelConfig {
            clock_offset_ppm: self.clock_offset_ppm,
            carrier_freq: self.carrier_per_symbol / sps,
            initial_phase: self.initial_phase,
            esn0_db: self.esn0_db,
            samples_per_symbol: sps,
            gain: self.gain,
            seed: self.noise_seed.unwrap_or(self.seed ^ 0x5eed),
        }
    }

    /// Tail long enough for one full chunk past the last scored frame.
    pub fn default_tail(profile: &Profile) -> Result<usize, PlanError> {
        let plan = profile.plan(1)?;
        Ok(plan.chunk.frames_per_chunk + 2)
    }
}

#[derive(Debug, Clone)]
pub struct Synthesis {
    pub burst: TxBurst,
    pub received: Vec<Complex32>,
    pub noise_variance: f64,
    pub measured_esn0_db: Option<f64>,
}

/// Transmits `frames + tail_frames` frames and applies the channel.
pub fn synthesize(profile: &Profile, cfg: &E2eConfig) -> Result<Synthesis, ScenarioError> {
    let codec = codec_from_spec(&profile.codec, profile.waveform.payload_bits())?;
    let preamble = Preamble::new(profile.waveform.preamble_symbols, profile.preamble_seed);
    let mut tx = Transmitter::new(&profile.waveform, codec, preamble, cfg.seed);
    let burst = tx.generate(cfg.frames + cfg.tail_frames)?;
    let ch = cfg.channel(profile);
    let out = channel::apply(&burst.samples, &ch);
    let measured_esn0_db = cfg
        .esn0_db
        .and_then(|_| measure_esn0(&out.clean, &out.samples, ch.samples_per_symbol).ok());
    Ok(Synthesis {
        burst,
        received: out.samples,
        noise_variance: out.noise_variance,
        measured_esn0_db,
    })
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Score {
    pub frames_sent: usize,
    pub frames_recovered: usize,
    pub missing: Vec<usize>,
    pub bit_errors: u64,
    pub bits_compared: u64,
    pub ber: f64,
    pub failed_blocks: u64,
    /// Blocks that map to no scored frame.
    pub unmatched_blocks: u64,
}

/// Nearest transmitted frame for a block start, given the clock offset.
pub fn frame_index(start_sample: u64, frame_samples: u64, clock_offset_ppm: f64) -> i64 {
    (start_sample as f64 / (frame_samples as f64 * (1.0 + clock_offset_ppm * 1e-6))).round() as i64
}

pub fn score(
    blocks: &[DecodedBlock],
    sent: &[&[u8]],
    frame_samples: u64,
    clock_offset_ppm: f64,
) -> Score {
    let mut seen = vec![false; sent.len()];
    let mut s = Score {
        frames_sent: sent.len(),
        ..Default::default()
    };
    for b in blocks {
        let idx = frame_index(b.start_sample, frame_samples, clock_offset_ppm);
        if idx < 0 || idx as usize >= sent.len() {
            s.unmatched_blocks += 1;
            continue;
        }
        let i = idx as usize;
        if seen[i] {
            s.unmatched_blocks += 1;
            continue;
        }
        seen[i] = true;
        s.failed_blocks += u64::from(b.failed);
        s.bits_compared += sent[i].len() as u64;
        s.bit_errors += b.bits.iter().zip(sent[i]).filter(|(a, b)| a != b).count() as u64;
    }
    s.missing = seen.iter().enumerate().filter(|(_, &v)| !v).map(|(i, _)| i).collect();
    s.frames_recovered = sent.len() - s.missing.len();
    s.ber = if s.bits_compared > 0 {
        s.bit_errors as f64 / s.bits_compared as f64
    } else {
        0.0
    };
    s
}

#[derive(Debug, Clone, Serialize)]
pub struct E2eReport {
    pub config: E2eConfig,
    pub score: Score,
    pub measured_esn0_db: Option<f64>,
    pub network: NetworkStats,
    pub run: RunStats,
    pub elapsed: f64,
    #[serde(skip)]
    pub blocks: Vec<DecodedBlock>,
}

pub fn run_e2e(profile: &Profile, cfg: &E2eConfig, hub: Option<&Arc<MonitorHub>>) -> Result<E2eReport, ScenarioError> {
    let t0 = Instant::now();
    let syn = synthesize(profile, cfg)?;
    let plan = profile.plan(cfg.servers)?;
    let (chunks, network) = distribute(&syn.received, &plan, cfg.loss_rate, cfg.seed)?;
    let out = run_chunks(profile, chunks, cfg.workers, hub)?;
    let sent: Vec<&[u8]> = syn.burst.info_bits().take(cfg.frames).collect();
    let score = score(&out.blocks, &sent, plan.frame_samples, cfg.clock_offset_ppm);
    Ok(E2eReport {
        config: cfg.clone(),
        score,
        measured_esn0_db: syn.measured_esn0_db,
        network,
        run: out.stats,
        elapsed: t0.elapsed().as_secs_f64(),
        blocks: out.blocks,
    })
}

/// Worker pool over already assembled chunks.
pub fn run_chunks(
    profile: &Profile,
    chunks: Vec<ChunkRecord>,
    workers: usize,
    hub: Option<&Arc<MonitorHub>>,
) -> Result<crate::runtime::RunOutput, ScenarioError> {
    let plan = profile.plan(1)?;
    let rcfg = RuntimeConfig::for_plan(&plan, workers);
    Ok(run_pipeline(chunks, profile, &rcfg, hub)?)
}
