//! The chain a worker runs on one chunk, from raw samples to soft frames.

use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;

use super::framesync::{FrameSync, SyncResult};
use super::llr::llr_map_deinterleave;
use super::phase::{self, track_phase_two_pass, PhaseLoopState};
use super::resample::Resampler;
use super::timing::{self, track_symbols_two_pass, TimingLoopState};
use super::{DemodError, SoftFrame};
use crate::dsp::lagrange::LagrangeBank;
use crate::dsp::loopfilter::LoopGains;
use crate::iq::IqBuffer;
use crate::modem::Preamble;
use crate::monitor::{NoTaps, Stage, StageTaps};
use crate::profile::Profile;

/// Wall time per stage, in seconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct StageTimes {
    pub resample: f64,
    pub timing: f64,
    pub phase: f64,
    pub sync: f64,
    pub llr: f64,
    pub decode: f64,
}

impl StageTimes {
    pub fn add(&mut self, o: &StageTimes) {
        self.resample += o.resample;
        self.timing += o.timing;
        self.phase += o.phase;
        self.sync += o.sync;
        self.llr += o.llr;
        self.decode += o.decode;
    }

    pub fn total(&self) -> f64 {
        self.resample + self.timing + self.phase + self.sync + self.llr + self.decode
    }

    /// `(stage name, fraction of total)`.
    pub fn shares(&self) -> Vec<(&'static str, f64)> {
        let t = self.total();
        let f = |x: f64| if t > 0.0 { x / t } else { 0.0 };
        vec![
            ("resample", f(self.resample)),
            ("timing", f(self.timing)),
            ("phase", f(self.phase)),
            ("sync", f(self.sync)),
            ("llr", f(self.llr)),
            ("decode", f(self.decode)),
        ]
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ChunkStats {
    pub symbols: usize,
    pub skips: u64,
    pub repeats: u64,
    pub sync_offset: Option<usize>,
    pub sync_peak_ratio: f64,
    pub frames: usize,
    pub phase_freq: f64,
    pub times: StageTimes,
}

#[derive(Debug, Clone, Default)]
pub struct ChunkResult {
    pub frames: Vec<SoftFrame>,
    pub stats: ChunkStats,
}

#[derive(Debug, Clone)]
pub struct DemodPipeline {
    resampler: Resampler,
    bank: LagrangeBank,
    timing_gains: LoopGains,
    phase_gains: LoopGains,
    sync: FrameSync,
    warmup: usize,
    preamble_symbols: usize,
    payload_symbols: usize,
}

impl DemodPipeline {
    pub fn new(profile: &Profile) -> Self {
        let w = &profile.waveform;
        let rx = &profile.receiver;
        let preamble = Preamble::new(w.preamble_symbols, profile.preamble_seed);
        Self {
            resampler: Resampler::new(w.samples_per_symbol, w.rolloff),
            bank: LagrangeBank::new(),
            timing_gains: LoopGains::design(
                rx.timing_bandwidth,
                rx.damping,
                timing::BLOCK_SYMBOLS,
                timing::DETECTOR_GAIN,
            ),
            phase_gains: LoopGains::design(rx.phase_bandwidth, rx.damping, phase::BLOCK_SYMBOLS, 1.0),
            sync: FrameSync::new(
                preamble.symbols(),
                w.frame_symbols(),
                rx.sync_threshold,
                rx.tail_guard_symbols,
            ),
            warmup: rx.warmup_symbols,
            preamble_symbols: w.preamble_symbols,
            payload_symbols: w.payload_symbols,
        }
    }

    pub fn with_warmup(mut self, warmup: usize) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn resampler(&self) -> &Resampler {
        &self.resampler
    }

    pub fn bank(&self) -> &LagrangeBank {
        &self.bank
    }

    pub fn timing_gains(&self) -> LoopGains {
        self.timing_gains
    }

    pub fn phase_gains(&self) -> LoopGains {
        self.phase_gains
    }

    pub fn frame_sync(&self) -> &FrameSync {
        &self.sync
    }

    /// Resamples to 2 samples/symbol and scales to unit mean power.
    pub fn front_end(&self, chunk: &IqBuffer) -> Result<Vec<Complex64>, DemodError> {
        let mut y = self.resampler.process(&chunk.samples)?;
        let p = y.iter().map(|s| s.norm_sqr()).sum::<f64>() / y.len().max(1) as f64;
        if p > 0.0 {
            let g = 1.0 / p.sqrt();
            y.iter_mut().for_each(|s| *s *= g);
        }
        Ok(y)
    }

    pub fn process(&self, chunk: &IqBuffer) -> Result<ChunkResult, DemodError> {
        self.process_tapped(chunk, &NoTaps)
    }

    pub fn process_tapped<T: StageTaps>(&self, chunk: &IqBuffer, taps: &T) -> Result<ChunkResult, DemodError> {
        let mut stats = ChunkStats::default();
        let t = Instant::now();
        let y = self.front_end(chunk)?;
        taps.tap(Stage::Resampled, &y);
        stats.times.resample = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let warmup = self.warmup.min((y.len() / 2).saturating_sub(1));
        let tim = track_symbols_two_pass(&y, &self.bank, TimingLoopState::new(self.timing_gains), warmup)?;
        taps.tap(Stage::Symbols, &tim.symbols);
        stats.symbols = tim.symbols.len();
        stats.skips = tim.skips;
        stats.repeats = tim.repeats;
        stats.times.timing = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let ph = track_phase_two_pass(&tim.symbols, PhaseLoopState::new(self.phase_gains), warmup);
        taps.tap(Stage::Phase, &ph.symbols);
        stats.phase_freq = ph.final_freq;
        stats.times.phase = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let sync: SyncResult = self.sync.detect(&ph.symbols, None)?;
        stats.sync_offset = Some(sync.offset);
        stats.sync_peak_ratio = sync.peak_ratio;
        let slices = self.sync.frames(&ph.symbols, sync.offset);
        stats.times.sync = t.elapsed().as_secs_f64();

        let t = Instant::now();
        let mut frames = Vec::with_capacity(slices.len());
        let mut payload = Vec::with_capacity(self.payload_symbols);
        for s in &slices {
            let from = s.start_symbol + self.preamble_symbols;
            payload.clear();
            payload.extend(
                ph.symbols[from..from + self.payload_symbols]
                    .iter()
                    .map(|x| x * s.rotation / s.amplitude),
            );
            taps.tap(Stage::Payload, &payload);
            let llrs = llr_map_deinterleave(&payload, self.payload_symbols, s.noise_var)?;
            let pos = self.resampler.output_to_input(tim.positions[s.start_symbol]);
            frames.push(SoftFrame {
                start_sample: (chunk.first_sample as f64 + pos).round() as u64,
                llrs,
                noise_var: s.noise_var,
            });
        }
        stats.frames = frames.len();
        stats.times.llr = t.elapsed().as_secs_f64();
        Ok(ChunkResult { frames, stats })
    }
}
