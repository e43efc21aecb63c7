//! Continuous framed waveform generator.

use std::sync::Arc;

use num_complex::{Complex32, Complex64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::frame::{build_frame, Preamble};
use super::shaper::PulseShaper;
use super::ModemError;
use crate::fec::Codec;
use crate::numerology::WaveformProfile;

#[derive(Debug, Clone, PartialEq)]
pub struct TxFrame {
    pub info: Vec<u8>,
    pub symbols: Vec<Complex64>,
}

#[derive(Debug, Clone, Default)]
pub struct TxBurst {
    pub samples: Vec<Complex32>,
    pub frames: Vec<TxFrame>,
}

impl TxBurst {
    pub fn info_bits(&self) -> impl Iterator<Item = &[u8]> {
        self.frames.iter().map(|f| f.info.as_slice())
    }
}

#[derive(Debug)]
pub struct Transmitter {
    waveform: WaveformProfile,
    codec: Arc<dyn Codec>,
    preamble: Preamble,
    shaper: PulseShaper,
    rng: ChaCha8Rng,
}

impl Transmitter {
    pub fn new(waveform: &WaveformProfile, codec: Arc<dyn Codec>, preamble: Preamble, seed: u64) -> Self {
        Self {
            shaper: PulseShaper::new(waveform.samples_per_symbol, waveform.rolloff),
            waveform: waveform.clone(),
            codec,
            preamble,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn random_info(&mut self) -> Vec<u8> {
        (0..self.codec.descriptor().k)
            .map(|_| self.rng.random_range(0..2u8))
            .collect()
    }

    pub fn frame_from_info(&self, info: Vec<u8>) -> Result<TxFrame, ModemError> {
        let symbols = build_frame(&info, self.codec.as_ref(), &self.preamble, self.waveform.payload_symbols)?;
        Ok(TxFrame { info, symbols })
    }

    /// Shapes a frame and appends its samples to `out`.
    pub fn emit(&mut self, frame: &TxFrame, out: &mut Vec<Complex32>) {
        self.shaper.push(&frame.symbols, out);
    }

    pub fn finish(&mut self, out: &mut Vec<Complex32>) {
        self.shaper.finish(out);
    }

    /// `frames` random frames, shaped back to back.
    pub fn generate(&mut self, frames: usize) -> Result<TxBurst, ModemError> {
        let mut burst = TxBurst::default();
        for _ in 0..frames {
            let info = self.random_info();
            let f = self.frame_from_info(info)?;
            self.emit(&f, &mut burst.samples);
            burst.frames.push(f);
        }
        self.finish(&mut burst.samples);
        Ok(burst)
    }
}
