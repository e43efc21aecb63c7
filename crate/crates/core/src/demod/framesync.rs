//! Frame synchronization by coherent preamble combining.
//!
//! The symbol stream is cut into frame-length segments from symbol 0 and the
//! segments are summed, which adds the preambles coherently while the random
//! payloads average out. The sum is circularly correlated with the preamble
//! in the frequency domain; the peak gives the common frame offset.

use std::f64::consts::FRAC_PI_4;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::DemodError;

/// Lower bound on per-frame noise variance estimates.
pub const MIN_NOISE_VAR: f64 = 1e-4;

#[derive(Clone)]
pub struct FrameSync {
    frame_symbols: usize,
    preamble: Vec<Complex64>,
    reference: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    pub threshold: f64,
    pub tail_guard: usize,
}

impl std::fmt::Debug for FrameSync {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FrameSync")
            .field("frame_symbols", &self.frame_symbols)
            .field("preamble_len", &self.preamble.len())
            .field("threshold", &self.threshold)
            .field("tail_guard", &self.tail_guard)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncResult {
    pub offset: usize,
    /// Peak power over mean correlation power.
    pub peak_ratio: f64,
    pub segments: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameSlice {
    pub start_symbol: usize,
    /// Multiply the frame's symbols by this to undo the residual rotation.
    pub rotation: Complex64,
    pub amplitude: f64,
    pub noise_var: f64,
}

impl FrameSync {
    pub fn new(preamble: &[Complex64], frame_symbols: usize, threshold: f64, tail_guard: usize) -> Self {
        assert!(preamble.len() <= frame_symbols);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(frame_symbols);
        let inv = planner.plan_fft_inverse(frame_symbols);
        let mut reference = vec![Complex64::new(0.0, 0.0); frame_symbols];
        reference[..preamble.len()].copy_from_slice(preamble);
        fwd.process(&mut reference);
        reference.iter_mut().for_each(|c| *c = c.conj());
        Self {
            frame_symbols,
            preamble: preamble.to_vec(),
            reference,
            fwd,
            inv,
            threshold,
            tail_guard,
        }
    }

    pub fn frame_symbols(&self) -> usize {
        self.frame_symbols
    }

    /// Circular correlation of the combined segments against the preamble.
    pub fn correlate(&self, symbols: &[Complex64], max_segments: Option<usize>) -> Result<(Vec<f64>, usize), DemodError> {
        let f = self.frame_symbols;
        let mut segments = symbols.len() / f;
        if segments == 0 {
            return Err(DemodError::ChunkTooShort {
                got: symbols.len(),
                need: f,
            });
        }
        if let Some(m) = max_segments {
            segments = segments.min(m.max(1));
        }
        let mut x = vec![Complex64::new(0.0, 0.0); f];
        for seg in symbols[..segments * f].chunks_exact(f) {
            x.iter_mut().zip(seg).for_each(|(a, b)| *a += b);
        }
        self.fwd.process(&mut x);
        x.iter_mut().zip(&self.reference).for_each(|(a, r)| *a *= r);
        self.inv.process(&mut x);
        Ok((x.iter().map(|c| c.norm_sqr()).collect(), segments))
    }

    pub fn detect(&self, symbols: &[Complex64], max_segments: Option<usize>) -> Result<SyncResult, DemodError> {
        let (power, segments) = self.correlate(symbols, max_segments)?;
        let (offset, &peak) = power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty correlation");
        let mean = power.iter().sum::<f64>() / power.len() as f64;
        let peak_ratio = if mean > 0.0 { peak / mean } else { 0.0 };
        if peak_ratio.is_nan() || peak_ratio < self.threshold {
            return Err(DemodError::NoPeak {
                ratio: peak_ratio,
                threshold: self.threshold,
            });
        }
        Ok(SyncResult {
            offset,
            peak_ratio,
            segments,
        })
    }

    /// Every complete frame at `offset + k * frame_symbols` that ends at
    /// least `tail_guard` symbols before the end of `symbols`.
    pub fn frames(&self, symbols: &[Complex64], offset: usize) -> Vec<FrameSlice> {
        let f = self.frame_symbols;
        let p = self.preamble.len() as f64;
        let mut out = Vec::new();
        let mut s = offset;
        while s + f + self.tail_guard <= symbols.len() {
            let y = &symbols[s..s + self.preamble.len()];
            let r: Complex64 = y
                .iter()
                .zip(&self.preamble)
                .map(|(a, b)| a * b.conj())
                .sum::<Complex64>()
                / p;
            let q = (r.arg() / FRAC_PI_4).round() * FRAC_PI_4;
            let rotation = Complex64::from_polar(1.0, -q);
            let amplitude = r.norm().max(1e-9);
            let noise_var = (y
                .iter()
                .zip(&self.preamble)
                .map(|(a, b)| (a * rotation / amplitude - b).norm_sqr())
                .sum::<f64>()
                / p)
                .max(MIN_NOISE_VAR);
            out.push(FrameSlice {
                start_symbol: s,
                rotation,
                amplitude,
                noise_var,
            });
            s += f;
        }
        out
    }
}
