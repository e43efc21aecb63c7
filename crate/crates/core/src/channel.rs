//! Channel impairments: sample-clock offset, carrier offset, gain and AWGN.

use std::f64::consts::TAU;

use num_complex::{Complex32, Complex64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::fracdelay::SincInterpolator;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ChannelError {
    #[error("clean and noisy buffers differ in length ({clean} vs {noisy})")]
    LengthMismatch { clean: usize, noisy: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Receiver clock relative to transmitter, parts per million.
    pub clock_offset_ppm: f64,
    /// Cycles per (output) sample.
    pub carrier_freq: f64,
    pub initial_phase: f64,
    /// `None` disables noise.
    pub esn0_db: Option<f64>,
    /// Samples per symbol at which Es/N0 is referenced.
    pub samples_per_symbol: f64,
    pub gain: f64,
    pub seed: u64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            clock_offset_ppm: 0.0,
            carrier_freq: 0.0,
            initial_phase: 0.0,
            esn0_db: None,
            samples_per_symbol: 1.6,
            gain: 1.0,
            seed: 0,
        }
    }
}

impl ChannelConfig {
    /// Warning text when the clock offset exceeds what the numerology budgets for.
    pub fn check_offset(&self, max_ppm: f64) -> Option<String> {
        (self.clock_offset_ppm.abs() > max_ppm).then(|| {
            format!(
                "clock offset {} ppm exceeds the profile's {} ppm budget",
                self.clock_offset_ppm, max_ppm
            )
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct ChannelOutput {
    pub samples: Vec<Complex32>,
    /// The same signal before noise was added.
    pub clean: Vec<Complex32>,
    pub noise_variance: f64,
}

pub fn output_len(input_len: usize, ppm: f64) -> usize {
    (input_len as f64 * (1.0 + ppm * 1e-6)).floor() as usize
}

fn resample(input: &[Complex32], ppm: f64) -> Vec<Complex64> {
    let to64 = |s: Complex32| Complex64::new(s.re as f64, s.im as f64);
    if ppm == 0.0 {
        return input.iter().map(|&s| to64(s)).collect();
    }
    let ratio = 1.0 + ppm * 1e-6;
    let interp = SincInterpolator::default();
    (0..output_len(input.len(), ppm))
        .map(|m| interp.at(input.len(), |i| to64(input[i]), m as f64 / ratio))
        .collect()
}

pub fn apply(input: &[Complex32], cfg: &ChannelConfig) -> ChannelOutput {
    let mut x = resample(input, cfg.clock_offset_ppm);
    if cfg.carrier_freq != 0.0 || cfg.initial_phase != 0.0 || cfg.gain != 1.0 {
        for (n, s) in x.iter_mut().enumerate() {
            let cycles = (cfg.carrier_freq * n as f64).fract();
            *s *= Complex64::from_polar(cfg.gain, TAU * cycles + cfg.initial_phase);
        }
    }
    let clean: Vec<Complex32> = x.iter().map(|s| Complex32::new(s.re as f32, s.im as f32)).collect();
    let Some(esn0_db) = cfg.esn0_db else {
        return ChannelOutput {
            samples: clean.clone(),
            clean,
            noise_variance: 0.0,
        };
    };
    let power = if x.is_empty() {
        0.0
    } else {
        x.iter().map(|s| s.norm_sqr()).sum::<f64>() / x.len() as f64
    };
    let noise_variance = power * cfg.samples_per_symbol / 10f64.powf(esn0_db / 10.0);
    let normal = Normal::new(0.0, (noise_variance / 2.0).sqrt()).expect("finite variance");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let samples = x
        .iter()
        .map(|s| {
            let n = Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
            let y = s + n;
            Complex32::new(y.re as f32, y.im as f32)
        })
        .collect();
    ChannelOutput {
        samples,
        clean,
        noise_variance,
    }
}

/// Es/N0 in dB from a clean reference and its noisy copy; `+inf` when identical.
pub fn measure_esn0(
    clean: &[Complex32],
    noisy: &[Complex32],
    samples_per_symbol: f64,
) -> Result<f64, ChannelError> {
    if clean.len() != noisy.len() {
        return Err(ChannelError::LengthMismatch {
            clean: clean.len(),
            noisy: noisy.len(),
        });
    }
    let n = clean.len().max(1) as f64;
    let ps: f64 = clean.iter().map(|s| s.norm_sqr() as f64).sum::<f64>() / n;
    let pn: f64 = clean
        .iter()
        .zip(noisy)
        .map(|(c, y)| (y - c).norm_sqr() as f64)
        .sum::<f64>()
        / n;
    if pn == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (ps * samples_per_symbol / pn).log10())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::FftPlanner;

    fn tone(n: usize, f: f64) -> Vec<Complex32> {
        (0..n)
            .map(|i| {
                let c = Complex64::from_polar(1.0, TAU * f * i as f64);
                Complex32::new(c.re as f32, c.im as f32)
            })
            .collect()
    }

    #[test]
    fn ideal_channel_is_bit_exact() {
        let x = tone(1000, 0.013);
        let out = apply(&x, &ChannelConfig::default());
        assert_eq!(out.samples, x);
    }

    #[test]
    fn clock_offset_lengthens_stream() {
        let x = vec![Complex32::new(0.1, 0.0); 1_000_000];
        let cfg = ChannelConfig {
            clock_offset_ppm: 10.0,
            ..Default::default()
        };
        assert_eq!(apply(&x, &cfg).samples.len(), 1_000_010);
        assert_eq!(output_len(1_000_000, -10.0), 999_990);
    }

    #[test]
    fn carrier_offset_makes_a_tone() {
        let x = vec![Complex32::new(1.0, 0.0); 1000];
        let cfg = ChannelConfig {
            carrier_freq: 0.01,
            ..Default::default()
        };
        let mut y: Vec<rustfft::num_complex::Complex<f32>> = apply(&x, &cfg).samples;
        FftPlanner::new().plan_fft_forward(1000).process(&mut y);
        let peak = (0..1000).max_by(|&a, &b| y[a].norm().total_cmp(&y[b].norm())).unwrap();
        assert_eq!(peak, 10);
    }

    #[test]
    fn offset_tone_stays_a_tone() {
        let f = 0.05;
        let x = tone(4000, f);
        let cfg = ChannelConfig {
            clock_offset_ppm: 10.0,
            ..Default::default()
        };
        let y = apply(&x, &cfg).samples;
        let ratio = 1.0 + 1e-5;
        for m in (100..3800).step_by(97) {
            let want = Complex64::from_polar(1.0, TAU * f * m as f64 / ratio);
            let got = Complex64::new(y[m].re as f64, y[m].im as f64);
            assert!((got - want).norm() < 1e-4);
        }
    }

    #[test]
    fn noise_calibration() {
        let x = tone(1_000_000, 0.01);
        for &target in &[0.0, 10.0] {
            let cfg = ChannelConfig {
                esn0_db: Some(target),
                seed: 3,
                ..Default::default()
            };
            let out = apply(&x, &cfg);
            let est = measure_esn0(&out.clean, &out.samples, 1.6).unwrap();
            assert!((est - target).abs() < 0.1, "{target}: {est}");
        }
    }

    #[test]
    fn noise_is_seeded() {
        let x = tone(1000, 0.01);
        let cfg = |seed| ChannelConfig {
            esn0_db: Some(5.0),
            seed,
            ..Default::default()
        };
        assert_eq!(apply(&x, &cfg(1)).samples, apply(&x, &cfg(1)).samples);
        assert_ne!(apply(&x, &cfg(1)).samples, apply(&x, &cfg(2)).samples);
    }

    #[test]
    fn measure_edge_cases() {
        let x = tone(10, 0.1);
        assert_eq!(measure_esn0(&x, &x, 1.6).unwrap(), f64::INFINITY);
        assert!(measure_esn0(&x, &x[..5], 1.6).is_err());
    }
}
