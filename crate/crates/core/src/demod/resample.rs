//! Rational resampler to 2 samples per symbol with a built-in RRC matched filter.

use num_complex::{Complex32, Complex64};

use super::DemodError;
use crate::dsp::rrc::rrc_taps_dc_normalized;
use crate::numerology::Ratio;

pub const RX_TAPS: usize = 81;
/// Samples per symbol after resampling.
pub const OUTPUT_SPS: u64 = 2;

/// Up by `up`, filter at `up * sps_in` samples per symbol, down by `down`.
/// Output `j` corresponds to input position `j * down / up`. Samples outside
/// the input are taken as zero, so the output has exactly
/// `floor(len * up / down)` samples.
#[derive(Debug, Clone)]
pub struct Resampler {
    up: usize,
    down: usize,
    half: i64,
    /// Taps scaled by `up` so the overall DC gain is one.
    taps: Vec<f64>,
}

impl Resampler {
    pub fn new(sps_in: Ratio, rolloff: f64) -> Self {
        let r = Ratio::new(OUTPUT_SPS * sps_in.den, sps_in.num);
        let (up, down) = (r.num as usize, r.den as usize);
        let inter_sps = sps_in.num * up as u64 / sps_in.den;
        assert_eq!(
            inter_sps * sps_in.den,
            sps_in.num * up as u64,
            "intermediate rate must be an integer number of samples per symbol"
        );
        let half = RX_TAPS / 2;
        let taps = rrc_taps_dc_normalized(inter_sps as usize, half, rolloff)
            .into_iter()
            .map(|t| t * up as f64)
            .collect();
        Self {
            up,
            down,
            half: half as i64,
            taps,
        }
    }

    pub fn up(&self) -> usize {
        self.up
    }

    pub fn down(&self) -> usize {
        self.down
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    /// Input position (in input samples) of output sample `j`.
    pub fn output_to_input(&self, j: f64) -> f64 {
        j * self.down as f64 / self.up as f64
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        input_len * self.up / self.down
    }

    pub fn min_input(&self) -> usize {
        RX_TAPS.div_ceil(self.up)
    }

    pub fn process(&self, input: &[Complex32]) -> Result<Vec<Complex64>, DemodError> {
        if input.len() < self.min_input() {
            return Err(DemodError::ChunkTooShort {
                got: input.len(),
                need: self.min_input(),
            });
        }
        let (up, down, h) = (self.up as i64, self.down as i64, self.half);
        let n = input.len() as i64;
        let out_len = self.output_len(input.len());
        let mut out = Vec::with_capacity(out_len);
        for j in 0..out_len as i64 {
            // Taps t = down*j - up*i + h within [0, 2h].
            let t0 = down * j + h;
            let i_hi = (t0 / up).min(n - 1);
            let i_lo = (t0 - 2 * h + up - 1).div_euclid(up).max(0);
            let mut acc = Complex64::new(0.0, 0.0);
            let mut i = i_lo;
            while i <= i_hi {
                let s = input[i as usize];
                let w = self.taps[(t0 - up * i) as usize];
                acc.re += s.re as f64 * w;
                acc.im += s.im as f64 * w;
                i += 1;
            }
            out.push(acc);
        }
        Ok(out)
    }
}
