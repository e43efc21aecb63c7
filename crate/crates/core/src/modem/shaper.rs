//! Streaming RRC pulse shaper producing a rational number of samples per symbol.

use std::collections::VecDeque;

use num_complex::{Complex32, Complex64};

use crate::dsp::rrc::rrc_taps;
use crate::numerology::Ratio;

/// Pulse truncation, in symbols on each side of the peak.
pub const TX_HALF_SPAN_SYMBOLS: usize = 16;

/// Interpolates symbols by `sps.num`, filters, and keeps every `sps.den`-th
/// sample. Output sample `m` sits at time `m * den / num` symbols, so symbol
/// `k` is centred on output position `k * num / den`. Filter state carries
/// across calls, which keeps consecutive frames continuous.
#[derive(Debug, Clone)]
pub struct PulseShaper {
    up: u64,
    down: u64,
    half: i64,
    taps: Vec<f64>,
    history: VecDeque<Complex64>,
    history_base: u64,
    total_symbols: u64,
    next_out: u64,
}

impl PulseShaper {
    pub fn new(sps: Ratio, rolloff: f64) -> Self {
        let half = TX_HALF_SPAN_SYMBOLS * sps.num as usize;
        Self {
            up: sps.num,
            down: sps.den,
            half: half as i64,
            taps: rrc_taps(sps.num as usize, half, rolloff),
            history: VecDeque::new(),
            history_base: 0,
            total_symbols: 0,
            next_out: 0,
        }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    fn last_symbol(&self, m: u64) -> u64 {
        (self.down * m + self.half as u64) / self.up
    }

    fn first_symbol(&self, m: u64) -> u64 {
        let t = (self.down * m) as i64 - self.half;
        if t <= 0 {
            0
        } else {
            (t as u64).div_ceil(self.up)
        }
    }

    fn produce(&self, m: u64) -> Complex32 {
        let mut acc = Complex64::new(0.0, 0.0);
        let lo = self.first_symbol(m).max(self.history_base);
        let hi = self.last_symbol(m).min(self.total_symbols.saturating_sub(1));
        if self.total_symbols == 0 {
            return Complex32::new(0.0, 0.0);
        }
        for k in lo..=hi {
            let tap = (self.down * m) as i64 - (self.up * k) as i64 + self.half;
            acc += self.history[(k - self.history_base) as usize] * self.taps[tap as usize];
        }
        Complex32::new(acc.re as f32, acc.im as f32)
    }

    pub fn push(&mut self, symbols: &[Complex64], out: &mut Vec<Complex32>) {
        self.history.extend(symbols.iter().copied());
        self.total_symbols += symbols.len() as u64;
        while self.last_symbol(self.next_out) < self.total_symbols {
            out.push(self.produce(self.next_out));
            self.next_out += 1;
        }
        let keep_from = self.first_symbol(self.next_out);
        while self.history_base < keep_from && !self.history.is_empty() {
            self.history.pop_front();
            self.history_base += 1;
        }
    }

    /// Emits the remaining samples up to `symbols * num / den`, treating
    /// symbols past the end as zero.
    pub fn finish(&mut self, out: &mut Vec<Complex32>) {
        let target = self.total_symbols * self.up / self.down;
        while self.next_out < target {
            out.push(self.produce(self.next_out));
            self.next_out += 1;
        }
    }

    pub fn samples_emitted(&self) -> u64 {
        self.next_out
    }
}
