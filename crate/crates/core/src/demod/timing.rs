//! Two-pass Gardner symbol tracking on a 2 samples/symbol stream.
//!
//! The symbol position is an integer sample index `base` plus a fraction in
//! `[0, 1)` that selects one of the 128 Lagrange filters. Early and late
//! interpolants sit one sample either side of the on-time one and share its
//! filter. The loop is updated once per 64 symbols from the summed detector
//! output.

use num_complex::Complex64;

use super::DemodError;
use crate::dsp::lagrange::{dot, lagrange_taps, LagrangeBank, CENTER, PHASES, TAPS};
use crate::dsp::loopfilter::LoopGains;

pub const BLOCK_SYMBOLS: usize = 64;
/// Detector slope (per sample of timing error) for unit-power 8PSK, rolloff 0.25.
pub const DETECTOR_GAIN: f64 = 0.354;

/// Gardner detector on early, mid and late interpolants (or their block sums).
/// Negative when sampling late.
#[inline]
pub fn gardner_ted(early: Complex64, mid: Complex64, late: Complex64) -> f64 {
    mid.re * (early.re - late.re) + mid.im * (early.im - late.im)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Backward => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingLoopState {
    pub base: i64,
    /// Fractional position in `[0, 1)`; the filter index is `frac * 128`.
    pub frac: f64,
    /// Extra samples per symbol beyond the nominal two.
    pub rate: f64,
    pub gains: LoopGains,
    pub direction: Direction,
    pub skips: u64,
    pub repeats: u64,
}

impl TimingLoopState {
    pub fn new(gains: LoopGains) -> Self {
        Self {
            base: 0,
            frac: 0.0,
            rate: 0.0,
            gains,
            direction: Direction::Forward,
            skips: 0,
            repeats: 0,
        }
    }

    pub fn filter_index(&self) -> usize {
        LagrangeBank::index_for(self.frac)
    }

    pub fn position(&self) -> f64 {
        self.base as f64 + self.frac
    }

    fn normalize(&mut self) {
        while self.frac >= 1.0 {
            self.frac -= 1.0;
            self.base += 1;
            self.skips += 1;
        }
        while self.frac < 0.0 {
            self.frac += 1.0;
            self.base -= 1;
            self.repeats += 1;
        }
    }

    fn step(&mut self) {
        let s = self.direction.sign();
        self.base += 2 * s as i64;
        self.frac += s * self.rate;
        self.normalize();
    }

    fn update(&mut self, mean_error: f64) {
        self.frac += self.gains.kp * mean_error;
        self.rate += self.direction.sign() * self.gains.ki * mean_error / BLOCK_SYMBOLS as f64;
        self.normalize();
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimingOutput {
    pub symbols: Vec<Complex64>,
    /// Position of each symbol in input samples.
    pub positions: Vec<f64>,
    pub skips: u64,
    pub repeats: u64,
    /// Input samples advanced over by the forward pass.
    pub consumed: i64,
    pub final_rate: f64,
}

#[inline]
fn interp(x: &[Complex64], bank: &LagrangeBank, base: i64, index: usize) -> Complex64 {
    let lo = base - CENTER as i64;
    if lo >= 0 && (lo as usize + TAPS) <= x.len() {
        return bank.interp(&x[lo as usize..lo as usize + TAPS], index);
    }
    interp_edge(x, bank, base, index)
}

/// Near the ends the window is moved inside `x` when the position itself is
/// inside; positions outside see zeros.
#[cold]
fn interp_edge(x: &[Complex64], bank: &LagrangeBank, base: i64, index: usize) -> Complex64 {
    let pos = base as f64 + index as f64 / PHASES as f64;
    let n = x.len() as i64;
    if n >= TAPS as i64 && pos >= 0.0 && pos <= (n - 1) as f64 {
        let lo = (base - CENTER as i64).clamp(0, n - TAPS as i64);
        let taps = lagrange_taps(pos - lo as f64 - CENTER as f64);
        return dot(&x[lo as usize..lo as usize + TAPS], &taps);
    }
    let lo = base - CENTER as i64;
    let mut w = [Complex64::new(0.0, 0.0); TAPS];
    for (k, v) in w.iter_mut().enumerate() {
        let i = lo + k as i64;
        if i >= 0 && i < n {
            *v = x[i as usize];
        }
    }
    dot(&w, bank.filter(index))
}

fn window_inside(len: usize, base: i64) -> bool {
    base - 2 - CENTER as i64 >= 0 && (base - CENTER as i64) as usize + TAPS <= len
}

struct BlockAccumulator {
    sum: f64,
    count: usize,
}

impl BlockAccumulator {
    fn push(&mut self, state: &mut TimingLoopState, e: Option<f64>) {
        if let Some(e) = e {
            self.sum += e;
        }
        self.count += 1;
        if self.count == BLOCK_SYMBOLS {
            state.update(self.sum / BLOCK_SYMBOLS as f64);
            self.sum = 0.0;
            self.count = 0;
        }
    }
}

fn triplet(x: &[Complex64], bank: &LagrangeBank, st: &TimingLoopState) -> (Complex64, Option<f64>) {
    let idx = st.filter_index();
    let on = interp(x, bank, st.base, idx);
    let e = window_inside(x.len(), st.base).then(|| {
        let early = interp(x, bank, st.base - 2, idx);
        let mid = interp(x, bank, st.base - 1, idx);
        gardner_ted(early, mid, on)
    });
    (on, e)
}

/// Runs the loop backward from symbol `warmup` to the start of `x`, then
/// forward over all of `x` from the converged state. The first output symbol
/// is the one nearest the start, so its position lies in `[-1, 1)`.
pub fn track_symbols_two_pass(
    x: &[Complex64],
    bank: &LagrangeBank,
    state: TimingLoopState,
    warmup: usize,
) -> Result<TimingOutput, DemodError> {
    let available = x.len() / 2;
    if warmup > available {
        return Err(DemodError::WarmupExceedsChunk { warmup, available });
    }
    let mut st = state;
    st.base = 2 * warmup as i64;
    st.frac = state.frac;
    st.direction = Direction::Backward;
    let mut acc = BlockAccumulator { sum: 0.0, count: 0 };
    if warmup > 0 {
        loop {
            let (_, e) = triplet(x, bank, &st);
            acc.push(&mut st, e);
            let mut next = st;
            next.step();
            if next.position() < -1.0 {
                break;
            }
            st = next;
        }
    }
    st.direction = Direction::Forward;
    st.skips = 0;
    st.repeats = 0;
    Ok(run_forward(x, bank, st))
}

/// Forward pass only, from the given state.
pub fn run_forward(x: &[Complex64], bank: &LagrangeBank, state: TimingLoopState) -> TimingOutput {
    let mut st = state;
    st.direction = Direction::Forward;
    let start_base = st.base;
    let mut acc = BlockAccumulator { sum: 0.0, count: 0 };
    let mut out = TimingOutput::default();
    let cap = x.len() / 2 + 2;
    out.symbols.reserve(cap);
    out.positions.reserve(cap);
    while st.base < x.len() as i64 {
        let (on, e) = triplet(x, bank, &st);
        out.symbols.push(on);
        out.positions.push(st.base as f64 + st.filter_index() as f64 / PHASES as f64);
        acc.push(&mut st, e);
        st.step();
    }
    out.skips = st.skips - state.skips.min(st.skips);
    out.repeats = st.repeats - state.repeats.min(st.repeats);
    out.consumed = st.base - start_base;
    out.final_rate = st.rate;
    out
}
