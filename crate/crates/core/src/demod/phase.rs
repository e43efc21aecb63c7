//! Two-pass decision-directed carrier phase tracking.
//!
//! Within a block of 8 symbols the phase follows `theta_k = theta_{-1} + k*phi`.
//! After each block the slicer-based error updates `theta` and `phi`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dsp::loopfilter::LoopGains;
use crate::modem::constellation::slice_8psk;

pub const BLOCK_SYMBOLS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseLoopState {
    /// Phase applied to the symbol processed just before the next block.
    pub theta: f64,
    /// Radians per symbol.
    pub freq: f64,
    pub gains: LoopGains,
}

impl PhaseLoopState {
    pub fn new(gains: LoopGains) -> Self {
        Self {
            theta: 0.0,
            freq: 0.0,
            gains,
        }
    }
}

/// Wraps into `(-pi, pi]`.
pub fn wrap_phase(x: f64) -> f64 {
    let mut y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y -= 2.0 * PI;
    }
    y
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhaseOutput {
    pub symbols: Vec<Complex64>,
    /// Phase removed from each symbol.
    pub phases: Vec<f64>,
    pub final_freq: f64,
}

/// Decision-directed error: `Im(y * conj(slice(y)))`.
#[inline]
pub fn phase_error(y: Complex64) -> f64 {
    (y * slice_8psk(y).point.conj()).im
}

/// One pass over `indices`. `dir` is +1 forward and -1 backward; `on_symbol`
/// sees every index with the phase removed from it.
fn pass<I, F>(x: &[Complex64], indices: I, st: &mut PhaseLoopState, dir: f64, mut on_symbol: F)
where
    I: Iterator<Item = usize>,
    F: FnMut(usize, f64, Complex64),
{
    let mut block: Vec<usize> = Vec::with_capacity(BLOCK_SYMBOLS);
    let mut flush = |block: &[usize], st: &mut PhaseLoopState, update: bool| {
        let mut err = 0.0;
        let mut last = st.theta;
        for (j, &i) in block.iter().enumerate() {
            let rot = st.theta + dir * (j + 1) as f64 * st.freq;
            let y = x[i] * Complex64::from_polar(1.0, -rot);
            err += phase_error(y);
            on_symbol(i, rot, y);
            last = rot;
        }
        if update {
            let e = err / BLOCK_SYMBOLS as f64;
            st.theta = wrap_phase(last + st.gains.kp * e);
            st.freq += dir * st.gains.ki * e / BLOCK_SYMBOLS as f64;
        } else {
            st.theta = wrap_phase(last);
        }
    };
    for i in indices {
        block.push(i);
        if block.len() == BLOCK_SYMBOLS {
            flush(&block, st, true);
            block.clear();
        }
    }
    if !block.is_empty() {
        flush(&block, st, false);
    }
}

/// Backward over symbols `warmup..=0`, then forward over everything.
pub fn track_phase_two_pass(x: &[Complex64], state: PhaseLoopState, warmup: usize) -> PhaseOutput {
    let mut st = state;
    if x.is_empty() {
        return PhaseOutput {
            final_freq: st.freq,
            ..Default::default()
        };
    }
    let w = warmup.min(x.len() - 1);
    if w > 0 {
        pass(x, (0..=w).rev(), &mut st, -1.0, |_, _, _| {});
    }
    // The forward ramp starts one step before symbol 0.
    st.theta -= st.freq;
    let mut out = PhaseOutput {
        symbols: vec![Complex64::new(0.0, 0.0); x.len()],
        phases: vec![0.0; x.len()],
        final_freq: 0.0,
    };
    pass(x, 0..x.len(), &mut st, 1.0, |i, rot, y| {
        out.symbols[i] = y;
        out.phases[i] = rot;
    });
    out.final_freq = st.freq;
    out
}
