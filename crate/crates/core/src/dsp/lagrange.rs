//! 8-tap Lagrange fractional-delay bank.
//!
//! Filter `i` interpolates an 8-sample window `w[0..8]` at position
//! `3 + i / 128`, i.e. between `w[3]` and `w[4]`.

use std::ops::{Add, Mul};

pub const TAPS: usize = 8;
pub const PHASES: usize = 128;
/// Window index of the sample at fractional position zero.
pub const CENTER: usize = 3;

/// Lagrange basis weights for position `CENTER + mu` on nodes `0..8`.
pub fn lagrange_taps(mu: f64) -> [f64; TAPS] {
    let x = CENTER as f64 + mu;
    let mut taps = [0.0; TAPS];
    for (j, tap) in taps.iter_mut().enumerate() {
        let mut w = 1.0;
        for m in 0..TAPS {
            if m != j {
                w *= (x - m as f64) / (j as f64 - m as f64);
            }
        }
        *tap = w;
    }
    taps
}

#[derive(Debug, Clone)]
pub struct LagrangeBank {
    filters: Vec<[f64; TAPS]>,
}

impl Default for LagrangeBank {
    fn default() -> Self {
        Self::new()
    }
}

impl LagrangeBank {
    pub fn new() -> Self {
        Self {
            filters: (0..PHASES)
                .map(|i| lagrange_taps(i as f64 / PHASES as f64))
                .collect(),
        }
    }

    #[inline]
    pub fn filter(&self, index: usize) -> &[f64; TAPS] {
        &self.filters[index]
    }

    /// Nearest filter for a fraction in `[0, 1)`.
    #[inline]
    pub fn index_for(frac: f64) -> usize {
        ((frac * PHASES as f64) as usize).min(PHASES - 1)
    }

    #[inline]
    pub fn interp<T>(&self, window: &[T], index: usize) -> T
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        dot(window, &self.filters[index])
    }
}

#[inline]
pub fn dot<T>(window: &[T], taps: &[f64; TAPS]) -> T
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    let mut acc = T::default();
    for (x, t) in window[..TAPS].iter().zip(taps.iter()) {
        acc = acc + *x * *t;
    }
    acc
}
