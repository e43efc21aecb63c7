//! Kaiser-windowed sinc interpolation at arbitrary real positions.

use std::f64::consts::PI;

use num_complex::Complex64;

const WINDOW_TABLE: usize = 4096;

/// Modified Bessel function of the first kind, order zero.
pub fn bessel_i0(x: f64) -> f64 {
    let half = x / 2.0;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= half / k as f64;
        let t2 = term * term;
        sum += t2;
        if t2 < sum * 1e-17 {
            break;
        }
    }
    sum
}

#[derive(Debug, Clone)]
pub struct SincInterpolator {
    half: usize,
    window: Vec<f64>,
}

impl Default for SincInterpolator {
    fn default() -> Self {
        Self::new(16, 8.0)
    }
}

impl SincInterpolator {
    /// `2 * half` taps, Kaiser shape `beta`.
    pub fn new(half: usize, beta: f64) -> Self {
        let norm = bessel_i0(beta);
        let window = (0..=WINDOW_TABLE)
            .map(|i| {
                let u = i as f64 / WINDOW_TABLE as f64;
                bessel_i0(beta * (1.0 - u * u).max(0.0).sqrt()) / norm
            })
            .collect();
        Self { half, window }
    }

    fn window_at(&self, u: f64) -> f64 {
        let u = u.abs();
        if u >= 1.0 {
            return 0.0;
        }
        let x = u * WINDOW_TABLE as f64;
        let i = x as usize;
        let f = x - i as f64;
        self.window[i] * (1.0 - f) + self.window[i + 1] * f
    }

    /// Value of the band-limited signal through `x` at position `t`.
    /// Samples outside `x` count as zero.
    pub fn at<F: Fn(usize) -> Complex64>(&self, len: usize, sample: F, t: f64) -> Complex64 {
        let base = t.floor();
        let mu = t - base;
        let base = base as i64;
        if mu == 0.0 {
            return if base >= 0 && (base as usize) < len {
                sample(base as usize)
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        let s = (PI * mu).sin() / PI;
        let h = self.half as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for k in (1 - h)..=h {
            let idx = base + k;
            if idx < 0 || idx as usize >= len {
                continue;
            }
            let d = mu - k as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let w = sign * s / d * self.window_at(d / h as f64);
            acc += sample(idx as usize) * w;
        }
        acc
    }
}
