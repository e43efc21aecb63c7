//! Root-raised-cosine pulse.

use std::f64::consts::PI;

/// Continuous unit-energy RRC pulse at `t` symbol periods.
pub fn rrc(t: f64, alpha: f64) -> f64 {
    let t = t.abs();
    if t < 1e-12 {
        return 1.0 - alpha + 4.0 * alpha / PI;
    }
    let singular = 1.0 / (4.0 * alpha);
    if (t - singular).abs() < 1e-9 {
        let a = PI / (4.0 * alpha);
        return alpha / 2f64.sqrt() * ((1.0 + 2.0 / PI) * a.sin() + (1.0 - 2.0 / PI) * a.cos());
    }
    let num = (PI * t * (1.0 - alpha)).sin() + 4.0 * alpha * t * (PI * t * (1.0 + alpha)).cos();
    let den = PI * t * (1.0 - (4.0 * alpha * t).powi(2));
    num / den
}

/// `rrc(n / sps)` for `n` in `-half_len..=half_len`.
pub fn rrc_taps(sps: usize, half_len: usize, alpha: f64) -> Vec<f64> {
    let h = half_len as i64;
    (-h..=h).map(|n| rrc(n as f64 / sps as f64, alpha)).collect()
}

/// Same pulse scaled to unit DC gain.
pub fn rrc_taps_dc_normalized(sps: usize, half_len: usize, alpha: f64) -> Vec<f64> {
    let mut taps = rrc_taps(sps, half_len, alpha);
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}
