//! Gray-labelled 8PSK.
//!
//! Point `k` sits at angle `k * pi/4` and carries label `k ^ (k >> 1)`,
//! transmitted most significant bit first.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64;

pub const BITS_PER_SYMBOL: usize = 3;
pub const ORDER: usize = 8;

/// Two angles closer than this (in units of pi/4) count as a tie.
const TIE_TOLERANCE: f64 = 1e-9;

#[inline]
pub fn gray(k: u8) -> u8 {
    k ^ (k >> 1)
}

#[inline]
pub fn gray_inverse(mut g: u8) -> u8 {
    let mut k = g;
    while g > 0 {
        g >>= 1;
        k ^= g;
    }
    k
}

/// Point index to unit-magnitude complex value.
#[inline]
pub fn point(index: u8) -> Complex64 {
    Complex64::from_polar(1.0, index as f64 * FRAC_PI_4)
}

pub fn points() -> [Complex64; ORDER] {
    std::array::from_fn(|k| point(k as u8))
}

/// Label (3 bits) of every point index.
pub fn labels() -> [u8; ORDER] {
    std::array::from_fn(|k| gray(k as u8))
}

#[inline]
pub fn modulate_label(label: u8) -> Complex64 {
    point(gray_inverse(label & 7))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub index: u8,
    pub label: u8,
    pub point: Complex64,
}

/// Nearest point by angle. Ties go to the smaller label; zero maps to label 0.
pub fn slice_8psk(x: Complex64) -> Decision {
    if x.re == 0.0 && x.im == 0.0 {
        return Decision {
            index: 0,
            label: 0,
            point: point(0),
        };
    }
    let pos = (x.arg() / FRAC_PI_4).rem_euclid(8.0);
    let lo = pos.floor();
    let frac = pos - lo;
    let lo_i = (lo as u8) % 8;
    let hi_i = (lo_i + 1) % 8;
    let index = if (frac - 0.5).abs() <= TIE_TOLERANCE {
        if gray(lo_i) < gray(hi_i) {
            lo_i
        } else {
            hi_i
        }
    } else if frac < 0.5 {
        lo_i
    } else {
        hi_i
    };
    Decision {
        index,
        label: gray(index),
        point: point(index),
    }
}

pub fn label_bits(label: u8) -> [u8; BITS_PER_SYMBOL] {
    [(label >> 2) & 1, (label >> 1) & 1, label & 1]
}

pub fn bits_label(bits: &[u8]) -> u8 {
    ((bits[0] & 1) << 2) | ((bits[1] & 1) << 1) | (bits[2] & 1)
}
