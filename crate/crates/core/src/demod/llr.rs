//! Max-log soft decisions for Gray-labelled 8PSK.

use num_complex::Complex64;

use super::DemodError;
use crate::modem::constellation::{labels, points, BITS_PER_SYMBOL, ORDER};
use crate::modem::frame::{deinterleave, INTERLEAVER_COLUMNS};

/// Three LLRs per symbol, most significant label bit first, positive for 0:
/// `(min_{s: b=1} |x-s|^2 - min_{s: b=0} |x-s|^2) / noise_var`.
pub fn llr_map(symbols: &[Complex64], noise_var: f64, out: &mut Vec<f32>) {
    let pts = points();
    let lbl = labels();
    let inv = 1.0 / noise_var;
    out.reserve(symbols.len() * BITS_PER_SYMBOL);
    for &x in symbols {
        let mut d = [0.0f64; ORDER];
        for k in 0..ORDER {
            d[k] = (x - pts[k]).norm_sqr();
        }
        for b in 0..BITS_PER_SYMBOL {
            let mask = 1 << (BITS_PER_SYMBOL - 1 - b);
            let (mut d0, mut d1) = (f64::INFINITY, f64::INFINITY);
            for k in 0..ORDER {
                if lbl[k] & mask == 0 {
                    d0 = d0.min(d[k]);
                } else {
                    d1 = d1.min(d[k]);
                }
            }
            out.push(((d1 - d0) * inv) as f32);
        }
    }
}

/// LLRs for a frame payload, put back in codeword order.
pub fn llr_map_deinterleave(
    payload: &[Complex64],
    expected_symbols: usize,
    noise_var: f64,
) -> Result<Vec<f32>, DemodError> {
    if payload.len() != expected_symbols {
        return Err(DemodError::LengthMismatch {
            expected: expected_symbols,
            got: payload.len(),
        });
    }
    let mut llrs = Vec::with_capacity(payload.len() * BITS_PER_SYMBOL);
    llr_map(payload, noise_var, &mut llrs);
    Ok(deinterleave(&llrs, INTERLEAVER_COLUMNS).expect("payload bits divisible by 3"))
}
