//! Frame assembly: preamble followed by the interleaved, mapped codeword.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::constellation::{bits_label, modulate_label, point, BITS_PER_SYMBOL};
use super::ModemError;
use crate::fec::Codec;

pub const INTERLEAVER_COLUMNS: usize = 3;

/// Fixed QPSK-valued known sequence at the head of every frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Preamble {
    symbols: Vec<Complex64>,
}

impl Preamble {
    pub fn new(len: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let symbols = (0..len).map(|_| point(2 * rng.random_range(0..4u8))).collect();
        Self { symbols }
    }

    pub fn symbols(&self) -> &[Complex64] {
        &self.symbols
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

fn check_divisible(len: usize, columns: usize) -> Result<usize, ModemError> {
    if columns == 0 || !len.is_multiple_of(columns) {
        return Err(ModemError::LengthNotDivisible { len, columns });
    }
    Ok(len / columns)
}

/// Block interleaver: written column by column, read row by row.
pub fn interleave<T: Copy>(input: &[T], columns: usize) -> Result<Vec<T>, ModemError> {
    let rows = check_divisible(input.len(), columns)?;
    let mut out = Vec::with_capacity(input.len());
    for r in 0..rows {
        for c in 0..columns {
            out.push(input[c * rows + r]);
        }
    }
    Ok(out)
}

pub fn deinterleave<T: Copy + Default>(input: &[T], columns: usize) -> Result<Vec<T>, ModemError> {
    let rows = check_divisible(input.len(), columns)?;
    let mut out = vec![T::default(); input.len()];
    for r in 0..rows {
        for c in 0..columns {
            out[c * rows + r] = input[r * columns + c];
        }
    }
    Ok(out)
}

/// Maps a bit sequence (length divisible by 3) to 8PSK symbols.
pub fn map_bits(bits: &[u8]) -> Vec<Complex64> {
    bits.chunks_exact(BITS_PER_SYMBOL)
        .map(|b| modulate_label(bits_label(b)))
        .collect()
}

/// Encodes `info`, interleaves, maps and prepends the preamble.
pub fn build_frame(
    info: &[u8],
    codec: &dyn Codec,
    preamble: &Preamble,
    payload_symbols: usize,
) -> Result<Vec<Complex64>, ModemError> {
    let d = codec.descriptor();
    if info.len() != d.k {
        return Err(ModemError::LengthMismatch {
            expected: d.k,
            got: info.len(),
        });
    }
    if d.n != payload_symbols * BITS_PER_SYMBOL {
        return Err(ModemError::LengthMismatch {
            expected: payload_symbols * BITS_PER_SYMBOL,
            got: d.n,
        });
    }
    let cw = codec.encode(info)?;
    let bits = interleave(&cw, INTERLEAVER_COLUMNS)?;
    let mut symbols = Vec::with_capacity(preamble.len() + payload_symbols);
    symbols.extend_from_slice(preamble.symbols());
    symbols.extend(map_bits(&bits));
    Ok(symbols)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fec::Passthrough;
    use crate::profile::Profile;

    #[test]
    fn interleaver_examples() {
        let b = [0, 1, 2, 3, 4, 5];
        assert_eq!(interleave(&b, 3).unwrap(), vec![0, 2, 4, 1, 3, 5]);
        assert_eq!(interleave(&b, 1).unwrap(), b.to_vec());
        assert!(matches!(
            interleave(&[0u8; 7], 3),
            Err(ModemError::LengthNotDivisible { len: 7, columns: 3 })
        ));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let long: Vec<u8> = (0..64800).map(|_| rng.random_range(0..2)).collect();
        let il = interleave(&long, 3).unwrap();
        assert_eq!(deinterleave(&il, 3).unwrap(), long);
    }

    #[test]
    fn desk_frame_layout() {
        let p = Profile::desk();
        let pre = Preamble::new(p.waveform.preamble_symbols, p.preamble_seed);
        let codec = Passthrough::new(p.waveform.payload_bits());
        let info = vec![0u8; 3060];
        let f = build_frame(&info, &codec, &pre, p.waveform.payload_symbols).unwrap();
        assert_eq!(f.len(), 1050);
        assert_eq!(&f[..30], pre.symbols());
        assert!(f[30..].iter().all(|s| (*s - Complex64::new(1.0, 0.0)).norm() < 1e-12));
        assert_eq!(f, build_frame(&info, &codec, &pre, 1020).unwrap());
    }

    #[test]
    fn paper_frame_length() {
        let p = Profile::paper();
        let pre = Preamble::new(p.waveform.preamble_symbols, p.preamble_seed);
        let codec = Passthrough::new(p.waveform.payload_bits());
        let f = build_frame(&vec![1u8; 64800], &codec, &pre, p.waveform.payload_symbols).unwrap();
        assert_eq!(f.len(), 21690);
    }

    #[test]
    fn preamble_is_qpsk_and_deterministic() {
        let a = Preamble::new(30, 1);
        assert_eq!(a, Preamble::new(30, 1));
        assert_ne!(a, Preamble::new(30, 2));
        for s in a.symbols() {
            assert!((s.re.abs() < 1e-12) ^ (s.im.abs() < 1e-12));
        }
    }

    #[test]
    fn wrong_info_length() {
        let pre = Preamble::new(30, 1);
        let codec = Passthrough::new(3060);
        assert!(matches!(
            build_frame(&[0; 10], &codec, &pre, 1020),
            Err(ModemError::LengthMismatch { expected: 3060, got: 10 })
        ));
    }
}
