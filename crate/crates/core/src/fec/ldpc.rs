//! LDPC codes: construction, systematic encoding and normalized min-sum decoding.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::alist::ParityCheckMatrix;
use super::{Codec, CodecDescriptor, Decoded, FecError};

pub const MIN_SUM_SCALE: f32 = 0.75;
pub const MAX_ITERATIONS: usize = 50;

/// Builds an IRA-style matrix `H = [A | B]` with weight-3 information
/// columns, a bidiagonal parity part and no 4-cycles.
pub fn construct_ira(n: usize, k: usize, seed: u64) -> Result<ParityCheckMatrix, FecError> {
    if k == 0 || k >= n {
        return Err(FecError::Construction(format!("need 0 < k < n, got n={n} k={k}")));
    }
    let m = n - k;
    if m < 8 {
        return Err(FecError::Construction(format!("too few checks ({m})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut degree = vec![0usize; m];
    let mut pairs: HashSet<(u32, u32)> = HashSet::new();
    let ok_pair = |pairs: &HashSet<(u32, u32)>, a: u32, b: u32| {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        hi - lo != 1 && !pairs.contains(&(lo, hi))
    };
    let mut cols = Vec::with_capacity(n);
    for j in 0..k {
        let mut chosen = None;
        for _attempt in 0..64 {
            let mut order: Vec<u32> = (0..m as u32).collect();
            order.shuffle(&mut rng);
            order.sort_by_key(|&r| degree[r as usize]);
            let mut pick: Vec<u32> = Vec::with_capacity(3);
            for &r in &order {
                if pick.iter().all(|&p| ok_pair(&pairs, p, r)) {
                    pick.push(r);
                    if pick.len() == 3 {
                        break;
                    }
                }
            }
            if pick.len() == 3 {
                chosen = Some(pick);
                break;
            }
        }
        let mut pick = chosen.ok_or_else(|| {
            FecError::Construction(format!("no 4-cycle-free placement for column {j}"))
        })?;
        pick.sort_unstable();
        for a in 0..3 {
            degree[pick[a] as usize] += 1;
            for b in a + 1..3 {
                pairs.insert((pick[a], pick[b]));
            }
        }
        cols.push(pick);
    }
    for i in 0..m as u32 {
        if (i as usize) + 1 < m {
            cols.push(vec![i, i + 1]);
        } else {
            cols.push(vec![i]);
        }
    }
    ParityCheckMatrix::from_columns(m, cols)
}

/// Systematic encoder derived from `H` by Gaussian elimination over GF(2).
#[derive(Debug, Clone)]
pub struct Encoder {
    n: usize,
    info_positions: Vec<usize>,
    /// `(codeword position, parity equation over info bits as packed words)`.
    parity: Vec<(usize, Vec<u64>)>,
}

fn words(bits: usize) -> usize {
    bits.div_ceil(64)
}

impl Encoder {
    pub fn new(h: &ParityCheckMatrix) -> Self {
        let (n, m) = (h.n(), h.m());
        let nw = words(n);
        let mut rows: Vec<Vec<u64>> = h
            .rows()
            .iter()
            .map(|r| {
                let mut w = vec![0u64; nw];
                for &j in r {
                    w[j as usize / 64] |= 1 << (j % 64);
                }
                w
            })
            .collect();
        let get = |row: &[u64], j: usize| (row[j / 64] >> (j % 64)) & 1 == 1;
        // Pivot on the rightmost columns first so the information bits land
        // on the leading positions for staircase-style codes.
        let mut pivots: Vec<(usize, usize)> = Vec::new();
        let mut next_row = 0;
        for col in (0..n).rev() {
            if next_row == m {
                break;
            }
            let Some(found) = (next_row..m).find(|&r| get(&rows[r], col)) else {
                continue;
            };
            rows.swap(next_row, found);
            let pivot_row = rows[next_row].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != next_row && get(row, col) {
                    row.iter_mut().zip(&pivot_row).for_each(|(a, b)| *a ^= b);
                }
            }
            pivots.push((next_row, col));
            next_row += 1;
        }
        let pivot_cols: HashSet<usize> = pivots.iter().map(|&(_, c)| c).collect();
        let info_positions: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
        let k = info_positions.len();
        let parity = pivots
            .iter()
            .map(|&(r, col)| {
                let mut eq = vec![0u64; words(k)];
                for (i, &p) in info_positions.iter().enumerate() {
                    if get(&rows[r], p) {
                        eq[i / 64] |= 1 << (i % 64);
                    }
                }
                (col, eq)
            })
            .collect();
        Self {
            n,
            info_positions,
            parity,
        }
    }

    pub fn k(&self) -> usize {
        self.info_positions.len()
    }

    pub fn info_positions(&self) -> &[usize] {
        &self.info_positions
    }

    pub fn encode(&self, info: &[u8]) -> Result<Vec<u8>, FecError> {
        let k = self.k();
        if info.len() != k {
            return Err(FecError::LengthMismatch {
                expected: k,
                got: info.len(),
            });
        }
        let mut packed = vec![0u64; words(k)];
        for (i, &b) in info.iter().enumerate() {
            if b & 1 == 1 {
                packed[i / 64] |= 1 << (i % 64);
            }
        }
        let mut cw = vec![0u8; self.n];
        for (&p, &b) in self.info_positions.iter().zip(info) {
            cw[p] = b & 1;
        }
        for (col, eq) in &self.parity {
            let ones: u32 = eq.iter().zip(&packed).map(|(a, b)| (a & b).count_ones()).sum();
            cw[*col] = (ones & 1) as u8;
        }
        Ok(cw)
    }
}

/// Layered normalized min-sum decoder working on one codeword at a time.
#[derive(Debug, Clone)]
pub struct MinSumDecoder {
    rows: Vec<Vec<u32>>,
    n: usize,
    pub max_iterations: usize,
    pub scale: f32,
    pub early_termination: bool,
}

#[derive(Debug, Clone)]
pub struct MinSumOutput {
    pub codeword: Vec<u8>,
    pub iterations: usize,
    pub converged: bool,
}

impl MinSumDecoder {
    pub fn new(h: &ParityCheckMatrix) -> Self {
        Self {
            rows: h.rows().to_vec(),
            n: h.n(),
            max_iterations: MAX_ITERATIONS,
            scale: MIN_SUM_SCALE,
            early_termination: true,
        }
    }

    fn hard(post: &[f32], out: &mut [u8]) {
        for (o, &p) in out.iter_mut().zip(post) {
            *o = (p < 0.0) as u8;
        }
    }

    fn checks_ok(&self, bits: &[u8]) -> bool {
        self.rows
            .iter()
            .all(|row| row.iter().fold(0u8, |a, &j| a ^ bits[j as usize]) == 0)
    }

    /// Positive LLR means bit 0.
    pub fn decode(&self, llrs: &[f32]) -> Result<MinSumOutput, FecError> {
        if llrs.len() != self.n {
            return Err(FecError::LengthMismatch {
                expected: self.n,
                got: llrs.len(),
            });
        }
        let mut post = llrs.to_vec();
        let mut c2v: Vec<Vec<f32>> = self.rows.iter().map(|r| vec![0.0; r.len()]).collect();
        let mut bits = vec![0u8; self.n];
        let mut v2c = Vec::new();
        let mut iterations = 0;
        let mut converged = false;
        for it in 1..=self.max_iterations {
            iterations = it;
            for (row, msgs) in self.rows.iter().zip(c2v.iter_mut()) {
                v2c.clear();
                let (mut min1, mut min2, mut pos) = (f32::INFINITY, f32::INFINITY, 0);
                let mut sign = false;
                for (e, &j) in row.iter().enumerate() {
                    let v = post[j as usize] - msgs[e];
                    v2c.push(v);
                    sign ^= v < 0.0;
                    let a = v.abs();
                    if a < min1 {
                        min2 = min1;
                        min1 = a;
                        pos = e;
                    } else if a < min2 {
                        min2 = a;
                    }
                }
                for (e, &j) in row.iter().enumerate() {
                    let mag = if e == pos { min2 } else { min1 } * self.scale;
                    let s = sign ^ (v2c[e] < 0.0);
                    let m = if s { -mag } else { mag };
                    msgs[e] = m;
                    post[j as usize] = v2c[e] + m;
                }
            }
            Self::hard(&post, &mut bits);
            converged = self.checks_ok(&bits);
            if converged && self.early_termination {
                break;
            }
        }
        Ok(MinSumOutput {
            codeword: bits,
            iterations,
            converged,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LdpcCodec {
    descriptor: CodecDescriptor,
    matrix: ParityCheckMatrix,
    encoder: Encoder,
    decoder: MinSumDecoder,
}

impl LdpcCodec {
    pub fn new(name: impl Into<String>, matrix: ParityCheckMatrix) -> Self {
        let encoder = Encoder::new(&matrix);
        let decoder = MinSumDecoder::new(&matrix);
        Self {
            descriptor: CodecDescriptor::new(name, matrix.n(), encoder.k()),
            matrix,
            encoder,
            decoder,
        }
    }

    pub fn matrix(&self) -> &ParityCheckMatrix {
        &self.matrix
    }

    pub fn decoder_mut(&mut self) -> &mut MinSumDecoder {
        &mut self.decoder
    }
}

impl Codec for LdpcCodec {
    fn descriptor(&self) -> &CodecDescriptor {
        &self.descriptor
    }

    fn encode(&self, info: &[u8]) -> Result<Vec<u8>, FecError> {
        self.encoder.encode(info)
    }

    fn decode(&self, llrs: &[f32]) -> Result<Decoded, FecError> {
        let out = self.decoder.decode(llrs)?;
        let info = self
            .encoder
            .info_positions()
            .iter()
            .map(|&p| out.codeword[p])
            .collect();
        Ok(Decoded {
            info,
            iterations: out.iterations,
            success: out.converged,
        })
    }
}
