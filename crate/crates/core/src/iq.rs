//! Complex baseband buffers and the `cf32` / `sc8` file formats.
//!
//! `cf32` is interleaved little-endian 32-bit float I,Q. `sc8` is interleaved
//! signed 8-bit I,Q with full scale 1.0 mapped to 127; -128 is never produced.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex32;

/// Contiguous complex samples tagged with the absolute number of the first one.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IqBuffer {
    pub first_sample: u64,
    pub samples: Vec<Complex32>,
}

impl IqBuffer {
    pub fn new(first_sample: u64, samples: Vec<Complex32>) -> Self {
        Self {
            first_sample,
            samples,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr() as f64).sum::<f64>() / self.samples.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IqFormat {
    Cf32,
    Sc8,
}

impl IqFormat {
    /// Picks the format from a file extension, defaulting to `cf32`.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("sc8") | Some("cs8") => IqFormat::Sc8,
            _ => IqFormat::Cf32,
        }
    }
}

impl std::str::FromStr for IqFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cf32" => Ok(IqFormat::Cf32),
            "sc8" => Ok(IqFormat::Sc8),
            other => Err(format!("unknown IQ format {other:?}")),
        }
    }
}

/// Float to signed 8-bit with symmetric clipping at +-127.
#[inline]
pub fn quantize_component(x: f32) -> i8 {
    (x * 127.0).round().clamp(-127.0, 127.0) as i8
}

#[inline]
pub fn dequantize_component(q: i8) -> f32 {
    q as f32 / 127.0
}

pub fn quantize_into(samples: &[Complex32], out: &mut Vec<i8>) {
    out.reserve(samples.len() * 2);
    for s in samples {
        out.push(quantize_component(s.re));
        out.push(quantize_component(s.im));
    }
}

pub fn dequantize_into(bytes: &[i8], out: &mut Vec<Complex32>) {
    out.reserve(bytes.len() / 2);
    out.extend(
        bytes
            .chunks_exact(2)
            .map(|p| Complex32::new(dequantize_component(p[0]), dequantize_component(p[1]))),
    );
}

pub fn write_iq<W: Write>(mut w: W, samples: &[Complex32], format: IqFormat) -> io::Result<()> {
    match format {
        IqFormat::Cf32 => {
            let mut buf = Vec::with_capacity(samples.len() * 8);
            for s in samples {
                buf.extend_from_slice(&s.re.to_le_bytes());
                buf.extend_from_slice(&s.im.to_le_bytes());
            }
            w.write_all(&buf)?;
        }
        IqFormat::Sc8 => {
            let mut q = Vec::new();
            quantize_into(samples, &mut q);
            let bytes: Vec<u8> = q.into_iter().map(|b| b as u8).collect();
            w.write_all(&bytes)?;
        }
    }
    w.flush()
}

pub fn read_iq<R: Read>(mut r: R, format: IqFormat) -> io::Result<Vec<Complex32>> {
    let mut raw = Vec::new();
    r.read_to_end(&mut raw)?;
    match format {
        IqFormat::Cf32 => {
            if raw.len() % 8 != 0 {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("cf32 data length {} is not a multiple of 8", raw.len()),
                ));
            }
            Ok(raw
                .chunks_exact(8)
                .map(|c| {
                    Complex32::new(
                        f32::from_le_bytes([c[0], c[1], c[2], c[3]]),
                        f32::from_le_bytes([c[4], c[5], c[6], c[7]]),
                    )
                })
                .collect())
        }
        IqFormat::Sc8 => {
            if raw.len() % 2 != 0 {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    "sc8 data length is odd",
                ));
            }
            let q: Vec<i8> = raw.into_iter().map(|b| b as i8).collect();
            let mut out = Vec::new();
            dequantize_into(&q, &mut out);
            Ok(out)
        }
    }
}

pub fn write_iq_file(path: &Path, samples: &[Complex32], format: IqFormat) -> io::Result<()> {
    write_iq(BufWriter::new(std::fs::File::create(path)?), samples, format)
}

pub fn read_iq_file(path: &Path, format: IqFormat) -> io::Result<Vec<Complex32>> {
    read_iq(BufReader::new(std::fs::File::open(path)?), format)
}
