//! Forward error correction behind a small codec interface, decoded in
//! fixed batches of 16 codewords.

pub mod alist;
pub mod batch;
pub mod ldpc;

use std::sync::Arc;

use thiserror::Error;

use crate::numerology::DECODER_BATCH;
use crate::profile::CodecSpec;

pub use alist::ParityCheckMatrix;
pub use batch::BatchDecoder;
pub use ldpc::LdpcCodec;

const TOY96: &str = include_str!("../../codes/toy96.alist");
const DESK3060: &str = include_str!("../../codes/desk3060.alist");

/// Seeds used to generate the shipped matrices with [`ldpc::construct_ira`].
pub const BUILTIN_CODES: &[(&str, usize, usize, u64)] =
    &[("toy96", 96, 48, 96), ("desk3060", 3060, 1530, 3060)];

#[derive(Debug, Error)]
pub enum FecError {
    #[error("expected {expected} bits, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("alist line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("column {0} of the parity-check matrix is empty")]
    EmptyColumn(usize),
    #[error("batch of {0} blocks exceeds the decoder batch size")]
    BatchTooLarge(usize),
    #[error("unknown builtin matrix {0:?}")]
    UnknownMatrix(String),
    #[error("code construction failed: {0}")]
    Construction(String),
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodecDescriptor {
    pub name: String,
    /// Codeword bits.
    pub n: usize,
    /// Information bits.
    pub k: usize,
    pub batch_size: usize,
}

impl CodecDescriptor {
    pub fn new(name: impl Into<String>, n: usize, k: usize) -> Self {
        Self {
            name: name.into(),
            n,
            k,
            batch_size: DECODER_BATCH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Decoded {
    pub info: Vec<u8>,
    pub iterations: usize,
    pub success: bool,
}

/// Bits are `0`/`1` bytes; LLRs are positive for bit 0.
pub trait Codec: Send + Sync + std::fmt::Debug {
    fn descriptor(&self) -> &CodecDescriptor;
    fn encode(&self, info: &[u8]) -> Result<Vec<u8>, FecError>;
    fn decode(&self, llrs: &[f32]) -> Result<Decoded, FecError>;
}

/// Uncoded: hard decision on the LLR sign.
#[derive(Debug, Clone)]
pub struct Passthrough {
    descriptor: CodecDescriptor,
}

impl Passthrough {
    pub fn new(n: usize) -> Self {
        Self {
            descriptor: CodecDescriptor::new("passthrough", n, n),
        }
    }
}

impl Codec for Passthrough {
    fn descriptor(&self) -> &CodecDescriptor {
        &self.descriptor
    }

    fn encode(&self, info: &[u8]) -> Result<Vec<u8>, FecError> {
        check_len(self.descriptor.k, info.len())?;
        Ok(info.iter().map(|b| b & 1).collect())
    }

    fn decode(&self, llrs: &[f32]) -> Result<Decoded, FecError> {
        check_len(self.descriptor.n, llrs.len())?;
        Ok(Decoded {
            info: llrs.iter().map(|&l| (l < 0.0) as u8).collect(),
            iterations: 0,
            success: true,
        })
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), FecError> {
    if expected == got {
        Ok(())
    } else {
        Err(FecError::LengthMismatch { expected, got })
    }
}

pub fn builtin_matrix(name: &str) -> Result<ParityCheckMatrix, FecError> {
    match name {
        "toy96" => ParityCheckMatrix::parse_alist(TOY96),
        "desk3060" => ParityCheckMatrix::parse_alist(DESK3060),
        other => Err(FecError::UnknownMatrix(other.to_string())),
    }
}

/// Resolves `builtin:<name>` or a file path.
pub fn load_matrix(spec: &str) -> Result<(String, ParityCheckMatrix), FecError> {
    match spec.strip_prefix("builtin:") {
        Some(name) => Ok((name.to_string(), builtin_matrix(name)?)),
        None => {
            let path = std::path::Path::new(spec);
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| spec.to_string());
            Ok((name, ParityCheckMatrix::load(path)?))
        }
    }
}

/// Instantiates the codec a profile asks for; `n` is the frame's payload bit count.
pub fn codec_from_spec(spec: &CodecSpec, n: usize) -> Result<Arc<dyn Codec>, FecError> {
    match spec {
        CodecSpec::Passthrough => Ok(Arc::new(Passthrough::new(n))),
        CodecSpec::Ldpc { matrix } => {
            let (name, h) = load_matrix(matrix)?;
            if h.n() != n {
                return Err(FecError::DimensionMismatch(format!(
                    "matrix {name} has n = {} but the frame carries {n} bits",
                    h.n()
                )));
            }
            Ok(Arc::new(LdpcCodec::new(name, h)))
        }
    }
}
