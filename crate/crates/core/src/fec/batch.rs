//! Fixed-size batch decoding with all-zero padding.

use std::sync::Arc;

use super::{Codec, FecError};
use crate::combiner::{BlockOrigin, DecodedBlock};
use crate::demod::SoftFrame;
use crate::numerology::DECODER_BATCH;

/// LLR magnitude of the all-zero padding codewords.
pub const PAD_LLR: f32 = 32.0;

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct BatchStats {
    pub batches: usize,
    pub real: usize,
    pub padded: usize,
    pub failed: usize,
    /// Iterations spent on real codewords.
    pub iterations: usize,
    /// Iterations spent on padding codewords.
    pub pad_iterations: usize,
}

impl BatchStats {
    pub fn merge(&mut self, other: &BatchStats) {
        self.batches += other.batches;
        self.real += other.real;
        self.padded += other.padded;
        self.failed += other.failed;
        self.iterations += other.iterations;
        self.pad_iterations += other.pad_iterations;
    }
}

#[derive(Debug, Clone)]
pub struct BatchDecoder {
    codec: Arc<dyn Codec>,
    pad: Vec<f32>,
}

impl BatchDecoder {
    pub fn new(codec: Arc<dyn Codec>) -> Self {
        let n = codec.descriptor().n;
        Self {
            codec,
            pad: vec![PAD_LLR; n],
        }
    }

    pub fn codec(&self) -> &Arc<dyn Codec> {
        &self.codec
    }

    /// Decodes 1..=16 frames as one batch; short batches are padded and the
    /// padding results are discarded.
    pub fn decode_batch(
        &self,
        frames: &[SoftFrame],
        origin: BlockOrigin,
    ) -> Result<(Vec<DecodedBlock>, BatchStats), FecError> {
        if frames.len() > DECODER_BATCH {
            return Err(FecError::BatchTooLarge(frames.len()));
        }
        let mut stats = BatchStats {
            batches: 1,
            ..Default::default()
        };
        let mut out = Vec::with_capacity(frames.len());
        for slot in 0..DECODER_BATCH {
            match frames.get(slot) {
                Some(frame) => {
                    let d = self.codec.decode(&frame.llrs)?;
                    stats.real += 1;
                    stats.iterations += d.iterations;
                    stats.failed += usize::from(!d.success);
                    out.push(DecodedBlock {
                        start_sample: frame.start_sample,
                        bits: d.info,
                        failed: !d.success,
                        origin,
                    });
                }
                None => {
                    let d = self.codec.decode(&self.pad)?;
                    stats.padded += 1;
                    stats.pad_iterations += d.iterations;
                }
            }
        }
        Ok((out, stats))
    }

    /// Splits into consecutive batches of 16.
    pub fn decode_all(
        &self,
        frames: &[SoftFrame],
        origin: BlockOrigin,
    ) -> Result<(Vec<DecodedBlock>, BatchStats), FecError> {
        let mut blocks = Vec::with_capacity(frames.len());
        let mut stats = BatchStats::default();
        for batch in frames.chunks(DECODER_BATCH) {
            let (b, s) = self.decode_batch(batch, origin)?;
            blocks.extend(b);
            stats.merge(&s);
        }
        Ok((blocks, stats))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fec::{builtin_matrix, LdpcCodec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn frame(codec: &dyn Codec, rng: &mut ChaCha8Rng, start: u64) -> (Vec<u8>, SoftFrame) {
        let info: Vec<u8> = (0..codec.descriptor().k).map(|_| rng.random_range(0..2)).collect();
        let cw = codec.encode(&info).unwrap();
        let llrs = cw
            .iter()
            .map(|&b| (if b == 0 { 2.0 } else { -2.0 }) + rng.random_range(-1.5..1.5f32))
            .collect();
        (
            info,
            SoftFrame {
                start_sample: start,
                llrs,
                noise_var: 1.0,
            },
        )
    }

    #[test]
    fn single_real_frame_is_padded() {
        let codec: Arc<dyn Codec> = Arc::new(LdpcCodec::new("toy96", builtin_matrix("toy96").unwrap()));
        let dec = BatchDecoder::new(codec.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (info, f) = frame(codec.as_ref(), &mut rng, 1234);
        let (blocks, stats) = dec.decode_batch(&[f], BlockOrigin::default()).unwrap();
        assert_eq!(blocks.len(), 1);
        assert_eq!(stats.padded, 15);
        assert_eq!(stats.pad_iterations, 15);
        assert_eq!(blocks[0].start_sample, 1234);
        assert_eq!(blocks[0].bits, info);
    }

    #[test]
    fn batch_matches_individual_decoding() {
        let codec: Arc<dyn Codec> = Arc::new(LdpcCodec::new("toy96", builtin_matrix("toy96").unwrap()));
        let dec = BatchDecoder::new(codec.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let frames: Vec<SoftFrame> = (0..16).map(|i| frame(codec.as_ref(), &mut rng, i * 10).1).collect();
        let (together, _) = dec.decode_batch(&frames, BlockOrigin::default()).unwrap();
        for (i, f) in frames.iter().enumerate() {
            let (alone, _) = dec.decode_batch(std::slice::from_ref(f), BlockOrigin::default()).unwrap();
            assert_eq!(alone[0], together[i]);
        }
    }

    #[test]
    fn oversized_batch_rejected() {
        let codec: Arc<dyn Codec> = Arc::new(crate::fec::Passthrough::new(4));
        let dec = BatchDecoder::new(codec);
        let f = SoftFrame {
            start_sample: 0,
            llrs: vec![1.0; 4],
            noise_var: 1.0,
        };
        let frames = vec![f; 17];
        assert!(matches!(
            dec.decode_batch(&frames, BlockOrigin::default()),
            Err(FecError::BatchTooLarge(17))
        ));
        assert_eq!(dec.decode_all(&frames, BlockOrigin::default()).unwrap().1.batches, 2);
    }
}
