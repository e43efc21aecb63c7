//! Puts decoded blocks back in stream order.
//!
//! Blocks are keyed by the absolute sample number of their first symbol. A
//! block is released when it is within `sequential_span` of the last released
//! block; otherwise it waits in a bounded buffer. When the buffer overflows,
//! the pending block with the smallest start is released and the skipped
//! range is logged as a gap.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, VecDeque};
use std::hash::{Hash, Hasher};
use std::io::{self, Read, Write};

use serde::Serialize;
use thiserror::Error;

pub const DEFAULT_CAPACITY: usize = 64;
/// Blocks closer than this many nominal block spacings are sequential.
pub const SEQUENTIAL_BLOCKS: u64 = 17;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize)]
pub struct BlockOrigin {
    pub server: u32,
    pub worker: u32,
    pub chunk: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedBlock {
    pub start_sample: u64,
    pub bits: Vec<u8>,
    pub failed: bool,
    pub origin: BlockOrigin,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CombineError {
    #[error("block at sample {start} is older than the last emitted block at {last}")]
    StaleBlock { start: u64, last: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReorderConfig {
    pub block_spacing: u64,
    pub sequential_span: u64,
    pub capacity: usize,
    /// Starts within this many samples of each other name the same block.
    pub dup_tolerance: u64,
    /// Start sample expected for the first block.
    pub origin: u64,
}

impl ReorderConfig {
    pub fn new(block_spacing: u64) -> Self {
        Self {
            block_spacing,
            sequential_span: SEQUENTIAL_BLOCKS * block_spacing,
            capacity: DEFAULT_CAPACITY,
            dup_tolerance: 0,
            origin: 0,
        }
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.capacity = capacity.max(1);
        self
    }

    pub fn with_span(mut self, span: u64) -> Self {
        self.sequential_span = span;
        self
    }

    pub fn with_dup_tolerance(mut self, tol: u64) -> Self {
        self.dup_tolerance = tol;
        self
    }

    pub fn with_origin(mut self, origin: u64) -> Self {
        self.origin = origin;
        self
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CombinerStats {
    pub submitted: u64,
    pub emitted: u64,
    pub duplicates: u64,
    /// Duplicates whose bits disagreed with the kept copy.
    pub conflicts: u64,
    pub gaps: u64,
    pub stale: u64,
    pub failed_emitted: u64,
    pub max_pending: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum CombinerEvent {
    Duplicate { start: u64, conflict: bool },
    Stale { start: u64 },
    /// Emitted `start` without its predecessor; `after` is the previous emission.
    Gap { after: Option<u64>, start: u64 },
}

fn bits_hash(bits: &[u8]) -> u64 {
    let mut h = DefaultHasher::new();
    bits.hash(&mut h);
    h.finish()
}

#[derive(Debug, Clone)]
pub struct ReorderBuffer {
    cfg: ReorderConfig,
    pending: BTreeMap<u64, DecodedBlock>,
    last_emitted: Option<u64>,
    /// Recently emitted `(start, bits hash)` for duplicate detection.
    history: VecDeque<(u64, u64)>,
    stats: CombinerStats,
    events: Vec<CombinerEvent>,
}

impl ReorderBuffer {
    pub fn new(cfg: ReorderConfig) -> Self {
        Self {
            cfg,
            pending: BTreeMap::new(),
            last_emitted: None,
            history: VecDeque::new(),
            stats: CombinerStats::default(),
            events: Vec::new(),
        }
    }

    pub fn config(&self) -> &ReorderConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &CombinerStats {
        &self.stats
    }

    pub fn events(&self) -> &[CombinerEvent] {
        &self.events
    }

    pub fn pending_len(&self) -> usize {
        self.pending.len()
    }

    pub fn last_emitted(&self) -> Option<u64> {
        self.last_emitted
    }

    fn history_limit(&self) -> usize {
        4 * self.cfg.capacity + 64
    }

    fn find_pending(&self, start: u64) -> Option<u64> {
        let tol = self.cfg.dup_tolerance;
        self.pending
            .range(start.saturating_sub(tol)..=start.saturating_add(tol))
            .next()
            .map(|(&k, _)| k)
    }

    fn find_history(&self, start: u64) -> Option<u64> {
        let tol = self.cfg.dup_tolerance;
        self.history
            .iter()
            .find(|(s, _)| s.abs_diff(start) <= tol)
            .map(|&(_, h)| h)
    }

    /// Drops duplicates and stale blocks, returns everything released by this arrival.
    pub fn try_submit(&mut self, block: DecodedBlock) -> Result<Vec<DecodedBlock>, CombineError> {
        self.stats.submitted += 1;
        let start = block.start_sample;
        if let Some(key) = self.find_pending(start) {
            let kept = self.pending.get_mut(&key).expect("pending key");
            let conflict = kept.bits != block.bits;
            if kept.failed && !block.failed {
                *kept = block;
            }
            self.note_duplicate(start, conflict);
            return Ok(Vec::new());
        }
        if let Some(h) = self.find_history(start) {
            let conflict = h != bits_hash(&block.bits);
            self.note_duplicate(start, conflict);
            return Ok(Vec::new());
        }
        let floor = self.last_emitted.unwrap_or(self.cfg.origin);
        if start < floor || (self.last_emitted.is_some() && start == floor) {
            self.stats.stale += 1;
            self.events.push(CombinerEvent::Stale { start });
            return Err(CombineError::StaleBlock { start, last: floor });
        }
        self.pending.insert(start, block);
        self.stats.max_pending = self.stats.max_pending.max(self.pending.len());
        let mut out = Vec::new();
        self.drain(&mut out);
        while self.pending.len() > self.cfg.capacity {
            let (_, b) = self.pending.pop_first().expect("non-empty");
            self.stats.gaps += 1;
            self.events.push(CombinerEvent::Gap {
                after: self.last_emitted,
                start: b.start_sample,
            });
            self.emit(b, &mut out);
            self.drain(&mut out);
        }
        Ok(out)
    }

    /// Like [`try_submit`](Self::try_submit) with stale blocks silently counted.
    pub fn submit(&mut self, block: DecodedBlock) -> Vec<DecodedBlock> {
        self.try_submit(block).unwrap_or_default()
    }

    fn note_duplicate(&mut self, start: u64, conflict: bool) {
        self.stats.duplicates += 1;
        self.stats.conflicts += u64::from(conflict);
        self.events.push(CombinerEvent::Duplicate { start, conflict });
    }

    fn is_sequential(&self, start: u64) -> bool {
        match self.last_emitted {
            Some(last) => start - last < self.cfg.sequential_span,
            None => start - self.cfg.origin < self.cfg.sequential_span,
        }
    }

    fn drain(&mut self, out: &mut Vec<DecodedBlock>) {
        while let Some((&first, _)) = self.pending.first_key_value() {
            if !self.is_sequential(first) {
                break;
            }
            let b = self.pending.remove(&first).expect("first key");
            self.emit(b, out);
        }
    }

    fn emit(&mut self, block: DecodedBlock, out: &mut Vec<DecodedBlock>) {
        self.last_emitted = Some(block.start_sample);
        self.history.push_back((block.start_sample, bits_hash(&block.bits)));
        if self.history.len() > self.history_limit() {
            self.history.pop_front();
        }
        self.stats.emitted += 1;
        self.stats.failed_emitted += u64::from(block.failed);
        out.push(block);
    }

    /// Releases all pending blocks in ascending order.
    pub fn flush(&mut self) -> Vec<DecodedBlock> {
        let mut out = Vec::new();
        while let Some((_, b)) = self.pending.pop_first() {
            if !self.is_sequential(b.start_sample) {
                self.stats.gaps += 1;
                self.events.push(CombinerEvent::Gap {
                    after: self.last_emitted,
                    start: b.start_sample,
                });
            }
            self.emit(b, &mut out);
        }
        out
    }
}

/// Wire form: start sample (u64 LE), bit count (u32 LE), flags, packed bits MSB first.
pub fn write_block<W: Write>(w: &mut W, block: &DecodedBlock) -> io::Result<()> {
    w.write_all(&block.start_sample.to_le_bytes())?;
    w.write_all(&(block.bits.len() as u32).to_le_bytes())?;
    w.write_all(&[u8::from(block.failed)])?;
    w.write_all(&pack_bits(&block.bits))
}

/// `Ok(None)` on clean end of stream.
pub fn read_block<R: Read>(r: &mut R) -> io::Result<Option<DecodedBlock>> {
    let mut head = [0u8; 13];
    let mut got = 0;
    while got < head.len() {
        let n = r.read(&mut head[got..])?;
        if n == 0 {
            if got == 0 {
                return Ok(None);
            }
            return Err(io::Error::new(io::ErrorKind::UnexpectedEof, "truncated block header"));
        }
        got += n;
    }
    let start_sample = u64::from_le_bytes(head[..8].try_into().expect("8 bytes"));
    let nbits = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes")) as usize;
    let failed = head[12] & 1 == 1;
    let mut payload = vec![0u8; nbits.div_ceil(8)];
    r.read_exact(&mut payload)?;
    Ok(Some(DecodedBlock {
        start_sample,
        bits: unpack_bits(&payload, nbits),
        failed,
        origin: BlockOrigin::default(),
    }))
}

pub fn pack_bits(bits: &[u8]) -> Vec<u8> {
    bits.chunks(8)
        .map(|c| c.iter().enumerate().fold(0u8, |acc, (i, &b)| acc | ((b & 1) << (7 - i))))
        .collect()
}

pub fn unpack_bits(bytes: &[u8], nbits: usize) -> Vec<u8> {
    (0..nbits).map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1).collect()
}
