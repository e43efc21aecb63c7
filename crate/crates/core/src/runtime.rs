//! Worker pool: chunks from a shared queue, one worker per chunk, decoded
//! blocks to a single combiner thread.

use std::sync::Arc;
use std::time::Instant;

use crossbeam_channel::{bounded, Receiver};
use serde::Serialize;
use thiserror::Error;

use crate::combiner::{BlockOrigin, DecodedBlock, ReorderBuffer, ReorderConfig};
use crate::demod::{DemodPipeline, StageTimes};
use crate::distributor::ChunkRecord;
use crate::fec::batch::BatchStats;
use crate::fec::{codec_from_spec, BatchDecoder, Codec, FecError};
use crate::monitor::{MonitorHub, StageTaps};
use crate::profile::Profile;
use crate::Plan;

#[derive(Debug, Error)]
pub enum RuntimeError {
    #[error("at least one worker is required")]
    NoWorkers,
    #[error(transparent)]
    Fec(#[from] FecError),
    #[error("invalid plan: {0}")]
    Plan(#[from] crate::PlanError),
}

#[derive(Debug, Clone)]
pub struct RuntimeConfig {
    pub workers: usize,
    pub queue_depth: usize,
    pub combiner: ReorderConfig,
    /// When false, blocks are returned in arrival order without combining.
    pub combine: bool,
}

impl RuntimeConfig {
    /// Frame-level combining: blocks closer than two frames are sequential,
    /// blocks within 16 samples of each other are duplicates, and the pending
    /// set can hold two chunks' worth of frames per worker.
    pub fn for_plan(plan: &Plan, workers: usize) -> Self {
        let f = plan.frame_samples;
        let capacity = (2 * workers * plan.chunk.frames_per_chunk).max(crate::combiner::DEFAULT_CAPACITY);
        Self {
            workers,
            queue_depth: 2 * workers.max(1),
            combiner: ReorderConfig::new(f)
                .with_span(2 * f)
                .with_dup_tolerance(16)
                .with_capacity(capacity),
            combine: true,
        }
    }
}

/// Worker count leaving two cores for input and output.
pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get().saturating_sub(2))
        .unwrap_or(1)
        .max(1)
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RunStats {
    pub chunks: u64,
    pub chunk_failures: u64,
    pub frames: u64,
    /// Frames beyond the guaranteed k - 1 per chunk.
    pub extra_frames: u64,
    pub blocks_out: u64,
    pub fec_failures: u64,
    pub duplicates: u64,
    pub conflicts: u64,
    pub gaps: u64,
    pub stale: u64,
    pub skips: u64,
    pub repeats: u64,
    pub input_samples: u64,
    pub elapsed: f64,
    pub stage_times: StageTimes,
    /// Wall time per chunk on its worker, in seconds.
    pub chunk_times: Vec<f64>,
    pub fec: BatchStats,
}

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub blocks: Vec<DecodedBlock>,
    pub stats: RunStats,
}

struct WorkerReport {
    blocks: Vec<DecodedBlock>,
    frames: usize,
    failed: bool,
    skips: u64,
    repeats: u64,
    samples: u64,
    times: StageTimes,
    chunk_time: f64,
    fec: BatchStats,
}

fn process_chunk<T: StageTaps>(
    pipeline: &DemodPipeline,
    decoder: &BatchDecoder,
    chunk: &ChunkRecord,
    worker: u32,
    taps: &T,
) -> WorkerReport {
    let t0 = Instant::now();
    let origin = BlockOrigin {
        server: chunk.server as u32,
        worker,
        chunk: chunk.cycle,
    };
    let mut r = WorkerReport {
        blocks: Vec::new(),
        frames: 0,
        failed: false,
        skips: 0,
        repeats: 0,
        samples: chunk.iq.len() as u64,
        times: StageTimes::default(),
        chunk_time: 0.0,
        fec: BatchStats::default(),
    };
    match pipeline.process_tapped(&chunk.iq, taps) {
        Ok(res) => {
            r.frames = res.frames.len();
            r.skips = res.stats.skips;
            r.repeats = res.stats.repeats;
            r.times = res.stats.times;
            let t = Instant::now();
            match decoder.decode_all(&res.frames, origin) {
                Ok((blocks, st)) => {
                    r.blocks = blocks;
                    r.fec = st;
                }
                Err(_) => r.failed = true,
            }
            r.times.decode = t.elapsed().as_secs_f64();
        }
        Err(_) => r.failed = true,
    }
    r.chunk_time = t0.elapsed().as_secs_f64();
    r
}

fn worker_loop<T: StageTaps>(
    pipeline: &DemodPipeline,
    decoder: &BatchDecoder,
    rx: Receiver<ChunkRecord>,
    out: crossbeam_channel::Sender<WorkerReport>,
    worker: u32,
    taps: T,
) {
    for chunk in rx {
        let r = process_chunk(pipeline, decoder, &chunk, worker, &taps);
        if out.send(r).is_err() {
            break;
        }
    }
}

/// Runs every chunk of `source` through the receiver and combines the
/// results. With a hub, each worker registers its stage taps there.
pub fn run_pipeline<I>(
    source: I,
    profile: &Profile,
    cfg: &RuntimeConfig,
    hub: Option<&Arc<MonitorHub>>,
) -> Result<RunOutput, RuntimeError>
where
    I: IntoIterator<Item = ChunkRecord>,
    I::IntoIter: Send,
{
    if cfg.workers == 0 {
        return Err(RuntimeError::NoWorkers);
    }
    let plan = profile.plan(1)?;
    let codec: Arc<dyn Codec> = codec_from_spec(&profile.codec, profile.waveform.payload_bits())?;
    let pipeline = DemodPipeline::new(profile);
    let decoder = BatchDecoder::new(codec);
    let guaranteed = plan.chunk.guaranteed_frames as u64;
    let (chunk_tx, chunk_rx) = bounded::<ChunkRecord>(cfg.queue_depth.max(1));
    let (rep_tx, rep_rx) = bounded::<WorkerReport>(cfg.workers * 2);
    let start = Instant::now();
    let source = source.into_iter();

    let output = std::thread::scope(|s| {
        s.spawn(move || {
            for c in source {
                if chunk_tx.send(c).is_err() {
                    break;
                }
            }
        });
        for w in 0..cfg.workers {
            let rx = chunk_rx.clone();
            let tx = rep_tx.clone();
            let (pipeline, decoder) = (&pipeline, &decoder);
            match hub {
                Some(h) => {
                    let taps = h.register_worker(w as u32);
                    s.spawn(move || worker_loop(pipeline, decoder, rx, tx, w as u32, taps));
                }
                None => {
                    s.spawn(move || worker_loop(pipeline, decoder, rx, tx, w as u32, crate::monitor::NoTaps));
                }
            }
        }
        drop(chunk_rx);
        drop(rep_tx);

        let mut reorder = ReorderBuffer::new(cfg.combiner);
        let mut out = RunOutput::default();
        let st = &mut out.stats;
        for r in rep_rx {
            st.chunks += 1;
            st.chunk_failures += u64::from(r.failed);
            st.frames += r.frames as u64;
            st.extra_frames += (r.frames as u64).saturating_sub(guaranteed);
            st.skips += r.skips;
            st.repeats += r.repeats;
            st.input_samples += r.samples;
            st.stage_times.add(&r.times);
            st.chunk_times.push(r.chunk_time);
            st.fec.merge(&r.fec);
            if cfg.combine {
                for b in r.blocks {
                    out.blocks.extend(reorder.submit(b));
                }
            } else {
                out.blocks.extend(r.blocks);
            }
        }
        out.blocks.extend(reorder.flush());
        let cs = reorder.stats();
        st.duplicates = cs.duplicates;
        st.conflicts = cs.conflicts;
        st.gaps = cs.gaps;
        st.stale = cs.stale;
        st.blocks_out = out.blocks.len() as u64;
        st.fec_failures = out.blocks.iter().filter(|b| b.failed).count() as u64;
        out
    });
    let mut output = output;
    output.stats.elapsed = start.elapsed().as_secs_f64();
    Ok(output)
}

/// Digest of a combined bitstream.
pub fn stream_digest(blocks: &[DecodedBlock]) -> u64 {
    use std::hash::{Hash, Hasher};
    let mut h = std::collections::hash_map::DefaultHasher::new();
    for b in blocks {
        b.bits.hash(&mut h);
        b.failed.hash(&mut h);
    }
    h.finish()
}
