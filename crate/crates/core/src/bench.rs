//! Throughput harness over a precomputed in-memory corpus of chunks.

use std::io::Write;
use std::time::Instant;

use serde::Serialize;

use crate::distributor::{distribute, ChunkRecord};
use crate::profile::Profile;
use crate::runtime::{run_pipeline, stream_digest, RuntimeConfig};
use crate::scenario::{synthesize, E2eConfig, ScenarioError};

#[derive(Debug, Clone, Serialize)]
pub struct BenchConfig {
    pub workers: Vec<usize>,
    /// Minimum measuring time per worker count; the corpus is replayed until
    /// it is reached.
    pub seconds: f64,
    /// Corpus signal.
    pub signal: E2eConfig,
    /// Digitizer rate the real-time check is made against, samples/s.
    pub input_rate: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Percentiles {
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub max: f64,
}

impl Percentiles {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self::default();
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let at = |q: f64| v[((v.len() - 1) as f64 * q).round() as usize];
        Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            p50: at(0.5),
            p95: at(0.95),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StageShare {
    pub stage: String,
    pub share: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchPoint {
    pub workers: usize,
    pub passes: usize,
    pub chunks: u64,
    pub elapsed: f64,
    /// New stream samples consumed per second (chunk overlap not counted).
    pub samples_per_sec: f64,
    pub speedup: f64,
    /// Per-chunk processing time, seconds.
    pub chunk_time: Percentiles,
    /// `workers * chunk_period >= max chunk time` at `input_rate`.
    pub realtime: bool,
    pub stages: Vec<StageShare>,
    pub blocks_out: u64,
    pub digest: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub profile: String,
    pub available_cores: usize,
    pub corpus_chunks: usize,
    pub input_rate: f64,
    pub points: Vec<BenchPoint>,
    /// Every worker count produced the same combined bitstream.
    pub deterministic: bool,
}

#[derive(Debug, Clone, Serialize)]
struct CsvRow<'a> {
    workers: usize,
    samples_per_sec: f64,
    speedup: f64,
    tp_mean: f64,
    tp_p95: f64,
    tp_max: f64,
    realtime: bool,
    resample: f64,
    timing: f64,
    phase: f64,
    sync: f64,
    llr: f64,
    decode: f64,
    digest: &'a str,
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, w: W) -> csv::Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        for p in &self.points {
            let share = |name: &str| p.stages.iter().find(|s| s.stage == name).map_or(0.0, |s| s.share);
            let digest = format!("{:016x}", p.digest);
            wr.serialize(CsvRow {
                workers: p.workers,
                samples_per_sec: p.samples_per_sec,
                speedup: p.speedup,
                tp_mean: p.chunk_time.mean,
                tp_p95: p.chunk_time.p95,
                tp_max: p.chunk_time.max,
                realtime: p.realtime,
                resample: share("resample"),
                timing: share("timing"),
                phase: share("phase"),
                sync: share("sync"),
                llr: share("llr"),
                decode: share("decode"),
                digest: &digest,
            })?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Builds the chunk corpus for `signal` on a single server.
pub fn corpus(profile: &Profile, signal: &E2eConfig) -> Result<Vec<ChunkRecord>, ScenarioError> {
    let syn = synthesize(profile, signal)?;
    let plan = profile.plan(1)?;
    Ok(distribute(&syn.received, &plan, 0.0, signal.seed)?.0)
}

pub fn run_bench(profile: &Profile, cfg: &BenchConfig) -> Result<BenchReport, ScenarioError> {
    let chunks = corpus(profile, &cfg.signal)?;
    let plan = profile.plan(1)?;
    let chunk_period = plan.chunk.advance_samples as f64 / cfg.input_rate;
    let mut points: Vec<BenchPoint> = Vec::new();
    for &workers in &cfg.workers {
        let rcfg = RuntimeConfig::for_plan(&plan, workers.max(1));
        let mut passes = 0;
        let mut chunk_count = 0u64;
        let mut times = Vec::new();
        let mut stage = crate::demod::StageTimes::default();
        let mut digest = 0;
        let mut blocks_out = 0;
        let t0 = Instant::now();
        loop {
            let out = run_pipeline(chunks.iter().cloned(), profile, &rcfg, None)?;
            if passes == 0 {
                digest = stream_digest(&out.blocks);
                blocks_out = out.stats.blocks_out;
            }
            passes += 1;
            chunk_count += out.stats.chunks;
            times.extend_from_slice(&out.stats.chunk_times);
            stage.add(&out.stats.stage_times);
            if t0.elapsed().as_secs_f64() >= cfg.seconds {
                break;
            }
        }
        let elapsed = t0.elapsed().as_secs_f64();
        let samples_per_sec = chunk_count as f64 * plan.chunk.advance_samples as f64 / elapsed;
        let chunk_time = Percentiles::of(&times);
        let base = points.first().map_or(samples_per_sec, |p| p.samples_per_sec);
        points.push(BenchPoint {
            workers,
            passes,
            chunks: chunk_count,
            elapsed,
            samples_per_sec,
            speedup: samples_per_sec / base,
            chunk_time,
            realtime: workers as f64 * chunk_period >= chunk_time.max,
            stages: stage
                .shares()
                .into_iter()
                .map(|(s, f)| StageShare {
                    stage: s.to_string(),
                    share: f,
                })
                .collect(),
            blocks_out,
            digest,
        });
    }
    let deterministic = points.windows(2).all(|w| w[0].digest == w[1].digest);
    Ok(BenchReport {
        profile: profile.waveform.name.clone(),
        available_cores: std::thread::available_parallelism().map_or(1, |n| n.get()),
        corpus_chunks: chunks.len(),
        input_rate: cfg.input_rate,
        points,
        deterministic,
    })
}
