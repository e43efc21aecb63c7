use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::{SocketAddr, UdpSocket};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use chunkrx::bench::{run_bench, BenchConfig};
use chunkrx::channel::{self, ChannelConfig};
use chunkrx::combiner::{read_block, write_block, DecodedBlock, ReorderBuffer};
use chunkrx::distributor::distribute;
use chunkrx::fec::{codec_from_spec, ldpc::construct_ira};
use chunkrx::iq::{read_iq_file, write_iq_file, IqFormat};
use chunkrx::modem::{Preamble, Transmitter};
use chunkrx::monitor::{self, MonitorHub, MonitorServer};
use chunkrx::runtime::{default_workers, run_pipeline, RuntimeConfig};
use chunkrx::scenario::{self, run_e2e, E2eConfig, DEFAULT_GAIN};
use chunkrx::Profile;

#[derive(Parser, Debug)]
#[command(name = "chunkrx", version, about = "Chunk-parallel 8PSK receiver tools")]
struct Cli {
    /// Print results as JSON.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a framed, pulse-shaped 8PSK recording.
    Txgen {
        #[arg(long, default_value = "desk")]
        profile: String,
        #[arg(long, default_value_t = 64)]
        frames: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
        /// Transmitted info bits, one block per frame.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Apply clock offset, carrier offset, gain and noise to a recording.
    Channel {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value = "desk")]
        profile: String,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        ppm: f64,
        /// Carrier offset, cycles per sample.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        freq: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        phase: f64,
        #[arg(long, allow_negative_numbers = true)]
        esn0: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_GAIN)]
        gain: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Packetize a recording and report the chunks each server assembles.
    Distribute {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, default_value = "desk")]
        profile: String,
        #[arg(long, default_value_t = 1)]
        servers: usize,
        #[arg(long, default_value_t = 0.0)]
        loss_rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write each chunk as `s<server>_c<cycle>_<first sample>.sc8`.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Demodulate and decode a recording into a block file (arrival order).
    Demod {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value = "desk")]
        profile: String,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 1)]
        servers: usize,
    },
    /// Combine block files into one ordered stream and optionally score it.
    Stitch {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long, default_value = "desk")]
        profile: String,
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Clock offset used to map blocks onto truth frames.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        ppm: f64,
    },
    /// Transmitter to combiner in one process, scored against the sent bits.
    E2e {
        #[arg(long, default_value = "desk")]
        profile: String,
        #[arg(long, default_value_t = 64)]
        frames: usize,
        #[arg(long, allow_negative_numbers = true)]
        esn0: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        ppm: f64,
        /// Carrier offset, cycles per symbol.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        freq: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        phase: f64,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 1)]
        servers: usize,
        #[arg(long, default_value_t = 0.0)]
        loss_rate: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Serve monitor captures on this address.
        #[arg(long)]
        monitor: Option<SocketAddr>,
        /// Send monitor adverts to this UDP address.
        #[arg(long, requires = "monitor")]
        advertise: Option<SocketAddr>,
        /// Repeat the run, e.g. to leave time for captures.
        #[arg(long, default_value_t = 1)]
        loops: usize,
        /// Write the combined blocks here.
        #[arg(long)]
        blocks: Option<PathBuf>,
    },
    /// Throughput sweep over worker counts.
    Bench {
        #[arg(long, default_value = "desk")]
        profile: String,
        #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
        workers: Vec<usize>,
        #[arg(long, default_value_t = 2.0)]
        seconds: f64,
        #[arg(long, default_value_t = 128)]
        frames: usize,
        #[arg(long, default_value_t = 12.0, allow_negative_numbers = true)]
        esn0: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Digitizer rate for the real-time check, samples/s.
        #[arg(long, default_value_t = 500e6)]
        rate: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Monitor tools.
    Monitor {
        #[command(subcommand)]
        cmd: MonitorCmd,
    },
    /// Generate an IRA LDPC parity-check matrix as an alist file.
    LdpcGen {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum MonitorCmd {
    /// List monitors advertised on a UDP address.
    Ls {
        #[arg(long, default_value = "127.0.0.1:5005")]
        listen: SocketAddr,
        #[arg(long, default_value_t = 2.5)]
        seconds: f64,
    },
    /// Capture samples from a monitor.
    Grab {
        name: String,
        #[arg(long)]
        endpoint: SocketAddr,
        #[arg(short = 'n', long, default_value_t = 4096)]
        count: usize,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        timeout: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn profile(name: &str) -> Result<Profile> {
    Profile::resolve(name).with_context(|| format!("loading profile {name:?}"))
}

fn read_iq(path: &Path) -> Result<Vec<num_complex::Complex32>> {
    read_iq_file(path, IqFormat::from_path(path)).with_context(|| format!("reading {}", path.display()))
}

fn read_blocks(path: &Path) -> Result<Vec<DecodedBlock>> {
    let mut r = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
    let mut out = Vec::new();
    while let Some(b) = read_block(&mut r)? {
        out.push(b);
    }
    Ok(out)
}

fn write_blocks(path: &Path, blocks: &[DecodedBlock]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    for b in blocks {
        write_block(&mut w, b)?;
    }
    w.flush()?;
    Ok(())
}

/// Prints a result line; a closed stdout is not an error.
fn emit(json_out: bool, value: serde_json::Value, text: String) {
    let mut out = std::io::stdout().lock();
    let _ = if json_out {
        writeln!(out, "{value}")
    } else {
        writeln!(out, "{text}")
    };
}

fn run(cli: Cli) -> Result<()> {
    let j = cli.json;
    match cli.cmd {
        Cmd::Txgen {
            profile: p,
            frames,
            seed,
            output,
            truth,
        } => {
            let p = profile(&p)?;
            let codec = codec_from_spec(&p.codec, p.waveform.payload_bits())?;
            let pre = Preamble::new(p.waveform.preamble_symbols, p.preamble_seed);
            let burst = Transmitter::new(&p.waveform, codec, pre, seed).generate(frames)?;
            write_iq_file(&output, &burst.samples, IqFormat::from_path(&output))?;
            if let Some(t) = truth {
                let fs = p.waveform.frame_samples()?;
                let blocks: Vec<DecodedBlock> = burst
                    .frames
                    .iter()
                    .enumerate()
                    .map(|(i, f)| DecodedBlock {
                        start_sample: i as u64 * fs,
                        bits: f.info.clone(),
                        failed: false,
                        origin: Default::default(),
                    })
                    .collect();
                write_blocks(&t, &blocks)?;
            }
            emit(
                j,
                json!({"frames": frames, "samples": burst.samples.len()}),
                format!("frames={frames} samples={}", burst.samples.len()),
            );
        }
        Cmd::Channel {
            input,
            output,
            profile: p,
            ppm,
            freq,
            phase,
            esn0,
            gain,
            seed,
        } => {
            let p = profile(&p)?;
            let cfg = ChannelConfig {
                clock_offset_ppm: ppm,
                carrier_freq: freq,
                initial_phase: phase,
                esn0_db: esn0,
                samples_per_symbol: p.waveform.samples_per_symbol.as_f64(),
                gain,
                seed,
            };
            if let Some(w) = cfg.check_offset(p.waveform.max_clock_offset_ppm) {
                eprintln!("warning: {w}");
            }
            let x = read_iq(&input)?;
            let out = channel::apply(&x, &cfg);
            write_iq_file(&output, &out.samples, IqFormat::from_path(&output))?;
            emit(
                j,
                json!({"samples": out.samples.len(), "noise_variance": out.noise_variance}),
                format!("samples={} noise_variance={:.6}", out.samples.len(), out.noise_variance),
            );
        }
        Cmd::Distribute {
            input,
            profile: p,
            servers,
            loss_rate,
            seed,
            out_dir,
        } => {
            let p = profile(&p)?;
            let plan = p.plan(servers)?;
            let x = read_iq(&input)?;
            let (chunks, stats) = distribute(&x, &plan, loss_rate, seed)?;
            if let Some(dir) = &out_dir {
                std::fs::create_dir_all(dir)?;
                for c in &chunks {
                    let name = format!("s{}_c{:06}_{}.sc8", c.server, c.cycle, c.iq.first_sample);
                    write_iq_file(&dir.join(name), &c.iq.samples, IqFormat::Sc8)?;
                }
            }
            let list: Vec<_> = chunks
                .iter()
                .map(|c| json!({"server": c.server, "cycle": c.cycle, "first_sample": c.iq.first_sample}))
                .collect();
            emit(
                j,
                json!({"stats": stats, "chunks": list}),
                format!(
                    "chunks={} dropped={} truncated={} lost_packets={}",
                    stats.chunks, stats.chunks_dropped, stats.chunks_truncated, stats.lost
                ),
            );
        }
        Cmd::Demod {
            input,
            output,
            profile: p,
            workers,
            servers,
        } => {
            let p = profile(&p)?;
            let plan = p.plan(servers)?;
            let x = read_iq(&input)?;
            let (chunks, _) = distribute(&x, &plan, 0.0, 0)?;
            let mut rcfg = RuntimeConfig::for_plan(&plan, workers.unwrap_or_else(default_workers));
            rcfg.combine = false;
            let out = run_pipeline(chunks, &p, &rcfg, None)?;
            write_blocks(&output, &out.blocks)?;
            let s = &out.stats;
            emit(
                j,
                serde_json::to_value(s)?,
                format!(
                    "chunks={} chunk_failures={} frames={} extra_frames={} fec_failures={}",
                    s.chunks,
                    s.chunk_failures,
                    s.frames,
                    s.extra_frames,
                    out.blocks.iter().filter(|b| b.failed).count()
                ),
            );
        }
        Cmd::Stitch {
            inputs,
            output,
            profile: p,
            truth,
            ppm,
        } => {
            let p = profile(&p)?;
            let plan = p.plan(1)?;
            let rcfg = RuntimeConfig::for_plan(&plan, 1);
            let mut rb = ReorderBuffer::new(rcfg.combiner);
            let mut out = Vec::new();
            for path in &inputs {
                for b in read_blocks(path)? {
                    out.extend(rb.submit(b));
                }
            }
            out.extend(rb.flush());
            if let Some(o) = &output {
                write_blocks(o, &out)?;
            }
            let st = *rb.stats();
            let score = match &truth {
                Some(t) => {
                    let truth = read_blocks(t)?;
                    let sent: Vec<&[u8]> = truth.iter().map(|b| b.bits.as_slice()).collect();
                    Some(scenario::score(&out, &sent, plan.frame_samples, ppm))
                }
                None => None,
            };
            let mut text = format!(
                "blocks={} duplicates={} gaps={} stale={}",
                out.len(),
                st.duplicates,
                st.gaps,
                st.stale
            );
            if let Some(s) = &score {
                text += &format!(" frames={}/{} BER={}", s.frames_recovered, s.frames_sent, s.ber);
            }
            emit(j, json!({"combiner": st, "blocks": out.len(), "score": score}), text);
        }
        Cmd::E2e {
            profile: p,
            frames,
            esn0,
            ppm,
            freq,
            phase,
            workers,
            servers,
            loss_rate,
            seed,
            monitor,
            advertise,
            loops,
            blocks,
        } => {
            let p = profile(&p)?;
            let cfg = E2eConfig {
                frames,
                tail_frames: E2eConfig::default_tail(&p)?,
                esn0_db: esn0,
                clock_offset_ppm: ppm,
                carrier_per_symbol: freq,
                initial_phase: phase,
                workers: workers.unwrap_or_else(default_workers),
                servers,
                loss_rate,
                seed,
                ..Default::default()
            };
            let hub = monitor.map(|_| MonitorHub::new(hostname()));
            let _server = match (monitor, &hub) {
                (Some(addr), Some(h)) => {
                    let mut s = MonitorServer::start(h.clone(), addr)?;
                    eprintln!("monitor endpoint {}", s.addr());
                    if let Some(to) = advertise {
                        s.advertise(h.clone(), to, monitor::DEFAULT_ADVERT_PERIOD)?;
                    }
                    Some(s)
                }
                _ => None,
            };
            let mut report = None;
            for _ in 0..loops.max(1) {
                report = Some(run_e2e(&p, &cfg, hub.as_ref())?);
            }
            let r = report.expect("at least one loop");
            if let Some(b) = &blocks {
                write_blocks(b, &r.blocks)?;
            }
            let s = &r.score;
            emit(
                j,
                serde_json::to_value(&r)?,
                format!(
                    "BER={} frames={}/{} bit_errors={} fec_failures={} duplicates={} gaps={} elapsed={:.2}s",
                    s.ber,
                    s.frames_recovered,
                    s.frames_sent,
                    s.bit_errors,
                    s.failed_blocks,
                    r.run.duplicates,
                    r.run.gaps,
                    r.elapsed
                ),
            );
        }
        Cmd::Bench {
            profile: p,
            workers,
            seconds,
            frames,
            esn0,
            seed,
            rate,
            out,
            csv,
        } => {
            let p = profile(&p)?;
            if workers.contains(&0) {
                bail!("worker counts must be at least 1");
            }
            let cfg = BenchConfig {
                workers,
                seconds,
                signal: E2eConfig {
                    frames,
                    tail_frames: E2eConfig::default_tail(&p)?,
                    esn0_db: Some(esn0),
                    seed,
                    ..Default::default()
                },
                input_rate: rate,
            };
            let report = run_bench(&p, &cfg)?;
            if let Some(o) = &out {
                std::fs::write(o, serde_json::to_string_pretty(&report)?)?;
            }
            if let Some(c) = &csv {
                report.write_csv(File::create(c)?)?;
            }
            let mut text = String::new();
            for pt in &report.points {
                text += &format!(
                    "workers={} samples/s={:.3e} speedup={:.2} tp_max={:.4}s realtime={}\n",
                    pt.workers, pt.samples_per_sec, pt.speedup, pt.chunk_time.max, pt.realtime
                );
            }
            text += &format!("deterministic={}", report.deterministic);
            emit(j, serde_json::to_value(&report)?, text);
        }
        Cmd::Monitor { cmd } => match cmd {
            MonitorCmd::Ls { listen, seconds } => {
                let sock = UdpSocket::bind(listen).with_context(|| format!("binding {listen}"))?;
                let (_, unique) = monitor::collect_adverts(&sock, Duration::from_secs_f64(seconds))?;
                let text = unique
                    .iter()
                    .map(|a| format!("{}\t{}\t{}\tthread {}\t{}", a.host_id, a.name, a.dtype, a.thread_id, a.endpoint))
                    .collect::<Vec<_>>()
                    .join("\n");
                emit(j, serde_json::to_value(&unique)?, text);
            }
            MonitorCmd::Grab {
                name,
                endpoint,
                count,
                output,
                timeout,
            } => {
                let buf = monitor::grab(endpoint, &name, count, Duration::from_secs_f64(timeout))?;
                write_iq_file(&output, &buf, IqFormat::from_path(&output))?;
                emit(
                    j,
                    json!({"name": name, "samples": buf.len()}),
                    format!("{name}: {} samples", buf.len()),
                );
            }
        },
        Cmd::LdpcGen { n, k, seed, output } => {
            let h = construct_ira(n, k, seed)?;
            std::fs::write(&output, h.to_alist())?;
            emit(
                j,
                json!({"n": n, "k": k, "edges": h.edges()}),
                format!("n={n} k={k} edges={}", h.edges()),
            );
        }
    }
    Ok(())
}

fn hostname() -> String {
    std::env::var("HOSTNAME").unwrap_or_else(|_| "localhost".into())
}
