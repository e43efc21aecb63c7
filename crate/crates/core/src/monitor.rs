//! Monitoring taps: periodic UDP adverts and on-demand TCP capture.
//!
//! A tap sits after each pipeline stage. While nobody asks for data its cost
//! is one relaxed atomic load per buffer. A capture request arms the tap; the
//! worker copies the next `count` samples into the request buffer and the
//! reply is sent from the server thread, so the worker never waits on a
//! client.
//!
//! Capture protocol: the client sends `GRAB <name> <count> [timeout_ms]\n`,
//! the server answers with a 16-byte header (`CRXM`, dtype `u32`, count `u64`,
//! little-endian) followed by `count` cf32 samples. Errors use dtype
//! [`DTYPE_ERROR`] with `count` bytes of UTF-8 text.

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, UdpSocket};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{bounded, Receiver, Sender};
use num_complex::{Complex32, Complex64};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"CRXM";
pub const DTYPE_CF32: u32 = 1;
pub const DTYPE_ERROR: u32 = 0xFFFF_FFFF;
pub const DEFAULT_ADVERT_PERIOD: Duration = Duration::from_secs(1);
pub const DEFAULT_CAPTURE_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error)]
pub enum MonitorError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("capture timed out")]
    Timeout,
    #[error("no tap named {0:?}")]
    UnknownTap(String),
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("server error: {0}")]
    Remote(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Resampled,
    Symbols,
    Phase,
    Payload,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Resampled, Stage::Symbols, Stage::Phase, Stage::Payload];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Resampled => "resampled",
            Stage::Symbols => "symbols",
            Stage::Phase => "phase",
            Stage::Payload => "payload",
        }
    }
}

/// Hook called by the pipeline after each stage.
pub trait StageTaps {
    fn tap(&self, stage: Stage, data: &[Complex64]);
}

/// Taps compiled out.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoTaps;

impl StageTaps for NoTaps {
    #[inline(always)]
    fn tap(&self, _stage: Stage, _data: &[Complex64]) {}
}

struct Pending {
    remaining: usize,
    buf: Vec<Complex32>,
    reply: Sender<Vec<Complex32>>,
}

pub struct Tap {
    name: String,
    thread_id: u32,
    armed: AtomicBool,
    pending: Mutex<Option<Pending>>,
    copied: AtomicU64,
}

impl std::fmt::Debug for Tap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tap")
            .field("name", &self.name)
            .field("thread_id", &self.thread_id)
            .field("armed", &self.armed.load(Ordering::Relaxed))
            .finish()
    }
}

impl Tap {
    pub fn new(name: impl Into<String>, thread_id: u32) -> Self {
        Self {
            name: name.into(),
            thread_id,
            armed: AtomicBool::new(false),
            pending: Mutex::new(None),
            copied: AtomicU64::new(0),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn thread_id(&self) -> u32 {
        self.thread_id
    }

    /// Samples copied out of the stream so far.
    pub fn copied(&self) -> u64 {
        self.copied.load(Ordering::Relaxed)
    }

    pub fn is_armed(&self) -> bool {
        self.armed.load(Ordering::Relaxed)
    }

    /// Arms the tap. The receiver yields exactly `count` consecutive samples.
    /// A newer request replaces an unfinished one.
    pub fn request(&self, count: usize) -> Receiver<Vec<Complex32>> {
        let (tx, rx) = bounded(1);
        let mut g = self.pending.lock().expect("tap lock");
        *g = Some(Pending {
            remaining: count,
            buf: Vec::with_capacity(count),
            reply: tx,
        });
        self.armed.store(count > 0, Ordering::Release);
        if count == 0 {
            if let Some(p) = g.take() {
                let _ = p.reply.send(Vec::new());
            }
        }
        rx
    }

    #[inline]
    pub fn feed(&self, data: &[Complex64]) {
        if !self.armed.load(Ordering::Relaxed) {
            return;
        }
        self.feed_slow(data);
    }

    #[cold]
    fn feed_slow(&self, data: &[Complex64]) {
        let mut g = self.pending.lock().expect("tap lock");
        let Some(p) = g.as_mut() else {
            return;
        };
        let take = p.remaining.min(data.len());
        p.buf
            .extend(data[..take].iter().map(|c| Complex32::new(c.re as f32, c.im as f32)));
        p.remaining -= take;
        self.copied.fetch_add(take as u64, Ordering::Relaxed);
        if p.remaining == 0 {
            let done = g.take().expect("pending");
            self.armed.store(false, Ordering::Release);
            let _ = done.reply.send(done.buf);
        }
    }
}

/// One worker's taps, one per stage.
#[derive(Debug, Clone)]
pub struct WorkerTaps {
    taps: Vec<Arc<Tap>>,
}

impl WorkerTaps {
    pub fn get(&self, stage: Stage) -> &Arc<Tap> {
        &self.taps[stage as usize]
    }
}

impl StageTaps for WorkerTaps {
    #[inline]
    fn tap(&self, stage: Stage, data: &[Complex64]) {
        self.taps[stage as usize].feed(data);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Advertisement {
    pub name: String,
    pub dtype: String,
    pub thread_id: u32,
    pub host_id: String,
    pub endpoint: String,
}

/// All taps of one process.
#[derive(Debug)]
pub struct MonitorHub {
    host_id: String,
    taps: Mutex<BTreeMap<String, Arc<Tap>>>,
}

impl MonitorHub {
    pub fn new(host_id: impl Into<String>) -> Arc<Self> {
        Arc::new(Self {
            host_id: host_id.into(),
            taps: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn host_id(&self) -> &str {
        &self.host_id
    }

    /// Creates the taps `w<worker>.<stage>` for one worker.
    pub fn register_worker(&self, worker: u32) -> WorkerTaps {
        let mut map = self.taps.lock().expect("hub lock");
        let taps = Stage::ALL
            .iter()
            .map(|s| {
                let name = format!("w{worker}.{}", s.name());
                map.entry(name.clone())
                    .or_insert_with(|| Arc::new(Tap::new(name, worker)))
                    .clone()
            })
            .collect();
        WorkerTaps { taps }
    }

    pub fn tap(&self, name: &str) -> Option<Arc<Tap>> {
        self.taps.lock().expect("hub lock").get(name).cloned()
    }

    pub fn taps(&self) -> Vec<Arc<Tap>> {
        self.taps.lock().expect("hub lock").values().cloned().collect()
    }

    pub fn adverts(&self, endpoint: &str) -> Vec<Advertisement> {
        self.taps()
            .iter()
            .map(|t| Advertisement {
                name: t.name.clone(),
                dtype: "cf32".into(),
                thread_id: t.thread_id,
                host_id: self.host_id.clone(),
                endpoint: endpoint.to_string(),
            })
            .collect()
    }
}

fn write_header(w: &mut impl Write, dtype: u32, count: u64) -> std::io::Result<()> {
    let mut h = [0u8; 16];
    h[..4].copy_from_slice(&MAGIC);
    h[4..8].copy_from_slice(&dtype.to_le_bytes());
    h[8..].copy_from_slice(&count.to_le_bytes());
    w.write_all(&h)
}

fn write_error(w: &mut impl Write, msg: &str) -> std::io::Result<()> {
    write_header(w, DTYPE_ERROR, msg.len() as u64)?;
    w.write_all(msg.as_bytes())
}

fn handle_client(hub: &MonitorHub, stream: TcpStream) -> std::io::Result<()> {
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut w = stream;
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let parts: Vec<&str> = line.split_whitespace().collect();
    match parts.as_slice() {
        ["GRAB", name, count, rest @ ..] => {
            let Ok(count) = count.parse::<usize>() else {
                return write_error(&mut w, "bad count");
            };
            let timeout = rest
                .first()
                .and_then(|t| t.parse::<u64>().ok())
                .map(Duration::from_millis)
                .unwrap_or(DEFAULT_CAPTURE_TIMEOUT);
            let Some(tap) = hub.tap(name) else {
                return write_error(&mut w, &format!("no tap named {name:?}"));
            };
            match tap.request(count).recv_timeout(timeout) {
                Ok(buf) => {
                    write_header(&mut w, DTYPE_CF32, buf.len() as u64)?;
                    let mut bytes = Vec::with_capacity(buf.len() * 8);
                    for s in &buf {
                        bytes.extend_from_slice(&s.re.to_le_bytes());
                        bytes.extend_from_slice(&s.im.to_le_bytes());
                    }
                    w.write_all(&bytes)
                }
                Err(_) => write_error(&mut w, "timeout"),
            }
        }
        ["LIST"] => {
            let mut out = String::new();
            for a in hub.adverts("") {
                out.push_str(&serde_json::to_string(&a).expect("advert json"));
                out.push('\n');
            }
            w.write_all(out.as_bytes())
        }
        _ => write_error(&mut w, "unknown command"),
    }
}

/// TCP capture endpoint plus the UDP advertiser.
pub struct MonitorServer {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    threads: Vec<JoinHandle<()>>,
}

impl MonitorServer {
    pub fn start(hub: Arc<MonitorHub>, bind: SocketAddr) -> Result<Self, MonitorError> {
        let listener = TcpListener::bind(bind)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let stop = Arc::new(AtomicBool::new(false));
        let s = stop.clone();
        let h = hub.clone();
        let accept = std::thread::Builder::new()
            .name("monitor-accept".into())
            .spawn(move || {
                while !s.load(Ordering::Relaxed) {
                    match listener.accept() {
                        Ok((stream, _)) => {
                            let _ = stream.set_nonblocking(false);
                            let hub = h.clone();
                            std::thread::spawn(move || {
                                let _ = handle_client(&hub, stream);
                            });
                        }
                        Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                            std::thread::sleep(Duration::from_millis(5));
                        }
                        Err(_) => std::thread::sleep(Duration::from_millis(5)),
                    }
                }
            })?;
        Ok(Self {
            addr,
            stop,
            threads: vec![accept],
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Sends every tap's advert to `target` once per `period`.
    pub fn advertise(&mut self, hub: Arc<MonitorHub>, target: SocketAddr, period: Duration) -> Result<(), MonitorError> {
        let sock = UdpSocket::bind(("0.0.0.0", 0))?;
        let stop = self.stop.clone();
        let endpoint = self.addr.to_string();
        let t = std::thread::Builder::new()
            .name("monitor-advert".into())
            .spawn(move || {
                let mut next = Instant::now();
                while !stop.load(Ordering::Relaxed) {
                    if Instant::now() >= next {
                        for a in hub.adverts(&endpoint) {
                            let msg = serde_json::to_vec(&a).expect("advert json");
                            let _ = sock.send_to(&msg, target);
                        }
                        next += period;
                    }
                    std::thread::sleep(Duration::from_millis(5).min(period));
                }
            })?;
        self.threads.push(t);
        Ok(())
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for MonitorServer {
    fn drop(&mut self) {
        self.shutdown();
    }
}

/// Collects adverts arriving on `sock` for `duration`; returns every datagram
/// received and the unique set keyed by (host, thread, name).
pub fn collect_adverts(sock: &UdpSocket, duration: Duration) -> Result<(Vec<Advertisement>, Vec<Advertisement>), MonitorError> {
    let deadline = Instant::now() + duration;
    let mut all = Vec::new();
    let mut buf = vec![0u8; 64 * 1024];
    loop {
        let now = Instant::now();
        if now >= deadline {
            break;
        }
        sock.set_read_timeout(Some(deadline - now))?;
        match sock.recv_from(&mut buf) {
            Ok((n, _)) => {
                if let Ok(a) = serde_json::from_slice::<Advertisement>(&buf[..n]) {
                    all.push(a);
                }
            }
            Err(e) if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => break,
            Err(e) => return Err(e.into()),
        }
    }
    let mut unique: BTreeMap<(String, u32, String), Advertisement> = BTreeMap::new();
    for a in &all {
        unique
            .entry((a.host_id.clone(), a.thread_id, a.name.clone()))
            .or_insert_with(|| a.clone());
    }
    Ok((all, unique.into_values().collect()))
}

/// Requests `count` samples from tap `name` at `endpoint`.
pub fn grab(endpoint: SocketAddr, name: &str, count: usize, timeout: Duration) -> Result<Vec<Complex32>, MonitorError> {
    let mut s = TcpStream::connect(endpoint)?;
    s.set_read_timeout(Some(timeout + Duration::from_secs(5)))?;
    writeln!(s, "GRAB {name} {count} {}", timeout.as_millis())?;
    let mut h = [0u8; 16];
    s.read_exact(&mut h)?;
    if h[..4] != MAGIC {
        return Err(MonitorError::Protocol("bad magic".into()));
    }
    let dtype = u32::from_le_bytes(h[4..8].try_into().expect("4 bytes"));
    let n = u64::from_le_bytes(h[8..16].try_into().expect("8 bytes")) as usize;
    match dtype {
        DTYPE_CF32 => {
            let mut raw = vec![0u8; n * 8];
            s.read_exact(&mut raw)?;
            Ok(raw
                .chunks_exact(8)
                .map(|c| {
                    Complex32::new(
                        f32::from_le_bytes(c[..4].try_into().expect("4 bytes")),
                        f32::from_le_bytes(c[4..].try_into().expect("4 bytes")),
                    )
                })
                .collect())
        }
        DTYPE_ERROR => {
            let mut msg = vec![0u8; n];
            s.read_exact(&mut msg)?;
            let msg = String::from_utf8_lossy(&msg).into_owned();
            if msg == "timeout" {
                Err(MonitorError::Timeout)
            } else if msg.starts_with("no tap") {
                Err(MonitorError::UnknownTap(name.to_string()))
            } else {
                Err(MonitorError::Remote(msg))
            }
        }
        other => Err(MonitorError::Protocol(format!("unknown dtype {other}"))),
    }
}
