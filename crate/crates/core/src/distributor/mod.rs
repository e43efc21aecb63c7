//! Packetization, multicast-group delivery and chunk assembly.
//!
//! The sample stream is quantized to 8-bit I/Q and cut into numbered packets.
//! Packets belong to multicast groups of `packets_per_group` consecutive
//! packets; each server subscribes to the groups of its chunks and rebuilds a
//! chunk from `packets_per_chunk` consecutive packets.

pub mod udp;

use std::collections::BTreeMap;

use crossbeam_channel::{Receiver, Sender, TrySendError};
use num_complex::Complex32;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::iq::{dequantize_into, quantize_into, IqBuffer};
use crate::numerology::Plan;

pub const PACKET_HEADER_BYTES: usize = 8;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DistributorError {
    #[error("packet of {got} bytes, expected {expected}")]
    BadPacketLength { got: usize, expected: usize },
    #[error("server {server} out of range ({servers} servers)")]
    NoSuchServer { server: usize, servers: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub number: u64,
    /// Interleaved I/Q.
    pub payload: Vec<i8>,
}

impl Packet {
    /// 8-byte little-endian packet number followed by the payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::with_capacity(PACKET_HEADER_BYTES + self.payload.len());
        b.extend_from_slice(&self.number.to_le_bytes());
        b.extend(self.payload.iter().map(|&x| x as u8));
        b
    }

    pub fn from_bytes(bytes: &[u8], payload_bytes: usize) -> Result<Self, DistributorError> {
        if bytes.len() != PACKET_HEADER_BYTES + payload_bytes {
            return Err(DistributorError::BadPacketLength {
                got: bytes.len(),
                expected: PACKET_HEADER_BYTES + payload_bytes,
            });
        }
        Ok(Self {
            number: u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes")),
            payload: bytes[8..].iter().map(|&x| x as i8).collect(),
        })
    }

    pub fn samples(&self) -> Vec<Complex32> {
        let mut out = Vec::with_capacity(self.payload.len() / 2);
        dequantize_into(&self.payload, &mut out);
        out
    }
}

/// Streaming packetizer; partial packets wait for more samples.
#[derive(Debug, Clone)]
pub struct Packetizer {
    samples_per_packet: usize,
    next_number: u64,
    pending: Vec<Complex32>,
}

impl Packetizer {
    pub fn new(plan: &Plan, origin_packet: u64) -> Self {
        Self {
            samples_per_packet: plan.packet.samples_per_packet,
            next_number: origin_packet,
            pending: Vec::new(),
        }
    }

    pub fn next_number(&self) -> u64 {
        self.next_number
    }

    pub fn push(&mut self, samples: &[Complex32], out: &mut Vec<Packet>) {
        let p = self.samples_per_packet;
        let mut rest = samples;
        if !self.pending.is_empty() {
            let need = (p - self.pending.len()).min(rest.len());
            self.pending.extend_from_slice(&rest[..need]);
            rest = &rest[need..];
            if self.pending.len() == p {
                let full = std::mem::take(&mut self.pending);
                out.push(self.make(&full));
            }
        }
        let mut it = rest.chunks_exact(p);
        for c in &mut it {
            out.push(self.make(c));
        }
        self.pending.extend_from_slice(it.remainder());
    }

    /// Samples held back because they do not fill a packet.
    pub fn residual(&self) -> usize {
        self.pending.len()
    }

    fn make(&mut self, samples: &[Complex32]) -> Packet {
        let mut payload = Vec::with_capacity(samples.len() * 2);
        quantize_into(samples, &mut payload);
        let pkt = Packet {
            number: self.next_number,
            payload,
        };
        self.next_number += 1;
        pkt
    }
}

/// Packets for `samples`, numbered from `origin_packet`, and the count of
/// trailing samples that did not fill a packet.
pub fn packetize(samples: &[Complex32], plan: &Plan, origin_packet: u64) -> (Vec<Packet>, usize) {
    let mut p = Packetizer::new(plan, origin_packet);
    let mut out = Vec::with_capacity(samples.len() / plan.packet.samples_per_packet);
    p.push(samples, &mut out);
    (out, p.residual())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChunkRecord {
    pub server: usize,
    pub cycle: u64,
    pub iq: IqBuffer,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ChunkEvent {
    Chunk(ChunkRecord),
    Dropped { server: usize, first_sample: u64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AssemblerStats {
    pub packets_accepted: u64,
    pub packets_ignored: u64,
    pub chunks: u64,
    pub dropped: u64,
    /// Chunks still open when the stream ended.
    pub truncated: u64,
}

#[derive(Debug)]
struct OpenChunk {
    first_packet: u64,
    received: Vec<bool>,
    count: usize,
    bytes: Vec<i8>,
}

/// One server's view: collects its subscribed packets into chunks.
#[derive(Debug)]
pub struct ChunkAssembler {
    server: usize,
    packets_per_chunk: u64,
    packets_per_group: u64,
    period_packets: u64,
    lead_packet: u64,
    payload_bytes: usize,
    samples_per_packet: u64,
    groups: Vec<u64>,
    total_groups: u64,
    open: BTreeMap<u64, OpenChunk>,
    stats: AssemblerStats,
}

impl ChunkAssembler {
    pub fn new(plan: &Plan, server: usize) -> Result<Self, DistributorError> {
        let servers = plan.distribution.num_servers;
        if server >= servers {
            return Err(DistributorError::NoSuchServer { server, servers });
        }
        let ppg = plan.packet.packets_per_group as u64;
        Ok(Self {
            server,
            packets_per_chunk: plan.chunk.packets_per_chunk as u64,
            packets_per_group: ppg,
            period_packets: plan.chunk.advance_groups as u64 * servers as u64 * ppg,
            lead_packet: plan.chunk_start_packet(server, 0),
            payload_bytes: plan.packet.packet_payload_bytes,
            samples_per_packet: plan.packet.samples_per_packet as u64,
            groups: plan.distribution.subscriptions[server].clone(),
            total_groups: plan.distribution.total_groups,
            open: BTreeMap::new(),
            stats: AssemblerStats::default(),
        })
    }

    pub fn server(&self) -> usize {
        self.server
    }

    pub fn stats(&self) -> AssemblerStats {
        self.stats
    }

    pub fn is_subscribed(&self, packet_number: u64) -> bool {
        let g = (packet_number / self.packets_per_group) % self.total_groups;
        self.groups.contains(&g)
    }

    fn chunk_start(&self, cycle: u64) -> u64 {
        self.lead_packet + cycle * self.period_packets
    }

    /// Cycles whose chunk contains `packet`.
    fn cycles_of(&self, packet: u64) -> impl Iterator<Item = u64> + '_ {
        let hi = if packet >= self.lead_packet {
            Some((packet - self.lead_packet) / self.period_packets)
        } else {
            None
        };
        hi.into_iter().flat_map(move |hi| {
            (hi.saturating_sub(1)..=hi).filter(move |&c| {
                let s = self.chunk_start(c);
                packet >= s && packet < s + self.packets_per_chunk
            })
        })
    }

    pub fn push(&mut self, packet: &Packet, out: &mut Vec<ChunkEvent>) -> Result<(), DistributorError> {
        if packet.payload.len() != self.payload_bytes {
            return Err(DistributorError::BadPacketLength {
                got: packet.payload.len(),
                expected: self.payload_bytes,
            });
        }
        if !self.is_subscribed(packet.number) {
            self.stats.packets_ignored += 1;
            return Ok(());
        }
        self.stats.packets_accepted += 1;
        // Chunks a full group behind this packet can no longer complete.
        let horizon = packet.number.saturating_sub(self.packets_per_group);
        let stale: Vec<u64> = self
            .open
            .iter()
            .filter(|(_, c)| c.first_packet + self.packets_per_chunk <= horizon)
            .map(|(&k, _)| k)
            .collect();
        for k in stale {
            let c = self.open.remove(&k).expect("open chunk");
            self.stats.dropped += 1;
            out.push(ChunkEvent::Dropped {
                server: self.server,
                first_sample: c.first_packet * self.samples_per_packet,
            });
        }
        let cycles: Vec<u64> = self.cycles_of(packet.number).collect();
        for cycle in cycles {
            let first_packet = self.chunk_start(cycle);
            let ppc = self.packets_per_chunk as usize;
            let pb = self.payload_bytes;
            let c = self.open.entry(cycle).or_insert_with(|| OpenChunk {
                first_packet,
                received: vec![false; ppc],
                count: 0,
                bytes: vec![0; ppc * pb],
            });
            let slot = (packet.number - first_packet) as usize;
            if !c.received[slot] {
                c.received[slot] = true;
                c.count += 1;
                c.bytes[slot * pb..(slot + 1) * pb].copy_from_slice(&packet.payload);
            }
            if c.count == ppc {
                let c = self.open.remove(&cycle).expect("open chunk");
                let mut samples = Vec::with_capacity(c.bytes.len() / 2);
                dequantize_into(&c.bytes, &mut samples);
                self.stats.chunks += 1;
                out.push(ChunkEvent::Chunk(ChunkRecord {
                    server: self.server,
                    cycle,
                    iq: IqBuffer::new(first_packet * self.samples_per_packet, samples),
                }));
            }
        }
        Ok(())
    }

    /// Ends the stream; incomplete chunks are discarded.
    pub fn finish(&mut self) -> u64 {
        let n = self.open.len() as u64;
        self.stats.truncated += n;
        self.open.clear();
        n
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct NetworkStats {
    pub packets_sent: u64,
    pub deliveries: u64,
    pub lost: u64,
    pub chunks: u64,
    pub chunks_dropped: u64,
    pub chunks_truncated: u64,
    /// Chunks evicted from a full subscriber queue.
    pub chunks_evicted: u64,
}

/// Simulated multicast fabric: every packet is offered to each subscribed
/// server, with optional independent random loss per delivery.
#[derive(Debug)]
pub struct InProcessNetwork {
    servers: Vec<ChunkAssembler>,
    loss_rate: f64,
    rng: ChaCha8Rng,
    stats: NetworkStats,
}

impl InProcessNetwork {
    pub fn new(plan: &Plan, loss_rate: f64, seed: u64) -> Self {
        let servers = (0..plan.distribution.num_servers)
            .map(|s| ChunkAssembler::new(plan, s).expect("server in range"))
            .collect();
        Self {
            servers,
            loss_rate: loss_rate.clamp(0.0, 1.0),
            rng: ChaCha8Rng::seed_from_u64(seed),
            stats: NetworkStats::default(),
        }
    }

    pub fn stats(&self) -> NetworkStats {
        self.stats
    }

    pub fn assembler(&self, server: usize) -> &ChunkAssembler {
        &self.servers[server]
    }

    /// Delivers one packet; completed chunks and drops are appended to `out`.
    pub fn send(&mut self, packet: &Packet, out: &mut Vec<ChunkEvent>) -> Result<(), DistributorError> {
        self.stats.packets_sent += 1;
        for a in &mut self.servers {
            if !a.is_subscribed(packet.number) {
                continue;
            }
            if self.loss_rate > 0.0 && self.rng.random::<f64>() < self.loss_rate {
                self.stats.lost += 1;
                continue;
            }
            self.stats.deliveries += 1;
            let before = out.len();
            a.push(packet, out)?;
            for e in &out[before..] {
                match e {
                    ChunkEvent::Chunk(_) => self.stats.chunks += 1,
                    ChunkEvent::Dropped { .. } => self.stats.chunks_dropped += 1,
                }
            }
        }
        Ok(())
    }

    pub fn finish(&mut self) {
        for a in &mut self.servers {
            self.stats.chunks_truncated += a.finish();
        }
    }
}

/// Distributes a whole recording and returns every assembled chunk, in
/// completion order.
pub fn distribute(
    samples: &[Complex32],
    plan: &Plan,
    loss_rate: f64,
    seed: u64,
) -> Result<(Vec<ChunkRecord>, NetworkStats), DistributorError> {
    let (packets, _) = packetize(samples, plan, 0);
    let mut net = InProcessNetwork::new(plan, loss_rate, seed);
    let mut events = Vec::new();
    for p in &packets {
        net.send(p, &mut events)?;
    }
    net.finish();
    let chunks = events
        .into_iter()
        .filter_map(|e| match e {
            ChunkEvent::Chunk(c) => Some(c),
            ChunkEvent::Dropped { .. } => None,
        })
        .collect();
    Ok((chunks, net.stats()))
}

/// Bounded chunk queue. When `drop_oldest` is set a full queue evicts its
/// oldest chunk instead of blocking the producer.
#[derive(Debug, Clone)]
pub struct ChunkQueue {
    tx: Sender<ChunkRecord>,
    rx: Receiver<ChunkRecord>,
    drop_oldest: bool,
}

impl ChunkQueue {
    pub fn new(depth: usize, drop_oldest: bool) -> Self {
        let (tx, rx) = crossbeam_channel::bounded(depth.max(1));
        Self { tx, rx, drop_oldest }
    }

    pub fn receiver(&self) -> Receiver<ChunkRecord> {
        self.rx.clone()
    }

    /// Returns the number of evicted chunks (0 or 1); false from the second
    /// field means all receivers are gone.
    pub fn push(&self, chunk: ChunkRecord) -> (u64, bool) {
        if !self.drop_oldest {
            return (0, self.tx.send(chunk).is_ok());
        }
        let mut chunk = chunk;
        let mut evicted = 0;
        loop {
            match self.tx.try_send(chunk) {
                Ok(()) => return (evicted, true),
                Err(TrySendError::Full(c)) => {
                    if self.rx.try_recv().is_ok() {
                        evicted += 1;
                    }
                    chunk = c;
                }
                Err(TrySendError::Disconnected(_)) => return (evicted, false),
            }
        }
    }

    /// Consumes the queue's own sender so receivers see the end of stream.
    pub fn close(self) -> Receiver<ChunkRecord> {
        self.rx
    }
}
