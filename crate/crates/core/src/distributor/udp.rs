//! UDP transport: one packet per datagram, one socket per multicast group.
//!
//! Groups map either to multicast addresses `base + g` on a common port, or,
//! for hosts without multicast routing, to unicast ports `base_port + g`.

use std::io;
use std::net::{Ipv4Addr, SocketAddr, SocketAddrV4, UdpSocket};
use std::time::{Duration, Instant};

use super::{ChunkAssembler, ChunkEvent, DistributorError, Packet, PACKET_HEADER_BYTES};
use crate::numerology::Plan;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupAddressing {
    Multicast { base: Ipv4Addr, port: u16, interface: Ipv4Addr },
    Unicast { host: Ipv4Addr, base_port: u16 },
}

impl GroupAddressing {
    pub fn group_addr(&self, group: u64) -> SocketAddrV4 {
        match *self {
            GroupAddressing::Multicast { base, port, .. } => {
                SocketAddrV4::new(Ipv4Addr::from(u32::from(base) + group as u32), port)
            }
            GroupAddressing::Unicast { host, base_port } => SocketAddrV4::new(host, base_port + group as u16),
        }
    }
}

#[derive(Debug)]
pub struct UdpSender {
    sock: UdpSocket,
    addressing: GroupAddressing,
    packets_per_group: u64,
    total_groups: u64,
}

impl UdpSender {
    pub fn new(plan: &Plan, addressing: GroupAddressing) -> io::Result<Self> {
        let sock = UdpSocket::bind((Ipv4Addr::UNSPECIFIED, 0))?;
        if let GroupAddressing::Multicast { .. } = addressing {
            sock.set_multicast_ttl_v4(1)?;
            sock.set_multicast_loop_v4(true)?;
        }
        Ok(Self {
            sock,
            addressing,
            packets_per_group: plan.packet.packets_per_group as u64,
            total_groups: plan.distribution.total_groups,
        })
    }

    pub fn send(&self, packet: &Packet) -> io::Result<()> {
        let g = (packet.number / self.packets_per_group) % self.total_groups;
        self.sock.send_to(&packet.to_bytes(), self.addressing.group_addr(g))?;
        Ok(())
    }
}

/// One server's subscription: a socket per group feeding a chunk assembler.
#[derive(Debug)]
pub struct UdpReceiver {
    sockets: Vec<UdpSocket>,
    assembler: ChunkAssembler,
    payload_bytes: usize,
    buf: Vec<u8>,
}

impl UdpReceiver {
    pub fn join(plan: &Plan, server: usize, addressing: GroupAddressing) -> Result<Self, UdpError> {
        let assembler = ChunkAssembler::new(plan, server)?;
        let mut sockets = Vec::new();
        for &g in &plan.distribution.subscriptions[server] {
            let addr = addressing.group_addr(g);
            let sock = match addressing {
                GroupAddressing::Multicast { interface, .. } => {
                    let s = UdpSocket::bind(SocketAddr::V4(addr))?;
                    s.join_multicast_v4(addr.ip(), &interface)?;
                    s
                }
                GroupAddressing::Unicast { .. } => UdpSocket::bind(SocketAddr::V4(addr))?,
            };
            sock.set_nonblocking(true)?;
            sockets.push(sock);
        }
        let payload_bytes = plan.packet.packet_payload_bytes;
        Ok(Self {
            sockets,
            assembler,
            payload_bytes,
            buf: vec![0; PACKET_HEADER_BYTES + payload_bytes + 1],
        })
    }

    pub fn assembler(&self) -> &ChunkAssembler {
        &self.assembler
    }

    /// Reads whatever is queued on every socket. Returns the number of
    /// datagrams handled.
    pub fn poll(&mut self, out: &mut Vec<ChunkEvent>) -> Result<usize, UdpError> {
        let mut handled = 0;
        for i in 0..self.sockets.len() {
            loop {
                match self.sockets[i].recv(&mut self.buf) {
                    Ok(n) => {
                        let p = Packet::from_bytes(&self.buf[..n], self.payload_bytes)?;
                        self.assembler.push(&p, out)?;
                        handled += 1;
                    }
                    Err(e) if e.kind() == io::ErrorKind::WouldBlock => break,
                    Err(e) => return Err(e.into()),
                }
            }
        }
        Ok(handled)
    }

    /// Polls until `idle` passes without traffic.
    pub fn run_until_idle(&mut self, idle: Duration, out: &mut Vec<ChunkEvent>) -> Result<(), UdpError> {
        let mut last = Instant::now();
        while last.elapsed() < idle {
            if self.poll(out)? > 0 {
                last = Instant::now();
            } else {
                std::thread::sleep(Duration::from_millis(1));
            }
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum UdpError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error(transparent)]
    Distributor(#[from] DistributorError),
}
