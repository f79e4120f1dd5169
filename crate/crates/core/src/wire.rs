//! Frame payloads and their on-air byte layouts.
//!
//! Every message is a one-byte type code followed by fixed-width
//! little-endian fields in declaration order. Coordinates, speeds, energies
//! and times are IEEE-754 `f64`; identifiers and sequence numbers are `u32`;
//! counters are `u16`.
//!
//! | code | message    | layout (after the code byte)                                   | bytes      |
//! |------|------------|-----------------------------------------------------------------|------------|
//! | 0x01 | HELLO      | sender u32, x, y, speed, energy, dist_to_dest, timestamp        | 53         |
//! | 0x02 | ZOOM-OUT   | same as HELLO                                                   | 53         |
//! | 0x03 | RLRQ       | source, dest, bcast_id, prev_hop u32; prev x, y, speed; hop u16; n u16; n × u32 | 45 + 4n |
//! | 0x04 | RLRP       | source, dest, bcast_id, next_hop u32                            | 17         |
//! | 0x05 | RREQ       | rreq_id, orig, orig_seq, dest, dest_seq u32; hop u16            | 23         |
//! | 0x06 | RREQ-RARP  | RREQ fields; sender x, y, vx, vy, min_ect, min_energy           | 71         |
//! | 0x07 | RREP       | orig, dest, dest_seq, rreq_id u32; hop u16                      | 19         |
//! | 0x08 | RERR       | dest, origin, reporter u32                                      | 13         |
//! | 0x09 | DATA       | source, dest, seq u32; created f64; payload                     | 21 + len   |

use crate::phys::Position;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Identifies one route-discovery attempt network-wide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DiscoveryKey {
    pub source: NodeId,
    pub dest: NodeId,
    pub broadcast_id: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HelloMessage {
    pub sender_id: NodeId,
    pub position: Position,
    pub speed: f64,
    pub residual_energy: f64,
    pub distance_to_dest: f64,
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlrqMessage {
    pub source_id: NodeId,
    pub dest_id: NodeId,
    pub broadcast_id: u32,
    pub prev_hop_id: NodeId,
    pub prev_hop_position: Position,
    pub prev_hop_speed: f64,
    pub hop_count: u16,
    pub front_relatives: Vec<NodeId>,
}

impl RlrqMessage {
    pub fn key(&self) -> DiscoveryKey {
        DiscoveryKey { source: self.source_id, dest: self.dest_id, broadcast_id: self.broadcast_id }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RlrpMessage {
    pub source_id: NodeId,
    pub dest_id: NodeId,
    pub broadcast_id: u32,
    pub next_hop_id: NodeId,
}

impl RlrpMessage {
    pub fn key(&self) -> DiscoveryKey {
        DiscoveryKey { source: self.source_id, dest: self.dest_id, broadcast_id: self.broadcast_id }
    }
}

/// Link-stability fields carried by RARP-lite requests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RarpExtension {
    pub sender_position: Position,
    pub sender_velocity: (f64, f64),
    /// Smallest expected connection time over the links traversed so far.
    pub min_ect: f64,
    /// Lowest residual energy among the relays so far.
    pub min_energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RreqMessage {
    pub rreq_id: u32,
    pub orig: NodeId,
    pub orig_seq: u32,
    pub dest: NodeId,
    pub dest_seq: u32,
    pub hop_count: u16,
    pub rarp: Option<RarpExtension>,
}

impl RreqMessage {
    pub fn key(&self) -> DiscoveryKey {
        DiscoveryKey { source: self.orig, dest: self.dest, broadcast_id: self.rreq_id }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RrepMessage {
    pub orig: NodeId,
    pub dest: NodeId,
    pub dest_seq: u32,
    pub rreq_id: u32,
    pub hop_count: u16,
}

impl RrepMessage {
    pub fn key(&self) -> DiscoveryKey {
        DiscoveryKey { source: self.orig, dest: self.dest, broadcast_id: self.rreq_id }
    }
}

/// Unicast notice, sent back along reverse entries, that `dest` became
/// unreachable through `reporter`.
#[derive(Debug, Clone, PartialEq)]
pub struct RerrMessage {
    pub dest: NodeId,
    pub origin: NodeId,
    pub reporter: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataPacket {
    pub source: NodeId,
    pub dest: NodeId,
    pub seq: u32,
    pub created: f64,
    pub payload_len: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Hello(HelloMessage),
    ZoomOut(HelloMessage),
    Rlrq(RlrqMessage),
    Rlrp(RlrpMessage),
    Rreq(RreqMessage),
    Rrep(RrepMessage),
    Rerr(RerrMessage),
    Data(DataPacket),
}

/// Message category used by counters and the trace schema.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum MessageKind {
    Hello,
    ZoomOut,
    Rlrq,
    Rlrp,
    Rreq,
    Rrep,
    Rerr,
    Data,
}

impl MessageKind {
    pub const CONTROL: [MessageKind; 7] = [
        MessageKind::Hello,
        MessageKind::ZoomOut,
        MessageKind::Rlrq,
        MessageKind::Rlrp,
        MessageKind::Rreq,
        MessageKind::Rrep,
        MessageKind::Rerr,
    ];

    pub fn is_control(self) -> bool {
        self != MessageKind::Data
    }

    /// Request/reply traffic attributable to a single discovery.
    pub fn is_discovery(self) -> bool {
        matches!(self, MessageKind::Rlrq | MessageKind::Rlrp | MessageKind::Rreq | MessageKind::Rrep)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Hello => "HELLO",
            MessageKind::ZoomOut => "ZOOM_OUT",
            MessageKind::Rlrq => "RLRQ",
            MessageKind::Rlrp => "RLRP",
            MessageKind::Rreq => "RREQ",
            MessageKind::Rrep => "RREP",
            MessageKind::Rerr => "RERR",
            MessageKind::Data => "DATA",
        }
    }
}

impl Message {
    pub fn kind(&self) -> MessageKind {
        match self {
            Message::Hello(_) => MessageKind::Hello,
            Message::ZoomOut(_) => MessageKind::ZoomOut,
            Message::Rlrq(_) => MessageKind::Rlrq,
            Message::Rlrp(_) => MessageKind::Rlrp,
            Message::Rreq(_) => MessageKind::Rreq,
            Message::Rrep(_) => MessageKind::Rrep,
            Message::Rerr(_) => MessageKind::Rerr,
            Message::Data(_) => MessageKind::Data,
        }
    }

    pub fn discovery_key(&self) -> Option<DiscoveryKey> {
        match self {
            Message::Rlrq(m) => Some(m.key()),
            Message::Rlrp(m) => Some(m.key()),
            Message::Rreq(m) => Some(m.key()),
            Message::Rrep(m) => Some(m.key()),
            _ => None,
        }
    }

    pub fn encoded_len(&self) -> usize {
        match self {
            Message::Hello(_) | Message::ZoomOut(_) => 53,
            Message::Rlrq(m) => 45 + 4 * m.front_relatives.len(),
            Message::Rlrp(_) => 17,
            Message::Rreq(m) => {
                if m.rarp.is_some() {
                    71
                } else {
                    23
                }
            }
            Message::Rrep(_) => 19,
            Message::Rerr(_) => 13,
            Message::Data(d) => 21 + d.payload_len as usize,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::with_capacity(self.encoded_len()));
        match self {
            Message::Hello(h) | Message::ZoomOut(h) => {
                w.u8(if matches!(self, Message::Hello(_)) { 0x01 } else { 0x02 });
                w.u32(h.sender_id.0);
                w.f64(h.position.x);
                w.f64(h.position.y);
                w.f64(h.speed);
                w.f64(h.residual_energy);
                w.f64(h.distance_to_dest);
                w.f64(h.timestamp);
            }
            Message::Rlrq(m) => {
                w.u8(0x03);
                w.u32(m.source_id.0);
                w.u32(m.dest_id.0);
                w.u32(m.broadcast_id);
                w.u32(m.prev_hop_id.0);
                w.f64(m.prev_hop_position.x);
                w.f64(m.prev_hop_position.y);
                w.f64(m.prev_hop_speed);
                w.u16(m.hop_count);
                w.u16(m.front_relatives.len() as u16);
                for id in &m.front_relatives {
                    w.u32(id.0);
                }
            }
            Message::Rlrp(m) => {
                w.u8(0x04);
                w.u32(m.source_id.0);
                w.u32(m.dest_id.0);
                w.u32(m.broadcast_id);
                w.u32(m.next_hop_id.0);
            }
            Message::Rreq(m) => {
                w.u8(if m.rarp.is_some() { 0x06 } else { 0x05 });
                w.u32(m.rreq_id);
                w.u32(m.orig.0);
                w.u32(m.orig_seq);
                w.u32(m.dest.0);
                w.u32(m.dest_seq);
                w.u16(m.hop_count);
                if let Some(x) = &m.rarp {
                    w.f64(x.sender_position.x);
                    w.f64(x.sender_position.y);
                    w.f64(x.sender_velocity.0);
                    w.f64(x.sender_velocity.1);
                    w.f64(x.min_ect);
                    w.f64(x.min_energy);
                }
            }
            Message::Rrep(m) => {
                w.u8(0x07);
                w.u32(m.orig.0);
                w.u32(m.dest.0);
                w.u32(m.dest_seq);
                w.u32(m.rreq_id);
                w.u16(m.hop_count);
            }
            Message::Rerr(m) => {
                w.u8(0x08);
                w.u32(m.dest.0);
                w.u32(m.origin.0);
                w.u32(m.reporter.0);
            }
            Message::Data(d) => {
                w.u8(0x09);
                w.u32(d.source.0);
                w.u32(d.dest.0);
                w.u32(d.seq);
                w.f64(d.created);
                w.0.resize(w.0.len() + d.payload_len as usize, 0);
            }
        }
        debug_assert_eq!(w.0.len(), self.encoded_len());
        w.0
    }

    pub fn decode(buf: &[u8]) -> Result<Message, WireError> {
        let mut r = Reader { buf, at: 0 };
        let code = r.u8()?;
        let msg = match code {
            0x01 | 0x02 => {
                let h = HelloMessage {
                    sender_id: NodeId(r.u32()?),
                    position: Position::new(r.f64()?, r.f64()?),
                    speed: r.f64()?,
                    residual_energy: r.f64()?,
                    distance_to_dest: r.f64()?,
                    timestamp: r.f64()?,
                };
                if code == 0x01 {
                    Message::Hello(h)
                } else {
                    Message::ZoomOut(h)
                }
            }
            0x03 => {
                let source_id = NodeId(r.u32()?);
                let dest_id = NodeId(r.u32()?);
                let broadcast_id = r.u32()?;
                let prev_hop_id = NodeId(r.u32()?);
                let prev_hop_position = Position::new(r.f64()?, r.f64()?);
                let prev_hop_speed = r.f64()?;
                let hop_count = r.u16()?;
                let n = r.u16()? as usize;
                let mut front_relatives = Vec::with_capacity(n);
                for _ in 0..n {
                    front_relatives.push(NodeId(r.u32()?));
                }
                Message::Rlrq(RlrqMessage {
                    source_id,
                    dest_id,
                    broadcast_id,
                    prev_hop_id,
                    prev_hop_position,
                    prev_hop_speed,
                    hop_count,
                    front_relatives,
                })
            }
            0x04 => Message::Rlrp(RlrpMessage {
                source_id: NodeId(r.u32()?),
                dest_id: NodeId(r.u32()?),
                broadcast_id: r.u32()?,
                next_hop_id: NodeId(r.u32()?),
            }),
            0x05 | 0x06 => {
                let mut m = RreqMessage {
                    rreq_id: r.u32()?,
                    orig: NodeId(r.u32()?),
                    orig_seq: r.u32()?,
                    dest: NodeId(r.u32()?),
                    dest_seq: r.u32()?,
                    hop_count: r.u16()?,
                    rarp: None,
                };
                if code == 0x06 {
                    m.rarp = Some(RarpExtension {
                        sender_position: Position::new(r.f64()?, r.f64()?),
                        sender_velocity: (r.f64()?, r.f64()?),
                        min_ect: r.f64()?,
                        min_energy: r.f64()?,
                    });
                }
                Message::Rreq(m)
            }
            0x07 => Message::Rrep(RrepMessage {
                orig: NodeId(r.u32()?),
                dest: NodeId(r.u32()?),
                dest_seq: r.u32()?,
                rreq_id: r.u32()?,
                hop_count: r.u16()?,
            }),
            0x08 => Message::Rerr(RerrMessage {
                dest: NodeId(r.u32()?),
                origin: NodeId(r.u32()?),
                reporter: NodeId(r.u32()?),
            }),
            0x09 => {
                let source = NodeId(r.u32()?);
                let dest = NodeId(r.u32()?);
                let seq = r.u32()?;
                let created = r.f64()?;
                let rest = buf.len() - r.at;
                let payload_len = u16::try_from(rest).map_err(|_| WireError::Oversized(rest))?;
                r.at = buf.len();
                Message::Data(DataPacket { source, dest, seq, created, payload_len })
            }
            other => return Err(WireError::UnknownType(other)),
        };
        if r.at != buf.len() {
            return Err(WireError::TrailingBytes(buf.len() - r.at));
        }
        Ok(msg)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WireError {
    #[error("frame truncated at byte {0}")]
    Truncated(usize),
    #[error("unknown message type 0x{0:02x}")]
    UnknownType(u8),
    #[error("{0} unexpected trailing bytes")]
    TrailingBytes(usize),
    #[error("payload of {0} bytes does not fit the length field")]
    Oversized(usize),
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }
    fn u16(&mut self, v: u16) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn u32(&mut self, v: u32) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        let end = self.at + N;
        let bytes = self.buf.get(self.at..end).ok_or(WireError::Truncated(self.at))?;
        self.at = end;
        Ok(bytes.try_into().expect("slice length checked"))
    }
    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16, WireError> {
        Ok(u16::from_le_bytes(self.take()?))
    }
    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_le_bytes(self.take()?))
    }
    fn f64(&mut self) -> Result<f64, WireError> {
        Ok(f64::from_le_bytes(self.take()?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hello_layout_is_bit_exact() {
        let h = Message::Hello(HelloMessage {
            sender_id: NodeId(0x0102_0304),
            position: Position::new(1.5, -2.0),
            speed: 3.25,
            residual_energy: 42.0,
            distance_to_dest: 100.0,
            timestamp: 7.0,
        });
        let bytes = h.encode();
        assert_eq!(bytes.len(), 53);
        assert_eq!(bytes[0], 0x01);
        assert_eq!(&bytes[1..5], &[0x04, 0x03, 0x02, 0x01]);
        assert_eq!(&bytes[5..13], &1.5f64.to_le_bytes());
        assert_eq!(&bytes[45..53], &7.0f64.to_le_bytes());
    }

    #[test]
    fn rlrq_size_grows_with_front_relatives() {
        let m = Message::Rlrq(RlrqMessage {
            source_id: NodeId(1),
            dest_id: NodeId(12),
            broadcast_id: 9,
            prev_hop_id: NodeId(1),
            prev_hop_position: Position::new(0.0, 0.0),
            prev_hop_speed: 0.0,
            hop_count: 0,
            front_relatives: vec![NodeId(6), NodeId(7)],
        });
        let bytes = m.encode();
        assert_eq!(bytes.len(), 53);
        assert_eq!(&bytes[41..43], &0u16.to_le_bytes());
        assert_eq!(&bytes[43..45], &2u16.to_le_bytes());
        assert_eq!(&bytes[45..49], &6u32.to_le_bytes());
        assert_eq!(Message::decode(&bytes).unwrap(), m);
    }

    #[test]
    fn fixed_sizes() {
        let rlrp = Message::Rlrp(RlrpMessage {
            source_id: NodeId(1),
            dest_id: NodeId(2),
            broadcast_id: 3,
            next_hop_id: NodeId(4),
        });
        assert_eq!(rlrp.encode().len(), 17);
        let rrep = Message::Rrep(RrepMessage { orig: NodeId(1), dest: NodeId(2), dest_seq: 1, rreq_id: 1, hop_count: 2 });
        assert_eq!(rrep.encode().len(), 19);
        let data = Message::Data(DataPacket { source: NodeId(1), dest: NodeId(0), seq: 5, created: 1.0, payload_len: 512 });
        assert_eq!(data.encode().len(), 533);
        assert_eq!(Message::decode(&data.encode()).unwrap(), data);
    }

    #[test]
    fn malformed_frames_are_rejected() {
        assert_eq!(Message::decode(&[]), Err(WireError::Truncated(0)));
        assert_eq!(Message::decode(&[0x7f]), Err(WireError::UnknownType(0x7f)));
        let mut rlrp = Message::Rlrp(RlrpMessage {
            source_id: NodeId(1),
            dest_id: NodeId(2),
            broadcast_id: 3,
            next_hop_id: NodeId(4),
        })
        .encode();
        rlrp.push(0);
        assert_eq!(Message::decode(&rlrp), Err(WireError::TrailingBytes(1)));
        assert!(matches!(Message::decode(&rlrp[..10]), Err(WireError::Truncated(_))));
    }

    fn arb_pos() -> impl Strategy<Value = Position> {
        (-1e4f64..1e4, -1e4f64..1e4).prop_map(|(x, y)| Position::new(x, y))
    }

    fn arb_message() -> impl Strategy<Value = Message> {
        let hello = (any::<u32>(), arb_pos(), 0f64..10.0, 0f64..100.0, 0f64..2000.0, 0f64..900.0, any::<bool>())
            .prop_map(|(id, position, speed, e, d, t, zoom)| {
                let h = HelloMessage {
                    sender_id: NodeId(id),
                    position,
                    speed,
                    residual_energy: e,
                    distance_to_dest: d,
                    timestamp: t,
                };
                if zoom {
                    Message::ZoomOut(h)
                } else {
                    Message::Hello(h)
                }
            });
        let rlrq = (any::<[u32; 4]>(), arb_pos(), 0f64..10.0, any::<u16>(), prop::collection::vec(any::<u32>(), 0..40))
            .prop_map(|(ids, p, s, hop, fr)| {
                Message::Rlrq(RlrqMessage {
                    source_id: NodeId(ids[0]),
                    dest_id: NodeId(ids[1]),
                    broadcast_id: ids[2],
                    prev_hop_id: NodeId(ids[3]),
                    prev_hop_position: p,
                    prev_hop_speed: s,
                    hop_count: hop,
                    front_relatives: fr.into_iter().map(NodeId).collect(),
                })
            });
        let rreq = (any::<[u32; 5]>(), any::<u16>(), prop::option::of((arb_pos(), -10f64..10.0, -10f64..10.0, 0f64..1e6, 0f64..100.0)))
            .prop_map(|(f, hop, ext)| {
                Message::Rreq(RreqMessage {
                    rreq_id: f[0],
                    orig: NodeId(f[1]),
                    orig_seq: f[2],
                    dest: NodeId(f[3]),
                    dest_seq: f[4],
                    hop_count: hop,
                    rarp: ext.map(|(p, vx, vy, ect, energy)| RarpExtension {
                        sender_position: p,
                        sender_velocity: (vx, vy),
                        min_ect: ect,
                        min_energy: energy,
                    }),
                })
            });
        let rerr = any::<[u32; 3]>().prop_map(|f| {
            Message::Rerr(RerrMessage { dest: NodeId(f[0]), origin: NodeId(f[1]), reporter: NodeId(f[2]) })
        });
        prop_oneof![hello, rlrq, rreq, rerr]
    }

    proptest! {
        #[test]
        fn decode_inverts_encode(m in arb_message()) {
            let bytes = m.encode();
            prop_assert_eq!(bytes.len(), m.encoded_len());
            prop_assert_eq!(Message::decode(&bytes).unwrap(), m);
        }
    }
}
