use std::sync::Arc;

use crate::scheduler::{DownlinkAssignment, MasterSchedule};
use crate::time::SimTime;
use crate::tsch::{BbrId, Cell, NodeId};

pub const MIN_PAYLOAD: u16 = 8;
pub const MAX_PAYLOAD: u16 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum L2Kind {
    Broadcast,
    Unicast,
    Eb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Addr {
    Any,
    Node(NodeId),
    Bbr(BbrId),
    Server,
}

/// Answer to an uplink negotiation request, carried back in an EB.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrantReply {
    Granted { node: NodeId, downlink: DownlinkAssignment, uplink: Cell },
    Rejected { node: NodeId },
    Capacity { node: NodeId },
}

impl GrantReply {
    pub fn node(&self) -> NodeId {
        match *self {
            GrantReply::Granted { node, .. } | GrantReply::Rejected { node } | GrantReply::Capacity { node } => node,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    /// Application request sent by the server to a node.
    Request { packet: u64 },
    /// Node's answer to `request`.
    Reply { packet: u64, request: u64 },
    /// Node-originated application data.
    Data { packet: u64 },
    /// First uplink after joining; lets the server learn a route.
    JoinAnnounce,
    NegotiationRequest { candidates: Vec<u16>, channel_offset: u16, parent: BbrId },
    Beacon { eb_channel_offset: u16, grants: Vec<GrantReply>, schedule: Option<Arc<MasterSchedule>> },
}

impl Payload {
    /// Canonical bytes for hashing.
    fn encode(&self, out: &mut Vec<u8>) {
        match self {
            Payload::Request { packet } => {
                out.push(1);
                out.extend_from_slice(&packet.to_le_bytes());
            }
            Payload::Reply { packet, request } => {
                out.push(2);
                out.extend_from_slice(&packet.to_le_bytes());
                out.extend_from_slice(&request.to_le_bytes());
            }
            Payload::Data { packet } => {
                out.push(3);
                out.extend_from_slice(&packet.to_le_bytes());
            }
            Payload::JoinAnnounce => out.push(4),
            Payload::NegotiationRequest { candidates, channel_offset, parent } => {
                out.push(5);
                for c in candidates {
                    out.extend_from_slice(&c.to_le_bytes());
                }
                out.extend_from_slice(&channel_offset.to_le_bytes());
                out.extend_from_slice(&parent.0.to_le_bytes());
            }
            Payload::Beacon { eb_channel_offset, grants, .. } => {
                out.push(6);
                out.extend_from_slice(&eb_channel_offset.to_le_bytes());
                out.extend_from_slice(&(grants.len() as u32).to_le_bytes());
            }
        }
    }

    /// Application packet id carried by this payload, if any.
    pub fn app_packet(&self) -> Option<u64> {
        match *self {
            Payload::Request { packet } | Payload::Reply { packet, .. } | Payload::Data { packet } => Some(packet),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FrameError {
    #[error("payload length {0} outside {MIN_PAYLOAD}..={MAX_PAYLOAD} bytes")]
    PayloadLength(u16),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub l2_kind: L2Kind,
    pub src: Addr,
    pub dst: Addr,
    /// PAN identifier of the timebase the sender belongs to.
    pub pan: u16,
    pub seq: u32,
    pub payload_len: u16,
    pub l3_dst: Addr,
    pub created_at: SimTime,
    pub payload: Payload,
}

impl Frame {
    /// Uplink data: an L3 unicast to the server inside an L2 broadcast.
    pub fn uplink(
        src: NodeId,
        pan: u16,
        seq: u32,
        payload_len: u16,
        created_at: SimTime,
        payload: Payload,
    ) -> Result<Frame, FrameError> {
        check_len(payload_len)?;
        Ok(Frame {
            l2_kind: L2Kind::Broadcast,
            src: Addr::Node(src),
            dst: Addr::Any,
            pan,
            seq,
            payload_len,
            l3_dst: Addr::Server,
            created_at,
            payload,
        })
    }

    /// Downlink data: an L2 unicast from the selected router.
    pub fn downlink(
        dst: NodeId,
        seq: u32,
        payload_len: u16,
        created_at: SimTime,
        payload: Payload,
    ) -> Result<Frame, FrameError> {
        check_len(payload_len)?;
        Ok(Frame {
            l2_kind: L2Kind::Unicast,
            src: Addr::Server,
            dst: Addr::Node(dst),
            pan: 0,
            seq,
            payload_len,
            l3_dst: Addr::Node(dst),
            created_at,
            payload,
        })
    }

    pub fn beacon(src: BbrId, pan: u16, seq: u32, created_at: SimTime, payload: Payload) -> Frame {
        Frame {
            l2_kind: L2Kind::Eb,
            src: Addr::Bbr(src),
            dst: Addr::Any,
            pan,
            seq,
            payload_len: MIN_PAYLOAD,
            l3_dst: Addr::Any,
            created_at,
            payload,
        }
    }

    pub fn src_node(&self) -> Option<NodeId> {
        match self.src {
            Addr::Node(n) => Some(n),
            _ => None,
        }
    }

    /// Stable 64-bit FNV-1a digest over source, sequence number and payload.
    pub fn dedup_hash(&self) -> u64 {
        let mut bytes = Vec::with_capacity(32);
        match self.src {
            Addr::Any => bytes.push(0),
            Addr::Node(n) => {
                bytes.push(1);
                bytes.extend_from_slice(&n.0.to_le_bytes());
            }
            Addr::Bbr(b) => {
                bytes.push(2);
                bytes.extend_from_slice(&b.0.to_le_bytes());
            }
            Addr::Server => bytes.push(3),
        }
        bytes.extend_from_slice(&self.seq.to_le_bytes());
        bytes.extend_from_slice(&self.payload_len.to_le_bytes());
        self.payload.encode(&mut bytes);
        fnv1a64(&bytes)
    }
}

fn check_len(len: u16) -> Result<(), FrameError> {
    if (MIN_PAYLOAD..=MAX_PAYLOAD).contains(&len) {
        Ok(())
    } else {
        Err(FrameError::PayloadLength(len))
    }
}

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes.iter().fold(OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(PRIME))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn uplink_is_l2_broadcast_with_l3_unicast() {
        let f = Frame::uplink(NodeId(3), 0, 1, 80, SimTime::ZERO, Payload::Data { packet: 1 }).unwrap();
        assert_eq!(f.l2_kind, L2Kind::Broadcast);
        assert_eq!(f.dst, Addr::Any);
        assert_eq!(f.l3_dst, Addr::Server);
    }

    #[test]
    fn payload_bounds() {
        assert!(Frame::uplink(NodeId(1), 0, 0, 7, SimTime::ZERO, Payload::JoinAnnounce).is_err());
        assert!(Frame::uplink(NodeId(1), 0, 0, 8, SimTime::ZERO, Payload::JoinAnnounce).is_ok());
        assert!(Frame::downlink(NodeId(1), 0, 128, SimTime::ZERO, Payload::Request { packet: 0 }).is_ok());
        assert_eq!(
            Frame::downlink(NodeId(1), 0, 129, SimTime::ZERO, Payload::Request { packet: 0 }),
            Err(FrameError::PayloadLength(129))
        );
    }

    #[test]
    fn hash_ignores_arrival_but_not_identity() {
        let a = Frame::uplink(NodeId(1), 0, 7, 80, SimTime::ZERO, Payload::Data { packet: 9 }).unwrap();
        let mut later = a.clone();
        later.created_at = SimTime::from_millis(5);
        assert_eq!(a.dedup_hash(), later.dedup_hash());
        let mut other_seq = a.clone();
        other_seq.seq = 8;
        assert_ne!(a.dedup_hash(), other_seq.dedup_hash());
        let mut other_src = a.clone();
        other_src.src = Addr::Node(NodeId(2));
        assert_ne!(a.dedup_hash(), other_src.dedup_hash());
    }
}
