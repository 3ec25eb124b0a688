use std::collections::BTreeSet;

use crate::protocol::node::PhaseChange;
use crate::protocol::ns::Ingest;
use crate::scenario::Direction;
use crate::scheduler::MasterSchedule;
use crate::time::SimTime;
use crate::tsch::{CellRole, NodeId, Party};

/// One application packet, exactly as written to `packets.csv`.
///
/// Downlink rows are server requests: `recv_at` is when the node's reply
/// was accepted by the server, so `rtt` is the round trip. Uplink rows are
/// node-originated frames (replies or data): `recv_at` is the first
/// accepted copy and `rtt` stays empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketRecord {
    pub seq: u64,
    pub direction: Direction,
    pub sent_at: SimTime,
    pub recv_at: Option<SimTime>,
    pub rtt: Option<SimTime>,
    pub lost: bool,
    pub bbr_set: BTreeSet<u16>,
    pub dup_count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PacketKind {
    Request,
    Reply { request: u64 },
    Data,
}

/// Per-packet facts that are not part of the CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketAux {
    pub node: NodeId,
    pub kind: PacketKind,
    /// True instant the accepted copy was heard by a router.
    pub heard_at: Option<SimTime>,
}

/// A run of consecutive lost packets of one node, measured from the last
/// delivery before it to the first delivery after it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outage {
    pub node: NodeId,
    pub start: SimTime,
    pub end: SimTime,
    pub lost: usize,
}

impl Outage {
    pub fn duration(&self) -> f64 {
        (self.end - self.start).as_secs_f64()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockSample {
    pub t: SimTime,
    /// Largest disagreement between two routers: clock error in the
    /// synchronized mode, network time in the baseline.
    pub max_pairwise: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionRecord {
    pub t: SimTime,
    pub listener: Party,
    pub roles: Vec<CellRole>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NsTraceEntry {
    pub t: SimTime,
    pub src: NodeId,
    pub frame_seq: u32,
    pub hash: u64,
    pub outcome: Ingest,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsLog {
    pub packets: Vec<PacketRecord>,
    pub aux: Vec<PacketAux>,
    pub outages: Vec<Outage>,
    pub phases: Vec<(NodeId, PhaseChange)>,
    pub clock_samples: Vec<ClockSample>,
    pub collisions: Vec<CollisionRecord>,
    pub ns_trace: Vec<NsTraceEntry>,
    /// Schedule held by the server (synchronized mode) at the end of the run.
    pub final_schedule: Option<MasterSchedule>,
    pub horizon: SimTime,
    pub slotframe_duration: f64,
}

impl MetricsLog {
    pub fn new_packet(&mut self, direction: Direction, sent_at: SimTime, node: NodeId, kind: PacketKind) -> u64 {
        let seq = self.packets.len() as u64;
        self.packets.push(PacketRecord {
            seq,
            direction,
            sent_at,
            recv_at: None,
            rtt: None,
            lost: true,
            bbr_set: BTreeSet::new(),
            dup_count: 0,
        });
        self.aux.push(PacketAux { node, kind, heard_at: None });
        seq
    }

    pub fn record(&self, seq: u64) -> &PacketRecord {
        &self.packets[seq as usize]
    }

    pub fn record_mut(&mut self, seq: u64) -> &mut PacketRecord {
        &mut self.packets[seq as usize]
    }

    pub fn aux(&self, seq: u64) -> &PacketAux {
        &self.aux[seq as usize]
    }

    /// Marks `seq` delivered at `at` unless an earlier delivery exists.
    pub fn deliver(&mut self, seq: u64, at: SimTime) -> bool {
        let r = &mut self.packets[seq as usize];
        if r.recv_at.is_some() {
            return false;
        }
        r.recv_at = Some(at);
        r.lost = false;
        if r.direction == Direction::Downlink {
            r.rtt = Some(at - r.sent_at);
        }
        true
    }

    /// Recomputes outages over the packets of `direction`, per node.
    pub fn compute_outages(&mut self, direction: Direction, kinds: &dyn Fn(PacketKind) -> bool) {
        let mut nodes: Vec<NodeId> = self.aux.iter().map(|a| a.node).collect();
        nodes.sort_unstable();
        nodes.dedup();
        let mut outages = Vec::new();
        for node in nodes {
            let stream: Vec<&PacketRecord> = self
                .packets
                .iter()
                .zip(&self.aux)
                .filter(|(p, a)| a.node == node && p.direction == direction && kinds(a.kind))
                .map(|(p, _)| p)
                .collect();
            let mut i = 0;
            while i < stream.len() {
                if !stream[i].lost {
                    i += 1;
                    continue;
                }
                let first = i;
                while i < stream.len() && stream[i].lost {
                    i += 1;
                }
                let start = if first == 0 { stream[0].sent_at } else { stream[first - 1].recv_at.expect("delivered") };
                let end = stream.get(i).and_then(|p| p.recv_at).unwrap_or(self.horizon);
                outages.push(Outage { node, start, end, lost: i - first });
            }
        }
        outages.sort_by_key(|o| (o.start, o.node));
        self.outages = outages;
    }
}

/// Round trip of a request; `None` when no reply was accepted.
pub fn measure_rtt(log: &MetricsLog, request: u64) -> Option<f64> {
    let r = log.packets.get(request as usize)?;
    if r.direction != Direction::Downlink {
        return None;
    }
    r.rtt.map(SimTime::as_secs_f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(v: u64) -> SimTime {
        SimTime::from_millis(v)
    }

    #[test]
    fn rtt_and_loss() {
        let mut log = MetricsLog { horizon: ms(100_000), ..Default::default() };
        let a = log.new_packet(Direction::Downlink, ms(1000), NodeId(1), PacketKind::Request);
        let b = log.new_packet(Direction::Downlink, ms(2000), NodeId(1), PacketKind::Request);
        assert!(log.deliver(a, ms(1030)));
        assert!(!log.deliver(a, ms(1500)));
        assert!((measure_rtt(&log, a).unwrap() - 0.03).abs() < 1e-12);
        assert_eq!(measure_rtt(&log, b), None);
        assert!(log.record(b).lost);
    }

    #[test]
    fn outages_span_between_deliveries() {
        let mut log = MetricsLog { horizon: ms(100_000), ..Default::default() };
        for i in 0..10u64 {
            let s = log.new_packet(Direction::Downlink, ms(i * 1000), NodeId(1), PacketKind::Request);
            if !(3..7).contains(&i) {
                log.deliver(s, ms(i * 1000 + 500));
            }
        }
        log.new_packet(Direction::Uplink, ms(0), NodeId(1), PacketKind::Data);
        log.compute_outages(Direction::Downlink, &|k| k == PacketKind::Request);
        assert_eq!(log.outages.len(), 1);
        let o = log.outages[0];
        assert_eq!((o.start, o.end, o.lost), (ms(2500), ms(7500), 4));
        assert_eq!(o.duration(), 5.0);
    }

    #[test]
    fn trailing_loss_runs_to_horizon() {
        let mut log = MetricsLog { horizon: ms(9000), ..Default::default() };
        let a = log.new_packet(Direction::Downlink, ms(0), NodeId(2), PacketKind::Request);
        log.deliver(a, ms(100));
        log.new_packet(Direction::Downlink, ms(1000), NodeId(2), PacketKind::Request);
        log.compute_outages(Direction::Downlink, &|_| true);
        assert_eq!(log.outages[0].end, ms(9000));
        assert_eq!(log.outages[0].start, ms(100));
    }
}
