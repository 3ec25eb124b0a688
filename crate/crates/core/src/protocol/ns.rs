//! Network server: deduplication, route selection, downlink routing and
//! the authoritative schedule.

use std::collections::{BTreeMap, VecDeque};

use crate::protocol::bbr_table::{BbrTable, NoRoute};
use crate::protocol::dedup::DedupTable;
use crate::protocol::frame::{Frame, GrantReply};
use crate::scheduler::{MasterSchedule, ScheduleError};
use crate::time::SimTime;
use crate::tsch::{BbrId, NodeId, SlotframeConfig};

/// An uplink frame as forwarded by one router.
#[derive(Debug, Clone, PartialEq)]
pub struct UplinkReport {
    pub frame: Frame,
    pub rssi_dbm: f64,
    pub bbr: BbrId,
    pub heard_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ingest {
    Accepted,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutedDownlink {
    pub bbr: BbrId,
    pub frame: Frame,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsConfig {
    pub dedup_ttl: SimTime,
    pub entry_ttl: SimTime,
    pub rssi_window: usize,
    pub drop_timeout: SimTime,
}

impl Default for NsConfig {
    fn default() -> Self {
        Self {
            dedup_ttl: SimTime::from_millis(5_000),
            entry_ttl: SimTime::from_millis(3_000),
            rssi_window: 4,
            drop_timeout: SimTime::from_millis(10_000),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NsState {
    pub dedup: DedupTable,
    pub bbr_table: BbrTable,
    pub schedule: MasterSchedule,
    pub last_propagated: Option<u64>,
    pending: BTreeMap<NodeId, VecDeque<Frame>>,
    drop_timeout: SimTime,
}

impl NsState {
    pub fn new(cfg: NsConfig) -> Self {
        Self {
            dedup: DedupTable::new(cfg.dedup_ttl),
            bbr_table: BbrTable::new(cfg.entry_ttl, cfg.rssi_window),
            schedule: MasterSchedule::new(),
            last_propagated: None,
            pending: BTreeMap::new(),
            drop_timeout: cfg.drop_timeout,
        }
    }

    /// Records which router heard the sender, then accepts the first copy of
    /// a frame and flags every later copy as a duplicate.
    pub fn ns_ingest(&mut self, report: &UplinkReport, t: SimTime) -> Ingest {
        if let Some(node) = report.frame.src_node() {
            self.bbr_table.record(node, report.bbr, report.rssi_dbm, t);
        }
        if self.dedup.observe(report.frame.dedup_hash(), t) {
            Ingest::Accepted
        } else {
            Ingest::Duplicate
        }
    }

    pub fn ns_select_downlink_bbr(&self, node: NodeId, t: SimTime) -> Result<BbrId, NoRoute> {
        self.bbr_table.select(node, t)
    }

    /// Picks the router for `frame`. Without a fresh route the frame is held
    /// until [`NsState::flush_pending`] finds one or it ages out.
    pub fn ns_route_downlink(&mut self, frame: Frame, t: SimTime) -> Result<RoutedDownlink, NoRoute> {
        let node = match frame.dst {
            crate::protocol::frame::Addr::Node(n) => n,
            _ => panic!("downlink frame without node destination"),
        };
        match self.ns_select_downlink_bbr(node, t) {
            Ok(bbr) => Ok(RoutedDownlink { bbr, frame }),
            Err(e) => {
                self.pending.entry(node).or_default().push_back(frame);
                Err(e)
            }
        }
    }

    pub fn pending_for(&self, node: NodeId) -> usize {
        self.pending.get(&node).map_or(0, VecDeque::len)
    }

    /// Drops held frames older than the drop timeout and routes the rest if
    /// `node` is reachable again.
    pub fn flush_pending(&mut self, node: NodeId, t: SimTime) -> (Vec<RoutedDownlink>, Vec<Frame>) {
        let dropped = self.expire_for(node, t);
        let routed = match self.bbr_table.select(node, t) {
            Ok(bbr) => self
                .pending
                .remove(&node)
                .unwrap_or_default()
                .into_iter()
                .map(|frame| RoutedDownlink { bbr, frame })
                .collect(),
            Err(_) => Vec::new(),
        };
        (routed, dropped)
    }

    fn expire_for(&mut self, node: NodeId, t: SimTime) -> Vec<Frame> {
        let Some(q) = self.pending.get_mut(&node) else {
            return Vec::new();
        };
        let mut dropped = Vec::new();
        while q.front().is_some_and(|f| t.saturating_sub(f.created_at) > self.drop_timeout) {
            dropped.extend(q.pop_front());
        }
        if q.is_empty() {
            self.pending.remove(&node);
        }
        dropped
    }

    /// Drops held frames older than the drop timeout for every node.
    pub fn expire_pending(&mut self, t: SimTime) -> Vec<Frame> {
        let nodes: Vec<NodeId> = self.pending.keys().copied().collect();
        nodes.into_iter().flat_map(|n| self.expire_for(n, t)).collect()
    }

    pub fn handle_negotiation(
        &mut self,
        node: NodeId,
        candidates: &[u16],
        channel_offset: u16,
        cfg: &SlotframeConfig,
    ) -> GrantReply {
        grant_request(&mut self.schedule, node, candidates, channel_offset, cfg)
    }
}

/// Serves one negotiation request against `ms`: allocates the node's
/// downlink cell if it has none, then its uplink cell by first fit.
/// Repeated requests from a node that already holds both get the same grant.
pub fn grant_request(
    ms: &mut MasterSchedule,
    node: NodeId,
    candidates: &[u16],
    channel_offset: u16,
    cfg: &SlotframeConfig,
) -> GrantReply {
    let downlink = match ms.downlink_of(node) {
        Some(a) => a,
        None => match ms.allocate_downlink(node, cfg) {
            Ok(a) => a,
            Err(_) => return GrantReply::Capacity { node },
        },
    };
    let uplink = match ms.uplink_of(node) {
        Some(c) => c,
        None => match ms.negotiate_uplink(node, candidates, channel_offset, cfg) {
            Ok(c) => c,
            Err(ScheduleError::AllCandidatesTaken(_)) => return GrantReply::Rejected { node },
            Err(_) => return GrantReply::Capacity { node },
        },
    };
    GrantReply::Granted { node, downlink, uplink }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::frame::Payload;

    fn ms(v: u64) -> SimTime {
        SimTime::from_millis(v)
    }

    fn up(src: u32, seq: u32) -> Frame {
        Frame::uplink(NodeId(src), 0, seq, 80, ms(0), Payload::Data { packet: seq as u64 }).unwrap()
    }

    fn report(frame: Frame, bbr: u16, rssi: f64, at: u64) -> UplinkReport {
        UplinkReport { frame, rssi_dbm: rssi, bbr: BbrId(bbr), heard_at: ms(at) }
    }

    fn down(dst: u32, at: u64) -> Frame {
        Frame::downlink(NodeId(dst), 0, 80, ms(at), Payload::Request { packet: at }).unwrap()
    }

    #[test]
    fn ingest_examples() {
        let mut ns = NsState::new(NsConfig::default());
        assert_eq!(ns.ns_ingest(&report(up(1, 7), 1, -70.0, 0), ms(1)), Ingest::Accepted);
        assert_eq!(ns.ns_ingest(&report(up(1, 7), 2, -80.0, 2), ms(3)), Ingest::Duplicate);
        let seen: Vec<BbrId> = ns.bbr_table.candidates(NodeId(1), ms(3)).iter().map(|c| c.bbr).collect();
        assert_eq!(seen, vec![BbrId(1), BbrId(2)]);
        assert_eq!(ns.ns_ingest(&report(up(1, 7), 1, -70.0, 0), ms(5002)), Ingest::Accepted);
    }

    #[test]
    fn routing_follows_best_bbr() {
        let mut ns = NsState::new(NsConfig::default());
        ns.ns_ingest(&report(up(1, 1), 1, -85.0, 0), ms(0));
        ns.ns_ingest(&report(up(1, 1), 2, -60.0, 0), ms(0));
        let r = ns.ns_route_downlink(down(1, 10), ms(10)).unwrap();
        assert_eq!(r.bbr, BbrId(2));
    }

    #[test]
    fn spatial_reuse_routes_to_different_bbrs() {
        let mut ns = NsState::new(NsConfig::default());
        ns.ns_ingest(&report(up(1, 1), 1, -60.0, 0), ms(0));
        ns.ns_ingest(&report(up(2, 1), 2, -60.0, 0), ms(0));
        assert_eq!(ns.ns_route_downlink(down(1, 5), ms(5)).unwrap().bbr, BbrId(1));
        assert_eq!(ns.ns_route_downlink(down(2, 5), ms(5)).unwrap().bbr, BbrId(2));
    }

    #[test]
    fn no_route_holds_then_flushes_or_drops() {
        let mut ns = NsState::new(NsConfig::default());
        assert_eq!(ns.ns_route_downlink(down(1, 0), ms(0)), Err(NoRoute(NodeId(1))));
        assert_eq!(ns.ns_route_downlink(down(1, 9_000), ms(9_000)), Err(NoRoute(NodeId(1))));
        assert_eq!(ns.pending_for(NodeId(1)), 2);
        ns.ns_ingest(&report(up(1, 1), 1, -70.0, 0), ms(10_500));
        let (routed, dropped) = ns.flush_pending(NodeId(1), ms(10_500));
        assert_eq!(dropped.len(), 1);
        assert_eq!(dropped[0].created_at, ms(0));
        assert_eq!(routed.len(), 1);
        assert_eq!(routed[0].bbr, BbrId(1));
        assert_eq!(ns.pending_for(NodeId(1)), 0);
    }

    #[test]
    fn negotiation_grants_are_idempotent() {
        let cfg = SlotframeConfig::with_length(97).unwrap();
        let mut ns = NsState::new(NsConfig::default());
        let first = ns.handle_negotiation(NodeId(1), &[3, 4], 2, &cfg);
        let again = ns.handle_negotiation(NodeId(1), &[9], 5, &cfg);
        assert_eq!(first, again);
        match first {
            GrantReply::Granted { downlink, uplink, .. } => {
                assert_eq!(downlink.slot_offset, 1);
                assert_eq!(uplink.slot_offset, 3);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(ns.handle_negotiation(NodeId(2), &[3], 0, &cfg), GrantReply::Rejected { node: NodeId(2) });
    }
}
