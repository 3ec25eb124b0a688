use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use crate::protocol::frame::{Frame, GrantReply, L2Kind, Payload};
use crate::protocol::ns::UplinkReport;
use crate::scheduler::{MasterSchedule, ScheduleReplica, SlotIndex};
use crate::time::SimTime;
use crate::time_sync::{ClockState, Timebase};
use crate::tsch::{schedule_action, slot_offset_of, Action, Asn, BbrId, Cell, CellRole, NodeId, Owner, Party, SlotframeConfig};

/// Where a router takes its schedule from.
#[derive(Debug, Clone)]
pub enum ScheduleSource {
    /// Versioned copy pushed by the network server.
    Replica(ScheduleReplica),
    /// Router-local schedule of an unsynchronized, stand-alone network.
    Local(MasterSchedule),
}

#[derive(Debug, Clone, PartialEq)]
pub enum BbrSlot {
    Transmit { frame: Frame, cell: Cell },
    Listen { cell: Cell },
    Sleep,
}

#[derive(Debug, Clone)]
pub struct BorderRouter {
    pub id: BbrId,
    pub position: f64,
    pub eb_channel_offset: u16,
    pub clock: ClockState,
    pub timebase: Option<Timebase>,
    source: ScheduleSource,
    index: SlotIndex,
    queues: BTreeMap<NodeId, VecDeque<Frame>>,
    grants: BTreeMap<NodeId, GrantReply>,
    seq: u32,
}

impl BorderRouter {
    pub fn new(id: BbrId, position: f64, eb_channel_offset: u16, clock: ClockState, source: ScheduleSource) -> Self {
        Self {
            id,
            position,
            eb_channel_offset,
            clock,
            timebase: None,
            source,
            index: SlotIndex::default(),
            queues: BTreeMap::new(),
            grants: BTreeMap::new(),
            seq: 0,
        }
    }

    pub fn schedule(&self) -> Option<&MasterSchedule> {
        match &self.source {
            ScheduleSource::Replica(r) => r.schedule().map(|s| s.as_ref()),
            ScheduleSource::Local(ms) => Some(ms),
        }
    }

    pub fn schedule_version(&self) -> Option<u64> {
        self.schedule().map(MasterSchedule::version)
    }

    pub fn local_schedule_mut(&mut self) -> Option<&mut MasterSchedule> {
        match &mut self.source {
            ScheduleSource::Local(ms) => Some(ms),
            ScheduleSource::Replica(_) => None,
        }
    }

    /// Installs a pushed schedule; stale versions are ignored.
    pub fn install_schedule(&mut self, incoming: Arc<MasterSchedule>, cfg: &SlotframeConfig) -> bool {
        let installed = match &mut self.source {
            ScheduleSource::Replica(r) => r.install(incoming),
            ScheduleSource::Local(_) => false,
        };
        if installed {
            self.rebuild_index(cfg);
        }
        installed
    }

    pub fn rebuild_index(&mut self, cfg: &SlotframeConfig) {
        self.index = match self.schedule() {
            Some(ms) => SlotIndex::build(&ms.bbr_cells(self.id, self.eb_channel_offset, cfg), cfg),
            None => SlotIndex::default(),
        };
    }

    pub fn active_slots(&self) -> Vec<u16> {
        self.index.occupied()
    }

    pub fn enqueue_downlink(&mut self, node: NodeId, frame: Frame) {
        self.queues.entry(node).or_default().push_back(frame);
    }

    pub fn downlink_backlog(&self, node: NodeId) -> usize {
        self.queues.get(&node).map_or(0, VecDeque::len)
    }

    pub fn queue_grant(&mut self, grant: GrantReply) {
        self.grants.insert(grant.node(), grant);
    }

    pub fn pending_grants(&self) -> usize {
        self.grants.len()
    }

    /// EB frames stay on the MAC layer; data and negotiation traffic of this
    /// router's PAN is forwarded with the RSSI it was heard at.
    pub fn bbr_handle_uplink(&self, frame: &Frame, rssi_dbm: f64, t: SimTime) -> Option<UplinkReport> {
        if frame.l2_kind == L2Kind::Eb || frame.src_node().is_none() {
            return None;
        }
        if self.timebase.is_none_or(|tb| tb.pan != frame.pan) {
            return None;
        }
        Some(UplinkReport { frame: frame.clone(), rssi_dbm, bbr: self.id, heard_at: t })
    }

    /// Decides this router's action for `asn`. Among several nodes sharing a
    /// downlink slot, the one with the oldest queued frame is served.
    pub fn slot_action(&mut self, asn: Asn, cfg: &SlotframeConfig, now: SimTime) -> BbrSlot {
        let Some(tb) = self.timebase else {
            return BbrSlot::Sleep;
        };
        let slot = slot_offset_of(asn, cfg);
        let cells = self.index.at(slot);
        let served = cells
            .iter()
            .filter(|c| c.role == CellRole::SharedDownlink)
            .filter_map(|c| match c.owner {
                Owner::Node(n) => self.queues.get(&n).and_then(|q| q.front()).map(|f| (f.created_at, n)),
                _ => None,
            })
            .min()
            .map(|(_, n)| n);
        let pending = |c: &Cell| match c.role {
            CellRole::SharedDownlink => served.is_some() && c.owner == Owner::Node(served.unwrap()),
            CellRole::Eb => true,
            _ => false,
        };
        match schedule_action(cells, asn, cfg, Party::Bbr(self.id), &pending) {
            Action::Transmit(cell) if cell.role == CellRole::Eb => {
                let grants = std::mem::take(&mut self.grants).into_values().collect();
                let schedule = match &self.source {
                    ScheduleSource::Replica(r) => r.schedule().cloned(),
                    ScheduleSource::Local(ms) => Some(Arc::new(ms.clone())),
                };
                self.seq = self.seq.wrapping_add(1);
                let frame = Frame::beacon(
                    self.id,
                    tb.pan,
                    self.seq,
                    now,
                    Payload::Beacon { eb_channel_offset: self.eb_channel_offset, grants, schedule },
                );
                BbrSlot::Transmit { frame, cell }
            }
            Action::Transmit(cell) => {
                let Owner::Node(n) = cell.owner else { unreachable!("downlink cell owned by a node") };
                let q = self.queues.get_mut(&n).expect("served node has a queue");
                let mut frame = q.pop_front().expect("served node has a frame");
                if q.is_empty() {
                    self.queues.remove(&n);
                }
                frame.pan = tb.pan;
                BbrSlot::Transmit { frame, cell }
            }
            Action::Receive(cell) => BbrSlot::Listen { cell },
            Action::Sleep => BbrSlot::Sleep,
        }
    }
}
