use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::protocol::frame::{Addr, Frame, FrameError, GrantReply, L2Kind, Payload, MIN_PAYLOAD};
use crate::radio::Trajectory;
use crate::scheduler::{DownlinkAssignment, MasterSchedule, EB_SLOT, NEGOTIATION_CANDIDATES};
use crate::time::SimTime;
use crate::time_sync::{is_desynchronized, node_frame_sync, ClockState, SyncParams, Timebase};
use crate::tsch::{schedule_action, slot_offset_of, Action, Asn, BbrId, Cell, CellRole, NodeId, Owner, Party, SlotframeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Scanning,
    Synchronizing,
    Negotiating,
    Operational,
    Desync,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Scanning => "SCANNING",
            Phase::Synchronizing => "SYNCHRONIZING",
            Phase::Negotiating => "NEGOTIATING",
            Phase::Operational => "OPERATIONAL",
            Phase::Desync => "DESYNC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseChange {
    pub at: f64,
    pub from: Phase,
    pub to: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeParams {
    pub queue_capacity: usize,
    /// Transmit probability in the negotiation contention cell.
    pub negotiation_p: f64,
}

impl Default for NodeParams {
    fn default() -> Self {
        Self { queue_capacity: 16, negotiation_p: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeSlot {
    Transmit { frame: Frame, cell: Cell },
    Listen { cell: Cell },
    Sleep,
}

/// What the engine knows about the router a frame came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sender {
    pub bbr: BbrId,
    pub clock: ClockState,
    pub timebase: Timebase,
    pub eb_channel_offset: u16,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeEvent {
    Synchronized,
    Joined,
    RequestReceived { packet: u64, payload_len: u16 },
}

#[derive(Debug, Clone)]
pub struct MobileNode {
    pub id: NodeId,
    pub trajectory: Trajectory,
    pub clock: ClockState,
    phase: Phase,
    timebase: Option<Timebase>,
    parent: Option<(BbrId, u16)>,
    scan_channel: u8,
    view: Option<Arc<MasterSchedule>>,
    downlink: Option<DownlinkAssignment>,
    uplink: Option<Cell>,
    uplink_channel_offset: u16,
    queue: VecDeque<Frame>,
    params: NodeParams,
    last_heard: f64,
    seq: u32,
    skip_negotiation: bool,
    transitions: Vec<PhaseChange>,
}

impl MobileNode {
    pub fn scanning(
        id: NodeId,
        trajectory: Trajectory,
        clock: ClockState,
        scan_channel: u8,
        uplink_channel_offset: u16,
        params: NodeParams,
    ) -> Self {
        Self {
            id,
            trajectory,
            clock,
            phase: Phase::Scanning,
            timebase: None,
            parent: None,
            scan_channel,
            view: None,
            downlink: None,
            uplink: None,
            uplink_channel_offset,
            queue: VecDeque::new(),
            params,
            last_heard: 0.0,
            seq: 0,
            skip_negotiation: false,
            transitions: Vec::new(),
        }
    }

    /// A node installed with its cells ahead of time, already synchronized at `t`.
    #[allow(clippy::too_many_arguments)]
    pub fn provisioned(
        id: NodeId,
        trajectory: Trajectory,
        clock: ClockState,
        timebase: Timebase,
        parent: (BbrId, u16),
        downlink: DownlinkAssignment,
        uplink: Cell,
        params: NodeParams,
        t: f64,
    ) -> Self {
        let mut n = Self::scanning(id, trajectory, clock, 0, uplink.channel_offset, params);
        n.phase = Phase::Operational;
        n.timebase = Some(timebase);
        n.parent = Some(parent);
        n.downlink = Some(downlink);
        n.uplink = Some(uplink);
        n.last_heard = t;
        n
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn timebase(&self) -> Option<Timebase> {
        self.timebase
    }

    pub fn parent(&self) -> Option<BbrId> {
        self.parent.map(|(b, _)| b)
    }

    pub fn scan_channel(&self) -> u8 {
        self.scan_channel
    }

    pub fn downlink(&self) -> Option<DownlinkAssignment> {
        self.downlink
    }

    pub fn uplink(&self) -> Option<Cell> {
        self.uplink
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn queued(&self) -> impl Iterator<Item = &Frame> {
        self.queue.iter()
    }

    pub fn take_transitions(&mut self) -> Vec<PhaseChange> {
        std::mem::take(&mut self.transitions)
    }

    fn set_phase(&mut self, to: Phase, at: f64) {
        if self.phase != to {
            self.transitions.push(PhaseChange { at, from: self.phase, to });
            self.phase = to;
        }
    }

    fn next_seq(&mut self) -> u32 {
        self.seq = self.seq.wrapping_add(1);
        self.seq
    }

    /// Queues an uplink payload; on overflow the new frame is dropped and returned.
    pub fn enqueue(&mut self, payload: Payload, payload_len: u16, now: SimTime) -> Result<(), EnqueueError> {
        let seq = self.next_seq();
        let frame = Frame::uplink(self.id, 0, seq, payload_len, now, payload).map_err(EnqueueError::Frame)?;
        if self.queue.len() >= self.params.queue_capacity {
            return Err(EnqueueError::Full(Box::new(frame)));
        }
        self.queue.push_back(frame);
        Ok(())
    }

    /// Puts a join announcement at the head of the uplink queue so the
    /// server learns a route to this node.
    pub fn announce(&mut self, now: SimTime) {
        let seq = self.next_seq();
        let join = Frame::uplink(self.id, 0, seq, MIN_PAYLOAD, now, Payload::JoinAnnounce).expect("fixed length is valid");
        self.queue.push_front(join);
    }

    fn eb_cell(&self) -> Option<Cell> {
        self.parent.map(|(b, off)| Cell::new(EB_SLOT, off, CellRole::Eb, Owner::Bbr(b)))
    }

    /// Cells the node currently runs.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells: Vec<Cell> = self.eb_cell().into_iter().collect();
        if self.phase == Phase::Operational {
            if let Some(d) = self.downlink {
                cells.push(Cell::new(d.slot_offset, d.channel_offset, CellRole::SharedDownlink, Owner::Node(self.id)));
            }
            cells.extend(self.uplink);
        }
        cells
    }

    /// Slot offsets in which [`MobileNode::step`] may do something.
    pub fn active_slots(&self, cfg: &SlotframeConfig) -> Vec<u16> {
        let mut slots: Vec<u16> = self.cells().iter().map(|c| c.slot_offset).collect();
        if self.phase == Phase::Negotiating {
            slots.push(cfg.negotiation_slot());
        }
        slots.sort_unstable();
        slots.dedup();
        slots
    }

    fn desync<R: Rng + ?Sized>(&mut self, t: f64, cfg: &SlotframeConfig, scan_rng: &mut R) {
        self.set_phase(Phase::Desync, t);
        self.timebase = None;
        self.parent = None;
        self.view = None;
        self.downlink = None;
        self.uplink = None;
        self.skip_negotiation = false;
        self.scan_channel = *cfg.hopping_sequence().choose(scan_rng).expect("non-empty hopping sequence");
        self.set_phase(Phase::Scanning, t);
    }

    /// One slot boundary of a synchronized node at true time `t`.
    #[allow(clippy::too_many_arguments)]
    pub fn step<R: Rng + ?Sized, S: Rng + ?Sized>(
        &mut self,
        asn: Asn,
        t: f64,
        now: SimTime,
        cfg: &SlotframeConfig,
        sync: &SyncParams,
        neg_rng: &mut R,
        scan_rng: &mut S,
    ) -> NodeSlot {
        let Some(tb) = self.timebase else {
            return NodeSlot::Sleep;
        };
        if t - self.last_heard > sync.desync_timeout || is_desynchronized(&self.clock, t, sync.guard_time) {
            self.desync(t, cfg, scan_rng);
            return NodeSlot::Sleep;
        }
        let slot = slot_offset_of(asn, cfg);
        match self.phase {
            Phase::Negotiating if slot == cfg.negotiation_slot() => {
                if std::mem::take(&mut self.skip_negotiation) || !neg_rng.random_bool(self.params.negotiation_p) {
                    return NodeSlot::Sleep;
                }
                let (Some(view), Some((parent, _))) = (&self.view, self.parent) else {
                    return NodeSlot::Sleep;
                };
                let after = match view.downlink_of(self.id) {
                    Some(d) => d.slot_offset,
                    None => {
                        let mut probe = MasterSchedule::clone(view);
                        match probe.allocate_downlink(self.id, cfg) {
                            Ok(d) => d.slot_offset,
                            Err(_) => return NodeSlot::Sleep,
                        }
                    }
                };
                let candidates = view.propose_candidates(cfg, NEGOTIATION_CANDIDATES, after, neg_rng);
                if candidates.is_empty() {
                    return NodeSlot::Sleep;
                }
                let seq = self.next_seq();
                let payload = Payload::NegotiationRequest { candidates, channel_offset: self.uplink_channel_offset, parent };
                let frame = Frame::uplink(self.id, tb.pan, seq, MIN_PAYLOAD, now, payload).expect("fixed length is valid");
                let cell = Cell::new(slot, 0, CellRole::Negotiation, Owner::Any);
                NodeSlot::Transmit { frame, cell }
            }
            Phase::Negotiating | Phase::Operational => {
                let cells = self.cells();
                let queued = !self.queue.is_empty();
                let pending = |c: &Cell| c.role == CellRole::NegUplink && queued;
                match schedule_action(&cells, asn, cfg, Party::Node(self.id), &pending) {
                    Action::Transmit(cell) => {
                        let mut frame = self.queue.pop_front().expect("pending implies a queued frame");
                        frame.pan = tb.pan;
                        NodeSlot::Transmit { frame, cell }
                    }
                    Action::Receive(cell) => NodeSlot::Listen { cell },
                    Action::Sleep => NodeSlot::Sleep,
                }
            }
            _ => NodeSlot::Sleep,
        }
    }

    /// A frame from a router was delivered to this node at true time `t`.
    pub fn on_frame<R: Rng + ?Sized>(
        &mut self,
        frame: &Frame,
        from: &Sender,
        t: f64,
        now: SimTime,
        sync: &SyncParams,
        rng: &mut R,
    ) -> Vec<NodeEvent> {
        let mut events = Vec::new();
        match self.phase {
            Phase::Scanning => {
                let Payload::Beacon { schedule, .. } = &frame.payload else {
                    return events;
                };
                self.clock = node_frame_sync(&self.clock, &from.clock, t, sync.sync_error_bound, rng);
                self.timebase = Some(from.timebase);
                self.parent = Some((from.bbr, from.eb_channel_offset));
                self.view = schedule.clone();
                self.last_heard = t;
                self.set_phase(Phase::Synchronizing, t);
                self.set_phase(Phase::Negotiating, t);
                events.push(NodeEvent::Synchronized);
            }
            Phase::Negotiating | Phase::Operational => {
                if self.timebase.is_none_or(|tb| tb.pan != frame.pan) {
                    return events;
                }
                if frame.l2_kind == L2Kind::Unicast && frame.dst != Addr::Node(self.id) {
                    return events;
                }
                self.clock = node_frame_sync(&self.clock, &from.clock, t, sync.sync_error_bound, rng);
                self.last_heard = t;
                self.parent = Some((from.bbr, from.eb_channel_offset));
                match &frame.payload {
                    Payload::Beacon { grants, schedule, .. } => {
                        if schedule.is_some() {
                            self.view = schedule.clone();
                        }
                        if self.phase != Phase::Negotiating {
                            return events;
                        }
                        match grants.iter().find(|g| g.node() == self.id) {
                            Some(&GrantReply::Granted { downlink, uplink, .. }) => {
                                self.downlink = Some(downlink);
                                self.uplink = Some(uplink);
                                self.set_phase(Phase::Operational, t);
                                self.announce(now);
                                events.push(NodeEvent::Joined);
                            }
                            Some(_) => self.skip_negotiation = true,
                            None => {}
                        }
                    }
                    Payload::Request { packet } if self.phase == Phase::Operational => {
                        events.push(NodeEvent::RequestReceived { packet: *packet, payload_len: frame.payload_len });
                    }
                    _ => {}
                }
            }
            Phase::Synchronizing | Phase::Desync => {}
        }
        events
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnqueueError {
    #[error("uplink queue full")]
    Full(Box<Frame>),
    #[error(transparent)]
    Frame(FrameError),
}
