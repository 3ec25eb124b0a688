use std::collections::VecDeque;
use std::sync::Arc;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::engine::metrics::{ClockSample, CollisionRecord, MetricsLog, NsTraceEntry, PacketKind};
use crate::engine::queue::EventQueue;
use crate::engine::rng::Streams;
use crate::protocol::bbr::{BbrSlot, BorderRouter, ScheduleSource};
use crate::protocol::frame::{Addr, Frame, GrantReply, Payload};
use crate::protocol::node::{MobileNode, NodeEvent, NodeParams, NodeSlot, Sender};
use crate::protocol::ns::{grant_request, Ingest, NsConfig, NsState, UplinkReport};
use crate::radio::{position_at, rssi_at, RxView, SlotOutcome, TransmissionAttempt};
use crate::scenario::{Direction, JoinMode, Scenario, SyncMode};
use crate::scheduler::{propagate_schedule, MasterSchedule, ScheduleReplica};
use crate::time::SimTime;
use crate::time_sync::{apply_sync, clock_read, node_frame_sync, vgm_emit_sync, ClockState, Timebase, VgmState};
use crate::tsch::{channel_for, Asn, BbrId, CellRole, NodeId, Party};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RunError {
    #[error("scenario cannot be run: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Dev {
    Bbr(usize),
    Node(usize),
}

#[derive(Debug, Clone)]
pub enum BackboneMsg {
    Report(UplinkReport),
    Negotiation(UplinkReport),
    Downlink { bbr: usize, node: NodeId, frame: Frame, packet: u64 },
    Install { bbr: usize, schedule: Arc<MasterSchedule> },
    Grant { bbr: usize, grant: GrantReply },
    Sync { bbr: usize, msg: crate::time_sync::SyncMessage },
}

#[derive(Debug, Clone, Copy)]
pub enum Timer {
    /// Mid-slot reception check for a listener whose slot began at `boundary`.
    Resolve { listener: Dev, channel: u8, boundary: SimTime },
    /// Reception check for a scanning node hearing a beacon that started at `boundary`.
    Scan { node: usize, channel: u8, boundary: SimTime },
    ClockSample,
    Boot { bbr: usize },
}

#[derive(Debug, Clone)]
pub enum EventKind {
    SlotBoundary { dev: Dev, asn: Asn, epoch: u64 },
    Backbone(BackboneMsg),
    AppTraffic { node: usize },
    SyncEmit,
    Timer(Timer),
}

#[derive(Debug, Clone)]
struct Tx {
    sender: Party,
    frame: Frame,
    channel: u8,
    asn: Asn,
    start: SimTime,
    position: f64,
    role: CellRole,
}

#[derive(Debug, Clone, Copy, Default)]
struct DevState {
    epoch: u64,
    last_asn: Option<u64>,
}

struct Sim<'a> {
    sc: &'a Scenario,
    slot: f64,
    q: EventQueue<EventKind>,
    now: SimTime,
    rng: Streams,
    shadow: Option<Normal<f64>>,
    bbrs: Vec<BorderRouter>,
    bbr_dev: Vec<DevState>,
    nodes: Vec<MobileNode>,
    node_dev: Vec<DevState>,
    traffic_started: Vec<bool>,
    ns: NsState,
    air: VecDeque<Tx>,
    log: MetricsLog,
    horizon: SimTime,
    traffic_stop: SimTime,
}

/// Executes `scenario` up to its horizon. The result depends only on the
/// scenario, including its seed.
pub fn run(scenario: &Scenario) -> Result<MetricsLog, RunError> {
    let mut sim = Sim::new(scenario)?;
    sim.start()?;
    sim.run_loop();
    Ok(sim.finish())
}

fn delay(secs: f64) -> SimTime {
    SimTime::from_secs_f64(secs)
}

/// Smallest ASN not before `base` whose slot offset is in `slots`.
fn next_active(base: u64, slots: &[u16], length: u16) -> Option<u64> {
    let len = length as u64;
    let off = base % len;
    slots
        .iter()
        .map(|&s| {
            let s = s as u64;
            if s >= off {
                base + (s - off)
            } else {
                base + (len - off) + s
            }
        })
        .min()
}

impl<'a> Sim<'a> {
    fn new(sc: &'a Scenario) -> Result<Self, RunError> {
        let mut rng = Streams::new(sc.seed);
        let max_drift = sc.sync.max_drift_ppm;
        let drift = |r: &mut rand_chacha::ChaCha8Rng| if max_drift > 0.0 { r.random_range(-max_drift..=max_drift) } else { 0.0 };
        let bound = sc.sync.sync_error_bound;
        let bbrs = sc
            .bbrs
            .iter()
            .enumerate()
            .map(|(i, b)| {
                let d = drift(&mut rng.drift);
                let offset = if bound > 0.0 { rng.clock_init.random_range(-bound..=bound) } else { 0.0 };
                let source = match sc.sync_mode {
                    SyncMode::Vgm => ScheduleSource::Replica(ScheduleReplica::empty()),
                    SyncMode::Baseline => ScheduleSource::Local(MasterSchedule::new()),
                };
                BorderRouter::new(BbrId(i as u16 + 1), b.position, i as u16, ClockState::new(d, offset, 0.0), source)
            })
            .collect::<Vec<_>>();
        let cfg = &sc.slotframe;
        let nodes = sc
            .all_nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| {
                let d = drift(&mut rng.drift);
                let offset = rng.clock_init.random_range(-0.5..=0.5);
                let scan_channel = *cfg.hopping_sequence().choose(&mut rng.scan).expect("channels");
                let up_off = rng.negotiation.random_range(0..cfg.num_channel_offsets());
                MobileNode::scanning(
                    NodeId(i as u32 + 1),
                    n.trajectory,
                    ClockState::new(d, offset, 0.0),
                    scan_channel,
                    up_off,
                    NodeParams::default(),
                )
            })
            .collect::<Vec<_>>();
        let shadow = if sc.radio.shadowing_sigma_db > 0.0 {
            Some(Normal::new(0.0, sc.radio.shadowing_sigma_db).map_err(|e| RunError::Config(e.to_string()))?)
        } else {
            None
        };
        let horizon = delay(sc.horizon);
        let n = nodes.len();
        Ok(Self {
            sc,
            slot: cfg.slot_duration(),
            q: EventQueue::new(),
            now: SimTime::ZERO,
            rng,
            shadow,
            bbr_dev: vec![DevState::default(); bbrs.len()],
            bbrs,
            node_dev: vec![DevState::default(); n],
            traffic_started: vec![false; n],
            nodes,
            ns: NsState::new(NsConfig::default()),
            air: VecDeque::new(),
            log: MetricsLog { horizon, slotframe_duration: cfg.slotframe_duration(), ..Default::default() },
            horizon,
            traffic_stop: delay((sc.horizon - sc.traffic.drain).max(0.0)),
        })
    }

    fn bb(&self) -> SimTime {
        self.now + delay(self.sc.sync.backbone_delay)
    }

    fn start(&mut self) -> Result<(), RunError> {
        self.provision_schedule()?;
        match self.sc.sync_mode {
            SyncMode::Vgm => {
                for i in 0..self.bbrs.len() {
                    self.boot(i);
                }
                let ids: Vec<BbrId> = self.bbrs.iter().map(|b| b.id).collect();
                for ev in propagate_schedule(&self.ns.schedule, &mut self.ns.last_propagated, &ids, self.now, delay(self.sc.sync.backbone_delay)) {
                    let bbr = (ev.bbr.0 - 1) as usize;
                    self.q.push(ev.due, EventKind::Backbone(BackboneMsg::Install { bbr, schedule: ev.schedule }));
                }
                self.q.push(delay(self.sc.sync.sync_period), EventKind::SyncEmit);
            }
            SyncMode::Baseline => {
                for i in 0..self.bbrs.len() {
                    let at = i as f64 * 0.5 + self.rng.clock_init.random_range(0.0..0.25);
                    self.q.push(delay(at), EventKind::Timer(Timer::Boot { bbr: i }));
                }
            }
        }
        self.q.push(SimTime::ZERO, EventKind::Timer(Timer::ClockSample));
        Ok(())
    }

    fn nearest_bbr(&self, pos: f64) -> usize {
        (0..self.bbrs.len())
            .min_by(|&a, &b| (self.bbrs[a].position - pos).abs().total_cmp(&(self.bbrs[b].position - pos).abs()))
            .expect("at least one router")
    }

    /// Builds cells for provisioned nodes up front, in node order.
    fn provision_schedule(&mut self) -> Result<(), RunError> {
        let cfg = &self.sc.slotframe;
        let specs = self.sc.all_nodes();
        for (i, spec) in specs.iter().enumerate() {
            if spec.join != JoinMode::Provisioned {
                continue;
            }
            let node = self.nodes[i].id;
            let parent = self.nearest_bbr(spec.trajectory.start_pos);
            let ms = match self.sc.sync_mode {
                SyncMode::Vgm => &mut self.ns.schedule,
                SyncMode::Baseline => self.bbrs[parent].local_schedule_mut().expect("local schedule"),
            };
            let free = ms.free_pool_slots(cfg);
            let off = self.rng.negotiation.random_range(0..cfg.num_channel_offsets());
            match grant_request(ms, node, &free, off, cfg) {
                GrantReply::Granted { .. } => {}
                _ => return Err(RunError::Config(format!("no room to provision node {node}"))),
            }
        }
        Ok(())
    }

    fn boot(&mut self, i: usize) {
        let t = self.now.as_secs_f64();
        let tb = match self.sc.sync_mode {
            SyncMode::Vgm => Timebase { pan: 0, t_ref: 0.0 },
            SyncMode::Baseline => Timebase { pan: i as u16 + 1, t_ref: clock_read(&self.bbrs[i].clock, t) },
        };
        self.bbrs[i].timebase = Some(tb);
        self.bbrs[i].rebuild_index(&self.sc.slotframe);
        self.schedule_boundary(Dev::Bbr(i));
        let specs = self.sc.all_nodes();
        for (j, spec) in specs.iter().enumerate() {
            if spec.join == JoinMode::Provisioned && self.nearest_bbr(spec.trajectory.start_pos) == i {
                self.provision_node(j, i);
            }
        }
    }

    fn provision_node(&mut self, j: usize, parent: usize) {
        let t = self.now.as_secs_f64();
        let b = &self.bbrs[parent];
        let ms = match self.sc.sync_mode {
            SyncMode::Vgm => &self.ns.schedule,
            SyncMode::Baseline => b.schedule().expect("local schedule"),
        };
        let id = self.nodes[j].id;
        let (dl, ul) = (ms.downlink_of(id).expect("provisioned"), ms.uplink_of(id).expect("provisioned"));
        let old = &self.nodes[j];
        let clock = node_frame_sync(&old.clock, &b.clock, t, self.sc.sync.sync_error_bound, &mut self.rng.sync);
        let mut n = MobileNode::provisioned(
            id,
            old.trajectory,
            clock,
            b.timebase.expect("booted"),
            (b.id, b.eb_channel_offset),
            dl,
            ul,
            NodeParams::default(),
            t,
        );
        n.announce(self.now);
        self.nodes[j] = n;
        self.schedule_boundary(Dev::Node(j));
    }

    fn dev_clock(&self, dev: Dev) -> (ClockState, Option<Timebase>, Vec<u16>) {
        match dev {
            Dev::Bbr(i) => (self.bbrs[i].clock, self.bbrs[i].timebase, self.bbrs[i].active_slots()),
            Dev::Node(j) => {
                let n = &self.nodes[j];
                (n.clock, n.timebase(), n.active_slots(&self.sc.slotframe))
            }
        }
    }

    fn dev_state(&mut self, dev: Dev) -> &mut DevState {
        match dev {
            Dev::Bbr(i) => &mut self.bbr_dev[i],
            Dev::Node(j) => &mut self.node_dev[j],
        }
    }

    /// (Re)plans the next active slot boundary of `dev` from its current
    /// clock; any previously planned boundary becomes stale.
    fn schedule_boundary(&mut self, dev: Dev) {
        let (clock, tb, active) = self.dev_clock(dev);
        let now = self.now;
        let slot = self.slot;
        let length = self.sc.slotframe.length();
        let st = self.dev_state(dev);
        st.epoch += 1;
        let epoch = st.epoch;
        let last = st.last_asn;
        let Some(tb) = tb else { return };
        let nt = tb.network_time(&clock, now.as_secs_f64());
        let current = (nt / slot).floor() as i64;
        let from = match last {
            Some(l) => (l as i64 + 1).max(current + 1),
            None => current + 1,
        };
        let Some(asn) = next_active(from.max(0) as u64, &active, length) else {
            return;
        };
        let due = SimTime::ceil_secs_f64(tb.true_time_at(&clock, asn as f64 * slot)).max(now);
        self.q.push(due, EventKind::SlotBoundary { dev, asn: Asn(asn), epoch });
    }

    fn run_loop(&mut self) {
        while let Some(ev) = self.q.pop() {
            if ev.due > self.horizon {
                break;
            }
            debug_assert!(ev.due >= self.now, "event in the past");
            self.now = ev.due;
            match ev.kind {
                EventKind::SlotBoundary { dev, asn, epoch } => {
                    if self.dev_state(dev).epoch == epoch {
                        self.slot_boundary(dev, asn);
                    }
                }
                EventKind::Backbone(msg) => self.backbone(msg),
                EventKind::AppTraffic { node } => self.app_traffic(node),
                EventKind::SyncEmit => self.sync_emit(),
                EventKind::Timer(t) => self.timer(t),
            }
        }
    }

    fn position(&self, who: Party, at: SimTime) -> f64 {
        match who {
            Party::Bbr(b) => self.bbrs[(b.0 - 1) as usize].position,
            Party::Node(n) => position_at(&self.nodes[(n.0 - 1) as usize].trajectory, at.as_secs_f64()),
        }
    }

    fn transmit(&mut self, sender: Party, frame: Frame, cell: crate::tsch::Cell, asn: Asn) {
        let channel = channel_for(asn, cell.channel_offset, &self.sc.slotframe).expect("validated cell");
        let position = self.position(sender, self.now);
        if cell.role == CellRole::Eb {
            for (j, n) in self.nodes.iter().enumerate() {
                if n.timebase().is_none() && n.scan_channel() == channel {
                    let due = self.now + delay(self.slot / 2.0);
                    self.q.push(due, EventKind::Timer(Timer::Scan { node: j, channel, boundary: self.now }));
                }
            }
        }
        self.air.push_back(Tx { sender, frame, channel, asn, start: self.now, position, role: cell.role });
    }

    fn listen(&mut self, dev: Dev, cell: crate::tsch::Cell, asn: Asn) {
        let channel = channel_for(asn, cell.channel_offset, &self.sc.slotframe).expect("validated cell");
        let due = self.now + delay(self.slot / 2.0);
        self.q.push(due, EventKind::Timer(Timer::Resolve { listener: dev, channel, boundary: self.now }));
    }

    fn slot_boundary(&mut self, dev: Dev, asn: Asn) {
        self.dev_state(dev).last_asn = Some(asn.0);
        match dev {
            Dev::Bbr(i) => {
                let party = Party::Bbr(self.bbrs[i].id);
                match self.bbrs[i].slot_action(asn, &self.sc.slotframe, self.now) {
                    BbrSlot::Transmit { frame, cell } => self.transmit(party, frame, cell, asn),
                    BbrSlot::Listen { cell } => self.listen(dev, cell, asn),
                    BbrSlot::Sleep => {}
                }
            }
            Dev::Node(j) => {
                let t = self.now.as_secs_f64();
                let party = Party::Node(self.nodes[j].id);
                let out = self.nodes[j].step(
                    asn,
                    t,
                    self.now,
                    &self.sc.slotframe,
                    &self.sc.sync,
                    &mut self.rng.negotiation,
                    &mut self.rng.scan,
                );
                self.drain_transitions(j);
                match out {
                    NodeSlot::Transmit { frame, cell } => self.transmit(party, frame, cell, asn),
                    NodeSlot::Listen { cell } => self.listen(dev, cell, asn),
                    NodeSlot::Sleep => {}
                }
            }
        }
        self.schedule_boundary(dev);
    }

    fn drain_transitions(&mut self, j: usize) {
        let id = self.nodes[j].id;
        for c in self.nodes[j].take_transitions() {
            self.log.phases.push((id, c));
        }
    }

    fn timer(&mut self, t: Timer) {
        match t {
            Timer::Resolve { listener, channel, boundary } => {
                let party = match listener {
                    Dev::Bbr(i) => Party::Bbr(self.bbrs[i].id),
                    Dev::Node(j) => Party::Node(self.nodes[j].id),
                };
                self.resolve(listener, party, channel, boundary);
            }
            Timer::Scan { node, channel, boundary } => {
                if self.nodes[node].timebase().is_none() && self.nodes[node].scan_channel() == channel {
                    self.resolve(Dev::Node(node), Party::Node(self.nodes[node].id), channel, boundary);
                }
            }
            Timer::ClockSample => {
                self.sample_clocks();
                let next = self.now + delay(self.sc.slotframe.slotframe_duration());
                self.q.push(next, EventKind::Timer(Timer::ClockSample));
            }
            Timer::Boot { bbr } => self.boot(bbr),
        }
    }

    fn sample_clocks(&mut self) {
        let t = self.now.as_secs_f64();
        let values: Vec<f64> = self
            .bbrs
            .iter()
            .filter_map(|b| {
                let tb = b.timebase?;
                Some(match self.sc.sync_mode {
                    SyncMode::Vgm => b.clock.error_at(t),
                    SyncMode::Baseline => tb.network_time(&b.clock, t),
                })
            })
            .collect();
        if values.len() < 2 {
            return;
        }
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        self.log.clock_samples.push(ClockSample { t: self.now, max_pairwise: max - min });
    }

    fn resolve(&mut self, listener: Dev, party: Party, channel: u8, boundary: SimTime) {
        let horizon_back = self.now.saturating_sub(delay(2.0 * self.slot));
        while self.air.front().is_some_and(|tx| tx.start < horizon_back) {
            self.air.pop_front();
        }
        let half = delay(self.slot / 2.0);
        let lp = self.position(party, boundary);
        let candidates: Vec<usize> = (0..self.air.len())
            .filter(|&k| {
                let tx = &self.air[k];
                let gap = if tx.start > boundary { tx.start - boundary } else { boundary - tx.start };
                tx.channel == channel && tx.sender != party && gap <= half
            })
            .collect();
        if candidates.is_empty() {
            return;
        }
        let mut attempts = Vec::with_capacity(candidates.len());
        for &k in &candidates {
            let tx = &self.air[k];
            let mut rssi = rssi_at(&self.sc.radio, (tx.position - lp).abs());
            if let Some(n) = &self.shadow {
                rssi += n.sample(&mut self.rng.shadowing);
            }
            let timing_error = boundary.as_secs_f64() - tx.start.as_secs_f64();
            attempts.push(TransmissionAttempt {
                sender: tx.sender,
                frame: k,
                channel,
                asn: tx.asn,
                rx: [(party, RxView { rssi_dbm: rssi, timing_error })].into_iter().collect(),
            });
        }
        let sens = self.sc.radio.sensitivity_dbm;
        let guard = match listener {
            Dev::Node(j) if self.nodes[j].timebase().is_none() => f64::INFINITY,
            _ => self.sc.sync.guard_time,
        };
        let outcome = crate::radio::deliver_slot(&attempts, &[(party, channel)], sens, guard)[0].1;
        match outcome {
            SlotOutcome::Delivered { attempt, rssi_dbm } => {
                let tx = self.air[attempts[attempt].frame].clone();
                self.deliver(listener, tx, rssi_dbm);
            }
            SlotOutcome::Collision { .. } => {
                let roles = attempts
                    .iter()
                    .filter(|a| a.rx[&party].rssi_dbm >= sens)
                    .map(|a| self.air[a.frame].role)
                    .collect();
                self.log.collisions.push(CollisionRecord { t: self.now, listener: party, roles });
            }
            SlotOutcome::Nothing => {}
        }
    }

    fn deliver(&mut self, listener: Dev, tx: Tx, rssi: f64) {
        match listener {
            Dev::Bbr(i) => self.bbr_receive(i, &tx.frame, rssi, tx.start),
            Dev::Node(j) => {
                let Party::Bbr(b) = tx.sender else { return };
                let bi = (b.0 - 1) as usize;
                let from = &self.bbrs[bi];
                let Some(timebase) = from.timebase else { return };
                let sender = Sender { bbr: from.id, clock: from.clock, timebase, eb_channel_offset: from.eb_channel_offset };
                let t = self.now.as_secs_f64();
                let events = self.nodes[j].on_frame(&tx.frame, &sender, t, self.now, &self.sc.sync, &mut self.rng.sync);
                self.drain_transitions(j);
                for ev in events {
                    if let NodeEvent::RequestReceived { packet, payload_len } = ev {
                        self.log.record_mut(packet).dup_count += 1;
                        let id = self.nodes[j].id;
                        let reply = self.log.new_packet(Direction::Uplink, self.now, id, PacketKind::Reply { request: packet });
                        // A full queue drops the reply; the request then stays unanswered.
                        let _ = self.nodes[j].enqueue(Payload::Reply { packet: reply, request: packet }, payload_len, self.now);
                    }
                }
                self.schedule_boundary(listener);
            }
        }
    }

    fn bbr_receive(&mut self, i: usize, frame: &Frame, rssi: f64, heard: SimTime) {
        let Some(report) = self.bbrs[i].bbr_handle_uplink(frame, rssi, heard) else {
            return;
        };
        if let Payload::NegotiationRequest { candidates, channel_offset, parent } = &frame.payload {
            match self.sc.sync_mode {
                SyncMode::Vgm => {
                    let due = self.bb();
                    self.q.push(due, EventKind::Backbone(BackboneMsg::Negotiation(report)));
                }
                SyncMode::Baseline => {
                    if *parent != self.bbrs[i].id {
                        return;
                    }
                    let node = report.frame.src_node().expect("node frame");
                    let cfg = &self.sc.slotframe;
                    let ms = self.bbrs[i].local_schedule_mut().expect("local schedule");
                    let grant = grant_request(ms, node, candidates, *channel_offset, cfg);
                    self.bbrs[i].rebuild_index(cfg);
                    self.bbrs[i].queue_grant(grant);
                    self.schedule_boundary(Dev::Bbr(i));
                }
            }
            return;
        }
        let due = self.bb();
        self.q.push(due, EventKind::Backbone(BackboneMsg::Report(report)));
    }

    fn backbone(&mut self, msg: BackboneMsg) {
        match msg {
            BackboneMsg::Report(report) => self.ns_report(report),
            BackboneMsg::Negotiation(report) => {
                let Payload::NegotiationRequest { candidates, channel_offset, parent } = &report.frame.payload else {
                    return;
                };
                let node = report.frame.src_node().expect("node frame");
                let grant = self.ns.handle_negotiation(node, candidates, *channel_offset, &self.sc.slotframe);
                let ids: Vec<BbrId> = self.bbrs.iter().map(|b| b.id).collect();
                let bb = delay(self.sc.sync.backbone_delay);
                for ev in propagate_schedule(&self.ns.schedule, &mut self.ns.last_propagated, &ids, self.now, bb) {
                    let bbr = (ev.bbr.0 - 1) as usize;
                    self.q.push(ev.due, EventKind::Backbone(BackboneMsg::Install { bbr, schedule: ev.schedule }));
                }
                let due = self.bb();
                self.q.push(due, EventKind::Backbone(BackboneMsg::Grant { bbr: (parent.0 - 1) as usize, grant }));
            }
            BackboneMsg::Downlink { bbr, node, frame, packet } => {
                self.log.record_mut(packet).bbr_set.insert(self.bbrs[bbr].id.0);
                self.bbrs[bbr].enqueue_downlink(node, frame);
            }
            BackboneMsg::Install { bbr, schedule } => {
                if self.bbrs[bbr].install_schedule(schedule, &self.sc.slotframe) {
                    self.schedule_boundary(Dev::Bbr(bbr));
                }
            }
            BackboneMsg::Grant { bbr, grant } => self.bbrs[bbr].queue_grant(grant),
            BackboneMsg::Sync { bbr, msg } => {
                let b = &mut self.bbrs[bbr];
                let t = self.now.as_secs_f64();
                b.clock = apply_sync(&b.clock, &msg, self.sc.sync.backbone_delay, t, self.sc.sync.sync_error_bound, &mut self.rng.sync);
                self.schedule_boundary(Dev::Bbr(bbr));
            }
        }
    }

    fn ns_report(&mut self, report: UplinkReport) {
        let Some(node) = report.frame.src_node() else { return };
        let outcome = self.ns.ns_ingest(&report, self.now);
        self.log.ns_trace.push(NsTraceEntry {
            t: self.now,
            src: node,
            frame_seq: report.frame.seq,
            hash: report.frame.dedup_hash(),
            outcome,
        });
        if let Some(packet) = report.frame.payload.app_packet() {
            let r = self.log.record_mut(packet);
            r.dup_count += 1;
            r.bbr_set.insert(report.bbr.0);
            if outcome == Ingest::Accepted && self.log.deliver(packet, self.now) {
                self.log.aux[packet as usize].heard_at = Some(report.heard_at);
                if let Payload::Reply { request, .. } = report.frame.payload {
                    self.log.deliver(request, self.now);
                }
            }
        }
        if outcome != Ingest::Accepted {
            return;
        }
        let j = (node.0 - 1) as usize;
        if !self.traffic_started[j] {
            self.traffic_started[j] = true;
            let due = self.now + delay(self.sc.traffic.start_delay);
            self.q.push(due, EventKind::AppTraffic { node: j });
        }
        let (routed, _dropped) = self.ns.flush_pending(node, self.now);
        for r in routed {
            self.send_downlink(r.bbr, r.frame);
        }
    }

    fn send_downlink(&mut self, bbr: BbrId, frame: Frame) {
        let Addr::Node(node) = frame.dst else { return };
        let Some(packet) = frame.payload.app_packet() else { return };
        let due = self.bb();
        self.q.push(due, EventKind::Backbone(BackboneMsg::Downlink { bbr: (bbr.0 - 1) as usize, node, frame, packet }));
    }

    fn app_traffic(&mut self, j: usize) {
        if self.now >= self.traffic_stop {
            return;
        }
        let tr = self.sc.traffic;
        let id = self.nodes[j].id;
        match tr.direction {
            Direction::Downlink => {
                self.ns.expire_pending(self.now);
                let packet = self.log.new_packet(Direction::Downlink, self.now, id, PacketKind::Request);
                let frame = Frame::downlink(id, packet as u32, tr.payload_bytes, self.now, Payload::Request { packet })
                    .expect("validated payload length");
                if let Ok(r) = self.ns.ns_route_downlink(frame, self.now) {
                    self.send_downlink(r.bbr, r.frame);
                }
            }
            Direction::Uplink => {
                let packet = self.log.new_packet(Direction::Uplink, self.now, id, PacketKind::Data);
                let _ = self.nodes[j].enqueue(Payload::Data { packet }, tr.payload_bytes, self.now);
            }
        }
        let next = self.now + delay(tr.period);
        self.q.push(next, EventKind::AppTraffic { node: j });
    }

    fn sync_emit(&mut self) {
        let t = self.now.as_secs_f64();
        let vgm = VgmState { t_ref: 0.0, sync_period: self.sc.sync.sync_period, slot_duration: self.slot };
        if let Ok(msg) = vgm_emit_sync(&vgm, t) {
            let due = self.bb();
            for bbr in 0..self.bbrs.len() {
                self.q.push(due, EventKind::Backbone(BackboneMsg::Sync { bbr, msg }));
            }
        }
        let next = self.now + delay(self.sc.sync.sync_period);
        self.q.push(next, EventKind::SyncEmit);
    }

    fn finish(mut self) -> MetricsLog {
        let direction = self.sc.traffic.direction;
        let kind = move |k: PacketKind| match direction {
            Direction::Downlink => k == PacketKind::Request,
            Direction::Uplink => k == PacketKind::Data,
        };
        self.log.compute_outages(direction, &kind);
        if self.sc.sync_mode == SyncMode::Vgm {
            self.log.final_schedule = Some(self.ns.schedule.clone());
        }
        self.log
    }
}
