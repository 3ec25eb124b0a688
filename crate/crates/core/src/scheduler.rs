//! Network-wide schedule held by the network server and replicated to every
//! border router.
//!
//! Slot 0 carries enhanced beacons, slot 1 is the first shared downlink slot,
//! and the last slot is the contention cell for negotiation requests. All
//! other slots form the negotiable pool. Downlink cells share a slot and are
//! separated by channel offset; uplink cells are separated in time.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::time::SimTime;
use crate::tsch::{BbrId, Cell, CellRole, NodeId, Owner, SlotframeConfig};

pub const EB_SLOT: u16 = 0;
pub const FIRST_DOWNLINK_SLOT: u16 = 1;
/// Candidate slots per negotiation request.
pub const NEGOTIATION_CANDIDATES: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScheduleError {
    #[error("node {0} already holds an assignment")]
    AlreadyAssigned(NodeId),
    #[error("slotframe exhausted: no free slot left in the negotiable pool")]
    Capacity,
    #[error("none of the candidate slots {0:?} is free")]
    AllCandidatesTaken(Vec<u16>),
    #[error("channel offset {0} out of range")]
    ChannelOffset(u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DownlinkAssignment {
    pub slot_offset: u16,
    pub channel_offset: u16,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasterSchedule {
    /// Downlink slot offsets in the order they were opened.
    downlink_slots: Vec<u16>,
    downlink: BTreeMap<NodeId, DownlinkAssignment>,
    uplink: BTreeMap<NodeId, Cell>,
    version: u64,
}

impl Default for MasterSchedule {
    fn default() -> Self {
        Self::new()
    }
}

impl MasterSchedule {
    pub fn new() -> Self {
        Self {
            downlink_slots: vec![FIRST_DOWNLINK_SLOT],
            downlink: BTreeMap::new(),
            uplink: BTreeMap::new(),
            version: 0,
        }
    }

    /// Builds a schedule from raw assignments without checking them; pair
    /// with [`validate_schedule`].
    pub fn from_parts(
        downlink: BTreeMap<NodeId, DownlinkAssignment>,
        uplink: BTreeMap<NodeId, Cell>,
        version: u64,
    ) -> Self {
        let mut downlink_slots = vec![FIRST_DOWNLINK_SLOT];
        let extra: BTreeSet<u16> = downlink.values().map(|a| a.slot_offset).collect();
        downlink_slots.extend(extra.into_iter().filter(|&s| s != FIRST_DOWNLINK_SLOT));
        Self { downlink_slots, downlink, uplink, version }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn downlink_slots(&self) -> &[u16] {
        &self.downlink_slots
    }

    pub fn downlink_of(&self, node: NodeId) -> Option<DownlinkAssignment> {
        self.downlink.get(&node).copied()
    }

    pub fn uplink_of(&self, node: NodeId) -> Option<Cell> {
        self.uplink.get(&node).copied()
    }

    pub fn downlink_assignments(&self) -> impl Iterator<Item = (NodeId, DownlinkAssignment)> + '_ {
        self.downlink.iter().map(|(n, a)| (*n, *a))
    }

    pub fn uplink_cells(&self) -> impl Iterator<Item = &Cell> + '_ {
        self.uplink.values()
    }

    pub fn node_count(&self) -> usize {
        self.downlink.keys().chain(self.uplink.keys()).collect::<BTreeSet<_>>().len()
    }

    fn bump(&mut self) {
        self.version += 1;
    }

    fn uplink_owner_of_slot(&self, slot: u16) -> Option<NodeId> {
        self.uplink.iter().find(|(_, c)| c.slot_offset == slot).map(|(n, _)| *n)
    }

    /// Slots of the negotiable pool that are neither downlink slots nor owned uplink slots.
    pub fn free_pool_slots(&self, cfg: &SlotframeConfig) -> Vec<u16> {
        let taken: BTreeSet<u16> = self
            .downlink_slots
            .iter()
            .copied()
            .chain(self.uplink.values().map(|c| c.slot_offset))
            .collect();
        (FIRST_DOWNLINK_SLOT + 1..cfg.negotiation_slot()).filter(|s| !taken.contains(s)).collect()
    }

    pub fn is_free_for_uplink(&self, slot: u16, cfg: &SlotframeConfig) -> bool {
        slot > FIRST_DOWNLINK_SLOT
            && slot < cfg.negotiation_slot()
            && !self.downlink_slots.contains(&slot)
            && self.uplink_owner_of_slot(slot).is_none()
    }

    /// Lowest free channel offset in the earliest downlink slot with room;
    /// opens a new downlink slot from the front of the pool when all are full.
    pub fn allocate_downlink(&mut self, node: NodeId, cfg: &SlotframeConfig) -> Result<DownlinkAssignment, ScheduleError> {
        if self.downlink.contains_key(&node) {
            return Err(ScheduleError::AlreadyAssigned(node));
        }
        let offsets = cfg.num_channel_offsets();
        for &slot in &self.downlink_slots {
            let used: BTreeSet<u16> = self
                .downlink
                .values()
                .filter(|a| a.slot_offset == slot)
                .map(|a| a.channel_offset)
                .collect();
            if let Some(off) = (0..offsets).find(|o| !used.contains(o)) {
                let a = DownlinkAssignment { slot_offset: slot, channel_offset: off };
                self.downlink.insert(node, a);
                self.bump();
                return Ok(a);
            }
        }
        let slot = *self.free_pool_slots(cfg).first().ok_or(ScheduleError::Capacity)?;
        self.downlink_slots.push(slot);
        let a = DownlinkAssignment { slot_offset: slot, channel_offset: 0 };
        self.downlink.insert(node, a);
        self.bump();
        Ok(a)
    }

    /// Node-side proposal: the `k` free pool slots closest after `after`
    /// (wrapping), in a seeded random order.
    pub fn propose_candidates<R: Rng + ?Sized>(&self, cfg: &SlotframeConfig, k: usize, after: u16, rng: &mut R) -> Vec<u16> {
        let len = cfg.length();
        let mut free = self.free_pool_slots(cfg);
        free.sort_by_key(|&s| (s + len - after - 1) % len);
        free.truncate(k);
        free.shuffle(rng);
        free
    }

    /// Grants the first candidate that is still free (first-fit).
    pub fn negotiate_uplink(
        &mut self,
        node: NodeId,
        candidates: &[u16],
        channel_offset: u16,
        cfg: &SlotframeConfig,
    ) -> Result<Cell, ScheduleError> {
        if self.uplink.contains_key(&node) {
            return Err(ScheduleError::AlreadyAssigned(node));
        }
        if channel_offset >= cfg.num_channel_offsets() {
            return Err(ScheduleError::ChannelOffset(channel_offset));
        }
        if self.free_pool_slots(cfg).is_empty() {
            return Err(ScheduleError::Capacity);
        }
        let slot = candidates
            .iter()
            .copied()
            .find(|&s| self.is_free_for_uplink(s, cfg))
            .ok_or_else(|| ScheduleError::AllCandidatesTaken(candidates.to_vec()))?;
        let cell = Cell::new(slot, channel_offset, CellRole::NegUplink, Owner::Node(node));
        self.uplink.insert(node, cell);
        self.bump();
        Ok(cell)
    }

    /// Drops every assignment of `node`. Opened downlink slots stay open.
    pub fn release(&mut self, node: NodeId) -> bool {
        let removed = self.downlink.remove(&node).is_some() | self.uplink.remove(&node).is_some();
        if removed {
            self.bump();
        }
        removed
    }

    /// Cells a border router runs: its own EB cell, every downlink cell,
    /// every uplink cell and the negotiation cell.
    pub fn bbr_cells(&self, bbr: BbrId, eb_channel_offset: u16, cfg: &SlotframeConfig) -> Vec<Cell> {
        let mut cells = vec![Cell::new(EB_SLOT, eb_channel_offset, CellRole::Eb, Owner::Bbr(bbr))];
        cells.extend(
            self.downlink
                .iter()
                .map(|(n, a)| Cell::new(a.slot_offset, a.channel_offset, CellRole::SharedDownlink, Owner::Node(*n))),
        );
        cells.extend(self.uplink.values().copied());
        cells.push(Cell::new(cfg.negotiation_slot(), 0, CellRole::Negotiation, Owner::Any));
        cells
    }
}

/// Cells grouped by slot offset for O(1) per-slot lookup.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SlotIndex {
    by_slot: Vec<Vec<Cell>>,
}

impl SlotIndex {
    pub fn build(cells: &[Cell], cfg: &SlotframeConfig) -> Self {
        let mut by_slot = vec![Vec::new(); cfg.length() as usize];
        for c in cells {
            by_slot[c.slot_offset as usize].push(*c);
        }
        for v in &mut by_slot {
            v.sort_by_key(|c| (c.channel_offset, c.owner));
        }
        Self { by_slot }
    }

    pub fn at(&self, slot: u16) -> &[Cell] {
        self.by_slot.get(slot as usize).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Slot offsets holding at least one cell, ascending.
    pub fn occupied(&self) -> Vec<u16> {
        (0..self.by_slot.len() as u16).filter(|&s| !self.at(s).is_empty()).collect()
    }
}

/// Versioned read-only copy of the master schedule held by a router.
#[derive(Debug, Clone)]
pub struct ScheduleReplica {
    schedule: Option<Arc<MasterSchedule>>,
}

impl Default for ScheduleReplica {
    fn default() -> Self {
        Self::empty()
    }
}

impl ScheduleReplica {
    pub fn empty() -> Self {
        Self { schedule: None }
    }

    pub fn version(&self) -> Option<u64> {
        self.schedule.as_ref().map(|s| s.version())
    }

    pub fn schedule(&self) -> Option<&Arc<MasterSchedule>> {
        self.schedule.as_ref()
    }

    /// Installs `incoming` only if it is newer than what is held.
    pub fn install(&mut self, incoming: Arc<MasterSchedule>) -> bool {
        if self.version().is_some_and(|v| v >= incoming.version()) {
            return false;
        }
        self.schedule = Some(incoming);
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstallEvent {
    pub bbr: BbrId,
    pub due: SimTime,
    pub schedule: Arc<MasterSchedule>,
}

/// Emits one install event per router when the schedule changed since the
/// last propagation; nothing otherwise.
pub fn propagate_schedule(
    ms: &MasterSchedule,
    last_propagated: &mut Option<u64>,
    bbrs: &[BbrId],
    now: SimTime,
    backbone_delay: SimTime,
) -> Vec<InstallEvent> {
    if *last_propagated == Some(ms.version()) {
        return Vec::new();
    }
    *last_propagated = Some(ms.version());
    let snapshot = Arc::new(ms.clone());
    bbrs.iter()
        .map(|&bbr| InstallEvent { bbr, due: now + backbone_delay, schedule: Arc::clone(&snapshot) })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ReservedSlot {
    Eb,
    Downlink,
    Negotiation,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Conflict {
    DuplicateDownlink { slot: u16, channel_offset: u16, nodes: (NodeId, NodeId) },
    SharedUplinkSlot { slot: u16, nodes: (NodeId, NodeId) },
    UplinkOnReservedSlot { node: NodeId, slot: u16, reserved: ReservedSlot },
    OutOfBounds { node: NodeId, slot: u16, channel_offset: u16 },
    BadUplinkOwner { node: NodeId },
}

/// Every pairwise or role-overlap violation in `ms`; empty means valid.
pub fn validate_schedule(ms: &MasterSchedule, cfg: &SlotframeConfig) -> Result<(), Vec<Conflict>> {
    let mut conflicts = Vec::new();
    let in_bounds = |slot: u16, off: u16| slot < cfg.length() && off < cfg.num_channel_offsets();

    let mut dl_seen: BTreeMap<(u16, u16), NodeId> = BTreeMap::new();
    for (&node, a) in &ms.downlink {
        if !in_bounds(a.slot_offset, a.channel_offset) {
            conflicts.push(Conflict::OutOfBounds { node, slot: a.slot_offset, channel_offset: a.channel_offset });
        }
        if let Some(&first) = dl_seen.get(&(a.slot_offset, a.channel_offset)) {
            conflicts.push(Conflict::DuplicateDownlink {
                slot: a.slot_offset,
                channel_offset: a.channel_offset,
                nodes: (first, node),
            });
        } else {
            dl_seen.insert((a.slot_offset, a.channel_offset), node);
        }
    }

    let dl_slots: BTreeSet<u16> = ms.downlink_slots.iter().copied().chain(ms.downlink.values().map(|a| a.slot_offset)).collect();
    let mut ul_seen: BTreeMap<u16, NodeId> = BTreeMap::new();
    for (&node, c) in &ms.uplink {
        if c.role != CellRole::NegUplink || c.owner != Owner::Node(node) {
            conflicts.push(Conflict::BadUplinkOwner { node });
        }
        if !in_bounds(c.slot_offset, c.channel_offset) {
            conflicts.push(Conflict::OutOfBounds { node, slot: c.slot_offset, channel_offset: c.channel_offset });
        }
        let reserved = if c.slot_offset == EB_SLOT {
            Some(ReservedSlot::Eb)
        } else if dl_slots.contains(&c.slot_offset) {
            Some(ReservedSlot::Downlink)
        } else if c.slot_offset == cfg.negotiation_slot() {
            Some(ReservedSlot::Negotiation)
        } else {
            None
        };
        if let Some(reserved) = reserved {
            conflicts.push(Conflict::UplinkOnReservedSlot { node, slot: c.slot_offset, reserved });
        }
        if let Some(&first) = ul_seen.get(&c.slot_offset) {
            conflicts.push(Conflict::SharedUplinkSlot { slot: c.slot_offset, nodes: (first, node) });
        } else {
            ul_seen.insert(c.slot_offset, node);
        }
    }

    if conflicts.is_empty() {
        Ok(())
    } else {
        Err(conflicts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(length: u16) -> SlotframeConfig {
        SlotframeConfig::with_length(length).unwrap()
    }

    #[test]
    fn downlink_allocation_examples() {
        let cfg = cfg(101);
        let mut ms = MasterSchedule::new();
        assert_eq!(
            ms.allocate_downlink(NodeId(1), &cfg).unwrap(),
            DownlinkAssignment { slot_offset: 1, channel_offset: 0 }
        );
        for n in 2..=16 {
            let a = ms.allocate_downlink(NodeId(n), &cfg).unwrap();
            assert_eq!(a, DownlinkAssignment { slot_offset: 1, channel_offset: (n - 1) as u16 });
        }
        assert_eq!(
            ms.allocate_downlink(NodeId(17), &cfg).unwrap(),
            DownlinkAssignment { slot_offset: 2, channel_offset: 0 }
        );
        assert_eq!(ms.allocate_downlink(NodeId(17), &cfg), Err(ScheduleError::AlreadyAssigned(NodeId(17))));
    }

    #[test]
    fn hundred_nodes_need_ceil_hundred_over_sixteen_slots() {
        let cfg = cfg(101);
        let mut ms = MasterSchedule::new();
        for n in 0..100 {
            ms.allocate_downlink(NodeId(n), &cfg).unwrap();
        }
        let expected = 100_usize.div_ceil(16);
        assert_eq!(ms.downlink_slots().len(), expected);
        assert_eq!(ms.downlink_slots().len(), 7);
        assert!(validate_schedule(&ms, &cfg).is_ok());
    }

    #[test]
    fn released_offsets_are_reused_first() {
        let cfg = cfg(101);
        let mut ms = MasterSchedule::new();
        for n in 0..20 {
            ms.allocate_downlink(NodeId(n), &cfg).unwrap();
        }
        assert!(ms.release(NodeId(3)));
        assert_eq!(
            ms.allocate_downlink(NodeId(99), &cfg).unwrap(),
            DownlinkAssignment { slot_offset: 1, channel_offset: 3 }
        );
    }

    #[test]
    fn uplink_first_fit() {
        let cfg = cfg(101);
        let mut ms = MasterSchedule::new();
        let cell = ms.negotiate_uplink(NodeId(1), &[5, 9, 12], 4, &cfg).unwrap();
        assert_eq!(cell, Cell::new(5, 4, CellRole::NegUplink, Owner::Node(NodeId(1))));
        let cell = ms.negotiate_uplink(NodeId(2), &[5, 9, 12], 0, &cfg).unwrap();
        assert_eq!(cell.slot_offset, 9);
    }

    #[test]
    fn first_fit_matches_linear_scan() {
        let cfg = cfg(101);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut ms = MasterSchedule::new();
        for n in 0..60u32 {
            let candidates: Vec<u16> = (0..3).map(|_| rng.random_range(0..101)).collect();
            let mut occupied = BTreeSet::new();
            occupied.insert(0u16);
            occupied.insert(100u16);
            occupied.extend(ms.downlink_slots().iter().copied());
            occupied.extend(ms.uplink_cells().map(|c| c.slot_offset));
            let oracle = candidates.iter().copied().find(|c| !occupied.contains(c));
            let got = ms.negotiate_uplink(NodeId(n), &candidates, 0, &cfg);
            match oracle {
                Some(slot) => assert_eq!(got.unwrap().slot_offset, slot),
                None => assert!(got.is_err()),
            }
        }
        assert!(validate_schedule(&ms, &cfg).is_ok());
    }

    #[test]
    fn full_pool_is_a_capacity_error() {
        // 101 slots: EB, 7 downlink slots and the contention slot leave 92 uplink slots.
        let cfg = cfg(101);
        let mut ms = MasterSchedule::new();
        for n in 0..100 {
            ms.allocate_downlink(NodeId(n), &cfg).unwrap();
        }
        let pool = ms.free_pool_slots(&cfg);
        assert_eq!(pool.len(), 101 - 1 - 7 - 1);
        for (i, slot) in pool.iter().enumerate() {
            ms.negotiate_uplink(NodeId(i as u32), &[*slot], 0, &cfg).unwrap();
        }
        assert_eq!(ms.negotiate_uplink(NodeId(99), &[5, 9, 12], 0, &cfg), Err(ScheduleError::Capacity));

        // With the pool owned by uplinks, slot 1 still takes 16 nodes but cannot overflow.
        let mut ms2 = MasterSchedule::new();
        for slot in ms2.free_pool_slots(&cfg) {
            ms2.negotiate_uplink(NodeId(slot as u32), &[slot], 0, &cfg).unwrap();
        }
        for n in 1000..1016 {
            assert_eq!(ms2.allocate_downlink(NodeId(n), &cfg).unwrap().slot_offset, 1);
        }
        assert_eq!(ms2.allocate_downlink(NodeId(2000), &cfg), Err(ScheduleError::Capacity));
    }

    #[test]
    fn taken_candidates_are_reported() {
        let cfg = cfg(101);
        let mut ms = MasterSchedule::new();
        ms.negotiate_uplink(NodeId(1), &[5], 0, &cfg).unwrap();
        assert_eq!(
            ms.negotiate_uplink(NodeId(2), &[5, 1, 0], 0, &cfg),
            Err(ScheduleError::AllCandidatesTaken(vec![5, 1, 0]))
        );
    }

    #[test]
    fn candidates_hug_the_downlink_slot() {
        let cfg = cfg(97);
        let ms = MasterSchedule::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut c = ms.propose_candidates(&cfg, 3, 1, &mut rng);
        c.sort();
        assert_eq!(c, vec![2, 3, 4]);
        let mut c = ms.propose_candidates(&cfg, 3, 95, &mut rng);
        c.sort();
        assert_eq!(c, vec![2, 3, 4]);
        let mut c = ms.propose_candidates(&cfg, 3, 40, &mut rng);
        c.sort();
        assert_eq!(c, vec![41, 42, 43]);
    }

    #[test]
    fn versions_increase_on_every_mutation() {
        let cfg = cfg(101);
        let mut ms = MasterSchedule::new();
        let v0 = ms.version();
        ms.allocate_downlink(NodeId(1), &cfg).unwrap();
        let v1 = ms.version();
        ms.negotiate_uplink(NodeId(1), &[9], 0, &cfg).unwrap();
        let v2 = ms.version();
        ms.release(NodeId(1));
        let v3 = ms.version();
        assert!(v0 < v1 && v1 < v2 && v2 < v3);
        assert!(!ms.release(NodeId(1)));
        assert_eq!(ms.version(), v3);
    }

    #[test]
    fn replica_keeps_highest_version() {
        let mut ms = MasterSchedule::new();
        let cfg = cfg(101);
        ms.allocate_downlink(NodeId(1), &cfg).unwrap();
        ms.allocate_downlink(NodeId(2), &cfg).unwrap();
        ms.allocate_downlink(NodeId(3), &cfg).unwrap();
        let v3 = Arc::new(ms.clone());
        ms.allocate_downlink(NodeId(4), &cfg).unwrap();
        let v4 = Arc::new(ms.clone());
        let mut r = ScheduleReplica::empty();
        assert!(r.install(Arc::clone(&v4)));
        assert!(!r.install(v3));
        assert_eq!(r.version(), Some(4));
    }

    #[test]
    fn propagation_only_on_change() {
        let cfg = cfg(101);
        let mut ms = MasterSchedule::new();
        let bbrs = [BbrId(1), BbrId(2)];
        let mut last = None;
        let now = SimTime::from_millis(100);
        let ev = propagate_schedule(&ms, &mut last, &bbrs, now, SimTime::from_millis(1));
        assert_eq!(ev.len(), 2);
        assert!(ev.iter().all(|e| e.due == SimTime::from_millis(101)));
        assert!(propagate_schedule(&ms, &mut last, &bbrs, now, SimTime::from_millis(1)).is_empty());
        ms.allocate_downlink(NodeId(1), &cfg).unwrap();
        assert_eq!(propagate_schedule(&ms, &mut last, &bbrs, now, SimTime::from_millis(1)).len(), 2);
    }

    #[test]
    fn validation_reports_conflicts() {
        let cfg = cfg(101);
        let n = |i| NodeId(i);
        let up = |i, slot| (n(i), Cell::new(slot, 0, CellRole::NegUplink, Owner::Node(n(i))));

        let mut ms = MasterSchedule::new();
        ms.allocate_downlink(n(1), &cfg).unwrap();
        ms.negotiate_uplink(n(1), &[2], 0, &cfg).unwrap();
        ms.allocate_downlink(n(2), &cfg).unwrap();
        ms.negotiate_uplink(n(2), &[3], 5, &cfg).unwrap();
        assert_eq!(validate_schedule(&ms, &cfg), Ok(()));

        let twice = MasterSchedule::from_parts(BTreeMap::new(), [up(1, 7), up(2, 7)].into(), 1);
        assert_eq!(
            validate_schedule(&twice, &cfg),
            Err(vec![Conflict::SharedUplinkSlot { slot: 7, nodes: (n(1), n(2)) }])
        );

        let on_downlink = MasterSchedule::from_parts(BTreeMap::new(), [up(1, 1)].into(), 1);
        assert_eq!(
            validate_schedule(&on_downlink, &cfg),
            Err(vec![Conflict::UplinkOnReservedSlot { node: n(1), slot: 1, reserved: ReservedSlot::Downlink }])
        );

        let on_eb = MasterSchedule::from_parts(BTreeMap::new(), [up(1, 0)].into(), 1);
        assert!(matches!(
            validate_schedule(&on_eb, &cfg).unwrap_err()[0],
            Conflict::UplinkOnReservedSlot { reserved: ReservedSlot::Eb, .. }
        ));

        let dup_dl = MasterSchedule::from_parts(
            [
                (n(1), DownlinkAssignment { slot_offset: 1, channel_offset: 2 }),
                (n(2), DownlinkAssignment { slot_offset: 1, channel_offset: 2 }),
            ]
            .into(),
            BTreeMap::new(),
            1,
        );
        assert_eq!(
            validate_schedule(&dup_dl, &cfg),
            Err(vec![Conflict::DuplicateDownlink { slot: 1, channel_offset: 2, nodes: (n(1), n(2)) }])
        );
    }

    #[test]
    fn bbr_cells_cover_all_roles() {
        let cfg = cfg(97);
        let mut ms = MasterSchedule::new();
        ms.allocate_downlink(NodeId(1), &cfg).unwrap();
        ms.negotiate_uplink(NodeId(1), &[2], 3, &cfg).unwrap();
        let cells = ms.bbr_cells(BbrId(2), 1, &cfg);
        let idx = SlotIndex::build(&cells, &cfg);
        assert_eq!(idx.at(0)[0].role, CellRole::Eb);
        assert_eq!(idx.at(1)[0].role, CellRole::SharedDownlink);
        assert_eq!(idx.at(2)[0].role, CellRole::NegUplink);
        assert_eq!(idx.at(96)[0].role, CellRole::Negotiation);
        assert!(idx.at(50).is_empty());
    }
}
