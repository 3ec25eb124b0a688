//! TSCH timing primitives: absolute slot numbers, slotframe geometry,
//! channel hopping and per-slot schedule lookup.
//!
//! Everything here is a pure function of its inputs so that a mobile node
//! and any border router that agree on the ASN also agree on the slot
//! offset and physical channel.

use std::fmt;

/// Identifier of a mobile node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

/// Identifier of a backbone border router.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BbrId(pub u16);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

impl fmt::Display for BbrId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Lowest and highest IEEE 802.15.4 2.4 GHz channel numbers.
pub const MIN_CHANNEL: u8 = 11;
pub const MAX_CHANNEL: u8 = 26;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TschError {
    #[error("instant {t}s precedes the network reference time {t_ref}s")]
    ReferenceViolation { t: f64, t_ref: f64 },
    #[error("slot duration must be positive, got {0}")]
    InvalidSlotDuration(f64),
    #[error("channel offset {offset} out of range (0..{count})")]
    ChannelOffsetOutOfRange { offset: u16, count: u16 },
    #[error("invalid slotframe: {0}")]
    InvalidSlotframe(String),
}

/// Absolute slot number: slots elapsed since the network reference time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Asn(pub u64);

impl Asn {
    pub fn next(self) -> Asn {
        Asn(self.0 + 1)
    }
}

impl fmt::Display for Asn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// `floor((t - t_ref) / slot_duration)`.
///
/// Quotients within 1e-9 of an integer snap to it, so exact boundaries such
/// as `t = 1.0, slot = 0.01` are not lost to binary rounding.
pub fn asn_at(t: f64, t_ref: f64, slot_duration: f64) -> Result<Asn, TschError> {
    if slot_duration.is_nan() || slot_duration <= 0.0 {
        return Err(TschError::InvalidSlotDuration(slot_duration));
    }
    if t < t_ref {
        return Err(TschError::ReferenceViolation { t, t_ref });
    }
    let q = (t - t_ref) / slot_duration;
    let r = q.round();
    let slots = if (q - r).abs() < 1e-9 { r } else { q.floor() };
    Ok(Asn(slots as u64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotframeConfig {
    length: u16,
    slot_duration: f64,
    hopping_sequence: Vec<u8>,
}

impl SlotframeConfig {
    pub const DEFAULT_LENGTH: u16 = 97;
    pub const DEFAULT_SLOT_DURATION: f64 = 0.010;

    pub fn new(length: u16, slot_duration: f64, hopping_sequence: Vec<u8>) -> Result<Self, TschError> {
        if length < 2 {
            return Err(TschError::InvalidSlotframe(format!("length {length} < 2")));
        }
        if !slot_duration.is_finite() || slot_duration <= 0.0 {
            return Err(TschError::InvalidSlotDuration(slot_duration));
        }
        if hopping_sequence.is_empty() {
            return Err(TschError::InvalidSlotframe("empty hopping sequence".into()));
        }
        if let Some(c) = hopping_sequence.iter().find(|c| !(MIN_CHANNEL..=MAX_CHANNEL).contains(c)) {
            return Err(TschError::InvalidSlotframe(format!("channel {c} outside 11..=26")));
        }
        let mut seen = [false; 32];
        for &c in &hopping_sequence {
            if std::mem::replace(&mut seen[c as usize], true) {
                return Err(TschError::InvalidSlotframe(format!("duplicate channel {c}")));
            }
        }
        Ok(Self { length, slot_duration, hopping_sequence })
    }

    /// Identity hopping over channels 11..=26.
    pub fn identity_hopping() -> Vec<u8> {
        (MIN_CHANNEL..=MAX_CHANNEL).collect()
    }

    pub fn with_length(length: u16) -> Result<Self, TschError> {
        Self::new(length, Self::DEFAULT_SLOT_DURATION, Self::identity_hopping())
    }

    pub fn length(&self) -> u16 {
        self.length
    }

    pub fn slot_duration(&self) -> f64 {
        self.slot_duration
    }

    pub fn slotframe_duration(&self) -> f64 {
        self.slot_duration * self.length as f64
    }

    pub fn hopping_sequence(&self) -> &[u8] {
        &self.hopping_sequence
    }

    pub fn num_channel_offsets(&self) -> u16 {
        self.hopping_sequence.len() as u16
    }

    /// Slot offset of the shared contention cell used for uplink negotiation.
    pub fn negotiation_slot(&self) -> u16 {
        self.length - 1
    }
}

impl Default for SlotframeConfig {
    fn default() -> Self {
        Self::with_length(Self::DEFAULT_LENGTH).expect("default slotframe is valid")
    }
}

pub fn slot_offset_of(asn: Asn, cfg: &SlotframeConfig) -> u16 {
    (asn.0 % cfg.length as u64) as u16
}

/// Physical channel used in `asn` by a cell with `channel_offset`.
pub fn channel_for(asn: Asn, channel_offset: u16, cfg: &SlotframeConfig) -> Result<u8, TschError> {
    let count = cfg.num_channel_offsets();
    if channel_offset >= count {
        return Err(TschError::ChannelOffsetOutOfRange { offset: channel_offset, count });
    }
    let idx = (asn.0 + channel_offset as u64) % count as u64;
    Ok(cfg.hopping_sequence[idx as usize])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CellRole {
    /// Enhanced beacon, transmitted by one BBR.
    Eb,
    /// Downlink cell; the slot is shared in time, the channel offset is per node.
    SharedDownlink,
    /// Uplink cell negotiated by and owned by exactly one node.
    NegUplink,
    /// Contention cell carrying uplink negotiation requests.
    Negotiation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Owner {
    Any,
    Node(NodeId),
    Bbr(BbrId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cell {
    pub slot_offset: u16,
    pub channel_offset: u16,
    pub role: CellRole,
    pub owner: Owner,
}

impl Cell {
    pub fn new(slot_offset: u16, channel_offset: u16, role: CellRole, owner: Owner) -> Self {
        Self { slot_offset, channel_offset, role, owner }
    }

    pub fn check(&self, cfg: &SlotframeConfig) -> Result<(), TschError> {
        if self.slot_offset >= cfg.length() {
            return Err(TschError::InvalidSlotframe(format!(
                "slot offset {} outside slotframe of length {}",
                self.slot_offset,
                cfg.length()
            )));
        }
        if self.channel_offset >= cfg.num_channel_offsets() {
            return Err(TschError::ChannelOffsetOutOfRange {
                offset: self.channel_offset,
                count: cfg.num_channel_offsets(),
            });
        }
        if self.role == CellRole::NegUplink && !matches!(self.owner, Owner::Node(_)) {
            return Err(TschError::InvalidSlotframe("uplink cell without a single node owner".into()));
        }
        Ok(())
    }
}

/// Who is consulting the schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Party {
    Node(NodeId),
    Bbr(BbrId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Transmit(Cell),
    Receive(Cell),
    Sleep,
}

fn may_transmit(me: Party, cell: &Cell) -> bool {
    match (me, cell.role) {
        (Party::Node(n), CellRole::NegUplink) => cell.owner == Owner::Node(n),
        (Party::Node(_), CellRole::Negotiation) => true,
        (Party::Bbr(_), CellRole::SharedDownlink) => matches!(cell.owner, Owner::Node(_)),
        (Party::Bbr(b), CellRole::Eb) => cell.owner == Owner::Bbr(b),
        _ => false,
    }
}

/// Receive preference; lower wins. `None` means the party never listens in this cell.
fn receive_rank(me: Party, cell: &Cell) -> Option<u8> {
    match (me, cell.role) {
        (Party::Node(n), CellRole::SharedDownlink) => (cell.owner == Owner::Node(n)).then_some(0),
        (Party::Node(_), CellRole::Eb) => Some(1),
        (Party::Bbr(_), CellRole::NegUplink) => Some(0),
        (Party::Bbr(_), CellRole::Negotiation) => Some(1),
        (Party::Bbr(_), CellRole::SharedDownlink) => Some(2),
        _ => None,
    }
}

/// What `me` does in the slot `asn` given its installed `schedule`.
///
/// `pending(cell)` reports whether the party has a frame queued for that
/// cell. Transmit beats receive beats sleep; among transmit candidates the
/// first in schedule order wins. A BBR only reports traffic pending for
/// nodes the network server routed to it, so it never transmits in another
/// BBR's downlink cell.
pub fn schedule_action(
    schedule: &[Cell],
    asn: Asn,
    cfg: &SlotframeConfig,
    me: Party,
    pending: &dyn Fn(&Cell) -> bool,
) -> Action {
    let slot = slot_offset_of(asn, cfg);
    let mut rx: Option<(u8, Cell)> = None;
    for cell in schedule.iter().filter(|c| c.slot_offset == slot) {
        if may_transmit(me, cell) && pending(cell) {
            return Action::Transmit(*cell);
        }
        if let Some(rank) = receive_rank(me, cell) {
            if rx.is_none_or(|(best, _)| rank < best) {
                rx = Some((rank, *cell));
            }
        }
    }
    match rx {
        Some((_, cell)) => Action::Receive(cell),
        None => Action::Sleep,
    }
}
