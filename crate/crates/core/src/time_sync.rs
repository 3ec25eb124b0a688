//! Drifting device clocks and the backbone time reference.
//!
//! All instants are seconds on the simulator's true-time axis. A device's
//! local reading is `t + offset + drift·(t − last_sync)`; its network time is
//! the local reading minus the timebase reference. Border routers under the
//! virtual grand master share one timebase, while in the unsynchronized
//! baseline every router owns its own.

use rand::Rng;

use crate::tsch::{asn_at, Asn, TschError};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClockState {
    pub drift_ppm: f64,
    /// Error against true time at `last_sync_t`, in seconds.
    pub offset: f64,
    pub last_sync_t: f64,
}

impl ClockState {
    pub fn new(drift_ppm: f64, offset: f64, last_sync_t: f64) -> Self {
        Self { drift_ppm, offset, last_sync_t }
    }

    pub fn perfect() -> Self {
        Self::new(0.0, 0.0, 0.0)
    }

    /// Current error against true time.
    pub fn error_at(&self, t_true: f64) -> f64 {
        self.offset + self.drift_ppm * 1e-6 * (t_true - self.last_sync_t)
    }

    /// True instant at which this clock reads `local`.
    pub fn true_time_for(&self, local: f64) -> f64 {
        let r = self.drift_ppm * 1e-6;
        (local - self.offset + r * self.last_sync_t) / (1.0 + r)
    }
}

pub fn clock_read(clock: &ClockState, t_true: f64) -> f64 {
    t_true + clock.error_at(t_true)
}

/// Origin of a device's ASN count, in that device's local clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timebase {
    pub pan: u16,
    pub t_ref: f64,
}

impl Timebase {
    pub fn network_time(&self, clock: &ClockState, t_true: f64) -> f64 {
        clock_read(clock, t_true) - self.t_ref
    }

    /// True instant at which the device's network time reaches `nt`.
    pub fn true_time_at(&self, clock: &ClockState, nt: f64) -> f64 {
        clock.true_time_for(nt + self.t_ref)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncParams {
    pub sync_error_bound: f64,
    pub sync_period: f64,
    pub backbone_delay: f64,
    pub guard_time: f64,
    pub max_drift_ppm: f64,
    /// Silence after which a node starts listening in EB cells.
    pub keepalive: f64,
    /// Silence after which a node gives up and rescans.
    pub desync_timeout: f64,
}

impl Default for SyncParams {
    fn default() -> Self {
        Self {
            sync_error_bound: 0.1e-3,
            sync_period: 10.0,
            backbone_delay: 1e-3,
            guard_time: 1e-3,
            max_drift_ppm: 30.0,
            keepalive: 10.0,
            desync_timeout: 15.0,
        }
    }
}

impl SyncParams {
    /// Largest clock disagreement two synchronized routers may show.
    pub fn pairwise_error_bound(&self) -> f64 {
        2.0 * (self.sync_error_bound + self.max_drift_ppm * 1e-6 * self.sync_period)
    }
}

/// Network server acting as the single time source.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VgmState {
    pub t_ref: f64,
    pub sync_period: f64,
    pub slot_duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyncMessage {
    pub t_ref: f64,
    pub asn_now: Asn,
    pub emitted_at: f64,
}

/// The VGM reads true time, so `emitted_at` is `t_true` itself.
pub fn vgm_emit_sync(vgm: &VgmState, t_true: f64) -> Result<SyncMessage, TschError> {
    Ok(SyncMessage {
        t_ref: vgm.t_ref,
        asn_now: asn_at(t_true, vgm.t_ref, vgm.slot_duration)?,
        emitted_at: t_true,
    })
}

fn residual<R: Rng + ?Sized>(bound: f64, rng: &mut R) -> f64 {
    if bound > 0.0 {
        rng.random_range(-bound..=bound)
    } else {
        0.0
    }
}

/// Corrects a router clock from a backbone sync message.
///
/// The backbone delay is assumed compensated, so what remains is a residual
/// drawn uniformly from `[-bound, bound]`. The drift rate is a property of
/// the oscillator and is left untouched.
pub fn apply_sync<R: Rng + ?Sized>(
    clock: &ClockState,
    msg: &SyncMessage,
    backbone_delay: f64,
    t_true: f64,
    bound: f64,
    rng: &mut R,
) -> ClockState {
    debug_assert!(backbone_delay >= 0.0);
    debug_assert!(t_true >= msg.emitted_at);
    ClockState { drift_ppm: clock.drift_ppm, offset: residual(bound, rng), last_sync_t: t_true }
}

/// Aligns a node clock to the clock of the router whose frame it just received.
pub fn node_frame_sync<R: Rng + ?Sized>(
    clock: &ClockState,
    sender: &ClockState,
    t_true: f64,
    bound: f64,
    rng: &mut R,
) -> ClockState {
    ClockState {
        drift_ppm: clock.drift_ppm,
        offset: sender.error_at(t_true) + residual(bound, rng),
        last_sync_t: t_true,
    }
}

/// True once the error accumulated by drift since the last sync exceeds the guard time.
pub fn is_desynchronized(clock: &ClockState, t_true: f64, guard_time: f64) -> bool {
    debug_assert!(guard_time > 0.0);
    let elapsed = (t_true - clock.last_sync_t).max(0.0);
    clock.drift_ppm.abs() * 1e-6 * elapsed > guard_time
}
