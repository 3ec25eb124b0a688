//! Propagation, one-dimensional mobility and per-slot reception.

use std::collections::BTreeMap;

use crate::tsch::{Asn, Party};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub tx_power_dbm: f64,
    /// Fixed loss inserted at the router antenna ports, counted once per link.
    pub ext_attenuation_db: f64,
    /// Path loss at the 1 m reference distance.
    pub pl0_db: f64,
    pub exponent: f64,
    pub sensitivity_dbm: f64,
    /// Log-normal shadowing deviation; 0 disables it.
    pub shadowing_sigma_db: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            tx_power_dbm: 3.0,
            ext_attenuation_db: 20.0,
            pl0_db: 40.0,
            exponent: 2.4,
            sensitivity_dbm: -90.6,
            shadowing_sigma_db: 0.0,
        }
    }
}

/// Log-distance received power; distances under 1 m use the 1 m value.
pub fn rssi_at(params: &RadioParams, distance: f64) -> f64 {
    let d = distance.max(1.0);
    params.tx_power_dbm - params.ext_attenuation_db - params.pl0_db - 10.0 * params.exponent * d.log10()
}

/// Distance at which `rssi_at` falls to the sensitivity, found by bisection.
///
/// Returns 1.0 when even the reference distance is below sensitivity.
pub fn coverage_radius(params: &RadioParams) -> f64 {
    let margin = |d: f64| rssi_at(params, d) - params.sensitivity_dbm;
    if margin(1.0) < 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while margin(hi) >= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e9 {
            return f64::INFINITY;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if margin(mid) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    lo
}

/// Straight-line constant-speed motion that stops at `end_pos`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trajectory {
    pub start_pos: f64,
    pub end_pos: f64,
    pub speed: f64,
    pub start_time: f64,
}

impl Trajectory {
    pub fn stationary(pos: f64) -> Self {
        Self { start_pos: pos, end_pos: pos, speed: 0.0, start_time: 0.0 }
    }

    /// Instant at which the node reaches `end_pos`.
    pub fn arrival_time(&self) -> f64 {
        if self.speed <= 0.0 {
            self.start_time
        } else {
            self.start_time + (self.end_pos - self.start_pos).abs() / self.speed
        }
    }
}

pub fn position_at(traj: &Trajectory, t: f64) -> f64 {
    let elapsed = (t - traj.start_time).max(0.0);
    let travelled = traj.speed * elapsed;
    if traj.end_pos >= traj.start_pos {
        (traj.start_pos + travelled).min(traj.end_pos)
    } else {
        (traj.start_pos - travelled).max(traj.end_pos)
    }
}

/// How one receiver sees one transmission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RxView {
    pub rssi_dbm: f64,
    /// Receiver slot boundary minus sender slot boundary, in seconds.
    pub timing_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransmissionAttempt<F> {
    pub sender: Party,
    pub frame: F,
    pub channel: u8,
    pub asn: Asn,
    pub rx: BTreeMap<Party, RxView>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SlotOutcome {
    /// Index into the attempts slice.
    Delivered { attempt: usize, rssi_dbm: f64 },
    Collision { audible: usize },
    Nothing,
}

/// Resolves one slot of transmissions against the listening receivers.
///
/// A listener hears an attempt when the attempt is on its channel and its
/// RSSI there reaches `sensitivity_dbm`. Two or more audible attempts
/// destroy each other. A single audible attempt is delivered only if the
/// two slot boundaries agree within `guard_time`; otherwise the receiver
/// was not listening when the frame started. A broadcast may be delivered
/// to every listener at once.
pub fn deliver_slot<F>(
    attempts: &[TransmissionAttempt<F>],
    listeners: &[(Party, u8)],
    sensitivity_dbm: f64,
    guard_time: f64,
) -> Vec<(Party, SlotOutcome)> {
    listeners
        .iter()
        .map(|&(who, channel)| {
            let mut audible = attempts
                .iter()
                .enumerate()
                .filter(|(_, a)| a.channel == channel && a.sender != who)
                .filter_map(|(i, a)| a.rx.get(&who).filter(|v| v.rssi_dbm >= sensitivity_dbm).map(|v| (i, *v)));
            let outcome = match (audible.next(), audible.next()) {
                (None, _) => SlotOutcome::Nothing,
                (Some((i, view)), None) if view.timing_error.abs() <= guard_time => {
                    SlotOutcome::Delivered { attempt: i, rssi_dbm: view.rssi_dbm }
                }
                (Some(_), None) => SlotOutcome::Nothing,
                (Some(_), Some(_)) => SlotOutcome::Collision { audible: 2 + audible.count() },
            };
            (who, outcome)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsch::{BbrId, NodeId};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn position_examples() {
        let t = Trajectory { start_pos: 0.0, end_pos: 1000.0, speed: 1.0, start_time: 0.0 };
        assert_eq!(position_at(&t, 10.0), 10.0);
        let t = Trajectory { start_pos: 0.0, end_pos: 52.0, speed: 1.0, start_time: 0.0 };
        assert_eq!(position_at(&t, 60.0), 52.0);
        let t = Trajectory { start_pos: 0.0, end_pos: 1000.0, speed: 3.0, start_time: 0.0 };
        assert_eq!(position_at(&t, 10.0), 30.0);
        let back = Trajectory { start_pos: 52.0, end_pos: 0.0, speed: 2.0, start_time: 5.0 };
        assert_eq!(position_at(&back, 4.0), 52.0);
        assert_eq!(position_at(&back, 15.0), 32.0);
        assert_eq!(position_at(&back, 100.0), 0.0);
    }

    #[test]
    fn rssi_examples() {
        let p = RadioParams { sensitivity_dbm: -90.0, ..RadioParams::default() };
        assert!(close(rssi_at(&p, 1.0), -57.0, 1e-12));
        assert!(close(rssi_at(&p, 0.2), -57.0, 1e-12));
        assert!(close(rssi_at(&p, 10.0), -57.0 - 24.0, 1e-12));
        let at25 = rssi_at(&p, 25.0);
        assert!(close(at25, -57.0 - 24.0 * 25f64.log10(), 1e-12));
        assert!(at25 <= -90.0);
    }

    #[test]
    fn coverage_matches_closed_form() {
        for p in [
            RadioParams::default(),
            RadioParams { exponent: 3.1, ..RadioParams::default() },
            RadioParams { sensitivity_dbm: -80.0, pl0_db: 35.0, ..RadioParams::default() },
        ] {
            let budget = p.tx_power_dbm - p.ext_attenuation_db - p.pl0_db - p.sensitivity_dbm;
            let expected = 10f64.powf(budget / (10.0 * p.exponent));
            assert!(close(coverage_radius(&p), expected, 1e-9), "{p:?}");
        }
        let deaf = RadioParams { sensitivity_dbm: -40.0, ..RadioParams::default() };
        assert_eq!(coverage_radius(&deaf), 1.0);
    }

    #[test]
    fn default_coverage_is_about_25m() {
        let r = coverage_radius(&RadioParams::default());
        assert!((24.0..=26.0).contains(&r), "{r}");
    }

    const N1: Party = Party::Node(NodeId(1));
    const N2: Party = Party::Node(NodeId(2));
    const B1: Party = Party::Bbr(BbrId(1));
    const B2: Party = Party::Bbr(BbrId(2));

    fn attempt(sender: Party, channel: u8, heard: &[(Party, f64)]) -> TransmissionAttempt<u32> {
        TransmissionAttempt {
            sender,
            frame: 0,
            channel,
            asn: Asn(9),
            rx: heard.iter().map(|&(p, rssi)| (p, RxView { rssi_dbm: rssi, timing_error: 0.0 })).collect(),
        }
    }

    #[test]
    fn broadcast_reaches_every_router() {
        let a = [attempt(N1, 15, &[(B1, -70.0), (B2, -80.0)])];
        let out = deliver_slot(&a, &[(B1, 15), (B2, 15)], -90.0, 1e-3);
        assert_eq!(out[0].1, SlotOutcome::Delivered { attempt: 0, rssi_dbm: -70.0 });
        assert_eq!(out[1].1, SlotOutcome::Delivered { attempt: 0, rssi_dbm: -80.0 });
    }

    #[test]
    fn two_audible_attempts_collide() {
        let a = [attempt(N1, 15, &[(B1, -70.0)]), attempt(N2, 15, &[(B1, -85.0)])];
        let out = deliver_slot(&a, &[(B1, 15)], -90.0, 1e-3);
        assert_eq!(out[0].1, SlotOutcome::Collision { audible: 2 });
    }

    #[test]
    fn threshold_applies_per_receiver() {
        let a = [attempt(N1, 15, &[(B1, -60.0), (B2, -95.0)])];
        let out = deliver_slot(&a, &[(B1, 15), (B2, 15)], -90.0, 1e-3);
        assert!(matches!(out[0].1, SlotOutcome::Delivered { .. }));
        assert_eq!(out[1].1, SlotOutcome::Nothing);
    }

    #[test]
    fn other_channels_and_inaudible_do_not_interfere() {
        let a = [attempt(N1, 15, &[(B1, -60.0)]), attempt(N2, 16, &[(B1, -60.0)]), attempt(B2, 15, &[(B1, -99.0)])];
        let out = deliver_slot(&a, &[(B1, 15)], -90.0, 1e-3);
        assert_eq!(out[0].1, SlotOutcome::Delivered { attempt: 0, rssi_dbm: -60.0 });
    }

    #[test]
    fn misaligned_frame_is_missed() {
        let mut a = attempt(N1, 15, &[(B1, -60.0)]);
        a.rx.get_mut(&B1).unwrap().timing_error = 2e-3;
        let out = deliver_slot(&[a], &[(B1, 15)], -90.0, 1e-3);
        assert_eq!(out[0].1, SlotOutcome::Nothing);
    }
}
