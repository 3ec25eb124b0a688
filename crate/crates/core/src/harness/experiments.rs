//! Built-in experiments and their pass/fail checks.

use crate::engine::metrics::{MetricsLog, PacketKind};
use crate::harness::csv_out::Summary;
use crate::scenario::{Direction, Scenario};
use crate::scheduler::validate_schedule;
use crate::tsch::CellRole;

pub const HANDOVER_SYNC: &str = "\
[scenario]
name = handover-sync
seed = 1
horizon_s = 240
sync_mode = vgm

[radio]
tx_power_dbm = 3
attenuation_db = 20

[bbr.1]
position_m = 8.5

[bbr.2]
position_m = 43.5

[node.1]
start_m = 0
end_m = 52
speed_mps = 1
start_time_s = 60
join = scan

[traffic]
direction = downlink
payload_bytes = 80
period_s = 1
";

pub const HANDOVER_NOSYNC: &str = "\
[scenario]
name = handover-nosync
seed = 1
horizon_s = 240
sync_mode = baseline

[radio]
tx_power_dbm = 3
attenuation_db = 20

[bbr.1]
position_m = 8.5

[bbr.2]
position_m = 43.5

[node.1]
start_m = 0
end_m = 52
speed_mps = 1
start_time_s = 60
join = scan

[traffic]
direction = downlink
payload_bytes = 80
period_s = 1
";

pub const HANDOVER_300MS: &str = "\
[scenario]
name = handover-300ms
seed = 1
horizon_s = 240
sync_mode = vgm

[slotframe]
length = 29

[radio]
tx_power_dbm = 3
attenuation_db = 20

[bbr.1]
position_m = 8.5

[bbr.2]
position_m = 43.5

[node.1]
start_m = 0
end_m = 52
speed_mps = 1
start_time_s = 60
join = scan

[traffic]
direction = downlink
payload_bytes = 80
period_s = 0.3
override_rate_limit = true
";

pub const SCALE_100: &str = "\
[scenario]
name = scale-100
seed = 1
horizon_s = 150
sync_mode = vgm

[slotframe]
length = 128

[radio]
tx_power_dbm = 3
attenuation_db = 20

[bbr.1]
position_m = 8.5

[bbr.2]
position_m = 43.5

[fleet]
count = 100
from_m = 0
to_m = 52
join = provisioned

[traffic]
direction = uplink
payload_bytes = 32
period_s = 1
";

/// Seeds averaged by the baseline experiment.
pub const NOSYNC_SEEDS: u64 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Experiment {
    pub name: &'static str,
    pub about: &'static str,
    pub ini: &'static str,
}

pub const EXPERIMENTS: &[Experiment] = &[
    Experiment { name: "handover-sync", about: "one node crosses two synchronized routers", ini: HANDOVER_SYNC },
    Experiment { name: "handover-nosync", about: "same crossing with independent router timebases", ini: HANDOVER_NOSYNC },
    Experiment { name: "handover-300ms", about: "synchronized crossing with 300 ms requests", ini: HANDOVER_300MS },
    Experiment { name: "scale-100", about: "100 static nodes sending uplink data", ini: SCALE_100 },
];

pub fn find(name: &str) -> Option<&'static Experiment> {
    EXPERIMENTS.iter().find(|e| e.name == name)
}

/// One named pass/fail check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

/// Longest run of consecutive accepted replies heard by both routers, as
/// `(first, last, length in metres)`.
pub fn overlap_span(log: &MetricsLog, sc: &Scenario) -> Option<(f64, f64, f64)> {
    let traj = sc.all_nodes().first()?.trajectory;
    let pos: Vec<(f64, u32)> = log
        .packets
        .iter()
        .zip(&log.aux)
        .filter(|(p, a)| p.direction == Direction::Uplink && matches!(a.kind, PacketKind::Reply { .. }) && !p.lost)
        .filter_map(|(p, a)| Some((crate::radio::position_at(&traj, a.heard_at?.as_secs_f64()), p.dup_count)))
        .collect();
    let mut best: Option<(usize, usize)> = None;
    let mut i = 0;
    while i < pos.len() {
        if pos[i].1 != 2 {
            i += 1;
            continue;
        }
        let start = i;
        while i < pos.len() && pos[i].1 == 2 {
            i += 1;
        }
        if best.is_none_or(|(a, b)| i - start > b - a) {
            best = Some((start, i));
        }
    }
    let (a, b) = best?;
    let (first, last) = (pos[a].0, pos[b - 1].0);
    let spacing = if b - a > 1 { (last - first) / (b - a - 1) as f64 } else { 0.0 };
    Some((first, last, (last - first).abs() + spacing.abs()))
}

/// Every accepted frame at the server is accepted once and only once.
pub fn ns_delivers_once(log: &MetricsLog) -> bool {
    use crate::protocol::ns::Ingest;
    let mut seen = std::collections::BTreeSet::new();
    log.ns_trace.iter().filter(|e| e.outcome == Ingest::Accepted).all(|e| seen.insert((e.src, e.hash)))
        && log.packets.iter().all(|p| p.lost == p.recv_at.is_none())
}

pub fn check_handover_sync(log: &MetricsLog, sc: &Scenario, s: &Summary) -> Vec<Check> {
    let max_rtt = log.packets.iter().filter_map(|p| p.rtt).map(|r| r.as_secs_f64()).fold(0.0, f64::max);
    let requests = log.aux.iter().filter(|a| a.kind == PacketKind::Request).count();
    let mut checks = vec![
        Check::new("loss_rate", s.loss_rate == 0.0 && requests > 0, format!("loss_rate={} requests={requests}", s.loss_rate)),
        Check::new("max_rtt", max_rtt <= 1.05, format!("p100 rtt={max_rtt:.3}s")),
    ];
    let span = overlap_span(log, sc);
    checks.push(Check::new(
        "overlap_span",
        span.is_some_and(|(_, _, len)| (14.0..=16.0).contains(&len)),
        match span {
            Some((a, b, len)) => format!("dup_count=2 from {a:.2} m to {b:.2} m, span {len:.2} m"),
            None => "no duplicated uplink".into(),
        },
    ));
    checks.push(Check::new("delivered_once", ns_delivers_once(log), "server acceptances are unique"));
    checks
}

pub fn check_handover_nosync(log: &MetricsLog) -> Vec<Check> {
    let n = log.outages.len();
    let d = log.outages.first().map_or(0.0, |o| o.duration());
    vec![Check::new(
        "single_outage",
        n == 1 && (10.0..=120.0).contains(&d),
        format!("{n} outage(s), first {d:.2} s"),
    )]
}

pub fn check_nosync_mean(durations: &[Option<f64>]) -> Check {
    let got: Vec<f64> = durations.iter().flatten().copied().collect();
    let mean = if got.is_empty() { 0.0 } else { got.iter().sum::<f64>() / got.len() as f64 };
    Check::new(
        "mean_outage",
        got.len() == durations.len() && (15.0..=60.0).contains(&mean),
        format!("mean {mean:.2} s over {} seeds", got.len()),
    )
}

pub fn check_handover_300ms(s: &Summary, log: &MetricsLog) -> Vec<Check> {
    let requests = log.aux.iter().filter(|a| a.kind == PacketKind::Request).count();
    vec![Check::new("loss_rate", s.loss_rate == 0.0 && requests > 0, format!("loss_rate={} requests={requests}", s.loss_rate))]
}

/// Measurement window for the throughput check, in seconds after start and
/// before the horizon.
const WARMUP: f64 = 10.0;

pub fn check_scale(log: &MetricsLog, sc: &Scenario) -> Vec<Check> {
    let cfg = &sc.slotframe;
    let mut checks = Vec::new();
    let Some(ms) = &log.final_schedule else {
        return vec![Check::new("schedule", false, "no server schedule")];
    };
    let nodes = sc.all_nodes().len();
    checks.push(Check::new(
        "allocation",
        ms.downlink_slots().len() == 7 && ms.uplink_cells().count() == nodes,
        format!("{} downlink slots, {} uplink cells", ms.downlink_slots().len(), ms.uplink_cells().count()),
    ));
    checks.push(Check::new(
        "validate_schedule",
        validate_schedule(ms, cfg).is_ok(),
        match validate_schedule(ms, cfg) {
            Ok(()) => "ok".to_string(),
            Err(c) => format!("{} conflicts", c.len()),
        },
    ));
    let sf = cfg.slotframe_duration();
    let frames = (sc.horizon / sf).floor() as u64;
    let neg = log.collisions.iter().filter(|c| c.roles.contains(&CellRole::NegUplink)).count();
    checks.push(Check::new("neg_uplink_collisions", neg == 0 && frames >= 100, format!("{neg} over {frames} slotframes")));
    let lo = WARMUP;
    let hi = sc.horizon - sc.traffic.drain;
    // Whole slotframes inside the window; each grants one cell per node.
    let window_frames = ((hi - lo) / sf).floor();
    let mut per_node = vec![0u64; nodes];
    for (p, a) in log.packets.iter().zip(&log.aux) {
        if a.kind != PacketKind::Data {
            continue;
        }
        if let Some(r) = p.recv_at.map(|r| r.as_secs_f64()) {
            if r >= lo && r < hi {
                per_node[(a.node.0 - 1) as usize] += 1;
            }
        }
    }
    let worst = per_node.iter().copied().min().unwrap_or(0) as f64 / window_frames;
    checks.push(Check::new(
        "uplink_throughput",
        nodes > 0 && worst >= 1.0,
        format!("slowest node {worst:.3} packets per slotframe"),
    ));
    checks
}
