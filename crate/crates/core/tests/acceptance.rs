//! One line per acceptance criterion; exits nonzero if any fails.

use std::collections::BTreeMap;
use std::time::Instant;

use tsch_roam::engine::run;
use tsch_roam::harness::csv_out::{packets_csv, summarize, summary_csv};
use tsch_roam::harness::experiments::{self, overlap_span, ns_delivers_once};
use tsch_roam::harness::{load, nosync_outages};
use tsch_roam::protocol::dedup::DedupTable;
use tsch_roam::protocol::frame::{Frame, Payload};
use tsch_roam::radio::{coverage_radius, RadioParams};
use tsch_roam::time::SimTime;
use tsch_roam::time_sync::{ClockState, SyncParams, Timebase};
use tsch_roam::tsch::{asn_at, channel_for, Asn, NodeId, SlotframeConfig};

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, id: &str, pass: bool, detail: String) {
        println!("{} {id}: {detail}", if pass { "PASS" } else { "FAIL" });
        if !pass {
            self.failed += 1;
        }
    }
}

fn seamless_handover(r: &mut Report) {
    let sc = load("handover-sync", None, &[]).unwrap();
    let t0 = Instant::now();
    let log = run(&sc).unwrap();
    let wall = t0.elapsed().as_secs_f64();
    let s = summarize(&log).unwrap();
    let max_rtt = log.packets.iter().filter_map(|p| p.rtt).map(SimTime::as_secs_f64).fold(0.0, f64::max);
    r.line(
        "1 seamless handover",
        s.loss_rate == 0.0 && max_rtt <= 1.05 && wall < 5.0,
        format!("loss_rate={} p100_rtt={max_rtt:.3}s wall={wall:.2}s", s.loss_rate),
    );

    let span = overlap_span(&log, &sc);
    let once = ns_delivers_once(&log);
    r.line(
        "3 overlap duplication",
        span.is_some_and(|(_, _, len)| (14.0..=16.0).contains(&len)) && once,
        format!("span={:?} delivered_once={once}", span.map(|(a, b, l)| (round2(a), round2(b), round2(l)))),
    );

    let bound = sc.sync.pairwise_error_bound();
    let worst = log.clock_samples.iter().map(|c| c.max_pairwise).fold(0.0, f64::max);
    let frames = log.clock_samples.len();
    r.line(
        "6c clock bound",
        frames as f64 >= sc.horizon / sc.slotframe.slotframe_duration() - 1.0 && worst <= bound,
        format!("{frames} samples, worst {:.1} us, bound {:.1} us", worst * 1e6, bound * 1e6),
    );
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn baseline(r: &mut Report) {
    let sc = load("handover-nosync", None, &[]).unwrap();
    let log = run(&sc).unwrap();
    let d: Vec<f64> = log.outages.iter().map(|o| o.duration()).collect();
    r.line(
        "2 baseline single outage",
        d.len() == 1 && (10.0..=120.0).contains(&d[0]),
        format!("outages={d:.2?}"),
    );
    let seeds: Vec<u64> = (1..=experiments::NOSYNC_SEEDS).collect();
    let all = nosync_outages(&sc, &seeds);
    let c = experiments::check_nosync_mean(&all);
    r.line("2 baseline mean outage", c.pass, c.detail);
}

fn fast_traffic(r: &mut Report) {
    let sc = load("handover-300ms", None, &[]).unwrap();
    let log = run(&sc).unwrap();
    let s = summarize(&log).unwrap();
    r.line("4 300 ms requests", s.loss_rate == 0.0, format!("loss_rate={} packets={}", s.loss_rate, log.packets.len()));
}

fn scale(r: &mut Report) {
    let sc = load("scale-100", None, &[]).unwrap();
    let log = run(&sc).unwrap();
    let checks = experiments::check_scale(&log, &sc);
    let detail: Vec<String> = checks.iter().map(|c| format!("{}[{}]", c.name, c.detail)).collect();
    r.line("5 scale-100", checks.iter().all(|c| c.pass), detail.join(" "));
}

/// Every cell maps to the same channel at a router and at a node whose clock
/// is within the pairwise bound, for every ASN of a full hopping period.
fn channel_agreement(r: &mut Report) {
    let sync = SyncParams::default();
    let err = sync.pairwise_error_bound();
    let mut checked = 0u64;
    let mut bad = 0u64;
    for length in [29u16, 97, 101, 128] {
        let cfg = SlotframeConfig::with_length(length).unwrap();
        let n = cfg.num_channel_offsets() as u64;
        let slot = cfg.slot_duration();
        let tb = Timebase { pan: 0, t_ref: 0.0 };
        for asn in 0..length as u64 * n {
            let mid = (asn as f64 + 0.5) * slot;
            for e in [-err, 0.0, err] {
                let node = ClockState::new(0.0, e, 0.0);
                let seen = asn_at(tb.network_time(&node, mid), 0.0, slot).unwrap();
                let mut used = 0u32;
                for off in 0..cfg.num_channel_offsets() {
                    checked += 1;
                    let a = channel_for(Asn(asn), off, &cfg).unwrap();
                    let b = channel_for(seen, off, &cfg).unwrap();
                    used |= 1 << (a - 11);
                    if a != b {
                        bad += 1;
                    }
                }
                if used.count_ones() as u64 != n {
                    bad += 1;
                }
            }
        }
    }
    r.line("6a channel agreement", bad == 0, format!("{checked} (asn, offset, skew) cases, {bad} mismatches"));
}

/// Server dedup against a multiset oracle on 10^4 packets with up to three
/// copies each, copies arriving inside the table lifetime.
fn dedup_oracle(r: &mut Report) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let mut arrivals = Vec::new();
    let mut oracle: BTreeMap<u64, u32> = BTreeMap::new();
    for p in 0..10_000u64 {
        let node = NodeId(rng.random_range(1..=100));
        let sent = SimTime::from_millis(p * 10);
        let f = Frame::uplink(node, 0, p as u32, 80, sent, Payload::Data { packet: p }).unwrap();
        let copies = rng.random_range(1..=3);
        for _ in 0..copies {
            arrivals.push((sent + SimTime::from_millis(rng.random_range(0..40)), f.dedup_hash()));
        }
        *oracle.entry(f.dedup_hash()).or_default() += copies;
    }
    arrivals.sort();
    let mut table = DedupTable::new(SimTime::from_millis(5000));
    let mut accepted: BTreeMap<u64, u32> = BTreeMap::new();
    let mut dups: BTreeMap<u64, u32> = BTreeMap::new();
    for (t, h) in &arrivals {
        let m = if table.observe(*h, *t) { &mut accepted } else { &mut dups };
        *m.entry(*h).or_default() += 1;
    }
    let ok = oracle.len() == 10_000
        && oracle.iter().all(|(h, &c)| accepted.get(h) == Some(&1) && dups.get(h).copied().unwrap_or(0) == c - 1);
    r.line("6b dedup oracle", ok, format!("{} packets, {} copies", oracle.len(), arrivals.len()));
}

fn coverage(r: &mut Report) {
    let d = coverage_radius(&RadioParams::default());
    r.line("6d coverage radius", (24.0..=26.0).contains(&d), format!("{d:.2} m"));
}

fn determinism(r: &mut Report) {
    let mut same = true;
    for name in ["handover-sync", "handover-nosync", "scale-100"] {
        let sc = load(name, Some(3), &[]).unwrap();
        let csv = |sc| {
            let log = run(sc).unwrap();
            (packets_csv(&log), summary_csv(summarize(&log).as_ref()))
        };
        same &= csv(&sc) == csv(&sc);
    }
    let dir = tempfile::tempdir().unwrap();
    let files = |sub: &str| {
        let out = dir.path().join(sub);
        tsch_roam::harness::run_experiment("handover-sync", Some(5), &[], &out).unwrap();
        ["packets.csv", "summary.csv", "scenario.ini"].map(|f| std::fs::read(out.join(f)).unwrap())
    };
    same &= files("a") == files("b");
    r.line("6e same seed, same bytes", same, "three experiments in memory, one through files".into());
}

fn main() {
    let mut r = Report { failed: 0 };
    seamless_handover(&mut r);
    baseline(&mut r);
    fast_traffic(&mut r);
    scale(&mut r);
    channel_agreement(&mut r);
    dedup_oracle(&mut r);
    coverage(&mut r);
    determinism(&mut r);
    if r.failed > 0 {
        eprintln!("{} criteria failed", r.failed);
        std::process::exit(1);
    }
}
