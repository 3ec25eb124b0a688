//! `packets.csv` and `summary.csv`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use crate::engine::metrics::{MetricsLog, PacketRecord};
use crate::scenario::Direction;
use crate::time::SimTime;

pub const PACKETS_HEADER: &str = "seq,direction,sent_at_s,recv_at_s,rtt_s,lost,bbr_set,dup_count";
pub const SUMMARY_HEADER: &str = "metric,value";

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Summary {
    pub loss_rate: f64,
    pub mean_rtt_s: f64,
    pub p99_rtt_s: f64,
    pub max_outage_s: f64,
    pub dup_ratio: f64,
}

/// Nearest-rank percentile of unsorted samples; `None` when empty.
pub fn percentile(samples: &[f64], p: f64) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil().max(1.0) as usize;
    Some(v[rank.min(v.len()) - 1])
}

pub fn summarize(log: &MetricsLog) -> Option<Summary> {
    if log.packets.is_empty() {
        return None;
    }
    let lost = log.packets.iter().filter(|p| p.lost).count();
    let rtts: Vec<f64> = log.packets.iter().filter_map(|p| p.rtt).map(SimTime::as_secs_f64).collect();
    let accepted_up: Vec<&PacketRecord> =
        log.packets.iter().filter(|p| p.direction == Direction::Uplink && !p.lost).collect();
    let dups = accepted_up.iter().filter(|p| p.dup_count > 1).count();
    Some(Summary {
        loss_rate: lost as f64 / log.packets.len() as f64,
        mean_rtt_s: if rtts.is_empty() { 0.0 } else { rtts.iter().sum::<f64>() / rtts.len() as f64 },
        p99_rtt_s: percentile(&rtts, 99.0).unwrap_or(0.0),
        max_outage_s: log.outages.iter().map(|o| o.duration()).fold(0.0, f64::max),
        dup_ratio: if accepted_up.is_empty() { 0.0 } else { dups as f64 / accepted_up.len() as f64 },
    })
}

fn opt(t: Option<SimTime>) -> String {
    t.map(|t| t.to_string()).unwrap_or_default()
}

pub fn packets_csv(log: &MetricsLog) -> String {
    let mut out = String::with_capacity(64 * (log.packets.len() + 1));
    out.push_str(PACKETS_HEADER);
    out.push('\n');
    for p in &log.packets {
        let set: Vec<String> = p.bbr_set.iter().map(u16::to_string).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            p.seq,
            p.direction.as_str(),
            p.sent_at,
            opt(p.recv_at),
            opt(p.rtt),
            p.lost,
            set.join(";"),
            p.dup_count
        );
    }
    out
}

pub fn summary_csv(summary: Option<&Summary>) -> String {
    let mut out = format!("{SUMMARY_HEADER}\n");
    if let Some(s) = summary {
        for (k, v) in [
            ("loss_rate", s.loss_rate),
            ("mean_rtt_s", s.mean_rtt_s),
            ("p99_rtt_s", s.p99_rtt_s),
            ("max_outage_s", s.max_outage_s),
            ("dup_ratio", s.dup_ratio),
        ] {
            let _ = writeln!(out, "{k},{v:.9}");
        }
    }
    out
}

/// Writes `packets.csv`, `summary.csv` and `scenario.ini` under `dir`.
pub fn emit_csv(dir: &Path, log: &MetricsLog, scenario_echo: &str) -> io::Result<Option<Summary>> {
    fs::create_dir_all(dir)?;
    let summary = summarize(log);
    fs::write(dir.join("packets.csv"), packets_csv(log))?;
    fs::write(dir.join("summary.csv"), summary_csv(summary.as_ref()))?;
    fs::write(dir.join("scenario.ini"), scenario_echo)?;
    Ok(summary)
}

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("bad header `{0}`")]
    Header(String),
}

fn secs(s: &str) -> Result<Option<SimTime>, String> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<SimTime>().map(Some).map_err(|e| e.0)
}

/// Reads back what [`packets_csv`] wrote.
pub fn read_packets_csv(text: &str) -> Result<Vec<PacketRecord>, CsvError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == PACKETS_HEADER => {}
        other => return Err(CsvError::Header(other.unwrap_or("").to_string())),
    }
    lines
        .enumerate()
        .map(|(i, l)| {
            let bad = |msg: String| CsvError::Line { line: i + 2, msg };
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 8 {
                return Err(bad(format!("expected 8 fields, found {}", f.len())));
            }
            let direction = match f[1] {
                "downlink" => Direction::Downlink,
                "uplink" => Direction::Uplink,
                d => return Err(bad(format!("unknown direction `{d}`"))),
            };
            let bbr_set = if f[6].is_empty() {
                Default::default()
            } else {
                f[6].split(';').map(str::parse).collect::<Result<_, _>>().map_err(|e| bad(format!("{e}")))?
            };
            Ok(PacketRecord {
                seq: f[0].parse().map_err(|e| bad(format!("{e}")))?,
                direction,
                sent_at: secs(f[2]).map_err(bad)?.ok_or_else(|| bad("missing sent_at_s".into()))?,
                recv_at: secs(f[3]).map_err(bad)?,
                rtt: secs(f[4]).map_err(bad)?,
                lost: f[5].parse().map_err(|e| bad(format!("{e}")))?,
                bbr_set,
                dup_count: f[7].parse().map_err(|e| bad(format!("{e}")))?,
            })
        })
        .collect()
}
