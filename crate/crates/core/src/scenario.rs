//! Scenario description and its INI-style text form.
//!
//! ```text
//! [scenario]
//! name = demo
//! horizon_s = 60
//! sync_mode = vgm
//!
//! [bbr.1]
//! position_m = 8.5
//!
//! [node.1]
//! start_m = 0
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::protocol::frame::{MAX_PAYLOAD, MIN_PAYLOAD};
use crate::radio::{RadioParams, Trajectory};
use crate::time_sync::SyncParams;
use crate::tsch::{SlotframeConfig, MAX_CHANNEL, MIN_CHANNEL};

/// Highest mobile speed the network is dimensioned for, in m/s.
pub const MAX_SPEED: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("override `{text}`: {msg}")]
    Override { text: String, msg: String },
    #[error("missing required section [{0}]")]
    MissingSection(&'static str),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SyncMode {
    /// Every router disciplined by the network server over the backbone.
    Vgm,
    /// Free-running routers, each with its own timebase.
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JoinMode {
    Scan,
    /// Cells installed before the run; the node starts operational.
    Provisioned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Direction {
    Downlink,
    Uplink,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Downlink => "downlink",
            Direction::Uplink => "uplink",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BbrSpec {
    pub position: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSpec {
    pub trajectory: Trajectory,
    pub join: JoinMode,
}

/// Static nodes spread evenly over `[from, to]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FleetSpec {
    pub count: u32,
    pub from: f64,
    pub to: f64,
    pub join: JoinMode,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficSpec {
    pub direction: Direction,
    pub payload_bytes: u16,
    pub period: f64,
    /// Delay between a node's first accepted uplink and its first packet.
    pub start_delay: f64,
    /// Traffic stops this long before the horizon so queues can drain.
    pub drain: f64,
    pub override_rate_limit: bool,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        Self {
            direction: Direction::Downlink,
            payload_bytes: 80,
            period: 1.0,
            start_delay: 1.0,
            drain: 10.0,
            override_rate_limit: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub horizon: f64,
    pub sync_mode: SyncMode,
    pub slotframe: SlotframeConfig,
    pub radio: RadioParams,
    pub sync: SyncParams,
    pub bbrs: Vec<BbrSpec>,
    pub nodes: Vec<NodeSpec>,
    pub fleet: Option<FleetSpec>,
    pub traffic: TrafficSpec,
}

impl Scenario {
    /// Explicit nodes followed by the expanded fleet.
    pub fn all_nodes(&self) -> Vec<NodeSpec> {
        let mut out = self.nodes.clone();
        if let Some(f) = self.fleet {
            for i in 0..f.count {
                let pos = if f.count > 1 { f.from + (f.to - f.from) * i as f64 / (f.count - 1) as f64 } else { f.from };
                out.push(NodeSpec { trajectory: Trajectory::stationary(pos), join: f.join });
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    origin: Origin,
}

#[derive(Debug, Clone)]
enum Origin {
    Line(usize),
    Override(String),
}

impl Origin {
    fn err(&self, msg: impl Into<String>) -> ConfigError {
        match self {
            Origin::Line(line) => ConfigError::Line { line: *line, msg: msg.into() },
            Origin::Override(text) => ConfigError::Override { text: text.clone(), msg: msg.into() },
        }
    }
}

/// Sections in file order, each holding its keys.
#[derive(Debug, Clone, Default)]
struct Document {
    sections: BTreeMap<String, (usize, BTreeMap<String, Entry>)>,
}

fn tokenize(text: &str) -> Result<Document, ConfigError> {
    let mut doc = Document::default();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split(['#', ';']).next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Line { line, msg: format!("unterminated section header `{body}`") })?
                .trim()
                .to_string();
            if name.is_empty() {
                return Err(ConfigError::Line { line, msg: "empty section name".into() });
            }
            if doc.sections.contains_key(&name) {
                return Err(ConfigError::Line { line, msg: format!("duplicate section [{name}]") });
            }
            doc.sections.insert(name.clone(), (line, BTreeMap::new()));
            current = Some(name);
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| ConfigError::Line { line, msg: format!("expected `key = value`, found `{body}`") })?;
        let key = key.trim();
        if key.is_empty() {
            return Err(ConfigError::Line { line, msg: "empty key".into() });
        }
        let section = current
            .as_ref()
            .ok_or_else(|| ConfigError::Line { line, msg: format!("key `{key}` outside any section") })?;
        let keys = &mut doc.sections.get_mut(section).expect("section exists").1;
        if keys.contains_key(key) {
            return Err(ConfigError::Line { line, msg: format!("duplicate key `{key}`") });
        }
        keys.insert(key.to_string(), Entry { value: value.trim().to_string(), origin: Origin::Line(line) });
    }
    Ok(doc)
}

/// Applies `section.key=value`; section names may contain dots (`bbr.2.position_m=40`).
fn apply_override(doc: &mut Document, text: &str) -> Result<(), ConfigError> {
    let bad = |msg: &str| ConfigError::Override { text: text.to_string(), msg: msg.to_string() };
    let (path, value) = text.split_once('=').ok_or_else(|| bad("expected section.key=value"))?;
    let (section, key) = path.trim().rsplit_once('.').ok_or_else(|| bad("expected section.key=value"))?;
    if section.is_empty() || key.is_empty() {
        return Err(bad("expected section.key=value"));
    }
    let entry = Entry { value: value.trim().to_string(), origin: Origin::Override(text.to_string()) };
    doc.sections.entry(section.to_string()).or_insert((0, BTreeMap::new())).1.insert(key.to_string(), entry);
    Ok(())
}

struct Section<'a> {
    name: &'a str,
    line: usize,
    keys: &'a BTreeMap<String, Entry>,
}

impl<'a> Section<'a> {
    fn check_keys(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        for (k, e) in self.keys {
            if !allowed.contains(&k.as_str()) {
                return Err(e.origin.err(format!("unknown key `{k}` in [{}]", self.name)));
            }
        }
        Ok(())
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<(T, &'a Origin)>, ConfigError> {
        let Some(e) = self.keys.get(key) else {
            return Ok(None);
        };
        e.value
            .parse::<T>()
            .map(|v| Some((v, &e.origin)))
            .map_err(|_| e.origin.err(format!("invalid value `{}` for `{key}`", e.value)))
    }

    fn f64_in(&self, key: &str, default: f64, lo: f64, hi: f64) -> Result<f64, ConfigError> {
        match self.get::<f64>(key)? {
            None => Ok(default),
            Some((v, _)) if v.is_finite() && v >= lo && v <= hi => Ok(v),
            Some((v, o)) => Err(o.err(format!("`{key}` = {v} outside [{lo}, {hi}]"))),
        }
    }

    fn required_f64(&self, key: &str, lo: f64, hi: f64) -> Result<f64, ConfigError> {
        if !self.keys.contains_key(key) {
            return Err(self.missing(key));
        }
        self.f64_in(key, 0.0, lo, hi)
    }

    fn missing(&self, key: &str) -> ConfigError {
        let msg = format!("[{}] requires `{key}`", self.name);
        if self.line == 0 {
            ConfigError::Invalid(msg)
        } else {
            ConfigError::Line { line: self.line, msg }
        }
    }

    fn word(&self, key: &str) -> Option<(&'a str, &'a Origin)> {
        self.keys.get(key).map(|e| (e.value.as_str(), &e.origin))
    }
}

fn parse_join(s: Option<(&str, &Origin)>) -> Result<JoinMode, ConfigError> {
    match s {
        None | Some(("scan", _)) => Ok(JoinMode::Scan),
        Some(("provisioned", _)) => Ok(JoinMode::Provisioned),
        Some((v, o)) => Err(o.err(format!("join must be scan or provisioned, found `{v}`"))),
    }
}

/// Parses and validates a scenario, filling defaults.
pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    parse_with_overrides(text, &[])
}

pub fn parse_with_overrides(text: &str, overrides: &[String]) -> Result<Scenario, ConfigError> {
    let mut doc = tokenize(text)?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    build(&doc)
}

fn indexed(name: &str, prefix: &str) -> Option<u32> {
    name.strip_prefix(prefix)?.strip_prefix('.')?.parse().ok()
}

fn build(doc: &Document) -> Result<Scenario, ConfigError> {
    let section = |name: &'static str| {
        doc.sections.get_key_value(name).map(|(n, (line, keys))| Section { name: n, line: *line, keys })
    };
    let empty = BTreeMap::new();
    let or_empty = |name: &'static str| section(name).unwrap_or(Section { name, line: 0, keys: &empty });

    for (name, (line, keys)) in &doc.sections {
        let known = matches!(name.as_str(), "scenario" | "slotframe" | "radio" | "sync" | "fleet" | "traffic")
            || indexed(name, "bbr").is_some()
            || indexed(name, "node").is_some();
        if !known {
            let origin = if *line > 0 {
                Origin::Line(*line)
            } else {
                keys.values().next().map(|e| e.origin.clone()).unwrap_or(Origin::Line(0))
            };
            return Err(origin.err(format!("unknown section [{name}]")));
        }
    }

    let sc = section("scenario").ok_or(ConfigError::MissingSection("scenario"))?;
    sc.check_keys(&["name", "seed", "horizon_s", "sync_mode"])?;
    let name = sc.word("name").map_or("scenario", |(v, _)| v).to_string();
    let seed = sc.get::<u64>("seed")?.map_or(1, |(v, _)| v);
    let horizon = sc.f64_in("horizon_s", 120.0, 1.0, 86_400.0)?;
    let sync_mode = match sc.word("sync_mode") {
        None | Some(("vgm", _)) => SyncMode::Vgm,
        Some(("baseline", _)) => SyncMode::Baseline,
        Some((v, o)) => return Err(o.err(format!("sync_mode must be vgm or baseline, found `{v}`"))),
    };

    let sf = or_empty("slotframe");
    sf.check_keys(&["length", "slot_duration_s", "hopping"])?;
    let length = match sf.get::<u16>("length")? {
        None => SlotframeConfig::DEFAULT_LENGTH,
        Some((v, o)) if !(8..=1024).contains(&v) => return Err(o.err(format!("`length` = {v} outside [8, 1024]"))),
        Some((v, _)) => v,
    };
    let slot_duration = sf.f64_in("slot_duration_s", SlotframeConfig::DEFAULT_SLOT_DURATION, 1e-3, 1.0)?;
    let hopping = match sf.word("hopping") {
        None => SlotframeConfig::identity_hopping(),
        Some((v, o)) => v
            .split(',')
            .map(|c| c.trim().parse::<u8>())
            .collect::<Result<Vec<u8>, _>>()
            .map_err(|_| o.err(format!("hopping must list channels {MIN_CHANNEL}..={MAX_CHANNEL}, found `{v}`")))?,
    };
    let slotframe = SlotframeConfig::new(length, slot_duration, hopping).map_err(|e| match sf.keys.get("hopping") {
        Some(h) => h.origin.err(e.to_string()),
        None => ConfigError::Invalid(e.to_string()),
    })?;

    let r = or_empty("radio");
    r.check_keys(&[
        "tx_power_dbm",
        "attenuation_db",
        "pl0_db",
        "path_loss_exponent",
        "sensitivity_dbm",
        "shadowing_sigma_db",
    ])?;
    let d = RadioParams::default();
    let radio = RadioParams {
        tx_power_dbm: r.f64_in("tx_power_dbm", d.tx_power_dbm, -30.0, 30.0)?,
        ext_attenuation_db: r.f64_in("attenuation_db", d.ext_attenuation_db, 0.0, 100.0)?,
        pl0_db: r.f64_in("pl0_db", d.pl0_db, 0.0, 120.0)?,
        exponent: r.f64_in("path_loss_exponent", d.exponent, 1.0, 6.0)?,
        sensitivity_dbm: r.f64_in("sensitivity_dbm", d.sensitivity_dbm, -130.0, -30.0)?,
        shadowing_sigma_db: r.f64_in("shadowing_sigma_db", d.shadowing_sigma_db, 0.0, 20.0)?,
    };

    let s = or_empty("sync");
    s.check_keys(&[
        "error_bound_s",
        "period_s",
        "backbone_delay_s",
        "guard_time_s",
        "max_drift_ppm",
        "keepalive_s",
        "desync_timeout_s",
    ])?;
    let d = SyncParams::default();
    let sync = SyncParams {
        sync_error_bound: s.f64_in("error_bound_s", d.sync_error_bound, 0.0, 0.01)?,
        sync_period: s.f64_in("period_s", d.sync_period, 0.1, 3600.0)?,
        backbone_delay: s.f64_in("backbone_delay_s", d.backbone_delay, 0.0, 1.0)?,
        guard_time: s.f64_in("guard_time_s", d.guard_time, 1e-6, slot_duration / 2.0)?,
        max_drift_ppm: s.f64_in("max_drift_ppm", d.max_drift_ppm, 0.0, 200.0)?,
        keepalive: s.f64_in("keepalive_s", d.keepalive, 0.1, 3600.0)?,
        desync_timeout: s.f64_in("desync_timeout_s", d.desync_timeout, 0.1, 3600.0)?,
    };

    let mut bbrs = Vec::new();
    let mut nodes = Vec::new();
    for (name, (line, keys)) in &doc.sections {
        let sec = Section { name, line: *line, keys };
        if indexed(name, "bbr").is_some() {
            sec.check_keys(&["position_m"])?;
            bbrs.push(BbrSpec { position: sec.required_f64("position_m", -1e6, 1e6)? });
        } else if indexed(name, "node").is_some() {
            sec.check_keys(&["start_m", "end_m", "speed_mps", "start_time_s", "join"])?;
            let start_pos = sec.required_f64("start_m", -1e6, 1e6)?;
            let end_pos = sec.f64_in("end_m", start_pos, -1e6, 1e6)?;
            let speed = sec.f64_in("speed_mps", 0.0, 0.0, MAX_SPEED)?;
            if end_pos != start_pos && speed == 0.0 {
                return Err(sec.missing("speed_mps"));
            }
            let start_time = sec.f64_in("start_time_s", 0.0, 0.0, 86_400.0)?;
            nodes.push(NodeSpec {
                trajectory: Trajectory { start_pos, end_pos, speed, start_time },
                join: parse_join(sec.word("join"))?,
            });
        }
    }
    // BTreeMap orders "bbr.10" before "bbr.2"; restore numeric order.
    let order = |prefix: &str| -> Vec<u32> {
        let mut ids: Vec<u32> = doc.sections.keys().filter_map(|n| indexed(n, prefix)).collect();
        ids.sort_unstable();
        ids
    };
    let bbr_ids = order("bbr");
    let mut lexical: Vec<u32> = doc.sections.keys().filter_map(|n| indexed(n, "bbr")).collect();
    let bbrs: Vec<BbrSpec> = bbr_ids.iter().map(|id| bbrs[lexical.iter().position(|x| x == id).unwrap()]).collect();
    lexical = doc.sections.keys().filter_map(|n| indexed(n, "node")).collect();
    let nodes: Vec<NodeSpec> = order("node").iter().map(|id| nodes[lexical.iter().position(|x| x == id).unwrap()]).collect();
    if bbrs.is_empty() {
        return Err(ConfigError::MissingSection("bbr.1"));
    }
    if bbrs.len() > slotframe.num_channel_offsets() as usize {
        return Err(ConfigError::Invalid(format!(
            "{} routers but only {} channel offsets for their beacons",
            bbrs.len(),
            slotframe.num_channel_offsets()
        )));
    }

    let fleet = match section("fleet") {
        None => None,
        Some(f) => {
            f.check_keys(&["count", "from_m", "to_m", "join"])?;
            let count = match f.get::<u32>("count")? {
                None => return Err(f.missing("count")),
                Some((v, o)) if v > 1000 => return Err(o.err(format!("`count` = {v} outside [0, 1000]"))),
                Some((v, _)) => v,
            };
            let from = f.required_f64("from_m", -1e6, 1e6)?;
            let to = f.f64_in("to_m", from, -1e6, 1e6)?;
            Some(FleetSpec { count, from, to, join: parse_join(f.word("join"))? })
        }
    };

    let t = or_empty("traffic");
    t.check_keys(&["direction", "payload_bytes", "period_s", "start_delay_s", "drain_s", "override_rate_limit"])?;
    let d = TrafficSpec::default();
    let direction = match t.word("direction") {
        None | Some(("downlink", _)) => Direction::Downlink,
        Some(("uplink", _)) => Direction::Uplink,
        Some((v, o)) => return Err(o.err(format!("direction must be downlink or uplink, found `{v}`"))),
    };
    let payload_bytes = match t.get::<u16>("payload_bytes")? {
        None => d.payload_bytes,
        Some((v, o)) if !(MIN_PAYLOAD..=MAX_PAYLOAD).contains(&v) => {
            return Err(o.err(format!("`payload_bytes` = {v} outside [{MIN_PAYLOAD}, {MAX_PAYLOAD}]")))
        }
        Some((v, _)) => v,
    };
    let override_rate_limit = t.get::<bool>("override_rate_limit")?.is_some_and(|(v, _)| v);
    let period = t.f64_in("period_s", d.period, 0.01, 3600.0)?;
    if period < 1.0 && !override_rate_limit {
        let o = &t.keys["period_s"].origin;
        return Err(o.err(format!("`period_s` = {period} exceeds the 1 Hz rate limit; set override_rate_limit = true")));
    }
    let traffic = TrafficSpec {
        direction,
        payload_bytes,
        period,
        start_delay: t.f64_in("start_delay_s", d.start_delay, 0.0, 3600.0)?,
        drain: t.f64_in("drain_s", d.drain, 0.0, 3600.0)?,
        override_rate_limit,
    };

    Ok(Scenario { name, seed, horizon, sync_mode, slotframe, radio, sync, bbrs, nodes, fleet, traffic })
}

/// Text form that [`parse_scenario`] reads back to an equal scenario.
pub fn to_ini(s: &Scenario) -> String {
    let mut out = String::new();
    let join = |j: JoinMode| match j {
        JoinMode::Scan => "scan",
        JoinMode::Provisioned => "provisioned",
    };
    let _ = writeln!(out, "[scenario]");
    let _ = writeln!(out, "name = {}", s.name);
    let _ = writeln!(out, "seed = {}", s.seed);
    let _ = writeln!(out, "horizon_s = {}", s.horizon);
    let mode = match s.sync_mode {
        SyncMode::Vgm => "vgm",
        SyncMode::Baseline => "baseline",
    };
    let _ = writeln!(out, "sync_mode = {mode}\n");
    let hop: Vec<String> = s.slotframe.hopping_sequence().iter().map(u8::to_string).collect();
    let _ = writeln!(out, "[slotframe]");
    let _ = writeln!(out, "length = {}", s.slotframe.length());
    let _ = writeln!(out, "slot_duration_s = {}", s.slotframe.slot_duration());
    let _ = writeln!(out, "hopping = {}\n", hop.join(","));
    let r = &s.radio;
    let _ = writeln!(out, "[radio]");
    let _ = writeln!(out, "tx_power_dbm = {}", r.tx_power_dbm);
    let _ = writeln!(out, "attenuation_db = {}", r.ext_attenuation_db);
    let _ = writeln!(out, "pl0_db = {}", r.pl0_db);
    let _ = writeln!(out, "path_loss_exponent = {}", r.exponent);
    let _ = writeln!(out, "sensitivity_dbm = {}", r.sensitivity_dbm);
    let _ = writeln!(out, "shadowing_sigma_db = {}\n", r.shadowing_sigma_db);
    let y = &s.sync;
    let _ = writeln!(out, "[sync]");
    let _ = writeln!(out, "error_bound_s = {}", y.sync_error_bound);
    let _ = writeln!(out, "period_s = {}", y.sync_period);
    let _ = writeln!(out, "backbone_delay_s = {}", y.backbone_delay);
    let _ = writeln!(out, "guard_time_s = {}", y.guard_time);
    let _ = writeln!(out, "max_drift_ppm = {}", y.max_drift_ppm);
    let _ = writeln!(out, "keepalive_s = {}", y.keepalive);
    let _ = writeln!(out, "desync_timeout_s = {}\n", y.desync_timeout);
    for (i, b) in s.bbrs.iter().enumerate() {
        let _ = writeln!(out, "[bbr.{}]\nposition_m = {}\n", i + 1, b.position);
    }
    for (i, n) in s.nodes.iter().enumerate() {
        let t = &n.trajectory;
        let _ = writeln!(out, "[node.{}]", i + 1);
        let _ = writeln!(out, "start_m = {}", t.start_pos);
        let _ = writeln!(out, "end_m = {}", t.end_pos);
        let _ = writeln!(out, "speed_mps = {}", t.speed);
        let _ = writeln!(out, "start_time_s = {}", t.start_time);
        let _ = writeln!(out, "join = {}\n", join(n.join));
    }
    if let Some(f) = &s.fleet {
        let _ = writeln!(out, "[fleet]");
        let _ = writeln!(out, "count = {}", f.count);
        let _ = writeln!(out, "from_m = {}", f.from);
        let _ = writeln!(out, "to_m = {}", f.to);
        let _ = writeln!(out, "join = {}\n", join(f.join));
    }
    let t = &s.traffic;
    let _ = writeln!(out, "[traffic]");
    let _ = writeln!(out, "direction = {}", t.direction.as_str());
    let _ = writeln!(out, "payload_bytes = {}", t.payload_bytes);
    let _ = writeln!(out, "period_s = {}", t.period);
    let _ = writeln!(out, "start_delay_s = {}", t.start_delay);
    let _ = writeln!(out, "drain_s = {}", t.drain);
    let _ = writeln!(out, "override_rate_limit = {}", t.override_rate_limit);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[scenario]\n[bbr.1]\nposition_m = 0\n[node.1]\nstart_m = 5\n";

    const HANDOVER: &str = "\
# two routers 35 m apart
[scenario]
name = handover
horizon_s = 240
sync_mode = vgm

[radio]
attenuation_db = 20
tx_power_dbm = 3

[bbr.1]
position_m = 8.5
[bbr.2]
position_m = 43.5

[node.1]
start_m = 0
end_m = 52
speed_mps = 1
start_time_s = 60

[traffic]
direction = downlink
payload_bytes = 80
period_s = 1
";

    #[test]
    fn minimal_file_gets_defaults() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.slotframe.length(), SlotframeConfig::DEFAULT_LENGTH);
        assert_eq!(s.radio, RadioParams::default());
        assert_eq!(s.sync, SyncParams::default());
        assert_eq!(s.sync_mode, SyncMode::Vgm);
        assert_eq!(s.nodes[0].trajectory, Trajectory { start_pos: 5.0, end_pos: 5.0, speed: 0.0, start_time: 0.0 });
        assert_eq!(s.traffic, TrafficSpec::default());
    }

    #[test]
    fn handover_file() {
        let s = parse_scenario(HANDOVER).unwrap();
        assert_eq!(s.bbrs, vec![BbrSpec { position: 8.5 }, BbrSpec { position: 43.5 }]);
        assert_eq!(s.nodes[0].trajectory.end_pos, 52.0);
        assert_eq!(s.nodes[0].trajectory.arrival_time(), 112.0);
        assert_eq!(s.radio.ext_attenuation_db, 20.0);
        assert_eq!(s.traffic.payload_bytes, 80);
    }

    #[test]
    fn errors_name_the_line() {
        let bad = HANDOVER.replace("payload_bytes = 80", "payload_bytes = 200");
        let line = bad.lines().position(|l| l.contains("200")).unwrap() + 1;
        assert_eq!(
            parse_scenario(&bad),
            Err(ConfigError::Line { line, msg: "`payload_bytes` = 200 outside [8, 128]".into() })
        );
        let e = parse_scenario("[scenario]\ncolour = red\n[bbr.1]\nposition_m = 0\n").unwrap_err();
        assert!(matches!(e, ConfigError::Line { line: 2, .. }), "{e}");
        let e = parse_scenario("[scenario]\n[bbr.1]\nposition_m\n").unwrap_err();
        assert!(matches!(e, ConfigError::Line { line: 3, .. }), "{e}");
        let e = parse_scenario("[scenario]\n[bbr.1]\nposition_m = 0\n[wat]\n").unwrap_err();
        assert!(matches!(e, ConfigError::Line { line: 4, .. }), "{e}");
        assert_eq!(parse_scenario("[bbr.1]\nposition_m = 0\n"), Err(ConfigError::MissingSection("scenario")));
        assert_eq!(parse_scenario("[scenario]\n"), Err(ConfigError::MissingSection("bbr.1")));
    }

    #[test]
    fn rate_limit_needs_override() {
        let fast = HANDOVER.replace("period_s = 1", "period_s = 0.3");
        assert!(parse_scenario(&fast).is_err());
        let s = parse_with_overrides(&fast, &["traffic.override_rate_limit=true".into()]).unwrap();
        assert_eq!(s.traffic.period, 0.3);
    }

    #[test]
    fn overrides_replace_and_report() {
        let s = parse_with_overrides(HANDOVER, &["bbr.2.position_m=40".into(), "scenario.seed=9".into()]).unwrap();
        assert_eq!(s.bbrs[1].position, 40.0);
        assert_eq!(s.seed, 9);
        let e = parse_with_overrides(HANDOVER, &["radio.exponent=2".into()]).unwrap_err();
        assert!(matches!(e, ConfigError::Override { .. }), "{e}");
        assert!(parse_with_overrides(HANDOVER, &["nodot=1".into()]).is_err());
    }

    #[test]
    fn numeric_section_order() {
        let text = (1..=11).fold("[scenario]\n".to_string(), |acc, i| acc + &format!("[bbr.{i}]\nposition_m = {i}\n"));
        let s = parse_scenario(&text).unwrap();
        let pos: Vec<f64> = s.bbrs.iter().map(|b| b.position).collect();
        assert_eq!(pos, (1..=11).map(f64::from).collect::<Vec<_>>());
    }

    #[test]
    fn echo_round_trips() {
        let mut s = parse_scenario(HANDOVER).unwrap();
        s.fleet = Some(FleetSpec { count: 3, from: 0.0, to: 52.0, join: JoinMode::Provisioned });
        assert_eq!(parse_scenario(&to_ini(&s)).unwrap(), s);
        assert_eq!(s.all_nodes().len(), 4);
        assert_eq!(s.all_nodes()[2].trajectory.start_pos, 26.0);
    }
}
