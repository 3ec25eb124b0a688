use std::cmp::Ordering;
use std::collections::{BTreeMap, VecDeque};

use crate::time::SimTime;
use crate::tsch::{BbrId, NodeId};

#[derive(Debug, Clone, Copy, PartialEq)]
struct Sighting {
    rssi_dbm: f64,
    at: SimTime,
}

/// Per-node record of which routers heard the node recently and how well.
#[derive(Debug, Clone)]
pub struct BbrTable {
    entry_ttl: SimTime,
    window: usize,
    entries: BTreeMap<NodeId, BTreeMap<BbrId, VecDeque<Sighting>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no fresh route to node {0}")]
pub struct NoRoute(pub NodeId);

/// Summary of one router's fresh reports for a node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteCandidate {
    pub bbr: BbrId,
    pub mean_rssi_dbm: f64,
    pub last_seen: SimTime,
    pub reports: usize,
}

impl BbrTable {
    pub fn new(entry_ttl: SimTime, window: usize) -> Self {
        assert!(window > 0);
        Self { entry_ttl, window, entries: BTreeMap::new() }
    }

    pub fn record(&mut self, node: NodeId, bbr: BbrId, rssi_dbm: f64, at: SimTime) {
        let ring = self.entries.entry(node).or_default().entry(bbr).or_default();
        ring.push_back(Sighting { rssi_dbm, at });
        while ring.len() > self.window {
            ring.pop_front();
        }
    }

    /// Routers with at least one report within `entry_ttl` of `now`, using
    /// only the last `window` reports of each.
    pub fn candidates(&self, node: NodeId, now: SimTime) -> Vec<RouteCandidate> {
        let Some(per_bbr) = self.entries.get(&node) else {
            return Vec::new();
        };
        per_bbr
            .iter()
            .filter_map(|(&bbr, ring)| {
                let fresh: Vec<&Sighting> = ring.iter().filter(|s| now.saturating_sub(s.at) <= self.entry_ttl).collect();
                let last = fresh.iter().map(|s| s.at).max()?;
                let mean = fresh.iter().map(|s| s.rssi_dbm).sum::<f64>() / fresh.len() as f64;
                Some(RouteCandidate { bbr, mean_rssi_dbm: mean, last_seen: last, reports: fresh.len() })
            })
            .collect()
    }

    /// Highest mean RSSI wins; ties go to the most recently seen router,
    /// then to the lowest router id.
    pub fn select(&self, node: NodeId, now: SimTime) -> Result<BbrId, NoRoute> {
        self.candidates(node, now)
            .into_iter()
            .max_by(route_order)
            .map(|c| c.bbr)
            .ok_or(NoRoute(node))
    }

    pub fn is_reachable(&self, node: NodeId, now: SimTime) -> bool {
        !self.candidates(node, now).is_empty()
    }
}

/// Preference order among fresh routes; the greatest is selected.
pub fn route_order(a: &RouteCandidate, b: &RouteCandidate) -> Ordering {
    a.mean_rssi_dbm.total_cmp(&b.mean_rssi_dbm).then(a.last_seen.cmp(&b.last_seen)).then(b.bbr.cmp(&a.bbr))
}
