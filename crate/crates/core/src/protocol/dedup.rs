use std::collections::{HashMap, VecDeque};

use crate::time::SimTime;

/// Hashes of recently accepted uplink frames.
///
/// Entries live for `ttl` after their first sighting; a hash still present
/// marks any further copy as a duplicate.
#[derive(Debug, Clone)]
pub struct DedupTable {
    ttl: SimTime,
    first_seen: HashMap<u64, SimTime>,
    order: VecDeque<(SimTime, u64)>,
}

impl DedupTable {
    pub fn new(ttl: SimTime) -> Self {
        Self { ttl, first_seen: HashMap::new(), order: VecDeque::new() }
    }

    pub fn ttl(&self) -> SimTime {
        self.ttl
    }

    pub fn len(&self) -> usize {
        self.first_seen.len()
    }

    pub fn is_empty(&self) -> bool {
        self.first_seen.is_empty()
    }

    /// Removes every entry older than `ttl` at `now`.
    pub fn purge(&mut self, now: SimTime) {
        while let Some(&(seen, hash)) = self.order.front() {
            if now.saturating_sub(seen) <= self.ttl {
                break;
            }
            self.order.pop_front();
            self.first_seen.remove(&hash);
        }
    }

    pub fn contains(&self, hash: u64) -> bool {
        self.first_seen.contains_key(&hash)
    }

    /// Purges, then records `hash`. Returns `true` for a first copy and
    /// `false` for a duplicate.
    pub fn observe(&mut self, hash: u64, now: SimTime) -> bool {
        self.purge(now);
        if self.first_seen.contains_key(&hash) {
            return false;
        }
        self.first_seen.insert(hash, now);
        self.order.push_back((now, hash));
        true
    }

    pub fn oldest(&self) -> Option<SimTime> {
        self.order.front().map(|(t, _)| *t)
    }
}
