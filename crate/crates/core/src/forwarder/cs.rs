use std::collections::{BTreeMap, HashMap};

use crate::packet::{Data, Name};
use crate::transport::Time;

pub const DEFAULT_CS_CAPACITY: usize = 1024;

/// A cached data packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsEntry {
    pub data: Data,
    pub arrival: Time,
    pub last_use: Time,
}

impl CsEntry {
    /// Fresh while the entry's age is within the data's freshness period.
    /// A zero freshness period is never fresh.
    pub fn is_fresh(&self, now: Time) -> bool {
        let freshness = self.data.freshness_ms() as u128 * 1000;
        freshness > 0 && (now - self.arrival).as_micros() <= freshness
    }
}

/// Exact-name content store with least-recently-used eviction.
///
/// Entries are never evicted by age; staleness only matters to lookups that
/// require fresh data.
#[derive(Debug, Clone)]
pub struct ContentStore {
    capacity: usize,
    entries: HashMap<Name, (CsEntry, u64)>,
    recency: BTreeMap<u64, Name>,
    tick: u64,
}

impl ContentStore {
    pub fn new(capacity: usize) -> Self {
        ContentStore {
            capacity,
            entries: HashMap::new(),
            recency: BTreeMap::new(),
            tick: 0,
        }
    }

    fn touch(&mut self, name: &Name) {
        self.tick += 1;
        if let Some((_, stamp)) = self.entries.get_mut(name) {
            self.recency.remove(stamp);
            *stamp = self.tick;
            self.recency.insert(self.tick, name.clone());
        }
    }

    /// Inserts or replaces the entry for the data's name, returning the name
    /// evicted to stay within capacity, if any.
    pub fn insert(&mut self, data: Data, now: Time) -> Option<Name> {
        let name = data.name().clone();
        let entry = CsEntry {
            data,
            arrival: now,
            last_use: now,
        };
        self.tick += 1;
        if let Some((_, old)) = self.entries.insert(name.clone(), (entry, self.tick)) {
            self.recency.remove(&old);
        }
        self.recency.insert(self.tick, name);
        if self.entries.len() > self.capacity {
            let (_, victim) = self.recency.pop_first()?;
            self.entries.remove(&victim);
            return Some(victim);
        }
        None
    }

    /// Returns the cached data for `name`. When `must_be_fresh` is set, stale
    /// entries are treated as misses. A hit refreshes the entry's recency.
    pub fn lookup(&mut self, name: &Name, must_be_fresh: bool, now: Time) -> Option<&Data> {
        let (entry, _) = self.entries.get(name)?;
        if must_be_fresh && !entry.is_fresh(now) {
            return None;
        }
        self.touch(name);
        let (entry, _) = self.entries.get_mut(name)?;
        entry.last_use = now;
        Some(&entry.data)
    }

    pub fn get(&self, name: &Name) -> Option<&CsEntry> {
        self.entries.get(name).map(|(e, _)| e)
    }

    /// Names from least to most recently used.
    pub fn lru_order(&self) -> Vec<Name> {
        self.recency.values().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }
}

impl Default for ContentStore {
    fn default() -> Self {
        Self::new(DEFAULT_CS_CAPACITY)
    }
}
