use std::collections::{BTreeMap, BTreeSet};

use crate::packet::Name;
use crate::transport::Time;

use super::FaceId;

/// An interest waiting for data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PitEntry {
    pub name: Name,
    /// Every (face, nonce) that expressed this interest.
    pub downstream: BTreeSet<(FaceId, u32)>,
    pub expiry: Time,
    pub must_be_fresh: bool,
}

impl PitEntry {
    pub fn is_live(&self, now: Time) -> bool {
        self.expiry > now
    }

    /// Distinct downstream faces in ascending order.
    pub fn faces(&self) -> Vec<FaceId> {
        let mut faces: Vec<FaceId> = self.downstream.iter().map(|&(f, _)| f).collect();
        faces.dedup();
        faces
    }
}

#[derive(Debug, Default, Clone)]
pub struct Pit {
    entries: BTreeMap<Name, PitEntry>,
}

impl Pit {
    pub fn get(&self, name: &Name) -> Option<&PitEntry> {
        self.entries.get(name)
    }

    pub(crate) fn get_mut(&mut self, name: &Name) -> Option<&mut PitEntry> {
        self.entries.get_mut(name)
    }

    pub(crate) fn insert(&mut self, entry: PitEntry) {
        self.entries.insert(entry.name.clone(), entry);
    }

    pub(crate) fn remove(&mut self, name: &Name) -> Option<PitEntry> {
        self.entries.remove(name)
    }

    /// Drops entries whose expiry is at or before `now`.
    pub fn expire(&mut self, now: Time) -> usize {
        let before = self.entries.len();
        self.entries.retain(|_, e| e.is_live(now));
        before - self.entries.len()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PitEntry> {
        self.entries.values()
    }
}
