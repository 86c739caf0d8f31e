//! Per-node named-data forwarder.
//!
//! The forwarder is a synchronous state machine. Faces feed it packets with
//! the current time and it answers with [`Effect`]s naming what to transmit
//! where; it never touches a socket or reads a clock itself, so a trace of
//! effects fully describes its behavior.
//!
//! Interests go through the content store, then the pending interest table,
//! then the FIB. Data is accepted only when a live PIT entry asked for it; it
//! is then cached and sent to every face recorded in that entry.

mod cs;
mod fib;
mod pit;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::packet::{Data, Interest, Name};
use crate::transport::Time;

pub use cs::{ContentStore, CsEntry, DEFAULT_CS_CAPACITY};
pub use fib::{Fib, FibEntry};
pub use pit::{Pit, PitEntry};

/// Identifier of a face, unique for the lifetime of its forwarder.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct FaceId(pub u32);

impl fmt::Display for FaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "face{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    /// A link to another node.
    Network,
    /// A local consumer application.
    App,
    /// The virtual face behind a registered producer handler.
    Producer,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ForwarderError {
    #[error("{0} does not exist")]
    UnknownFace(FaceId),
    #[error("a producer is already registered for {0}")]
    DuplicateRegistration(Name),
}

/// Local producer callback. Returning `None` leaves the interest pending.
pub type Handler = Box<dyn FnMut(&Interest, Time) -> Option<Data> + Send>;

/// A transmission requested by the forwarder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Effect {
    SendInterest { face: FaceId, interest: Interest },
    SendData { face: FaceId, data: Data },
}

impl Effect {
    pub fn face(&self) -> FaceId {
        match self {
            Effect::SendInterest { face, .. } | Effect::SendData { face, .. } => *face,
        }
    }
}

/// Result of a FIB lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FibMatch<'a> {
    Handler(FaceId),
    Faces(&'a [FaceId]),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub interests_in: u64,
    pub interests_out: u64,
    pub data_in: u64,
    pub data_out: u64,
    pub cs_hits: u64,
    pub no_route: u64,
    pub unsolicited: u64,
    pub loop_drops: u64,
    pub send_failures: u64,
}

impl Counters {
    /// Name/value pairs in a fixed order.
    pub fn fields(&self) -> [(&'static str, u64); 9] {
        [
            ("interests_in", self.interests_in),
            ("interests_out", self.interests_out),
            ("data_in", self.data_in),
            ("data_out", self.data_out),
            ("cs_hits", self.cs_hits),
            ("no_route", self.no_route),
            ("unsolicited", self.unsolicited),
            ("loop_drops", self.loop_drops),
            ("send_failures", self.send_failures),
        ]
    }
}

pub struct Forwarder {
    faces: BTreeMap<FaceId, FaceKind>,
    next_face: u32,
    fib: Fib,
    handlers: BTreeMap<FaceId, Handler>,
    registered: BTreeMap<Name, FaceId>,
    pit: Pit,
    cs: ContentStore,
    counters: Counters,
}

impl fmt::Debug for Forwarder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Forwarder")
            .field("faces", &self.faces)
            .field("fib", &self.fib)
            .field("registered", &self.registered)
            .field("pit", &self.pit)
            .field("cs_len", &self.cs.len())
            .field("counters", &self.counters)
            .finish()
    }
}

impl Default for Forwarder {
    fn default() -> Self {
        Self::new(DEFAULT_CS_CAPACITY)
    }
}

impl Forwarder {
    pub fn new(cs_capacity: usize) -> Self {
        Forwarder {
            faces: BTreeMap::new(),
            next_face: 1,
            fib: Fib::new(),
            handlers: BTreeMap::new(),
            registered: BTreeMap::new(),
            pit: Pit::default(),
            cs: ContentStore::new(cs_capacity),
            counters: Counters::default(),
        }
    }

    pub fn add_face(&mut self, kind: FaceKind) -> FaceId {
        let id = FaceId(self.next_face);
        self.next_face += 1;
        self.faces.insert(id, kind);
        id
    }

    pub fn face_kind(&self, face: FaceId) -> Option<FaceKind> {
        self.faces.get(&face).copied()
    }

    /// Removes a face and every route through it. Identifiers are not reused.
    pub fn remove_face(&mut self, face: FaceId) {
        self.faces.remove(&face);
        self.fib.remove_face(face);
        if self.handlers.remove(&face).is_some() {
            self.registered.retain(|_, &mut f| f != face);
        }
    }

    pub fn add_route(&mut self, prefix: Name, face: FaceId) -> Result<(), ForwarderError> {
        if !self.faces.contains_key(&face) {
            return Err(ForwarderError::UnknownFace(face));
        }
        self.fib.add(prefix, face);
        Ok(())
    }

    /// Attaches a local producer to `prefix` through a fresh virtual face.
    /// On a prefix that also has network routes the producer takes precedence.
    pub fn register_prefix(
        &mut self,
        prefix: Name,
        handler: Handler,
    ) -> Result<FaceId, ForwarderError> {
        if self.registered.contains_key(&prefix) {
            return Err(ForwarderError::DuplicateRegistration(prefix));
        }
        let face = self.add_face(FaceKind::Producer);
        self.handlers.insert(face, handler);
        self.registered.insert(prefix.clone(), face);
        self.fib.add_first(prefix, face);
        Ok(face)
    }

    pub fn fib_longest_prefix(&self, name: &Name) -> Option<FibMatch<'_>> {
        let (_, hops) = self.fib.longest_prefix(name)?;
        match hops
            .iter()
            .find(|f| self.faces.get(f) == Some(&FaceKind::Producer))
        {
            Some(&handler) => Some(FibMatch::Handler(handler)),
            None => Some(FibMatch::Faces(hops)),
        }
    }

    pub fn on_interest(&mut self, in_face: FaceId, interest: Interest, now: Time) -> Vec<Effect> {
        let mut effects = Vec::new();
        self.process_interest(in_face, interest, now, &mut effects);
        effects
    }

    fn process_interest(
        &mut self,
        in_face: FaceId,
        interest: Interest,
        now: Time,
        effects: &mut Vec<Effect>,
    ) {
        self.counters.interests_in += 1;
        let name = interest.name().clone();

        if let Some(data) = self.cs.lookup(&name, interest.must_be_fresh(), now) {
            self.counters.cs_hits += 1;
            self.counters.data_out += 1;
            effects.push(Effect::SendData {
                face: in_face,
                data: data.clone(),
            });
            return;
        }

        let lifetime = std::time::Duration::from_millis(interest.lifetime_ms() as u64);
        if let Some(entry) = self.pit.get_mut(&name).filter(|e| e.is_live(now)) {
            if !entry.downstream.insert((in_face, interest.nonce())) {
                self.counters.loop_drops += 1;
            }
            entry.expiry = entry.expiry.max(now + lifetime);
            return;
        }

        self.pit.insert(PitEntry {
            name: name.clone(),
            downstream: [(in_face, interest.nonce())].into_iter().collect(),
            expiry: now + lifetime,
            must_be_fresh: interest.must_be_fresh(),
        });

        match self.fib_longest_prefix(&name) {
            Some(FibMatch::Handler(face)) => {
                let produced = self
                    .handlers
                    .get_mut(&face)
                    .and_then(|handler| handler(&interest, now));
                if let Some(data) = produced {
                    self.process_data(face, data, now, effects);
                }
            }
            Some(FibMatch::Faces(hops)) => match hops.iter().find(|&&f| f != in_face) {
                Some(&face) => {
                    self.counters.interests_out += 1;
                    effects.push(Effect::SendInterest { face, interest });
                }
                None => self.counters.no_route += 1,
            },
            None => self.counters.no_route += 1,
        }
    }

    pub fn on_data(&mut self, in_face: FaceId, data: Data, now: Time) -> Vec<Effect> {
        let mut effects = Vec::new();
        self.process_data(in_face, data, now, &mut effects);
        effects
    }

    fn process_data(&mut self, in_face: FaceId, data: Data, now: Time, effects: &mut Vec<Effect>) {
        self.counters.data_in += 1;
        let entry = match self.pit.remove(data.name()) {
            Some(entry) if entry.is_live(now) => entry,
            _ => {
                self.counters.unsolicited += 1;
                return;
            }
        };
        self.cs.insert(data.clone(), now);
        for face in entry.faces().into_iter().filter(|&f| f != in_face) {
            self.counters.data_out += 1;
            effects.push(Effect::SendData {
                face,
                data: data.clone(),
            });
        }
    }

    /// Removes PIT entries that expired at or before `now`.
    pub fn expire(&mut self, now: Time) {
        self.pit.expire(now);
    }

    pub fn cs_insert(&mut self, data: Data, now: Time) -> Option<Name> {
        self.cs.insert(data, now)
    }

    pub fn cs_lookup(&mut self, name: &Name, must_be_fresh: bool, now: Time) -> Option<Data> {
        self.cs.lookup(name, must_be_fresh, now).cloned()
    }

    pub fn record_send_failure(&mut self) {
        self.counters.send_failures += 1;
    }

    pub fn counters(&self) -> Counters {
        self.counters
    }

    pub fn fib(&self) -> &Fib {
        &self.fib
    }

    pub fn pit(&self) -> &Pit {
        &self.pit
    }

    pub fn cs(&self) -> &ContentStore {
        &self.cs
    }
}
