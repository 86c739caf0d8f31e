//! Seeded link simulator driven by an external (usually virtual) clock.
//!
//! Each direction of a link draws loss and delay from its own ChaCha stream,
//! so a trace depends only on the profile seed and the sequence of sends.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Time, TransportError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkProfile {
    pub latency_mean_us: u64,
    #[serde(default)]
    pub jitter_stddev_us: u64,
    #[serde(default)]
    pub loss_probability: f64,
    #[serde(default)]
    pub seed: u64,
}

impl LinkProfile {
    /// A lossless link that delivers immediately.
    pub const PERFECT: LinkProfile = LinkProfile {
        latency_mean_us: 0,
        jitter_stddev_us: 0,
        loss_probability: 0.0,
        seed: 0,
    };

    pub fn validate(&self) -> Result<(), TransportError> {
        if !(0.0..=1.0).contains(&self.loss_probability) {
            return Err(TransportError::InvalidProfile(format!(
                "loss_probability {} outside [0, 1]",
                self.loss_probability
            )));
        }
        Ok(())
    }
}

impl Default for LinkProfile {
    fn default() -> Self {
        Self::PERFECT
    }
}

/// One end of a simulated link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SimEnd(pub u32);

impl SimEnd {
    pub fn peer(self) -> SimEnd {
        SimEnd(self.0 ^ 1)
    }

    fn link(self) -> usize {
        (self.0 / 2) as usize
    }

    fn direction(self) -> usize {
        (self.0 & 1) as usize
    }
}

#[derive(Debug)]
struct Direction {
    rng: ChaCha8Rng,
    last_delivery: Time,
}

#[derive(Debug)]
struct SimLink {
    profile: LinkProfile,
    jitter: Option<Normal<f64>>,
    /// Reliable, in-order delivery (stream transports).
    ordered: bool,
    dirs: [Direction; 2],
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
struct InFlight {
    at: Time,
    seq: u64,
    to: SimEnd,
    bytes: Vec<u8>,
}

/// A set of simulated point-to-point links sharing one delivery queue.
#[derive(Debug, Default)]
pub struct SimNetwork {
    links: Vec<SimLink>,
    queue: BinaryHeap<Reverse<InFlight>>,
    seq: u64,
    dropped: u64,
}

impl SimNetwork {
    pub fn new() -> Self {
        Self::default()
    }

    /// A datagram-like link: packets may be lost and may overtake each other
    /// under jitter.
    pub fn open_sim_link(&mut self, profile: LinkProfile) -> Result<(SimEnd, SimEnd), TransportError> {
        self.open(profile, false)
    }

    /// A stream-like link: never loses packets and preserves send order.
    pub fn open_ordered_link(
        &mut self,
        profile: LinkProfile,
    ) -> Result<(SimEnd, SimEnd), TransportError> {
        self.open(LinkProfile { loss_probability: 0.0, ..profile }, true)
    }

    fn open(&mut self, profile: LinkProfile, ordered: bool) -> Result<(SimEnd, SimEnd), TransportError> {
        profile.validate()?;
        let jitter = (profile.jitter_stddev_us > 0).then(|| {
            Normal::new(profile.latency_mean_us as f64, profile.jitter_stddev_us as f64)
                .expect("finite positive stddev")
        });
        let dir = |d: u64| Direction {
            rng: ChaCha8Rng::seed_from_u64(profile.seed.wrapping_mul(2).wrapping_add(d)),
            last_delivery: Time::ZERO,
        };
        let index = self.links.len() as u32;
        self.links.push(SimLink { profile, jitter, ordered, dirs: [dir(0), dir(1)] });
        Ok((SimEnd(index * 2), SimEnd(index * 2 + 1)))
    }

    /// Sends from `from` to its peer. Returns false when the packet is lost.
    pub fn send(&mut self, from: SimEnd, bytes: Vec<u8>, now: Time) -> bool {
        let link = &mut self.links[from.link()];
        let dir = &mut link.dirs[from.direction()];
        if link.profile.loss_probability > 0.0 && dir.rng.gen_bool(link.profile.loss_probability) {
            self.dropped += 1;
            return false;
        }
        let delay_us = match &link.jitter {
            Some(normal) => normal.sample(&mut dir.rng).round().max(0.0) as u64,
            None => link.profile.latency_mean_us,
        };
        let mut at = now + Duration::from_micros(delay_us);
        if link.ordered {
            at = at.max(dir.last_delivery);
            dir.last_delivery = at;
        }
        self.seq += 1;
        self.queue.push(Reverse(InFlight { at, seq: self.seq, to: from.peer(), bytes }));
        true
    }

    /// Time of the earliest pending delivery.
    pub fn next_delivery(&self) -> Option<Time> {
        self.queue.peek().map(|Reverse(p)| p.at)
    }

    /// Removes and returns the earliest packet due at or before `now`.
    pub fn poll_one(&mut self, now: Time) -> Option<(SimEnd, Vec<u8>)> {
        if self.next_delivery()? > now {
            return None;
        }
        self.queue.pop().map(|Reverse(p)| (p.to, p.bytes))
    }

    /// Every packet due at or before `now`, in delivery order.
    pub fn poll(&mut self, now: Time) -> Vec<(SimEnd, Vec<u8>)> {
        std::iter::from_fn(|| self.poll_one(now)).collect()
    }

    pub fn in_flight(&self) -> usize {
        self.queue.len()
    }

    pub fn dropped(&self) -> u64 {
        self.dropped
    }
}
