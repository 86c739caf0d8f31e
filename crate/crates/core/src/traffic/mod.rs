//! Periodic producers and consumers for the three sensor workloads, and the
//! node logic that hosts them.
//!
//! A node is a passive state machine implementing [`NodeLogic`]: a driver
//! hands it received packets and timer ticks together with the current time
//! and transmits whatever it returns. The same nodes run over real sockets
//! and over simulated links under a virtual clock.

mod ndn;
mod pubsub_node;
mod stream;

use std::collections::BTreeMap;
use std::net::SocketAddr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forwarder::{Counters, FaceId, ForwarderError};
use crate::transport::Time;

pub use ndn::{NamingMode, NdnNode};
pub use pubsub_node::{PublisherNode, SubscriberNode, SUBSCRIBE_INTERVAL};
pub use stream::{
    builtin_streams, default_freshness_ms, gen_payload, wire_payload, ArrivalRecord, StreamSpec,
    MIN_PERIOD_US,
};

#[derive(Debug, Error)]
pub enum TrafficError {
    #[error("invalid stream: {0}")]
    InvalidStream(String),
    #[error(transparent)]
    Forwarder(#[from] ForwarderError),
}

/// Where a packet came from or goes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Peer {
    /// A named-data face of the node.
    Face(FaceId),
    /// A datagram address (pub/sub).
    Addr(SocketAddr),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transmit {
    pub to: Peer,
    pub bytes: Vec<u8>,
}

/// Per-stream activity seen by one consumer.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsumerStats {
    /// Interests emitted (named data) or SUB attempts (pub/sub).
    pub requests: u64,
    /// Periods that ended without data.
    pub timeouts: u64,
}

/// Everything a node observed during a run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeReport {
    pub node: String,
    pub arrivals: Vec<ArrivalRecord>,
    pub consumers: BTreeMap<String, ConsumerStats>,
    pub counters: Option<Counters>,
    pub errors: Vec<String>,
    pub cpu_percent: Option<f64>,
}

/// A node driven by an external event loop.
pub trait NodeLogic: Send {
    fn name(&self) -> &str;

    fn on_packet(&mut self, from: Peer, bytes: &[u8], now: Time, out: &mut Vec<Transmit>);

    /// Runs every periodic task due at or before `now`.
    fn on_timer(&mut self, now: Time, out: &mut Vec<Transmit>);

    /// Earliest time [`NodeLogic::on_timer`] has work to do.
    fn next_deadline(&self) -> Option<Time>;

    fn on_send_failure(&mut self, _to: Peer) {}

    fn report(&self) -> NodeReport;
}
