use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::forwarder::{Effect, FaceId, FaceKind, Forwarder, DEFAULT_CS_CAPACITY};
use crate::packet::{Data, Interest, Name};
use crate::tlv::Packet;
use crate::transport::Time;

use super::{
    gen_payload, ArrivalRecord, ConsumerStats, NodeLogic, NodeReport, Peer, StreamSpec,
    TrafficError, Transmit,
};

/// How consumers name their interests.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum NamingMode {
    /// The stream name itself, relying on freshness to skip stale caches.
    #[default]
    Plain,
    /// The stream name plus a sequence component, `/trailer/lidar/<seq>`.
    Sequenced,
}

#[derive(Debug)]
struct Consumer {
    spec: StreamSpec,
    face: FaceId,
    naming: NamingMode,
    total: u64,
    next: u64,
    outstanding: Option<(u64, Time)>,
    arrivals: Vec<ArrivalRecord>,
    stats: ConsumerStats,
    rng: ChaCha8Rng,
}

impl Consumer {
    fn deadline(&self) -> Option<Time> {
        (self.next < self.total).then(|| Time::from_micros(self.next * self.spec.period_us))
    }

    fn interest(&mut self, seq: u64) -> Interest {
        let name = match self.naming {
            NamingMode::Plain => self.spec.name.clone(),
            NamingMode::Sequenced => self
                .spec
                .name
                .child(seq.to_string())
                .expect("sequence component fits"),
        };
        Interest::new(name, self.rng.gen())
            .with_lifetime_ms(self.spec.interest_lifetime_ms())
            .expect("lifetime is positive")
            .with_must_be_fresh(true)
    }

    fn on_data(&mut self, data: &Data, now: Time) {
        if let Some((seq, sent)) = self.outstanding.take() {
            self.arrivals.push(ArrivalRecord {
                stream: self.spec.name.to_uri(),
                seq,
                send_ts_us: Some(sent.as_micros()),
                recv_ts_us: now.as_micros(),
                size_bytes: data.encoded_len(),
            });
        }
    }
}

/// A named-data node: one forwarder plus the producers and consumers it hosts.
pub struct NdnNode {
    name: String,
    fw: Forwarder,
    consumers: Vec<Consumer>,
    by_face: BTreeMap<FaceId, usize>,
    productions: Arc<AtomicU64>,
    seed: u64,
    malformed: u64,
}

impl std::fmt::Debug for NdnNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NdnNode")
            .field("name", &self.name)
            .field("fw", &self.fw)
            .field("consumers", &self.consumers.len())
            .finish()
    }
}

impl NdnNode {
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        Self::with_cs_capacity(name, seed, DEFAULT_CS_CAPACITY)
    }

    pub fn with_cs_capacity(name: impl Into<String>, seed: u64, cs_capacity: usize) -> Self {
        NdnNode {
            name: name.into(),
            fw: Forwarder::new(cs_capacity),
            consumers: Vec::new(),
            by_face: BTreeMap::new(),
            productions: Arc::new(AtomicU64::new(0)),
            seed,
            malformed: 0,
        }
    }

    pub fn forwarder(&self) -> &Forwarder {
        &self.fw
    }

    pub fn forwarder_mut(&mut self) -> &mut Forwarder {
        &mut self.fw
    }

    pub fn add_network_face(&mut self) -> FaceId {
        self.fw.add_face(FaceKind::Network)
    }

    pub fn add_route(&mut self, prefix: Name, face: FaceId) -> Result<(), TrafficError> {
        Ok(self.fw.add_route(prefix, face)?)
    }

    /// Hosts a producer for `spec`. Each incoming interest is answered with
    /// the payload of the current period; the payload changes once per period
    /// and is generated at most once per period.
    pub fn add_producer(&mut self, spec: StreamSpec) -> Result<FaceId, TrafficError> {
        let seed = self.seed;
        let productions = self.productions.clone();
        let mut current: Option<(u64, Vec<u8>)> = None;
        let prefix = spec.name.clone();
        let handler = move |interest: &Interest, now: Time| -> Option<Data> {
            let period = now.as_micros() / spec.period_us;
            if current.as_ref().map(|(p, _)| *p) != Some(period) {
                productions.fetch_add(1, Ordering::Relaxed);
                let logical = gen_payload(&spec, period, seed);
                current = Some((period, spec.serialization.render(&logical)));
            }
            let content = current.as_ref().map(|(_, c)| c.clone())?;
            Data::new(interest.name().clone(), content, spec.freshness_ms, Vec::new()).ok()
        };
        Ok(self.fw.register_prefix(prefix, Box::new(handler))?)
    }

    /// Hosts a consumer that expresses one interest per period, `count` times.
    pub fn add_consumer(&mut self, spec: StreamSpec, count: u64, naming: NamingMode) -> FaceId {
        let face = self.fw.add_face(FaceKind::App);
        let mut seed_rng = ChaCha8Rng::seed_from_u64(self.seed);
        let salt: u64 = seed_rng.gen::<u64>() ^ (self.consumers.len() as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        self.by_face.insert(face, self.consumers.len());
        self.consumers.push(Consumer {
            spec,
            face,
            naming,
            total: count,
            next: 0,
            outstanding: None,
            arrivals: Vec::new(),
            stats: ConsumerStats::default(),
            rng: ChaCha8Rng::seed_from_u64(salt ^ face.0 as u64),
        });
        face
    }

    /// Times a producer generated a new payload.
    pub fn productions(&self) -> u64 {
        self.productions.load(Ordering::Relaxed)
    }

    fn apply(&mut self, effects: Vec<Effect>, now: Time, out: &mut Vec<Transmit>) {
        for effect in effects {
            let face = effect.face();
            if let Some(&index) = self.by_face.get(&face) {
                if let Effect::SendData { data, .. } = &effect {
                    self.consumers[index].on_data(data, now);
                }
                continue;
            }
            let packet = match effect {
                Effect::SendInterest { interest, .. } => Packet::Interest(interest),
                Effect::SendData { data, .. } => Packet::Data(data),
            };
            match packet.encode() {
                Ok(bytes) => out.push(Transmit { to: Peer::Face(face), bytes }),
                Err(_) => self.fw.record_send_failure(),
            }
        }
    }
}

impl NodeLogic for NdnNode {
    fn name(&self) -> &str {
        &self.name
    }

    fn on_packet(&mut self, from: Peer, bytes: &[u8], now: Time, out: &mut Vec<Transmit>) {
        let Peer::Face(face) = from else {
            self.malformed += 1;
            return;
        };
        let effects = match Packet::decode(bytes) {
            Ok(Packet::Interest(interest)) => self.fw.on_interest(face, interest, now),
            Ok(Packet::Data(data)) => self.fw.on_data(face, data, now),
            Err(_) => {
                self.malformed += 1;
                return;
            }
        };
        self.apply(effects, now, out);
    }

    fn on_timer(&mut self, now: Time, out: &mut Vec<Transmit>) {
        self.fw.expire(now);
        for index in 0..self.consumers.len() {
            while let Some(due) = self.consumers[index].deadline() {
                if due > now {
                    break;
                }
                let consumer = &mut self.consumers[index];
                let seq = consumer.next;
                consumer.next += 1;
                consumer.stats.requests += 1;
                if consumer.outstanding.is_some() {
                    consumer.stats.timeouts += 1;
                }
                consumer.outstanding = Some((seq, now));
                let interest = consumer.interest(seq);
                let face = consumer.face;
                let effects = self.fw.on_interest(face, interest, now);
                self.apply(effects, now, out);
            }
        }
    }

    fn next_deadline(&self) -> Option<Time> {
        self.consumers.iter().filter_map(Consumer::deadline).min()
    }

    fn on_send_failure(&mut self, _to: Peer) {
        self.fw.record_send_failure();
    }

    fn report(&self) -> NodeReport {
        let mut arrivals: Vec<ArrivalRecord> =
            self.consumers.iter().flat_map(|c| c.arrivals.iter().cloned()).collect();
        arrivals.sort_by_key(|a| a.recv_ts_us);
        let consumers = self
            .consumers
            .iter()
            .map(|c| {
                let mut stats = c.stats.clone();
                if c.outstanding.is_some() {
                    stats.timeouts += 1;
                }
                (c.spec.name.to_uri(), stats)
            })
            .collect();
        let mut errors = Vec::new();
        if self.malformed > 0 {
            errors.push(format!("{} malformed packets dropped", self.malformed));
        }
        NodeReport {
            node: self.name.clone(),
            arrivals,
            consumers,
            counters: Some(self.fw.counters()),
            errors,
            cpu_percent: None,
        }
    }
}
