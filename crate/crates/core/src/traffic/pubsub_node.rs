use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::time::Duration;

use crate::pubsub::{Publisher, Subscriber, Topic, DEFAULT_SUBSCRIBE_RETRIES};
use crate::transport::Time;

use super::{gen_payload, ArrivalRecord, ConsumerStats, NodeLogic, NodeReport, Peer, StreamSpec, Transmit};

/// Gap between SUB attempts while unacknowledged.
pub const SUBSCRIBE_INTERVAL: Duration = Duration::from_millis(200);

#[derive(Debug)]
struct Publication {
    spec: StreamSpec,
    topic: Topic,
    total: u64,
    next: u64,
}

impl Publication {
    fn deadline(&self) -> Option<Time> {
        (self.next < self.total).then(|| Time::from_micros(self.next * self.spec.period_us))
    }
}

/// Publishes every hosted stream once per period to its subscribers.
#[derive(Debug)]
pub struct PublisherNode {
    name: String,
    seed: u64,
    state: Publisher,
    publications: Vec<Publication>,
    published: u64,
    errors: Vec<String>,
}

impl PublisherNode {
    pub fn new(name: impl Into<String>, seed: u64) -> Self {
        PublisherNode {
            name: name.into(),
            seed,
            state: Publisher::new(),
            publications: Vec::new(),
            published: 0,
            errors: Vec::new(),
        }
    }

    pub fn add_stream(&mut self, spec: StreamSpec, count: u64) {
        let topic = Topic::new(spec.topic_name(), spec.serialization).expect("stream names are valid topics");
        self.publications.push(Publication { spec, topic, total: count, next: 0 });
    }

    pub fn state(&self) -> &Publisher {
        &self.state
    }

    /// Datagrams sent so far.
    pub fn published(&self) -> u64 {
        self.published
    }
}

impl NodeLogic for PublisherNode {
    fn name(&self) -> &str {
        &self.name
    }

    fn on_packet(&mut self, from: Peer, bytes: &[u8], _now: Time, out: &mut Vec<Transmit>) {
        let Peer::Addr(from) = from else { return };
        if let Some((to, ack)) = self.state.handle(from, bytes) {
            out.push(Transmit { to: Peer::Addr(to), bytes: ack });
        }
    }

    fn on_timer(&mut self, now: Time, out: &mut Vec<Transmit>) {
        for p in &mut self.publications {
            while let Some(due) = p.deadline() {
                if due > now {
                    break;
                }
                let seq = p.next;
                p.next += 1;
                let payload = gen_payload(&p.spec, seq, self.seed);
                match self.state.publish(&p.topic, &payload, seq, now) {
                    Ok(datagrams) => {
                        for (to, bytes) in datagrams {
                            self.published += 1;
                            out.push(Transmit { to: Peer::Addr(to), bytes });
                        }
                    }
                    Err(e) => self.errors.push(e.to_string()),
                }
            }
        }
    }

    fn next_deadline(&self) -> Option<Time> {
        self.publications.iter().filter_map(Publication::deadline).min()
    }

    fn report(&self) -> NodeReport {
        NodeReport {
            node: self.name.clone(),
            errors: self.errors.clone(),
            ..NodeReport::default()
        }
    }
}

#[derive(Debug)]
struct Subscription {
    stream: String,
    publisher: SocketAddr,
    state: Subscriber,
    attempts: u32,
    next_attempt: Time,
    arrivals: Vec<ArrivalRecord>,
}

/// Subscribes to topics on a publisher and logs every data message.
#[derive(Debug)]
pub struct SubscriberNode {
    name: String,
    reply_port: u16,
    subscriptions: Vec<Subscription>,
    errors: Vec<String>,
}

impl SubscriberNode {
    /// `reply_port` is the port this node's socket is bound to.
    pub fn new(name: impl Into<String>, reply_port: u16) -> Self {
        SubscriberNode { name: name.into(), reply_port, subscriptions: Vec::new(), errors: Vec::new() }
    }

    pub fn add_stream(&mut self, spec: &StreamSpec, publisher: SocketAddr) {
        self.subscriptions.push(Subscription {
            stream: spec.name.to_uri(),
            publisher,
            state: Subscriber::new(spec.topic_name(), self.reply_port),
            attempts: 0,
            next_attempt: Time::ZERO,
            arrivals: Vec::new(),
        });
    }

    pub fn all_acked(&self) -> bool {
        self.subscriptions.iter().all(|s| s.state.is_acked())
    }
}

impl Subscription {
    fn deadline(&self) -> Option<Time> {
        (!self.state.is_acked() && self.attempts < DEFAULT_SUBSCRIBE_RETRIES).then_some(self.next_attempt)
    }
}

impl NodeLogic for SubscriberNode {
    fn name(&self) -> &str {
        &self.name
    }

    fn on_packet(&mut self, _from: Peer, bytes: &[u8], now: Time, _out: &mut Vec<Transmit>) {
        for s in &mut self.subscriptions {
            if let Some(m) = s.state.handle(bytes) {
                s.arrivals.push(ArrivalRecord {
                    stream: s.stream.clone(),
                    seq: m.seq,
                    send_ts_us: Some(m.send_ts_us),
                    recv_ts_us: now.as_micros(),
                    size_bytes: bytes.len(),
                });
                return;
            }
        }
    }

    fn on_timer(&mut self, now: Time, out: &mut Vec<Transmit>) {
        for s in &mut self.subscriptions {
            if s.deadline().is_some_and(|d| d <= now) {
                s.attempts += 1;
                s.next_attempt = now + SUBSCRIBE_INTERVAL;
                out.push(Transmit { to: Peer::Addr(s.publisher), bytes: s.state.subscribe_message() });
            }
        }
    }

    fn next_deadline(&self) -> Option<Time> {
        self.subscriptions.iter().filter_map(Subscription::deadline).min()
    }

    fn on_send_failure(&mut self, to: Peer) {
        self.errors.push(format!("send to {to:?} failed"));
    }

    fn report(&self) -> NodeReport {
        let mut arrivals: Vec<ArrivalRecord> =
            self.subscriptions.iter().flat_map(|s| s.arrivals.iter().cloned()).collect();
        arrivals.sort_by_key(|a| a.recv_ts_us);
        let consumers = self
            .subscriptions
            .iter()
            .map(|s| {
                let stats = ConsumerStats {
                    requests: s.attempts as u64,
                    timeouts: u64::from(!s.state.is_acked()),
                };
                (s.stream.clone(), stats)
            })
            .collect::<BTreeMap<_, _>>();
        let mut errors = self.errors.clone();
        for s in &self.subscriptions {
            if !s.state.is_acked() {
                errors.push(format!("{}: no ACK after {} SUB attempts", s.stream, s.attempts));
            }
        }
        NodeReport { node: self.name.clone(), arrivals, consumers, errors, ..NodeReport::default() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::payload::Serialization;
    use crate::traffic::builtin_streams;

    fn addr(s: &str) -> SocketAddr {
        s.parse().unwrap()
    }

    #[test]
    fn subscribe_then_receive() {
        let can = builtin_streams()[1].clone().with_serialization(Serialization::String);
        let pub_addr = addr("127.0.0.33:7400");
        let sub_addr = addr("127.0.0.11:7400");
        let mut publisher = PublisherNode::new("pc", 5);
        publisher.add_stream(can.clone(), 3);
        let mut subscriber = SubscriberNode::new("rpi1", 7400);
        subscriber.add_stream(&can, pub_addr);

        let mut out = Vec::new();
        subscriber.on_timer(Time::ZERO, &mut out);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].to, Peer::Addr(pub_addr));
        let mut acks = Vec::new();
        publisher.on_packet(Peer::Addr(sub_addr), &out[0].bytes, Time::ZERO, &mut acks);
        assert_eq!(acks[0].to, Peer::Addr(sub_addr));
        subscriber.on_packet(Peer::Addr(pub_addr), &acks[0].bytes, Time::ZERO, &mut Vec::new());
        assert!(subscriber.all_acked());
        assert_eq!(subscriber.next_deadline(), None);

        let mut data = Vec::new();
        while let Some(t) = publisher.next_deadline() {
            publisher.on_timer(t, &mut data);
        }
        for (i, d) in data.iter().enumerate() {
            let t = Time::from_micros(i as u64 * 8000 + 300);
            subscriber.on_packet(Peer::Addr(pub_addr), &d.bytes, t, &mut Vec::new());
        }
        let report = subscriber.report();
        let seqs: Vec<u64> = report.arrivals.iter().map(|a| a.seq).collect();
        assert_eq!(seqs, vec![0, 1, 2]);
        assert_eq!(report.arrivals[1].send_ts_us, Some(8000));
        // 19 B header + 11 B topic + 320 B hex payload
        assert_eq!(report.arrivals[0].size_bytes, 19 + 11 + 320);
        assert!(report.errors.is_empty());
    }

    #[test]
    fn sub_retries_stop_after_limit() {
        let can = builtin_streams()[1].clone();
        let mut subscriber = SubscriberNode::new("rpi1", 7400);
        subscriber.add_stream(&can, addr("127.0.0.33:7400"));
        let mut out = Vec::new();
        let mut times = Vec::new();
        while let Some(t) = subscriber.next_deadline() {
            times.push(t.as_micros());
            subscriber.on_timer(t, &mut out);
        }
        assert_eq!(times, vec![0, 200_000, 400_000, 600_000, 800_000]);
        let report = subscriber.report();
        assert_eq!(report.consumers["/trailer/can"], ConsumerStats { requests: 5, timeouts: 1 });
        assert_eq!(report.errors.len(), 1);
    }

    #[test]
    fn publisher_without_subscribers_sends_nothing() {
        let mut publisher = PublisherNode::new("pc", 0);
        publisher.add_stream(builtin_streams()[0].clone(), 10);
        let mut out = Vec::new();
        publisher.on_timer(Time::from_millis(100), &mut out);
        assert!(out.is_empty());
        assert_eq!(publisher.next_deadline(), None);
    }
}
