//! Minimal topic-based publish/subscribe over UDP, used as the comparison
//! arm against named-data forwarding.
//!
//! There is no broker and no discovery: subscribers send a SUB control
//! message to the publisher, which acknowledges it and from then on unicasts
//! every message on that topic to the subscriber. Wire formats, big-endian:
//!
//! ```text
//! data: [name_len: u16][name][seq: u64][send_ts_us: u64][mode: u8][payload]
//! SUB:  [0xFF][name_len: u16][name][reply_port: u16]
//! ACK:  [0xFE][name_len: u16][name]
//! ```
//!
//! Topic names are capped at 1024 bytes, so a data message never starts with
//! the 0xFF or 0xFE control markers.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::net::{SocketAddr, UdpSocket};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::payload::Serialization;
use crate::transport::Time;

pub const SUB: u8 = 0xFF;
pub const ACK: u8 = 0xFE;
pub const MAX_TOPIC_LEN: usize = 1024;
pub const DATA_HEADER_LEN: usize = 2 + 8 + 8 + 1;
pub const DEFAULT_SUBSCRIBE_RETRIES: u32 = 5;

#[derive(Debug, Error)]
pub enum PubSubError {
    #[error("message ends early")]
    Truncated,
    #[error("topic name must be 1..=1024 bytes of UTF-8")]
    BadTopic,
    #[error("unknown payload mode {0}")]
    BadMode(u8),
    #[error("sequence {seq} does not follow {last} on {topic}")]
    NonIncreasingSeq { topic: String, seq: u64, last: u64 },
    #[error("no acknowledgement from publisher after {0} attempts")]
    Timeout(u32),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// A named stream of messages and its payload serialization.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Topic {
    name: String,
    mode: Serialization,
}

impl Topic {
    pub fn new(name: impl Into<String>, mode: Serialization) -> Result<Self, PubSubError> {
        let name = name.into();
        if name.is_empty() || name.len() > MAX_TOPIC_LEN {
            return Err(PubSubError::BadTopic);
        }
        Ok(Topic { name, mode })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn mode(&self) -> Serialization {
        self.mode
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataMessage {
    pub topic: String,
    pub seq: u64,
    pub send_ts_us: u64,
    pub mode: Serialization,
    /// Payload as carried on the wire (hex text in string mode).
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    Data(DataMessage),
    Subscribe { topic: String, reply_port: u16 },
    Ack { topic: String },
}

fn put_topic(out: &mut Vec<u8>, topic: &str) {
    out.extend_from_slice(&(topic.len() as u16).to_be_bytes());
    out.extend_from_slice(topic.as_bytes());
}

impl Message {
    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            Message::Data(m) => {
                out.reserve(DATA_HEADER_LEN + m.topic.len() + m.payload.len());
                put_topic(&mut out, &m.topic);
                out.extend_from_slice(&m.seq.to_be_bytes());
                out.extend_from_slice(&m.send_ts_us.to_be_bytes());
                out.push(match m.mode {
                    Serialization::Bytes => 0,
                    Serialization::String => 1,
                });
                out.extend_from_slice(&m.payload);
            }
            Message::Subscribe { topic, reply_port } => {
                out.push(SUB);
                put_topic(&mut out, topic);
                out.extend_from_slice(&reply_port.to_be_bytes());
            }
            Message::Ack { topic } => {
                out.push(ACK);
                put_topic(&mut out, topic);
            }
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Message, PubSubError> {
        fn take<'a>(buf: &mut &'a [u8], n: usize) -> Result<&'a [u8], PubSubError> {
            if buf.len() < n {
                return Err(PubSubError::Truncated);
            }
            let (head, tail) = buf.split_at(n);
            *buf = tail;
            Ok(head)
        }
        fn topic(buf: &mut &[u8]) -> Result<String, PubSubError> {
            let len = u16::from_be_bytes(take(buf, 2)?.try_into().unwrap()) as usize;
            if len == 0 || len > MAX_TOPIC_LEN {
                return Err(PubSubError::BadTopic);
            }
            String::from_utf8(take(buf, len)?.to_vec()).map_err(|_| PubSubError::BadTopic)
        }

        let mut buf = bytes;
        match bytes.first() {
            None => Err(PubSubError::Truncated),
            Some(&SUB) => {
                buf = &buf[1..];
                let topic = topic(&mut buf)?;
                let reply_port = u16::from_be_bytes(take(&mut buf, 2)?.try_into().unwrap());
                Ok(Message::Subscribe { topic, reply_port })
            }
            Some(&ACK) => {
                buf = &buf[1..];
                Ok(Message::Ack { topic: topic(&mut buf)? })
            }
            Some(_) => {
                let topic = topic(&mut buf)?;
                let seq = u64::from_be_bytes(take(&mut buf, 8)?.try_into().unwrap());
                let send_ts_us = u64::from_be_bytes(take(&mut buf, 8)?.try_into().unwrap());
                let mode = match take(&mut buf, 1)?[0] {
                    0 => Serialization::Bytes,
                    1 => Serialization::String,
                    other => return Err(PubSubError::BadMode(other)),
                };
                Ok(Message::Data(DataMessage {
                    topic,
                    seq,
                    send_ts_us,
                    mode,
                    payload: buf.to_vec(),
                }))
            }
        }
    }
}

/// Publisher-side state: who subscribed to what, and the last sequence
/// number sent per topic.
#[derive(Debug, Default, Clone)]
pub struct Publisher {
    subscribers: BTreeMap<String, BTreeSet<SocketAddr>>,
    last_seq: BTreeMap<String, u64>,
}

impl Publisher {
    pub fn new() -> Self {
        Self::default()
    }

    /// Handles a control message received from `from`. A SUB registers
    /// `(from.ip, reply_port)` for its topic, even one nothing is published
    /// on yet, and is answered with an ACK. Anything else is ignored.
    pub fn handle(&mut self, from: SocketAddr, bytes: &[u8]) -> Option<(SocketAddr, Vec<u8>)> {
        match Message::decode(bytes).ok()? {
            Message::Subscribe { topic, reply_port } => {
                let subscriber = SocketAddr::new(from.ip(), reply_port);
                self.subscribers.entry(topic.clone()).or_default().insert(subscriber);
                Some((subscriber, Message::Ack { topic }.encode()))
            }
            _ => None,
        }
    }

    pub fn subscribers(&self, topic: &str) -> impl Iterator<Item = &SocketAddr> {
        self.subscribers.get(topic).into_iter().flatten()
    }

    /// Builds one datagram per subscriber of `topic`. `payload` is the
    /// logical payload; string topics carry it as hex text.
    pub fn publish(
        &mut self,
        topic: &Topic,
        payload: &[u8],
        seq: u64,
        now: Time,
    ) -> Result<Vec<(SocketAddr, Vec<u8>)>, PubSubError> {
        if let Some(&last) = self.last_seq.get(topic.name()) {
            if seq <= last {
                return Err(PubSubError::NonIncreasingSeq {
                    topic: topic.name().to_string(),
                    seq,
                    last,
                });
            }
        }
        self.last_seq.insert(topic.name().to_string(), seq);
        let wire = Message::Data(DataMessage {
            topic: topic.name().to_string(),
            seq,
            send_ts_us: now.as_micros(),
            mode: topic.mode(),
            payload: topic.mode().render(payload),
        })
        .encode();
        Ok(self.subscribers(topic.name()).map(|&s| (s, wire.clone())).collect())
    }
}

/// Subscriber-side state for one topic.
#[derive(Debug, Clone)]
pub struct Subscriber {
    topic: String,
    reply_port: u16,
    acked: bool,
}

impl Subscriber {
    pub fn new(topic: impl Into<String>, reply_port: u16) -> Self {
        Subscriber { topic: topic.into(), reply_port, acked: false }
    }

    pub fn topic(&self) -> &str {
        &self.topic
    }

    pub fn subscribe_message(&self) -> Vec<u8> {
        Message::Subscribe { topic: self.topic.clone(), reply_port: self.reply_port }.encode()
    }

    pub fn is_acked(&self) -> bool {
        self.acked
    }

    /// Returns data messages for this subscriber's topic; acknowledgements
    /// are absorbed and anything else is discarded.
    pub fn handle(&mut self, bytes: &[u8]) -> Option<DataMessage> {
        match Message::decode(bytes).ok()? {
            Message::Ack { topic } if topic == self.topic => {
                self.acked = true;
                None
            }
            Message::Data(m) if m.topic == self.topic => Some(m),
            _ => None,
        }
    }
}

/// Blocking UDP publisher.
#[derive(Debug)]
pub struct UdpPublisher {
    socket: UdpSocket,
    state: Publisher,
}

impl UdpPublisher {
    pub fn bind(addr: SocketAddr) -> Result<Self, PubSubError> {
        Ok(UdpPublisher { socket: UdpSocket::bind(addr)?, state: Publisher::new() })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.socket.local_addr()
    }

    /// Processes control messages arriving within `wait`.
    pub fn poll_control(&mut self, wait: Duration) -> Result<(), PubSubError> {
        let deadline = Instant::now() + wait;
        let mut buf = vec![0u8; 2048];
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Ok(());
            }
            self.socket.set_read_timeout(Some(left))?;
            match self.socket.recv_from(&mut buf) {
                Ok((n, from)) => {
                    if let Some((to, ack)) = self.state.handle(from, &buf[..n]) {
                        self.socket.send_to(&ack, to)?;
                    }
                }
                Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {
                    return Ok(())
                }
                Err(e) => return Err(e.into()),
            }
        }
    }

    pub fn publish(&mut self, topic: &Topic, payload: &[u8], seq: u64, now: Time) -> Result<(), PubSubError> {
        for (to, datagram) in self.state.publish(topic, payload, seq, now)? {
            self.socket.send_to(&datagram, to)?;
        }
        Ok(())
    }

    pub fn state(&self) -> &Publisher {
        &self.state
    }
}

/// Blocking UDP subscriber.
#[derive(Debug)]
pub struct UdpSubscriber {
    socket: UdpSocket,
    state: Subscriber,
}

impl UdpSubscriber {
    pub fn bind(addr: SocketAddr, topic: &str) -> Result<Self, PubSubError> {
        let socket = UdpSocket::bind(addr)?;
        let port = socket.local_addr()?.port();
        Ok(UdpSubscriber { socket, state: Subscriber::new(topic, port) })
    }

    /// Sends SUB until acknowledged, waiting `interval` between attempts.
    pub fn subscribe(
        &mut self,
        publisher: SocketAddr,
        retries: u32,
        interval: Duration,
    ) -> Result<(), PubSubError> {
        let message = self.state.subscribe_message();
        for _ in 0..retries.max(1) {
            self.socket.send_to(&message, publisher)?;
            let deadline = Instant::now() + interval;
            while !self.state.is_acked() {
                let left = deadline.saturating_duration_since(Instant::now());
                if left.is_zero() {
                    break;
                }
                // data that races the ACK is dropped here
                let _ = self.recv(left)?;
            }
            if self.state.is_acked() {
                return Ok(());
            }
        }
        Err(PubSubError::Timeout(retries.max(1)))
    }

    /// Waits up to `wait` for one datagram; returns a message for this topic.
    pub fn recv(&mut self, wait: Duration) -> Result<Option<DataMessage>, PubSubError> {
        let mut buf = vec![0u8; crate::transport::MAX_DATAGRAM];
        self.socket.set_read_timeout(Some(wait.max(Duration::from_micros(1))))?;
        match self.socket.recv(&mut buf) {
            Ok(n) => Ok(self.state.handle(&buf[..n])),
            Err(e) if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut | io::ErrorKind::ConnectionRefused) => Ok(None),
            Err(e) => Err(e.into()),
        }
    }
}
