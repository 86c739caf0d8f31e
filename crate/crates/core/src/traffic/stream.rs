use std::time::Duration;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::packet::Name;
use crate::payload::Serialization;

use super::TrafficError;

pub const MIN_PERIOD_US: u64 = 100;

/// One periodic workload.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamSpec {
    pub name: Name,
    pub payload_bytes: usize,
    pub period_us: u64,
    pub serialization: Serialization,
    pub freshness_ms: u32,
}

/// Freshness given to data when a stream does not set one: half the period,
/// in whole milliseconds, at least 1. A cached copy then goes stale before
/// the consumer's next periodic interest.
pub fn default_freshness_ms(period_us: u64) -> u32 {
    ((period_us / 2) / 1000).max(1) as u32
}

impl StreamSpec {
    pub fn new(
        name: Name,
        payload_bytes: usize,
        period_us: u64,
        serialization: Serialization,
    ) -> Result<Self, TrafficError> {
        if payload_bytes == 0 {
            return Err(TrafficError::InvalidStream(format!("{name}: payload_bytes must be >= 1")));
        }
        if period_us < MIN_PERIOD_US {
            return Err(TrafficError::InvalidStream(format!("{name}: period_us must be >= 100")));
        }
        Ok(StreamSpec {
            name,
            payload_bytes,
            period_us,
            serialization,
            freshness_ms: default_freshness_ms(period_us),
        })
    }

    pub fn with_freshness_ms(mut self, freshness_ms: u32) -> Self {
        self.freshness_ms = freshness_ms;
        self
    }

    pub fn with_serialization(mut self, serialization: Serialization) -> Self {
        self.serialization = serialization;
        self
    }

    pub fn period(&self) -> Duration {
        Duration::from_micros(self.period_us)
    }

    /// Interest lifetime used by consumers: one period, rounded up to ms.
    pub fn interest_lifetime_ms(&self) -> u32 {
        self.period_us.div_ceil(1000).max(1) as u32
    }

    /// Number of periodic emissions that start within `duration`.
    pub fn expected_count(&self, duration: Duration) -> u64 {
        (duration.as_micros() / self.period_us as u128) as u64
    }

    /// Pub/sub topic for this stream: the name without its leading slash.
    pub fn topic_name(&self) -> String {
        self.name.to_uri().trim_start_matches('/').to_string()
    }

    /// Payload size on the wire under this stream's serialization.
    pub fn wire_payload_bytes(&self) -> usize {
        self.serialization.wire_len(self.payload_bytes)
    }
}

/// The three sensor workloads: lidar 1600 B every 5 ms, CAN 160 B every
/// 8 ms and camera 4000 B every 20 ms.
pub fn builtin_streams() -> Vec<StreamSpec> {
    [("/trailer/lidar", 1600, 5_000), ("/trailer/can", 160, 8_000), ("/trailer/cam", 4000, 20_000)]
        .into_iter()
        .map(|(name, bytes, period)| {
            StreamSpec::new(Name::parse(name).unwrap(), bytes, period, Serialization::Bytes).unwrap()
        })
        .collect()
}

/// Deterministic pseudo-random logical payload for `(seed, stream, seq)`.
pub fn gen_payload(spec: &StreamSpec, seq: u64, seed: u64) -> Vec<u8> {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_be_bytes());
    hasher.update(spec.name.to_uri().as_bytes());
    hasher.update(seq.to_be_bytes());
    let mut rng = ChaCha8Rng::from_seed(hasher.finalize().into());
    let mut payload = vec![0u8; spec.payload_bytes];
    rng.fill_bytes(&mut payload);
    payload
}

/// Payload as transmitted: rendered per the stream's serialization.
pub fn wire_payload(spec: &StreamSpec, seq: u64, seed: u64) -> Vec<u8> {
    spec.serialization.render(&gen_payload(spec, seq, seed))
}

/// One received packet at a consumer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrivalRecord {
    pub stream: String,
    pub seq: u64,
    /// Publisher send time for pub/sub; interest emission time for
    /// named-data consumers.
    pub send_ts_us: Option<u64>,
    pub recv_ts_us: u64,
    /// Size of the packet as received on the wire.
    pub size_bytes: usize,
}
