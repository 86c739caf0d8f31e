//! Time as seen by nodes: microseconds since an experiment epoch.

use std::ops::{Add, Sub};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

/// A point in time, in microseconds since the owning clock's epoch.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Time(u64);

impl Time {
    pub const ZERO: Time = Time(0);
    pub const MAX: Time = Time(u64::MAX);

    pub const fn from_micros(us: u64) -> Time {
        Time(us)
    }

    pub const fn from_millis(ms: u64) -> Time {
        Time(ms * 1000)
    }

    pub const fn as_micros(self) -> u64 {
        self.0
    }

    /// Elapsed time since `earlier`, zero if `earlier` is later.
    pub fn saturating_since(self, earlier: Time) -> Duration {
        Duration::from_micros(self.0.saturating_sub(earlier.0))
    }
}

impl Add<Duration> for Time {
    type Output = Time;

    fn add(self, rhs: Duration) -> Time {
        Time(self.0.saturating_add(rhs.as_micros().min(u64::MAX as u128) as u64))
    }
}

impl Sub<Time> for Time {
    type Output = Duration;

    fn sub(self, rhs: Time) -> Duration {
        self.saturating_since(rhs)
    }
}

pub trait Clock: Send + Sync {
    fn now(&self) -> Time;

    /// Real time left before the epoch. Clocks that start in the future
    /// report zero from [`Clock::now`] until then.
    fn until_epoch(&self) -> Duration {
        Duration::ZERO
    }
}

/// Monotonic wall clock anchored at an [`Instant`].
#[derive(Debug, Clone, Copy)]
pub struct MonotonicClock {
    epoch: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        Self::starting_at(Instant::now())
    }

    pub fn starting_at(epoch: Instant) -> Self {
        MonotonicClock { epoch }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> Time {
        Time(Instant::now().saturating_duration_since(self.epoch).as_micros() as u64)
    }

    fn until_epoch(&self) -> Duration {
        self.epoch.saturating_duration_since(Instant::now())
    }
}

/// Clock shared between processes through a Unix-time epoch. Readings never
/// go backwards even if the system clock is stepped.
#[derive(Debug)]
pub struct UnixClock {
    epoch_unix_us: u64,
    last: AtomicU64,
}

impl UnixClock {
    pub fn new(epoch_unix_us: u64) -> Self {
        UnixClock {
            epoch_unix_us,
            last: AtomicU64::new(0),
        }
    }

    pub fn unix_now_us() -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_micros() as u64)
            .unwrap_or(0)
    }
}

impl Clock for UnixClock {
    fn now(&self) -> Time {
        let raw = Self::unix_now_us().saturating_sub(self.epoch_unix_us);
        Time(self.last.fetch_max(raw, Ordering::Relaxed).max(raw))
    }

    fn until_epoch(&self) -> Duration {
        Duration::from_micros(self.epoch_unix_us.saturating_sub(Self::unix_now_us()))
    }
}

/// Manually advanced clock for deterministic tests and simulation. Clones
/// share the same reading.
#[derive(Debug, Clone, Default)]
pub struct VirtualClock {
    now: Arc<AtomicU64>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, by: Duration) {
        self.now.fetch_add(by.as_micros() as u64, Ordering::SeqCst);
    }

    /// Moves the clock to `t`; moving backwards is ignored.
    pub fn set(&self, t: Time) {
        self.now.fetch_max(t.0, Ordering::SeqCst);
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Time {
        Time(self.now.load(Ordering::SeqCst))
    }
}
