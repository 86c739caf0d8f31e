//! Faces and links: UDP and TCP point-to-point faces, a seeded in-process
//! link simulator, and the clocks every node reads time from.

pub mod clock;
mod endpoint;
pub mod framing;
mod sim;
mod tcp;
mod udp;

use std::io;
use std::sync::mpsc::Sender;
use std::time::Duration;

use thiserror::Error;

use crate::forwarder::FaceId;

pub use clock::{Clock, MonotonicClock, Time, UnixClock, VirtualClock};
pub use endpoint::{Endpoint, Scheme};
pub use sim::{LinkProfile, SimEnd, SimNetwork};
pub use tcp::TcpFace;
pub use udp::UdpFace;

/// Datagram allowance for UDP faces; comfortably above the 8800-byte packet cap.
pub const MAX_DATAGRAM: usize = 65_507;

#[derive(Debug, Error)]
pub enum TransportError {
    #[error("invalid endpoint {0:?}")]
    InvalidEndpoint(String),
    #[error("{0} faces are not opened through sockets")]
    UnsupportedScheme(Scheme),
    #[error("local and remote endpoints use different schemes")]
    SchemeMismatch,
    #[error("cannot bind {endpoint}: {source}")]
    Bind { endpoint: Endpoint, source: io::Error },
    #[error("cannot connect to {endpoint}: {source}")]
    Connect { endpoint: Endpoint, source: io::Error },
    #[error("face is closed")]
    Closed,
    #[error("link profile invalid: {0}")]
    InvalidProfile(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Something that arrived on a face.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FaceEvent {
    Packet { face: FaceId, bytes: Vec<u8> },
    Closed { face: FaceId },
}

/// A point-to-point packet face. Each `send` carries exactly one packet.
pub trait Face: Send {
    fn id(&self) -> FaceId;
    fn send(&mut self, bytes: &[u8]) -> Result<(), TransportError>;
    fn close(&mut self);
}

#[derive(Debug, Clone, Copy)]
pub struct FaceOptions {
    /// How long TCP setup may take, accepting or retrying connects.
    pub setup_timeout: Duration,
}

impl Default for FaceOptions {
    fn default() -> Self {
        FaceOptions {
            setup_timeout: Duration::from_secs(10),
        }
    }
}

/// Opens a UDP or TCP face between `local` and `remote`. Received packets are
/// delivered to `events` from a background reader thread.
///
/// For TCP the side with the lower socket address listens and the other side
/// connects, so both ends can call this with mirrored endpoints.
pub fn open_face(
    id: FaceId,
    local: &Endpoint,
    remote: &Endpoint,
    events: Sender<FaceEvent>,
    options: FaceOptions,
) -> Result<Box<dyn Face>, TransportError> {
    if local.scheme != remote.scheme {
        return Err(TransportError::SchemeMismatch);
    }
    match local.scheme {
        Scheme::Udp => Ok(Box::new(UdpFace::open(id, local, remote, events)?)),
        Scheme::Tcp => Ok(Box::new(TcpFace::open(id, local, remote, events, options)?)),
        Scheme::Sim => Err(TransportError::UnsupportedScheme(Scheme::Sim)),
    }
}
