//! Named-data forwarding, automotive frame multiplexing and a benchmark
//! harness for a tractor-trailer wireless harness.

pub mod bench;
pub mod forwarder;
pub mod mux;
pub mod packet;
pub mod payload;
pub mod pubsub;
pub mod tlv;
pub mod traffic;
pub mod transport;

pub use packet::{Data, Interest, Name, PacketError};
pub use tlv::{Packet, TlvError};
pub use transport::{Clock, Time};
