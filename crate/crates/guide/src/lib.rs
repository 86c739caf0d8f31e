//! The guide in `book/`, compiled so its snippets run as doc-tests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/packets.md")]
pub mod packets {}

#[doc = include_str!("../../../book/src/multiplexer.md")]
pub mod multiplexer {}

#[doc = include_str!("../../../book/src/forwarding.md")]
pub mod forwarding {}

#[doc = include_str!("../../../book/src/pubsub.md")]
pub mod pubsub {}

#[doc = include_str!("../../../book/src/simulation.md")]
pub mod simulation {}

#[doc = include_str!("../../../book/src/benchmarks.md")]
pub mod benchmarks {}
