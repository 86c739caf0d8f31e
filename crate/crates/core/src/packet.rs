//! Names and the interest/data packet types.
//!
//! Every type here is an immutable value once constructed. Constructors
//! enforce the invariants the wire codec relies on: names are non-empty with
//! bounded components, interests carry a positive lifetime, and a data packet
//! always fits the 8800-byte encoded cap.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::tlv;

/// Hard cap on the full encoded size of any packet.
pub const MAX_PACKET_SIZE: usize = 8800;

/// Longest single name component, in bytes.
pub const MAX_COMPONENT_LEN: usize = 255;

/// Largest permitted encoded NAME element (type + length + components).
pub const MAX_NAME_ENCODED_LEN: usize = 1024;

/// Interest lifetime used when none is given.
pub const DEFAULT_LIFETIME_MS: u32 = 4000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PacketError {
    #[error("malformed name uri {0:?}")]
    MalformedUri(String),
    #[error("name must have at least one component")]
    EmptyName,
    #[error("name component length {0} outside 1..=255")]
    ComponentLength(usize),
    #[error("encoded name is {0} bytes, limit is 1024")]
    NameTooLong(usize),
    #[error("interest lifetime must be positive")]
    ZeroLifetime,
    #[error("encoded packet would be {0} bytes, limit is 8800")]
    OversizePacket(usize),
}

/// A hierarchical name such as `/trailer/lidar`.
///
/// Components are opaque bytes. Equality and ordering are component-wise.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Name {
    components: Vec<Vec<u8>>,
}

impl Name {
    pub fn from_components<I, C>(components: I) -> Result<Self, PacketError>
    where
        I: IntoIterator<Item = C>,
        C: Into<Vec<u8>>,
    {
        let components: Vec<Vec<u8>> = components.into_iter().map(Into::into).collect();
        if components.is_empty() {
            return Err(PacketError::EmptyName);
        }
        if let Some(bad) = components
            .iter()
            .find(|c| c.is_empty() || c.len() > MAX_COMPONENT_LEN)
        {
            return Err(PacketError::ComponentLength(bad.len()));
        }
        let name = Name { components };
        let encoded = tlv::name_encoded_len(&name);
        if encoded > MAX_NAME_ENCODED_LEN {
            return Err(PacketError::NameTooLong(encoded));
        }
        Ok(name)
    }

    /// Parses the canonical text form. Only printable ASCII is accepted.
    pub fn parse(uri: &str) -> Result<Self, PacketError> {
        let malformed = || PacketError::MalformedUri(uri.to_string());
        let rest = uri.strip_prefix('/').ok_or_else(malformed)?;
        if rest.is_empty() {
            return Err(malformed());
        }
        let mut components = Vec::new();
        for segment in rest.split('/') {
            if segment.is_empty() || !segment.bytes().all(|b| b.is_ascii_graphic()) {
                return Err(malformed());
            }
            components.push(segment.as_bytes().to_vec());
        }
        Name::from_components(components)
    }

    pub fn components(&self) -> &[Vec<u8>] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    /// Always false; a name has at least one component.
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// True when `self` is a whole-component leading subsequence of `other`.
    /// `/trailer/ca` is not a prefix of `/trailer/can`.
    pub fn is_prefix_of(&self, other: &Name) -> bool {
        self.components.len() <= other.components.len()
            && self
                .components
                .iter()
                .zip(&other.components)
                .all(|(a, b)| a == b)
    }

    /// Returns a new name with `component` appended.
    pub fn child(&self, component: impl Into<Vec<u8>>) -> Result<Name, PacketError> {
        let mut components = self.components.clone();
        components.push(component.into());
        Name::from_components(components)
    }

    /// Canonical text form: `/` followed by the components joined with `/`.
    ///
    /// Components are rendered lossily when they are not printable ASCII.
    pub fn to_uri(&self) -> String {
        let mut out = String::new();
        for c in &self.components {
            out.push('/');
            out.push_str(&String::from_utf8_lossy(c));
        }
        out
    }
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_uri())
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Name({})", self.to_uri())
    }
}

impl FromStr for Name {
    type Err = PacketError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Name::parse(s)
    }
}

/// A request for named data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Interest {
    name: Name,
    nonce: u32,
    lifetime_ms: u32,
    must_be_fresh: bool,
    signature: Option<Vec<u8>>,
}

impl Interest {
    /// An interest with the default lifetime, no freshness requirement and no
    /// signature. Callers draw a fresh nonce for every emission.
    pub fn new(name: Name, nonce: u32) -> Self {
        Interest {
            name,
            nonce,
            lifetime_ms: DEFAULT_LIFETIME_MS,
            must_be_fresh: false,
            signature: None,
        }
    }

    pub fn with_lifetime_ms(mut self, lifetime_ms: u32) -> Result<Self, PacketError> {
        if lifetime_ms == 0 {
            return Err(PacketError::ZeroLifetime);
        }
        self.lifetime_ms = lifetime_ms;
        Ok(self)
    }

    pub fn with_must_be_fresh(mut self, must_be_fresh: bool) -> Self {
        self.must_be_fresh = must_be_fresh;
        self
    }

    pub fn with_signature(mut self, signature: Option<Vec<u8>>) -> Self {
        self.signature = signature;
        self
    }

    pub fn name(&self) -> &Name {
        &self.name
    }

    pub fn nonce(&self) -> u32 {
        self.nonce
    }

    pub fn lifetime_ms(&self) -> u32 {
        self.lifetime_ms
    }

    pub fn must_be_fresh(&self) -> bool {
        self.must_be_fresh
    }

    pub fn signature(&self) -> Option<&[u8]> {
        self.signature.as_deref()
    }
}

/// A named, optionally signed piece of content.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Data {
    name: Name,
    content: Vec<u8>,
    freshness_ms: u32,
    signature: Vec<u8>,
}

impl Data {
    /// Fails with [`PacketError::OversizePacket`] when the encoded packet
    /// would exceed [`MAX_PACKET_SIZE`]. Content is never truncated.
    pub fn new(
        name: Name,
        content: Vec<u8>,
        freshness_ms: u32,
        signature: Vec<u8>,
    ) -> Result<Self, PacketError> {
        let size = tlv::data_encoded_len(&name, content.len(), signature.len());
        if size > MAX_PACKET_SIZE {
            return Err(PacketError::OversizePacket(size));
        }
        Ok(Data {
            name,
            content,
            freshness_ms,
            signature,
        })
    }

    pub fn name(&self) -> &Name {
        &self.name
    }

    pub fn content(&self) -> &[u8] {
        &self.content
    }

    pub fn freshness_ms(&self) -> u32 {
        self.freshness_ms
    }

    pub fn signature(&self) -> &[u8] {
        &self.signature
    }

    /// Size of this packet on the wire.
    pub fn encoded_len(&self) -> usize {
        tlv::data_encoded_len(&self.name, self.content.len(), self.signature.len())
    }
}
