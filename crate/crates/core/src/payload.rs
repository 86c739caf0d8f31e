//! Payload serialization modes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// How a logical payload is put on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Serialization {
    /// Raw bytes.
    Bytes,
    /// Lower-case hexadecimal text, two characters per byte.
    String,
}

impl Serialization {
    pub fn render(self, logical: &[u8]) -> Vec<u8> {
        match self {
            Serialization::Bytes => logical.to_vec(),
            Serialization::String => hex::encode(logical).into_bytes(),
        }
    }

    /// Inverse of [`Serialization::render`].
    pub fn parse(self, wire: &[u8]) -> Option<Vec<u8>> {
        match self {
            Serialization::Bytes => Some(wire.to_vec()),
            Serialization::String => hex::decode(wire).ok(),
        }
    }

    pub fn wire_len(self, logical_len: usize) -> usize {
        match self {
            Serialization::Bytes => logical_len,
            Serialization::String => logical_len * 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Serialization::Bytes => "bytes",
            Serialization::String => "string",
        }
    }
}

impl fmt::Display for Serialization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Serialization {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bytes" => Ok(Serialization::Bytes),
            "string" => Ok(Serialization::String),
            other => Err(format!("unknown serialization {other:?}")),
        }
    }
}
