//! Software multiplexer for heterogeneous vehicle frames.
//!
//! A construct bundles its own size `c`, a timestamp `s`, a priority-ordered
//! frame table `A` and an optional authentication tag `a` into one buffer
//! that fits the content of a single data packet. Layout, big-endian:
//!
//! ```text
//! [c: u32][s: u64][flags: u8, bit0 = tag present][count: u16]
//! count x [r: u8][t: u64][p: u8][l: u16][f: l bytes]
//! [tag: 32 bytes, only when bit0 is set]
//! ```
//!
//! The tag is HMAC-SHA256 keyed with a shared 32-byte secret over
//! `c || s || A`, where `A` is the encoded count followed by the frames.

use hmac::{Hmac, Mac};
use sha2::Sha256;
use thiserror::Error;

use crate::packet::MAX_PACKET_SIZE;
use crate::tlv;

pub const HEADER_LEN: usize = 4 + 8 + 1 + 2;
pub const FRAME_HEADER_LEN: usize = 1 + 8 + 1 + 2;
pub const TAG_LEN: usize = 32;
pub const KEY_LEN: usize = 32;

/// Longest encoded stream name (sum of component elements) the content
/// budget is sized for.
pub const MAX_STREAM_NAME_LEN: usize = 32;

const FLAG_TAG: u8 = 0x01;

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MuxError {
    #[error("construct would be {size} bytes, budget is {budget}")]
    OversizeConstruct { size: usize, budget: usize },
    #[error("a construct needs at least one frame")]
    EmptyFrameList,
    #[error("protocol id {0} is not registered")]
    UnknownProtocol(u8),
    #[error("frame payload of {0} bytes exceeds the 16-bit length field")]
    FrameTooLong(usize),
    #[error("size field says {declared} bytes, input has {actual}")]
    SizeMismatch { declared: usize, actual: usize },
    #[error("authentication tag does not verify")]
    TagMismatch,
    #[error("input ends before the construct does")]
    Truncated,
    #[error("unknown flag bits 0x{0:02x}")]
    UnknownFlags(u8),
    #[error("key must be 32 bytes, got {0}")]
    BadKeyLength(usize),
}

/// Registered payload protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[repr(u8)]
pub enum Protocol {
    SensorBytes = 0,
    J1939 = 1,
    CanFd = 2,
    Ethernet = 3,
    Lidar = 4,
    Camera = 5,
}

impl Protocol {
    pub const ALL: [Protocol; 6] = [
        Protocol::SensorBytes,
        Protocol::J1939,
        Protocol::CanFd,
        Protocol::Ethernet,
        Protocol::Lidar,
        Protocol::Camera,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }
}

impl TryFrom<u8> for Protocol {
    type Error = MuxError;

    fn try_from(id: u8) -> Result<Self, MuxError> {
        Protocol::ALL
            .get(id as usize)
            .copied()
            .ok_or(MuxError::UnknownProtocol(id))
    }
}

/// One row of the frame table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Frame {
    priority: u8,
    timestamp_us: u64,
    protocol: Protocol,
    payload: Vec<u8>,
}

impl Frame {
    /// Priority 0 is the most urgent.
    pub fn new(
        priority: u8,
        timestamp_us: u64,
        protocol: Protocol,
        payload: Vec<u8>,
    ) -> Result<Self, MuxError> {
        if payload.len() > u16::MAX as usize {
            return Err(MuxError::FrameTooLong(payload.len()));
        }
        Ok(Frame {
            priority,
            timestamp_us,
            protocol,
            payload,
        })
    }

    pub fn priority(&self) -> u8 {
        self.priority
    }

    pub fn timestamp_us(&self) -> u64 {
        self.timestamp_us
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    /// The `l` field: payload length in bytes.
    pub fn len(&self) -> u16 {
        self.payload.len() as u16
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    fn encoded_len(&self) -> usize {
        FRAME_HEADER_LEN + self.payload.len()
    }
}

/// A decoded construct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Construct {
    pub total_size: u32,
    pub timestamp_us: u64,
    pub frames: Vec<Frame>,
    pub auth_tag: Option<[u8; TAG_LEN]>,
}

/// Largest encoded construct that still fits one data packet carrying a
/// stream name of up to [`MAX_STREAM_NAME_LEN`] bytes and an empty signature.
pub fn content_budget() -> usize {
    MAX_PACKET_SIZE - tlv::max_data_overhead(MAX_STREAM_NAME_LEN)
}

/// Encoded size a construct over `frames` would have.
pub fn encoded_len(frames: &[Frame], tagged: bool) -> usize {
    HEADER_LEN
        + frames.iter().map(Frame::encoded_len).sum::<usize>()
        + if tagged { TAG_LEN } else { 0 }
}

fn mac_for(key: &[u8]) -> Result<HmacSha256, MuxError> {
    if key.len() != KEY_LEN {
        return Err(MuxError::BadKeyLength(key.len()));
    }
    Ok(HmacSha256::new_from_slice(key).expect("hmac accepts any key length"))
}

/// Keyed MAC over `c || s || encoded_frames`.
pub fn compute_tag(
    total_size: u32,
    timestamp_us: u64,
    encoded_frames: &[u8],
    key: &[u8],
) -> Result<[u8; TAG_LEN], MuxError> {
    let mut mac = mac_for(key)?;
    mac.update(&total_size.to_be_bytes());
    mac.update(&timestamp_us.to_be_bytes());
    mac.update(encoded_frames);
    Ok(mac.finalize().into_bytes().into())
}

/// Sorts `frames` by priority (then timestamp, then input order) and encodes
/// them into one construct stamped with `now_us`.
pub fn pack(frames: &[Frame], now_us: u64, key: Option<&[u8]>) -> Result<Vec<u8>, MuxError> {
    if frames.is_empty() {
        return Err(MuxError::EmptyFrameList);
    }
    if let Some(key) = key {
        if key.len() != KEY_LEN {
            return Err(MuxError::BadKeyLength(key.len()));
        }
    }
    let size = encoded_len(frames, key.is_some());
    let budget = content_budget();
    if size > budget {
        return Err(MuxError::OversizeConstruct { size, budget });
    }
    if frames.len() > u16::MAX as usize {
        return Err(MuxError::OversizeConstruct { size, budget });
    }

    let mut ordered: Vec<&Frame> = frames.iter().collect();
    // stable: equal (priority, timestamp) keep insertion order
    ordered.sort_by_key(|f| (f.priority, f.timestamp_us));

    let mut out = Vec::with_capacity(size);
    out.extend_from_slice(&(size as u32).to_be_bytes());
    out.extend_from_slice(&now_us.to_be_bytes());
    out.push(if key.is_some() { FLAG_TAG } else { 0 });
    let frames_start = out.len();
    out.extend_from_slice(&(ordered.len() as u16).to_be_bytes());
    for f in ordered {
        out.push(f.priority);
        out.extend_from_slice(&f.timestamp_us.to_be_bytes());
        out.push(f.protocol.id());
        out.extend_from_slice(&(f.payload.len() as u16).to_be_bytes());
        out.extend_from_slice(&f.payload);
    }
    if let Some(key) = key {
        let tag = compute_tag(size as u32, now_us, &out[frames_start..], key)?;
        out.extend_from_slice(&tag);
    }
    debug_assert_eq!(out.len(), size);
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], MuxError> {
        if self.buf.len() < n {
            return Err(MuxError::Truncated);
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u8(&mut self) -> Result<u8, MuxError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, MuxError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, MuxError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, MuxError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes a construct. With a key, a present tag must verify; an absent tag
/// is reported as `auth_tag: None` rather than as an error.
pub fn unpack(bytes: &[u8], key: Option<&[u8]>) -> Result<Construct, MuxError> {
    if let Some(key) = key {
        if key.len() != KEY_LEN {
            return Err(MuxError::BadKeyLength(key.len()));
        }
    }
    let mut cur = Cursor { buf: bytes };
    let total_size = cur.u32()?;
    if total_size as usize != bytes.len() {
        return Err(MuxError::SizeMismatch {
            declared: total_size as usize,
            actual: bytes.len(),
        });
    }
    let timestamp_us = cur.u64()?;
    let flags = cur.u8()?;
    if flags & !FLAG_TAG != 0 {
        return Err(MuxError::UnknownFlags(flags));
    }
    let tagged = flags & FLAG_TAG != 0;
    let body_len = bytes
        .len()
        .checked_sub(HEADER_LEN - 2 + if tagged { TAG_LEN } else { 0 })
        .ok_or(MuxError::Truncated)?;
    let frames_bytes = &bytes[HEADER_LEN - 2..HEADER_LEN - 2 + body_len];

    let mut body = Cursor { buf: frames_bytes };
    let count = body.u16()?;
    if count == 0 {
        return Err(MuxError::EmptyFrameList);
    }
    let mut frames = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let priority = body.u8()?;
        let timestamp = body.u64()?;
        let protocol = Protocol::try_from(body.u8()?)?;
        let len = body.u16()? as usize;
        let payload = body.take(len)?.to_vec();
        frames.push(Frame {
            priority,
            timestamp_us: timestamp,
            protocol,
            payload,
        });
    }
    if !body.buf.is_empty() {
        return Err(MuxError::SizeMismatch {
            declared: total_size as usize,
            actual: bytes.len() - body.buf.len(),
        });
    }

    let auth_tag = if tagged {
        let tag: [u8; TAG_LEN] = bytes[bytes.len() - TAG_LEN..].try_into().unwrap();
        if let Some(key) = key {
            let mut mac = mac_for(key)?;
            mac.update(&total_size.to_be_bytes());
            mac.update(&timestamp_us.to_be_bytes());
            mac.update(frames_bytes);
            mac.verify_slice(&tag).map_err(|_| MuxError::TagMismatch)?;
        }
        Some(tag)
    } else {
        None
    };

    Ok(Construct {
        total_size,
        timestamp_us,
        frames,
        auth_tag,
    })
}
