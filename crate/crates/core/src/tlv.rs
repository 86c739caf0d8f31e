//! Type-Length-Value wire format for interest and data packets.
//!
//! Types and lengths use a variable-length number: one byte below 253,
//! marker 253 plus a 16-bit big-endian value below 2^16, and marker 254 plus
//! a 32-bit big-endian value otherwise. Encodings must be minimal.
//!
//! The type registry is closed and every field has a fixed position, so each
//! packet has exactly one valid encoding and decoding is strict: unknown
//! types, duplicate or reordered fields and length disagreements are errors.
//!
//! ```text
//! INTEREST 0x05 := NAME NONCE LIFETIME [MUST_BE_FRESH] [SIGNATURE]
//! DATA     0x06 := NAME FRESHNESS CONTENT SIGNATURE
//! NAME     0x07 := NAME_COMPONENT+          (0x08 each)
//! NONCE    0x0A := u32 big-endian
//! LIFETIME 0x0C := u32 big-endian, milliseconds, nonzero
//! MUST_BE_FRESH 0x12 := empty
//! FRESHNESS 0x19 := u32 big-endian, milliseconds
//! CONTENT  0x15 := bytes
//! SIGNATURE 0x17 := bytes
//! ```

use thiserror::Error;

use crate::packet::{Data, Interest, Name, PacketError, MAX_PACKET_SIZE};

pub const INTEREST: u32 = 0x05;
pub const DATA: u32 = 0x06;
pub const NAME: u32 = 0x07;
pub const NAME_COMPONENT: u32 = 0x08;
pub const NONCE: u32 = 0x0A;
pub const LIFETIME: u32 = 0x0C;
pub const MUST_BE_FRESH: u32 = 0x12;
pub const FRESHNESS: u32 = 0x19;
pub const CONTENT: u32 = 0x15;
pub const SIGNATURE: u32 = 0x17;

const MARKER_U16: u8 = 253;
const MARKER_U32: u8 = 254;
const MARKER_U64: u8 = 255;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TlvError {
    #[error("input ends inside a type or length header")]
    Truncated,
    #[error("variable-length number is not minimally encoded")]
    NonMinimalEncoding,
    #[error("variable-length number does not fit 32 bits")]
    VarNumberOverflow,
    #[error("type 0x{0:02x} is not valid here")]
    UnknownType(u32),
    #[error("declared length disagrees with available bytes")]
    LengthMismatch,
    #[error("field 0x{0:02x} appears twice")]
    DuplicateField(u32),
    #[error("field 0x{0:02x} is out of order")]
    OutOfOrder(u32),
    #[error("required field 0x{0:02x} is missing")]
    MissingField(u32),
    #[error("field 0x{code:02x} has invalid length {len}")]
    FieldLength { code: u32, len: usize },
    #[error("packet is {0} bytes, limit is 8800")]
    OversizePacket(usize),
    #[error(transparent)]
    Packet(#[from] PacketError),
}

/// Number of bytes [`write_var_number`] emits for `n`.
pub fn var_number_len(n: u64) -> usize {
    if n < MARKER_U16 as u64 {
        1
    } else if n <= u16::MAX as u64 {
        3
    } else {
        5
    }
}

pub fn write_var_number(n: u32, out: &mut Vec<u8>) {
    if n < MARKER_U16 as u32 {
        out.push(n as u8);
    } else if n <= u16::MAX as u32 {
        out.push(MARKER_U16);
        out.extend_from_slice(&(n as u16).to_be_bytes());
    } else {
        out.push(MARKER_U32);
        out.extend_from_slice(&n.to_be_bytes());
    }
}

/// Decodes one variable-length number, returning it with the bytes consumed.
pub fn read_var_number(bytes: &[u8]) -> Result<(u32, usize), TlvError> {
    let (&first, rest) = bytes.split_first().ok_or(TlvError::Truncated)?;
    match first {
        MARKER_U16 => {
            let raw: [u8; 2] = rest.get(..2).ok_or(TlvError::Truncated)?.try_into().unwrap();
            let n = u16::from_be_bytes(raw) as u32;
            if n < MARKER_U16 as u32 {
                return Err(TlvError::NonMinimalEncoding);
            }
            Ok((n, 3))
        }
        MARKER_U32 => {
            let raw: [u8; 4] = rest.get(..4).ok_or(TlvError::Truncated)?.try_into().unwrap();
            let n = u32::from_be_bytes(raw);
            if n <= u16::MAX as u32 {
                return Err(TlvError::NonMinimalEncoding);
            }
            Ok((n, 5))
        }
        MARKER_U64 => Err(TlvError::VarNumberOverflow),
        n => Ok((n as u32, 1)),
    }
}

/// A single decoded element borrowing its value from the input.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TlvElement<'a> {
    pub type_code: u32,
    pub value: &'a [u8],
}

/// Reads elements back to back from a buffer without reading past its end.
struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Reader { buf }
    }

    fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    fn next_element(&mut self) -> Result<TlvElement<'a>, TlvError> {
        let (type_code, t_len) = read_var_number(self.buf)?;
        let (len, l_len) = read_var_number(&self.buf[t_len..])?;
        let start = t_len + l_len;
        let end = start
            .checked_add(len as usize)
            .filter(|&end| end <= self.buf.len())
            .ok_or(TlvError::LengthMismatch)?;
        let value = &self.buf[start..end];
        self.buf = &self.buf[end..];
        Ok(TlvElement { type_code, value })
    }
}

fn element_len(value_len: usize) -> usize {
    1 + var_number_len(value_len as u64) + value_len
}

fn write_element(type_code: u32, value: &[u8], out: &mut Vec<u8>) {
    write_var_number(type_code, out);
    write_var_number(value.len() as u32, out);
    out.extend_from_slice(value);
}

fn name_value_len(name: &Name) -> usize {
    name.components().iter().map(|c| element_len(c.len())).sum()
}

/// Encoded size of a NAME element.
pub fn name_encoded_len(name: &Name) -> usize {
    element_len(name_value_len(name))
}

/// Encoded size of a data packet, in closed form.
pub fn data_encoded_len(name: &Name, content_len: usize, signature_len: usize) -> usize {
    let inner = name_encoded_len(name) + element_len(4) + element_len(content_len) + element_len(signature_len);
    element_len(inner)
}

/// Bytes a data packet spends on everything except its content.
pub fn data_overhead(name: &Name, content_len: usize, signature_len: usize) -> usize {
    data_encoded_len(name, content_len, signature_len) - content_len
}

/// Worst-case data packet overhead for a name whose encoded components take
/// `name_value_len` bytes, with an empty signature and content up to the cap.
pub fn max_data_overhead(name_value_len: usize) -> usize {
    let content_header = element_len(MAX_PACKET_SIZE) - MAX_PACKET_SIZE;
    let inner_fixed = element_len(name_value_len) + element_len(4) + content_header + element_len(0);
    let outer_header = element_len(MAX_PACKET_SIZE) - MAX_PACKET_SIZE;
    outer_header + inner_fixed
}

fn interest_value_len(interest: &Interest) -> usize {
    let mut inner = name_encoded_len(interest.name()) + element_len(4) + element_len(4);
    if interest.must_be_fresh() {
        inner += element_len(0);
    }
    if let Some(sig) = interest.signature() {
        inner += element_len(sig.len());
    }
    inner
}

pub fn interest_encoded_len(interest: &Interest) -> usize {
    element_len(interest_value_len(interest))
}

fn write_name(name: &Name, out: &mut Vec<u8>) {
    write_var_number(NAME, out);
    write_var_number(name_value_len(name) as u32, out);
    for c in name.components() {
        write_element(NAME_COMPONENT, c, out);
    }
}

fn write_header(type_code: u32, len: usize, out: &mut Vec<u8>) {
    write_var_number(type_code, out);
    write_var_number(len as u32, out);
}

pub fn encode_interest(interest: &Interest) -> Vec<u8> {
    let inner = interest_value_len(interest);
    let mut out = Vec::with_capacity(element_len(inner));
    write_header(INTEREST, inner, &mut out);
    write_name(interest.name(), &mut out);
    write_element(NONCE, &interest.nonce().to_be_bytes(), &mut out);
    write_element(LIFETIME, &interest.lifetime_ms().to_be_bytes(), &mut out);
    if interest.must_be_fresh() {
        write_element(MUST_BE_FRESH, &[], &mut out);
    }
    if let Some(sig) = interest.signature() {
        write_element(SIGNATURE, sig, &mut out);
    }
    out
}

/// Encodes a data packet. Packets built through [`Data::new`] always fit, but
/// the cap is checked again here so the encoder never emits an oversize packet.
pub fn encode_data(data: &Data) -> Result<Vec<u8>, TlvError> {
    let total = data.encoded_len();
    if total > MAX_PACKET_SIZE {
        return Err(TlvError::OversizePacket(total));
    }
    let inner = name_encoded_len(data.name())
        + element_len(4)
        + element_len(data.content().len())
        + element_len(data.signature().len());
    let mut out = Vec::with_capacity(total);
    write_header(DATA, inner, &mut out);
    write_name(data.name(), &mut out);
    write_element(FRESHNESS, &data.freshness_ms().to_be_bytes(), &mut out);
    write_element(CONTENT, data.content(), &mut out);
    write_element(SIGNATURE, data.signature(), &mut out);
    debug_assert_eq!(out.len(), total);
    Ok(out)
}

/// Parses the single outer element and requires it to span the whole input.
fn outer<'a>(bytes: &'a [u8], expected: u32) -> Result<&'a [u8], TlvError> {
    if bytes.len() > MAX_PACKET_SIZE {
        return Err(TlvError::OversizePacket(bytes.len()));
    }
    let mut reader = Reader::new(bytes);
    let element = reader.next_element()?;
    if element.type_code != expected {
        return Err(TlvError::UnknownType(element.type_code));
    }
    if !reader.is_empty() {
        return Err(TlvError::LengthMismatch);
    }
    Ok(element.value)
}

fn decode_name(value: &[u8]) -> Result<Name, TlvError> {
    let mut reader = Reader::new(value);
    let mut components = Vec::new();
    while !reader.is_empty() {
        let element = reader.next_element()?;
        if element.type_code != NAME_COMPONENT {
            return Err(TlvError::UnknownType(element.type_code));
        }
        components.push(element.value.to_vec());
    }
    Ok(Name::from_components(components)?)
}

fn fixed_u32(element: &TlvElement<'_>) -> Result<u32, TlvError> {
    let raw: [u8; 4] = element.value.try_into().map_err(|_| TlvError::FieldLength {
        code: element.type_code,
        len: element.value.len(),
    })?;
    Ok(u32::from_be_bytes(raw))
}

/// Walks the children of a packet, enforcing the closed registry, the fixed
/// field order and single occurrence of every field.
fn fields<'a>(value: &'a [u8], order: &[u32]) -> Result<Vec<Option<TlvElement<'a>>>, TlvError> {
    let mut found: Vec<Option<TlvElement<'a>>> = vec![None; order.len()];
    let mut last = None;
    let mut reader = Reader::new(value);
    while !reader.is_empty() {
        let element = reader.next_element()?;
        let pos = order
            .iter()
            .position(|&c| c == element.type_code)
            .ok_or(TlvError::UnknownType(element.type_code))?;
        if found[pos].is_some() {
            return Err(TlvError::DuplicateField(element.type_code));
        }
        if last.is_some_and(|l| pos < l) {
            return Err(TlvError::OutOfOrder(element.type_code));
        }
        last = Some(pos);
        found[pos] = Some(element);
    }
    Ok(found)
}

fn required<'a>(slot: &Option<TlvElement<'a>>, code: u32) -> Result<TlvElement<'a>, TlvError> {
    slot.ok_or(TlvError::MissingField(code))
}

pub fn decode_interest(bytes: &[u8]) -> Result<Interest, TlvError> {
    let value = outer(bytes, INTEREST)?;
    let f = fields(value, &[NAME, NONCE, LIFETIME, MUST_BE_FRESH, SIGNATURE])?;
    let name = decode_name(required(&f[0], NAME)?.value)?;
    let nonce = fixed_u32(&required(&f[1], NONCE)?)?;
    let lifetime_el = required(&f[2], LIFETIME)?;
    let lifetime = fixed_u32(&lifetime_el)?;
    let must_be_fresh = match f[3] {
        Some(el) if !el.value.is_empty() => {
            return Err(TlvError::FieldLength {
                code: MUST_BE_FRESH,
                len: el.value.len(),
            })
        }
        Some(_) => true,
        None => false,
    };
    let signature = f[4].map(|el| el.value.to_vec());
    Ok(Interest::new(name, nonce)
        .with_lifetime_ms(lifetime)?
        .with_must_be_fresh(must_be_fresh)
        .with_signature(signature))
}

pub fn decode_data(bytes: &[u8]) -> Result<Data, TlvError> {
    let value = outer(bytes, DATA)?;
    let f = fields(value, &[NAME, FRESHNESS, CONTENT, SIGNATURE])?;
    let name = decode_name(required(&f[0], NAME)?.value)?;
    let freshness = fixed_u32(&required(&f[1], FRESHNESS)?)?;
    let content = required(&f[2], CONTENT)?.value.to_vec();
    let signature = required(&f[3], SIGNATURE)?.value.to_vec();
    Ok(Data::new(name, content, freshness, signature)?)
}

/// Either kind of packet, as carried on a face.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Interest(Interest),
    Data(Data),
}

impl Packet {
    pub fn name(&self) -> &Name {
        match self {
            Packet::Interest(i) => i.name(),
            Packet::Data(d) => d.name(),
        }
    }

    pub fn encode(&self) -> Result<Vec<u8>, TlvError> {
        match self {
            Packet::Interest(i) => Ok(encode_interest(i)),
            Packet::Data(d) => encode_data(d),
        }
    }

    /// Dispatches on the outer type code.
    pub fn decode(bytes: &[u8]) -> Result<Packet, TlvError> {
        let (code, _) = read_var_number(bytes)?;
        match code {
            INTEREST => decode_interest(bytes).map(Packet::Interest),
            DATA => decode_data(bytes).map(Packet::Data),
            other => Err(TlvError::UnknownType(other)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn var(n: u32) -> Vec<u8> {
        let mut out = Vec::new();
        write_var_number(n, &mut out);
        out
    }

    #[test]
    fn var_number_examples() {
        assert_eq!(var(0), [0x00]);
        assert_eq!(var(252), [0xFC]);
        assert_eq!(var(253), [0xFD, 0x00, 0xFD]);
        assert_eq!(var(1600), [0xFD, 0x06, 0x40]);
        assert_eq!(var(65535), [0xFD, 0xFF, 0xFF]);
        assert_eq!(var(65536), [0xFE, 0x00, 0x01, 0x00, 0x00]);
        assert_eq!(read_var_number(&[0xFC]), Ok((252, 1)));
    }

    #[test]
    fn var_number_rejects_non_minimal_and_truncated() {
        assert_eq!(read_var_number(&[0xFD, 0x00, 0x10]), Err(TlvError::NonMinimalEncoding));
        assert_eq!(
            read_var_number(&[0xFE, 0x00, 0x00, 0xFF, 0xFF]),
            Err(TlvError::NonMinimalEncoding)
        );
        assert_eq!(read_var_number(&[]), Err(TlvError::Truncated));
        assert_eq!(read_var_number(&[0xFD, 0x01]), Err(TlvError::Truncated));
        assert_eq!(read_var_number(&[0xFF; 9]), Err(TlvError::VarNumberOverflow));
    }

    #[test]
    fn var_number_round_trip_exhaustive() {
        let mut buf = Vec::with_capacity(5);
        for n in 0..=(1u32 << 20) {
            buf.clear();
            write_var_number(n, &mut buf);
            assert_eq!(buf.len(), var_number_len(n as u64));
            assert_eq!(read_var_number(&buf), Ok((n, buf.len())));
        }
        for n in [u32::MAX, u32::MAX - 1, 1 << 31] {
            buf.clear();
            write_var_number(n, &mut buf);
            assert_eq!(read_var_number(&buf), Ok((n, 5)));
        }
    }

    // Interest(/trailer/can, nonce 0, lifetime 4000, must_be_fresh, unsigned),
    // assembled by hand from the registry.
    const GOLDEN_INTEREST: [u8; 32] = [
        0x05, 0x1E, // INTEREST, 30
        0x07, 0x0E, // NAME, 14
        0x08, 0x07, b't', b'r', b'a', b'i', b'l', b'e', b'r', //
        0x08, 0x03, b'c', b'a', b'n', //
        0x0A, 0x04, 0x00, 0x00, 0x00, 0x00, // NONCE 0
        0x0C, 0x04, 0x00, 0x00, 0x0F, 0xA0, // LIFETIME 4000
        0x12, 0x00, // MUST_BE_FRESH
    ];

    // Data(/a, content "hi", freshness 5, empty signature).
    const GOLDEN_DATA: [u8; 19] = [
        0x06, 0x11, // DATA, 17
        0x07, 0x03, 0x08, 0x01, b'a', // NAME /a
        0x19, 0x04, 0x00, 0x00, 0x00, 0x05, // FRESHNESS 5
        0x15, 0x02, b'h', b'i', // CONTENT
        0x17, 0x00, // SIGNATURE (empty)
    ];

    fn golden_interest() -> Interest {
        Interest::new(Name::parse("/trailer/can").unwrap(), 0)
            .with_lifetime_ms(4000)
            .unwrap()
            .with_must_be_fresh(true)
    }

    fn golden_data() -> Data {
        Data::new(Name::parse("/a").unwrap(), b"hi".to_vec(), 5, vec![]).unwrap()
    }

    #[test]
    fn interest_golden_vector() {
        let i = golden_interest();
        assert_eq!(encode_interest(&i), GOLDEN_INTEREST);
        assert_eq!(encode_interest(&i), encode_interest(&i));
        assert_eq!(decode_interest(&GOLDEN_INTEREST), Ok(i));
    }

    #[test]
    fn interest_decode_errors() {
        assert_eq!(decode_interest(&[]), Err(TlvError::Truncated));
        let mut flipped = GOLDEN_INTEREST;
        flipped[1] ^= 0x01;
        assert_eq!(decode_interest(&flipped), Err(TlvError::LengthMismatch));
        // inner component length running past the NAME element
        let mut inner = GOLDEN_INTEREST;
        inner[14] = 0x04;
        assert_eq!(decode_interest(&inner), Err(TlvError::LengthMismatch));
        // CONTENT is not a field of an interest
        let mut unknown = GOLDEN_INTEREST;
        unknown[30] = CONTENT as u8;
        assert_eq!(decode_interest(&unknown), Err(TlvError::UnknownType(CONTENT)));
        // the data golden vector is not an interest
        assert_eq!(decode_interest(&GOLDEN_DATA), Err(TlvError::UnknownType(DATA)));
    }

    #[test]
    fn duplicate_and_reordered_fields_rejected() {
        let mut dup = GOLDEN_INTEREST.to_vec();
        dup.extend_from_slice(&[0x12, 0x00]);
        dup[1] += 2;
        assert_eq!(decode_interest(&dup), Err(TlvError::DuplicateField(MUST_BE_FRESH)));

        let mut swapped = GOLDEN_INTEREST.to_vec();
        // swap NONCE and LIFETIME
        let nonce: Vec<u8> = swapped[18..24].to_vec();
        let lifetime: Vec<u8> = swapped[24..30].to_vec();
        swapped.splice(18..30, lifetime.into_iter().chain(nonce));
        assert_eq!(decode_interest(&swapped), Err(TlvError::OutOfOrder(NONCE)));

        let mut missing = GOLDEN_INTEREST[..24].to_vec();
        missing[1] = 22;
        assert_eq!(decode_interest(&missing), Err(TlvError::MissingField(LIFETIME)));
    }

    #[test]
    fn zero_lifetime_on_wire_rejected() {
        let mut zero = GOLDEN_INTEREST;
        zero[28] = 0;
        zero[29] = 0;
        assert_eq!(
            decode_interest(&zero),
            Err(TlvError::Packet(PacketError::ZeroLifetime))
        );
    }

    #[test]
    fn data_golden_vector() {
        let d = golden_data();
        assert_eq!(encode_data(&d).unwrap(), GOLDEN_DATA);
        assert_eq!(decode_data(&GOLDEN_DATA), Ok(d));
        assert_eq!(Packet::decode(&GOLDEN_DATA), Ok(Packet::Data(golden_data())));
    }

    #[test]
    fn data_decode_errors() {
        let truncated = &GOLDEN_DATA[..GOLDEN_DATA.len() - 3];
        assert_eq!(decode_data(truncated), Err(TlvError::LengthMismatch));
        assert_eq!(decode_data(&[0u8; 8801]), Err(TlvError::OversizePacket(8801)));
        let mut trailing = GOLDEN_DATA.to_vec();
        trailing.push(0);
        assert_eq!(decode_data(&trailing), Err(TlvError::LengthMismatch));
    }

    #[test]
    fn lidar_overhead_bound() {
        let name = Name::parse("/trailer/lidar").unwrap();
        let d = Data::new(name.clone(), vec![7; 1600], 5, vec![]).unwrap();
        let wire = encode_data(&d).unwrap();
        // 4 outer + 18 name + 6 freshness + 4 content header + 2 signature
        assert_eq!(wire.len(), 1600 + 34);
        assert!(wire.len() - 1600 <= 64);
        assert_eq!(data_overhead(&name, 1600, 0), 34);
    }

    #[test]
    fn data_at_the_cap() {
        let name = Name::parse("/trailer/cam").unwrap();
        let fit = MAX_PACKET_SIZE - data_overhead(&name, 8700, 0);
        let d = Data::new(name.clone(), vec![1; fit], 0, vec![]).unwrap();
        assert_eq!(encode_data(&d).unwrap().len(), MAX_PACKET_SIZE);
        assert!(matches!(
            Data::new(name, vec![1; fit + 1], 0, vec![]),
            Err(PacketError::OversizePacket(8801))
        ));
    }
}
