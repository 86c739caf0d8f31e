//! Length-prefixed packet framing for stream transports: a 4-byte big-endian
//! length followed by the packet bytes.

use std::io::{self, Read, Write};

use crate::packet::MAX_PACKET_SIZE;

pub const MAX_FRAME: usize = MAX_PACKET_SIZE;

pub fn write_frame<W: Write>(w: &mut W, packet: &[u8]) -> io::Result<()> {
    if packet.len() > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidInput, "frame exceeds packet cap"));
    }
    let mut buf = Vec::with_capacity(4 + packet.len());
    buf.extend_from_slice(&(packet.len() as u32).to_be_bytes());
    buf.extend_from_slice(packet);
    w.write_all(&buf)?;
    w.flush()
}

/// Reads one frame. A clean end of stream between frames yields `None`.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<Option<Vec<u8>>> {
    let mut len = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        match r.read(&mut len[got..]) {
            Ok(0) if got == 0 => return Ok(None),
            Ok(0) => return Err(io::ErrorKind::UnexpectedEof.into()),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(io::Error::new(io::ErrorKind::InvalidData, "frame exceeds packet cap"));
    }
    let mut packet = vec![0u8; len];
    r.read_exact(&mut packet)?;
    Ok(Some(packet))
}
