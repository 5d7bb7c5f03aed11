use std::io::{Read, Write};

use crate::error::{Error, Result};

pub mod opcode {
    pub const PUT: u8 = 0x01;
    pub const GET: u8 = 0x02;
    pub const BLOCK_SIZE: u8 = 0x03;
    pub const IS_PERSISTENT: u8 = 0x04;

    pub const UVC_HEAD: u8 = 0x10;
    pub const UVC_PUSH: u8 = 0x11;
    pub const UVC_LOG: u8 = 0x12;
}

pub mod status {
    pub const OK: u8 = 0x00;
    pub const NOT_FOUND: u8 = 0x01;
    pub const BAD_REQUEST: u8 = 0x02;
    pub const SERVER_ERROR: u8 = 0x03;
}

/// Refuse frames larger than any legitimate block or manifest.
const MAX_PAYLOAD: u32 = 16 << 20;

pub fn write_frame(w: &mut impl Write, tag: u8, payload: &[u8]) -> Result<()> {
    if payload.len() as u64 > MAX_PAYLOAD as u64 {
        return Err(Error::Protocol(format!(
            "payload of {} bytes exceeds frame limit",
            payload.len()
        )));
    }
    w.write_all(&(payload.len() as u32).to_be_bytes())?;
    w.write_all(&[tag])?;
    w.write_all(payload)?;
    w.flush()?;
    Ok(())
}

/// Read one frame. Returns `None` on a clean disconnect before any
/// header byte.
pub fn read_frame(r: &mut impl Read) -> Result<Option<(u8, Vec<u8>)>> {
    let mut len_bytes = [0u8; 4];
    match r.read_exact(&mut len_bytes) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_be_bytes(len_bytes);
    if len > MAX_PAYLOAD {
        return Err(Error::Protocol(format!("oversized frame: {len} bytes")));
    }
    let mut tag = [0u8; 1];
    r.read_exact(&mut tag)?;
    let mut payload = vec![0u8; len as usize];
    r.read_exact(&mut payload)?;
    Ok(Some((tag[0], payload)))
}
