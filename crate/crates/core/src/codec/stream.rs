//! Stream file format: a 16-byte header followed by length-prefixed packets.

use std::io::{ErrorKind, Read, Write};

use super::RateMode;
use crate::error::{Error, Result};
use crate::transform::FrameDuration;

pub const MAGIC: [u8; 4] = *b"CLT1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamHeader {
    pub version: u8,
    pub channels: u8,
    pub duration: FrameDuration,
    pub rate_mode: RateMode,
    pub bitrate: u32,
    /// Samples per channel in the source signal.
    pub total_samples: u32,
}

impl StreamHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut b = [0u8; HEADER_LEN];
        b[..4].copy_from_slice(&MAGIC);
        b[4] = self.version;
        b[5] = self.channels;
        b[6] = self.duration.code();
        b[7] = self.rate_mode.code();
        b[8..12].copy_from_slice(&self.bitrate.to_le_bytes());
        b[12..16].copy_from_slice(&self.total_samples.to_le_bytes());
        b
    }

    pub fn from_bytes(b: &[u8]) -> Result<Self> {
        if b.len() < HEADER_LEN {
            return Err(Error::BadHeader("header truncated"));
        }
        if b[..4] != MAGIC {
            return Err(Error::BadHeader("bad magic"));
        }
        if b[4] != VERSION {
            return Err(Error::BadHeader("unsupported version"));
        }
        if !(1..=2).contains(&b[5]) {
            return Err(Error::BadHeader("bad channel count"));
        }
        let duration = FrameDuration::from_code(b[6]).ok_or(Error::BadHeader("bad frame duration"))?;
        let rate_mode = RateMode::from_code(b[7]).ok_or(Error::BadHeader("bad rate mode"))?;
        Ok(Self {
            version: b[4],
            channels: b[5],
            duration,
            rate_mode,
            bitrate: u32::from_le_bytes(b[8..12].try_into().unwrap()),
            total_samples: u32::from_le_bytes(b[12..16].try_into().unwrap()),
        })
    }

    /// Number of packets the encoder emits for the whole signal.
    pub fn frame_count(&self) -> usize {
        (self.total_samples as usize).div_ceil(self.duration.frame_size())
    }
}

pub struct StreamWriter<W: Write> {
    inner: W,
}

impl<W: Write> StreamWriter<W> {
    pub fn new(mut inner: W, header: &StreamHeader) -> Result<Self> {
        inner.write_all(&header.to_bytes())?;
        Ok(Self { inner })
    }

    pub fn write_packet(&mut self, packet: &[u8]) -> Result<()> {
        let len = u16::try_from(packet.len()).map_err(|_| Error::InvalidInput("packet too long".into()))?;
        self.inner.write_all(&len.to_le_bytes())?;
        self.inner.write_all(packet)?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

/// A packet read from a stream; `truncated` marks a final packet cut short.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReadPacket {
    pub data: Vec<u8>,
    pub truncated: bool,
}

pub struct StreamReader<R: Read> {
    inner: R,
    header: StreamHeader,
}

fn read_up_to<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<usize> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => break,
            Ok(n) => got += n,
            Err(e) if e.kind() == ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(got)
}

impl<R: Read> StreamReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut b = [0u8; HEADER_LEN];
        let got = read_up_to(&mut inner, &mut b)?;
        if got < HEADER_LEN {
            return Err(Error::BadHeader("header truncated"));
        }
        Ok(Self { header: StreamHeader::from_bytes(&b)?, inner })
    }

    pub fn header(&self) -> &StreamHeader {
        &self.header
    }

    /// Next packet, or `None` at a clean end of stream.
    pub fn next_packet(&mut self) -> Result<Option<ReadPacket>> {
        let mut len = [0u8; 2];
        match read_up_to(&mut self.inner, &mut len)? {
            0 => return Ok(None),
            1 => return Ok(Some(ReadPacket { data: Vec::new(), truncated: true })),
            _ => {}
        }
        let mut data = vec![0u8; u16::from_le_bytes(len) as usize];
        let got = read_up_to(&mut self.inner, &mut data)?;
        let truncated = got < data.len();
        data.truncate(got);
        Ok(Some(ReadPacket { data, truncated }))
    }
}
