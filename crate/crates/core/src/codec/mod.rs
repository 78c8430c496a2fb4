//! Frame-level encoder and decoder, rate control and stream framing.

mod analysis;
mod decoder;
mod encoder;
mod frame;
mod stream;

pub use decoder::Decoder;
pub use encoder::Encoder;
pub use stream::{StreamHeader, StreamReader, StreamWriter, HEADER_LEN, MAGIC, VERSION};

pub use crate::transform::FrameDuration;

use crate::alloc::AllocParams;
use crate::bands::Spread;
use crate::error::{Error, Result};
use crate::prefilter::PitchParams;

/// Default base of the folding and noise generator.
pub const DEFAULT_SEED: u32 = 0x5EED_CE17;
/// Samples between input and decoded output.
pub const DELAY: usize = crate::transform::OVERLAP;
/// Packet size bounds in bytes.
pub const MIN_PACKET: usize = 2;
pub const MAX_PACKET: usize = 1275;
/// Internal sample scale: unit-range PCM is coded as 16-bit values.
pub const PCM_SCALE: f64 = 32768.0;
/// Decoded samples are clamped to this magnitude.
pub const OUTPUT_LIMIT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RateMode {
    #[default]
    Cbr,
    Vbr,
}

impl RateMode {
    pub fn code(self) -> u8 {
        match self {
            RateMode::Cbr => 0,
            RateMode::Vbr => 1,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(RateMode::Cbr),
            1 => Some(RateMode::Vbr),
            _ => None,
        }
    }
}

/// Encoder-side override of the collapse-prevention flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CollapsePolicy {
    #[default]
    Auto,
    ForceOn,
    ForceOff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    pub channels: usize,
    pub duration: FrameDuration,
    /// Target bitrate in bits per second over all channels.
    pub bitrate: u32,
    pub rate_mode: RateMode,
    /// 0 disables the pitch prefilter; 1 and 2 enable it.
    pub complexity: u8,
    /// Inter-frame energy prediction; off trades rate for loss robustness.
    pub interframe: bool,
    pub collapse: CollapsePolicy,
    pub seed: u32,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            channels: 2,
            duration: FrameDuration::Ms20,
            bitrate: 64_000,
            rate_mode: RateMode::Cbr,
            complexity: 2,
            interframe: true,
            collapse: CollapsePolicy::Auto,
            seed: DEFAULT_SEED,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.channels) {
            return Err(Error::InvalidInput(format!("unsupported channel count {}", self.channels)));
        }
        if self.complexity > 2 {
            return Err(Error::InvalidInput(format!("complexity {} out of range 0..=2", self.complexity)));
        }
        if self.bitrate == 0 {
            return Err(Error::InvalidInput("bitrate must be positive".into()));
        }
        Ok(())
    }

    pub fn frame_size(&self) -> usize {
        self.duration.frame_size()
    }

    /// CBR packet size in bytes.
    pub fn cbr_bytes(&self) -> usize {
        let bytes = self.bitrate as u64 * self.frame_size() as u64 / (8 * crate::SAMPLE_RATE as u64);
        (bytes as usize).clamp(MIN_PACKET, MAX_PACKET)
    }

    pub fn header(&self, total_samples: u32) -> StreamHeader {
        StreamHeader {
            version: VERSION,
            channels: self.channels as u8,
            duration: self.duration,
            rate_mode: self.rate_mode,
            bitrate: self.bitrate,
            total_samples,
        }
    }
}

/// Encodes a whole interleaved signal into a stream file image.
pub fn encode_stream(pcm: &[f64], cfg: &EncoderConfig) -> Result<Vec<u8>> {
    let total = pcm.len() / cfg.channels;
    let total = u32::try_from(total).map_err(|_| Error::InvalidInput("signal too long".into()))?;
    let mut enc = Encoder::new(cfg.clone())?;
    let mut w = StreamWriter::new(Vec::new(), &cfg.header(total))?;
    for p in enc.encode_all(pcm)? {
        w.write_packet(&p)?;
    }
    Ok(w.into_inner())
}

/// Decodes a stream file image. The output keeps the codec delay of
/// [`DELAY`] samples and is cut to the header's sample count; a truncated
/// final packet is decoded from what is present.
pub fn decode_stream(bytes: &[u8], seed: u32) -> Result<(StreamHeader, Vec<f64>)> {
    let mut r = StreamReader::new(bytes)?;
    let header = *r.header();
    let mut dec = Decoder::from_header(&header, seed)?;
    let mut out = Vec::new();
    while let Some(p) = r.next_packet()? {
        out.extend(dec.decode_frame(Some(&p.data)));
    }
    out.resize(header.total_samples as usize * header.channels as usize, 0.0);
    Ok((header, out))
}

/// Encodes and decodes `pcm`, returning a signal aligned with the input.
/// The last [`DELAY`] samples come from the final overlap tail alone.
pub fn transcode(pcm: &[f64], cfg: &EncoderConfig) -> Result<Vec<f64>> {
    let mut enc = Encoder::new(cfg.clone())?;
    let mut dec = Decoder::new(cfg.duration, cfg.channels, cfg.seed)?;
    let mut out = Vec::with_capacity(pcm.len() + DELAY * cfg.channels);
    for p in enc.encode_all(pcm)? {
        out.extend(dec.decode_frame(Some(&p)));
    }
    out.extend(dec.flush());
    let mut aligned = out.split_off(DELAY * cfg.channels);
    aligned.resize(pcm.len(), 0.0);
    Ok(aligned)
}

/// Every decoder-visible parameter of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameInfo {
    pub bytes: usize,
    pub transient: bool,
    pub anti_collapse: bool,
    pub pitch: PitchParams,
    pub intra: bool,
    pub tf: Vec<bool>,
    pub spread: Spread,
    pub alloc: AllocParams,
    pub coded_bands: usize,
    /// Fine energy bits per band, before leftover refinement.
    pub fine: Vec<u32>,
    /// Stereo angles, Q14 (16384 is a right angle).
    pub angles: Vec<i32>,
    /// Eighth-bits consumed by the range coder and raw bits.
    pub used_frac: u32,
}

impl FrameInfo {
    /// Eighth-bits of the packet left unused.
    pub fn waste_frac(&self) -> i64 {
        self.bytes as i64 * 64 - self.used_frac as i64
    }
}
