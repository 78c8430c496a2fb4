//! Low-delay transform audio codec.
//!
//! Band energies are coded explicitly and the normalized band shapes are
//! coded with a pyramid vector quantizer. Bit allocation is implicit: the
//! decoder derives it from the frame size and a handful of coded parameters.

pub mod alloc;
pub mod bands;
pub mod codec;
pub mod corpus;
pub mod energy;
pub mod entropy;
mod error;
mod mathops;
pub mod prefilter;
pub mod pvq;
pub mod quality;
pub mod transform;

pub use codec::{
    Decoder, Encoder, EncoderConfig, FrameDuration, FrameInfo, RateMode, StreamHeader,
    StreamReader, StreamWriter,
};
pub use error::{Error, Result};

/// Codec sample rate in Hz.
pub const SAMPLE_RATE: u32 = 48_000;
