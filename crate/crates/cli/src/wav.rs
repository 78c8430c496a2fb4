use std::path::Path;

use anyhow::{bail, Context, Result};
use celtlab_core::SAMPLE_RATE;
use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

/// Interleaved samples in `[-1, 1]`.
pub struct WavAudio {
    pub channels: usize,
    pub samples: Vec<f64>,
}

impl WavAudio {
    pub fn frames(&self) -> usize {
        self.samples.len() / self.channels
    }
}

pub fn read(path: &Path) -> Result<WavAudio> {
    let reader = WavReader::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    let spec = reader.spec();
    if spec.sample_rate != SAMPLE_RATE {
        bail!("unsupported sample rate {} Hz (only {} Hz is accepted)", spec.sample_rate, SAMPLE_RATE);
    }
    if !(1..=2).contains(&spec.channels) {
        bail!("unsupported channel count {}", spec.channels);
    }
    let samples: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Float, 32) => reader.into_samples::<f32>().map(|s| s.map(f64::from)).collect::<Result<_, _>>()?,
        (SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = (1i64 << (bits - 1)) as f64;
            reader.into_samples::<i32>().map(|s| s.map(|v| v as f64 / scale)).collect::<Result<_, _>>()?
        }
        (fmt, bits) => bail!("unsupported sample format {fmt:?} with {bits} bits"),
    };
    Ok(WavAudio { channels: spec.channels as usize, samples })
}

pub fn write(path: &Path, audio: &WavAudio, float: bool) -> Result<()> {
    let spec = WavSpec {
        channels: audio.channels as u16,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: if float { 32 } else { 16 },
        sample_format: if float { SampleFormat::Float } else { SampleFormat::Int },
    };
    let mut w = WavWriter::create(path, spec).with_context(|| format!("cannot create {}", path.display()))?;
    for &s in &audio.samples {
        if float {
            w.write_sample(s as f32)?;
        } else {
            w.write_sample((s * 32768.0).round().clamp(-32768.0, 32767.0) as i16)?;
        }
    }
    w.finalize()?;
    Ok(())
}
