//! `celtlab` command-line tool.

mod wav;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use celtlab_core::codec::{DEFAULT_SEED, DELAY};
use celtlab_core::corpus::{self, Signal};
use celtlab_core::quality::{self, MetricReport};
use celtlab_core::{Decoder, Encoder, EncoderConfig, FrameDuration, FrameInfo, RateMode, StreamReader, StreamWriter};
use wav::WavAudio;

#[derive(Parser)]
#[command(name = "celtlab", version, about = "Low-delay transform audio codec")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Encode a 48 kHz WAV file into a stream.
    Encode {
        input: PathBuf,
        output: PathBuf,
        #[command(flatten)]
        opts: CodecOpts,
    },
    /// Decode a stream into a WAV file.
    Decode {
        input: PathBuf,
        output: PathBuf,
        /// Write 32-bit float samples instead of 16-bit integers.
        #[arg(long)]
        float: bool,
    },
    /// Print every coded parameter of a stream, one JSON object per line.
    Probe { input: PathBuf },
    /// Compare a decoded file against its reference.
    Metric { reference: PathBuf, test: PathBuf },
    /// Encode and decode repeatedly, reporting metrics per generation.
    Cascade {
        input: PathBuf,
        #[arg(long, default_value_t = 5)]
        generations: usize,
        #[command(flatten)]
        opts: CodecOpts,
    },
    /// Write the synthetic test corpus as WAV files.
    GenCorpus {
        dir: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        seconds: f64,
        #[arg(long, default_value_t = 2)]
        channels: usize,
    },
}

#[derive(Args)]
struct CodecOpts {
    /// Target bitrate in bits per second.
    #[arg(long, default_value_t = 64_000)]
    bitrate: u32,
    /// Frame duration in milliseconds: 2.5, 5, 10 or 20.
    #[arg(long, default_value_t = 20.0)]
    frame: f64,
    #[arg(long, conflicts_with = "vbr")]
    cbr: bool,
    #[arg(long)]
    vbr: bool,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(0..=2))]
    complexity: u8,
    /// Disable inter-frame energy prediction.
    #[arg(long)]
    intra_only: bool,
}

impl CodecOpts {
    fn config(&self, channels: usize, seed: u32) -> Result<EncoderConfig> {
        let cfg = EncoderConfig {
            channels,
            duration: FrameDuration::from_millis(self.frame)?,
            bitrate: self.bitrate,
            rate_mode: if self.vbr { RateMode::Vbr } else { RateMode::Cbr },
            complexity: self.complexity,
            interframe: !self.intra_only,
            seed,
            ..Default::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn seed() -> Result<u32> {
    let Ok(v) = std::env::var("CELTLAB_SEED") else {
        return Ok(DEFAULT_SEED);
    };
    let v = v.trim();
    let parsed = match v.strip_prefix("0x").or_else(|| v.strip_prefix("0X")) {
        Some(hex) => u32::from_str_radix(hex, 16),
        None => v.parse(),
    };
    parsed.with_context(|| format!("invalid CELTLAB_SEED {v:?}"))
}

fn encode(input: &Path, output: &Path, opts: &CodecOpts) -> Result<()> {
    let audio = wav::read(input)?;
    let cfg = opts.config(audio.channels, seed()?)?;
    let total = u32::try_from(audio.frames()).context("input too long")?;
    let mut enc = Encoder::new(cfg.clone())?;
    let file = File::create(output).with_context(|| format!("cannot create {}", output.display()))?;
    let mut writer = StreamWriter::new(BufWriter::new(file), &cfg.header(total))?;

    let step = enc.frame_size() * cfg.channels;
    let (mut bytes, mut frames, mut transients) = (0usize, 0usize, 0usize);
    let (mut waste, mut max_waste) = (0i64, 0i64);
    for chunk in audio.samples.chunks(step) {
        let mut frame = chunk.to_vec();
        frame.resize(step, 0.0);
        let packet = enc.encode_frame(&frame)?;
        writer.write_packet(&packet)?;
        let info = enc.last_info().expect("frame info after encode");
        bytes += packet.len();
        frames += 1;
        transients += info.transient as usize;
        waste += info.waste_frac();
        max_waste = max_waste.max(info.waste_frac());
    }
    writer.into_inner().flush()?;

    let seconds = (frames * enc.frame_size()) as f64 / celtlab_core::SAMPLE_RATE as f64;
    let rate = if seconds > 0.0 { bytes as f64 * 8.0 / seconds / 1000.0 } else { 0.0 };
    eprintln!(
        "frames {frames}, mean rate {rate:.2} kb/s, waste mean {:.2} bits max {:.2} bits, transients {transients}",
        waste as f64 / 8.0 / frames.max(1) as f64,
        max_waste as f64 / 8.0
    );
    Ok(())
}

fn open_stream(path: &Path) -> Result<StreamReader<BufReader<File>>> {
    let file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    StreamReader::new(BufReader::new(file)).with_context(|| format!("{} is not a stream", path.display()))
}

fn decode(input: &Path, output: &Path, float: bool) -> Result<()> {
    let mut reader = open_stream(input)?;
    let header = *reader.header();
    let mut dec = Decoder::from_header(&header, seed()?)?;
    let mut samples = Vec::new();
    while let Some(p) = reader.next_packet()? {
        if p.truncated {
            eprintln!("warning: final packet truncated to {} bytes", p.data.len());
        }
        samples.extend(dec.decode_frame(Some(&p.data)));
    }
    let channels = header.channels as usize;
    samples.resize(header.total_samples as usize * channels, 0.0);
    wav::write(output, &WavAudio { channels, samples }, float)
}

fn frame_json(index: usize, info: &FrameInfo, truncated: bool) -> serde_json::Value {
    let a = &info.alloc;
    let theta = if info.angles.is_empty() {
        json!(null)
    } else {
        let n = info.angles.len();
        json!({
            "count": n,
            "min": info.angles.iter().min(),
            "max": info.angles.iter().max(),
            "mean": info.angles.iter().map(|&v| v as f64).sum::<f64>() / n as f64,
        })
    };
    json!({
        "frame": index,
        "bytes": info.bytes,
        "truncated": truncated,
        "transient": info.transient,
        "anti_collapse": info.anti_collapse,
        "postfilter": {
            "enabled": info.pitch.enabled,
            "period": info.pitch.period,
            "gain_q": info.pitch.gain_q,
            "tapset": info.pitch.tapset,
        },
        "intra": info.intra,
        "tf": info.tf.iter().map(|&f| f as u8).collect::<Vec<_>>(),
        "spread": format!("{:?}", info.spread),
        "tilt": a.tilt,
        "boosts": a.boosts,
        "intensity": a.intensity,
        "dual": a.dual,
        "skip": a.skip,
        "coded_bands": info.coded_bands,
        "fine": info.fine,
        "theta_q14": theta,
        "used_bits": info.used_frac as f64 / 8.0,
    })
}

fn probe(input: &Path) -> Result<()> {
    let mut reader = open_stream(input)?;
    let h = *reader.header();
    let mut out = BufWriter::new(std::io::stdout().lock());
    let header = json!({
        "version": h.version,
        "channels": h.channels,
        "frame_ms": h.duration.millis(),
        "rate_mode": format!("{:?}", h.rate_mode),
        "bitrate": h.bitrate,
        "total_samples": h.total_samples,
    });
    writeln!(out, "{}", json!({ "header": header }))?;
    let mut dec = Decoder::from_header(&h, seed()?)?;
    let mut index = 0;
    while let Some(p) = reader.next_packet()? {
        dec.decode_frame(Some(&p.data));
        match dec.last_info() {
            Some(info) => writeln!(out, "{}", frame_json(index, info, p.truncated))?,
            None => writeln!(out, "{}", json!({ "frame": index, "bytes": p.data.len(), "lost": true }))?,
        }
        index += 1;
    }
    out.flush()?;
    Ok(())
}

fn report_json(m: &MetricReport) -> serde_json::Value {
    json!({ "seg_snr_db": m.seg_snr, "lsd_db": m.lsd, "band_error_db": m.band_error })
}

/// Lag of `test` behind `reference`: zero or the codec delay, whichever
/// correlates better.
fn alignment(reference: &[f64], test: &[f64], channels: usize) -> usize {
    let corr = |lag: usize| -> f64 {
        let shift = lag * channels;
        if shift >= test.len() {
            return f64::NEG_INFINITY;
        }
        let (r, t) = (&reference[..test.len() - shift], &test[shift..]);
        let xy: f64 = r.iter().zip(t).map(|(a, b)| a * b).sum();
        let xx: f64 = r.iter().map(|v| v * v).sum();
        let yy: f64 = t.iter().map(|v| v * v).sum();
        if xx == 0.0 || yy == 0.0 {
            if r == t { 1.0 } else { 0.0 }
        } else {
            xy / (xx * yy).sqrt()
        }
    };
    if corr(DELAY) > corr(0) { DELAY } else { 0 }
}

fn metric(reference: &Path, test: &Path) -> Result<()> {
    let r = wav::read(reference)?;
    let t = wav::read(test)?;
    if r.channels != t.channels {
        bail!("channel mismatch: {} vs {}", r.channels, t.channels);
    }
    if r.samples.len() != t.samples.len() {
        bail!("length mismatch: {} vs {} samples per channel", r.frames(), t.frames());
    }
    let lag = alignment(&r.samples, &t.samples, r.channels);
    let shift = lag * r.channels;
    let report = quality::compare(&r.samples[..r.samples.len() - shift], &t.samples[shift..], r.channels)?;
    let mut line = report_json(&report);
    line["lag"] = json!(lag);
    println!("{line}");
    Ok(())
}

fn cascade(input: &Path, generations: usize, opts: &CodecOpts) -> Result<()> {
    let audio = wav::read(input)?;
    let cfg = opts.config(audio.channels, seed()?)?;
    for (g, m) in quality::cascade(&audio.samples, &cfg, generations)?.iter().enumerate() {
        let mut line = report_json(m);
        line["generation"] = json!(g + 1);
        println!("{line}");
    }
    Ok(())
}

fn gen_corpus(dir: &Path, seconds: f64, channels: usize) -> Result<()> {
    if !(1..=2).contains(&channels) {
        bail!("unsupported channel count {channels}");
    }
    if !(seconds > 0.0) {
        bail!("duration must be positive");
    }
    std::fs::create_dir_all(dir)?;
    let len = (seconds * celtlab_core::SAMPLE_RATE as f64).round() as usize;
    for s in Signal::ALL {
        let samples = corpus::generate(s, len, channels);
        let path = dir.join(format!("{}.wav", s.name()));
        wav::write(&path, &WavAudio { channels, samples }, true)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Encode { input, output, opts } => encode(&input, &output, &opts),
        Command::Decode { input, output, float } => decode(&input, &output, float),
        Command::Probe { input } => probe(&input),
        Command::Metric { reference, test } => metric(&reference, &test),
        Command::Cascade { input, generations, opts } => cascade(&input, generations, &opts),
        Command::GenCorpus { dir, seconds, channels } => gen_corpus(&dir, seconds, channels),
    }
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        let closed = e
            .downcast_ref::<std::io::Error>()
            .is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe);
        if closed {
            return;
        }
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
