mod common;

use celtlab_core::codec::{
    decode_stream, encode_stream, transcode, CollapsePolicy, Decoder, Encoder, EncoderConfig, FrameDuration, RateMode,
    DELAY, HEADER_LEN,
};
use celtlab_core::corpus::{generate, Signal};

fn configs() -> Vec<EncoderConfig> {
    let mut out = Vec::new();
    for duration in FrameDuration::ALL {
        for (channels, bitrate) in [(1, 24_000), (1, 96_000), (2, 48_000), (2, 160_000)] {
            out.push(EncoderConfig { channels, duration, bitrate, ..Default::default() });
        }
    }
    out
}

#[test]
fn shadow_decoder_matches_decoder() {
    for cfg in configs() {
        let n = cfg.frame_size();
        let pcm = generate(Signal::Mix, 48_000 / 2, cfg.channels);
        let mut enc = Encoder::new(cfg.clone()).unwrap();
        let mut dec = Decoder::new(cfg.duration, cfg.channels, cfg.seed).unwrap();
        for (i, chunk) in pcm.chunks_exact(n * cfg.channels).enumerate() {
            let p = enc.encode_frame(chunk).unwrap();
            assert_eq!(p.len(), cfg.cbr_bytes());
            dec.decode_frame(Some(&p));
            assert_eq!(enc.shadow_spectrum(), dec.spectrum(), "{cfg:?} frame {i}");
            assert_eq!(enc.last_info(), dec.last_info());
        }
    }
}

#[test]
fn lost_frames_are_concealed() {
    let cfg = EncoderConfig::default();
    let pcm = generate(Signal::Mix, 48_000, 2);
    let packets = Encoder::new(cfg.clone()).unwrap().encode_all(&pcm).unwrap();
    let mut dec = Decoder::new(cfg.duration, 2, cfg.seed).unwrap();
    let mut energy = Vec::new();
    for (i, p) in packets.iter().enumerate() {
        let out = match i % 10 {
            3 => dec.decode_frame(None),
            4 => dec.decode_frame(Some(&[])),
            _ => dec.decode_frame(Some(p)),
        };
        assert!(out.iter().all(|v| v.is_finite()));
        if i % 10 == 4 {
            assert!(dec.last_info().is_none());
            energy.push(out.iter().map(|v| v * v).sum::<f64>());
        }
    }
    assert!(energy.iter().any(|&e| e > 0.0));
}

#[test]
fn loss_before_any_packet_is_silent() {
    let mut dec = Decoder::new(FrameDuration::Ms10, 1, 3).unwrap();
    assert!(dec.decode_frame(None).iter().all(|&v| v == 0.0));
}

#[test]
fn vbr_tracks_target_rate() {
    let cfg = EncoderConfig { rate_mode: RateMode::Vbr, ..Default::default() };
    let pcm = generate(Signal::Noise, 48_000 * 3, 2);
    let packets = Encoder::new(cfg.clone()).unwrap().encode_all(&pcm).unwrap();
    let bits: usize = packets.iter().map(|p| p.len() * 8).sum();
    let rate = bits as f64 / 3.0;
    assert!((rate / cfg.bitrate as f64 - 1.0).abs() < 0.05, "{rate}");
    assert!(packets.iter().any(|p| p.len() != packets[0].len()));
}

#[test]
fn transcode_is_aligned() {
    let cfg = EncoderConfig { channels: 1, bitrate: 128_000, ..Default::default() };
    let pcm = generate(Signal::Tone, 12_345, 1);
    let out = transcode(&pcm, &cfg).unwrap();
    assert_eq!(out.len(), pcm.len());
    let dot = |lag: usize| -> f64 { pcm.iter().zip(&out[lag..]).map(|(a, b)| a * b).sum() };
    assert!(dot(0) > dot(DELAY).abs());
}

#[test]
fn stream_round_trip() {
    let cfg = EncoderConfig { duration: FrameDuration::Ms5, ..Default::default() };
    let pcm = generate(Signal::Mix, 10_001, 2);
    let bytes = encode_stream(&pcm, &cfg).unwrap();
    let frames = 10_001usize.div_ceil(cfg.frame_size());
    assert_eq!(bytes.len(), HEADER_LEN + frames * (2 + cfg.cbr_bytes()));
    let (header, out) = decode_stream(&bytes, cfg.seed).unwrap();
    assert_eq!(header.total_samples, 10_001);
    assert_eq!(out.len(), pcm.len());
    assert!(decode_stream(&bytes[..HEADER_LEN - 1], cfg.seed).is_err());
}

#[test]
fn decoding_is_deterministic() {
    let cfg = EncoderConfig::default();
    let pcm = generate(Signal::Castanets, 24_000, 2);
    let a = encode_stream(&pcm, &cfg).unwrap();
    let b = encode_stream(&pcm, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(decode_stream(&a, 9).unwrap(), decode_stream(&a, 9).unwrap());
    assert_ne!(decode_stream(&a, 9).unwrap().1, decode_stream(&a, 10).unwrap().1);
}

#[test]
fn random_packets_are_safe() {
    let s = common::fuzz_packets(5_000, 11);
    assert_eq!((s.bad_samples, s.bad_state), (0, 0));
}

#[test]
fn band_energies_are_preserved() {
    let cfg = EncoderConfig::default();
    let f = common::energy_fidelity(&cfg, 0.5);
    assert!(f.checked > 1000);
    assert_eq!(f.violations, 0, "worst {} steps", f.worst_steps);
}

#[test]
fn collapse_prevention_fills_holes() {
    let on = common::collapse_holes(CollapsePolicy::ForceOn, 1.0);
    let off = common::collapse_holes(CollapsePolicy::ForceOff, 1.0);
    assert!(on.transient_frames > 0);
    assert_eq!(on.holes, 0);
    assert!(off.holes > 0);
}

#[test]
fn config_validation() {
    assert!(Encoder::new(EncoderConfig { channels: 3, ..Default::default() }).is_err());
    assert!(Encoder::new(EncoderConfig { complexity: 3, ..Default::default() }).is_err());
    assert!(Encoder::new(EncoderConfig { bitrate: 0, ..Default::default() }).is_err());
    let mut enc = Encoder::new(EncoderConfig::default()).unwrap();
    assert!(enc.encode_frame(&[0.0; 10]).is_err());
}
