//! Fits the coarse-energy Laplace models to the synthetic corpus and
//! prints them as Rust tables.
//!
//! cargo run --release -p celtlab-core --example train_laplace

use celtlab_core::bands::NUM_BANDS;
use celtlab_core::codec::{Encoder, EncoderConfig, FrameDuration};
use celtlab_core::corpus::{generate, Signal};
use celtlab_core::energy::code_coarse;
use celtlab_core::entropy::RangeEncoder;

const SECONDS: usize = 4;

fn fit(samples: &[i32]) -> (u32, u32) {
    let n = samples.len().max(1) as f64;
    let zeros = samples.iter().filter(|&&v| v == 0).count() as f64;
    let tail: Vec<f64> = samples.iter().filter(|&&v| v != 0).map(|&v| (v.abs() - 1) as f64).collect();
    // geometric fit of |k| - 1 over non-zero values
    let mean = tail.iter().sum::<f64>() / tail.len().max(1) as f64;
    let ratio = mean / (1.0 + mean);
    let fs0 = (zeros / n * 32768.0).round().clamp(1000.0, 30000.0) as u32;
    let decay = (ratio * 16384.0).round().clamp(2000.0, 15000.0) as u32;
    (fs0, decay)
}

fn main() {
    let mut inter = vec![Vec::new(); NUM_BANDS];
    let mut intra = vec![Vec::new(); NUM_BANDS];
    for duration in [FrameDuration::Ms2_5, FrameDuration::Ms5, FrameDuration::Ms10, FrameDuration::Ms20] {
        for channels in [1, 2] {
            for signal in Signal::ALL {
                let pcm = generate(signal, 48_000 * SECONDS, channels);
                let cfg = EncoderConfig { channels, duration, bitrate: 64_000, ..Default::default() };
                let mut enc = Encoder::new(cfg).unwrap();
                let step = enc.frame_size() * channels;
                let mut prev = vec![0.0; channels * NUM_BANDS];
                let mut first = true;
                for chunk in pcm.chunks_exact(step) {
                    enc.encode_frame(chunk).unwrap();
                    let target = enc.analysis_energy().to_vec();
                    let mut scratch = RangeEncoder::new(1275);
                    let mut zero = vec![0.0; channels * NUM_BANDS];
                    let r = code_coarse(&mut scratch, Some(&target), &mut zero, false, duration, channels, 1 << 20);
                    for (i, v) in r.into_iter().enumerate() {
                        intra[i % NUM_BANDS].push(v);
                    }
                    let mut scratch = RangeEncoder::new(1275);
                    let r = code_coarse(&mut scratch, Some(&target), &mut prev, !first, duration, channels, 1 << 20);
                    if !first {
                        for (i, v) in r.into_iter().enumerate() {
                            inter[i % NUM_BANDS].push(v);
                        }
                    }
                    first = false;
                }
            }
        }
    }
    for (name, data) in [("LAPLACE_INTER", &inter), ("LAPLACE_INTRA", &intra)] {
        println!("pub const {name}: [Laplace; NUM_BANDS] = [");
        for d in data {
            let (fs0, decay) = fit(d);
            println!("    Laplace {{ fs0: {fs0}, decay: {decay} }},");
        }
        println!("];");
    }
}
