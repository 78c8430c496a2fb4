use super::frame::{code_frame, Shared};
use super::{FrameInfo, StreamHeader, OUTPUT_LIMIT, PCM_SCALE};
use crate::bands::{denormalize_band, BandLayout, NUM_BANDS};
use crate::entropy::RangeDecoder;
use crate::error::Result;
use crate::prefilter::{CombFilter, PitchParams};
use crate::transform::{DeEmphasis, FrameConfig, FrameDuration, FrameTransform, OVERLAP};

/// Energy drop per concealed frame, log2.
const PLC_DECAY: f64 = 0.5;

pub struct Decoder {
    fcfg: FrameConfig,
    transform: FrameTransform,
    shared: Shared,
    mem: Vec<Vec<f64>>,
    post: Vec<CombFilter>,
    emphasis: Vec<DeEmphasis>,
    /// Pitch parameters of the previous two frames, newest first.
    pitch: [PitchParams; 2],
    last: Option<Concealment>,
    spectra: Vec<Vec<f64>>,
    info: Option<FrameInfo>,
}

struct Concealment {
    norm: Vec<Vec<f64>>,
    energy: Vec<f64>,
    blocks: usize,
    losses: u32,
}

impl Decoder {
    pub fn new(duration: FrameDuration, channels: usize, seed: u32) -> Result<Self> {
        let fcfg = FrameConfig::new(duration, channels)?;
        let n = fcfg.frame_size();
        Ok(Self {
            transform: FrameTransform::new(duration),
            shared: Shared::new(fcfg, seed),
            mem: vec![vec![0.0; OVERLAP]; channels],
            post: vec![CombFilter::postfilter(); channels],
            emphasis: vec![DeEmphasis::default(); channels],
            pitch: [PitchParams::off(); 2],
            last: None,
            spectra: vec![vec![0.0; n]; channels],
            info: None,
            fcfg,
        })
    }

    pub fn from_header(header: &StreamHeader, seed: u32) -> Result<Self> {
        Self::new(header.duration, header.channels as usize, seed)
    }

    pub fn frame_size(&self) -> usize {
        self.fcfg.frame_size()
    }

    pub fn channels(&self) -> usize {
        self.fcfg.channels
    }

    /// Parameters of the last decoded frame; `None` after a concealed one.
    pub fn last_info(&self) -> Option<&FrameInfo> {
        self.info.as_ref()
    }

    /// Spectrum of the last frame, per channel.
    pub fn spectrum(&self) -> &[Vec<f64>] {
        &self.spectra
    }

    /// Decodes one packet into interleaved samples. `None` or an empty
    /// packet marks a lost frame, which is concealed.
    pub fn decode_frame(&mut self, packet: Option<&[u8]>) -> Vec<f64> {
        let (spectra, blocks, pitch) = match packet.filter(|p| !p.is_empty()) {
            Some(p) => {
                let mut dec = RangeDecoder::new(p);
                let d = code_frame(&mut dec, &mut self.shared, None, p.len() as i64 * 64);
                self.last = Some(Concealment { norm: d.norm, energy: d.energy, blocks: d.blocks, losses: 0 });
                let pitch = d.info.pitch;
                self.info = Some(d.info);
                (d.spectra, d.blocks, pitch)
            }
            None => {
                self.info = None;
                self.shared.frame += 1;
                (self.conceal(), self.last.as_ref().map_or(1, |l| l.blocks), self.pitch[0])
            }
        };

        let n = self.frame_size();
        let ch = self.channels();
        let mut out = vec![0.0; n * ch];
        for c in 0..ch {
            let mut y = self.transform.synthesize(&spectra[c], blocks, &mut self.mem[c]);
            let split = OVERLAP.min(n);
            let (head, rest) = y.split_at_mut(split);
            self.post[c].process(head, &self.pitch[1], &self.pitch[0], n - split);
            self.post[c].process(rest, &self.pitch[0], &pitch, 0);
            self.emphasis[c].process(&mut y);
            for (i, v) in y.into_iter().enumerate() {
                let s = v / PCM_SCALE;
                out[i * ch + c] = if s.is_finite() { s.clamp(-OUTPUT_LIMIT, OUTPUT_LIMIT) } else { 0.0 };
            }
        }
        self.pitch = [pitch, self.pitch[0]];
        self.spectra = spectra;
        out
    }

    /// Emits the samples still held in the overlap memory, as if a silent
    /// frame followed. Returns [`OVERLAP`] samples per channel, interleaved.
    pub fn flush(&mut self) -> Vec<f64> {
        let n = self.frame_size();
        let ch = self.channels();
        let l = OVERLAP.min(n);
        let mut out = vec![0.0; l * ch];
        for c in 0..ch {
            let mut mem = self.mem[c].clone();
            let mut y = self.transform.synthesize(&vec![0.0; n], 1, &mut mem);
            y.truncate(l);
            let mut post = self.post[c].clone();
            post.process(&mut y, &self.pitch[1], &self.pitch[0], n - l);
            let mut emph = self.emphasis[c].clone();
            emph.process(&mut y);
            for (i, v) in y.into_iter().enumerate() {
                out[i * ch + c] = (v / PCM_SCALE).clamp(-OUTPUT_LIMIT, OUTPUT_LIMIT);
            }
        }
        out
    }

    fn conceal(&mut self) -> Vec<Vec<f64>> {
        let n = self.frame_size();
        let ch = self.channels();
        let Some(last) = self.last.as_mut() else {
            return vec![vec![0.0; n]; ch];
        };
        last.losses += 1;
        let layout = BandLayout::new(n);
        let drop = PLC_DECAY * last.losses as f64;
        (0..ch)
            .map(|c| {
                let mut s = last.norm[c].clone();
                for b in 0..NUM_BANDS {
                    denormalize_band(&mut s[layout.range(b)], last.energy[c * NUM_BANDS + b] - drop);
                }
                s
            })
            .collect()
    }
}
