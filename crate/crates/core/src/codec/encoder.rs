use super::analysis::{
    channel_correlation, choose_boosts, choose_intensity, choose_spread, choose_tf, spectral_flatness, RateControl,
};
use super::frame::{code_frame, tf_change, Shared, Wants};
use super::{CollapsePolicy, EncoderConfig, FrameInfo, RateMode, PCM_SCALE};
use crate::alloc::{compute_allocation, AllocConfig, AllocParams};
use crate::bands::{band_energy, normalize_band, BandLayout, Lcg, NUM_BANDS};
use crate::entropy::RangeEncoder;
use crate::error::{Error, Result};
use crate::prefilter::{pitch_analyze, CombFilter, PitchParams, ANALYSIS_WINDOW, MAX_PERIOD};
use crate::transform::{detect_transient, FrameConfig, FrameTransform, PreEmphasis, OVERLAP};

/// Smallest frame, in eighth-bits, that always has room for pitch
/// parameters.
const PITCH_MIN_FRAC: i64 = 256;

pub struct Encoder {
    cfg: EncoderConfig,
    fcfg: FrameConfig,
    transform: FrameTransform,
    shared: Shared,
    emphasis: Vec<PreEmphasis>,
    comb: Vec<CombFilter>,
    /// Mono pre-emphasized history for pitch analysis.
    pitch_buf: Vec<f64>,
    /// Last `OVERLAP` prefiltered samples per channel.
    tail: Vec<Vec<f64>>,
    prev_pitch: PitchParams,
    prev_flatness: f64,
    prev_transient: bool,
    prev_coded: usize,
    rate: RateControl,
    shadow: Vec<Vec<f64>>,
    energy: Vec<f64>,
    info: Option<FrameInfo>,
}

impl Encoder {
    pub fn new(cfg: EncoderConfig) -> Result<Self> {
        cfg.validate()?;
        let fcfg = FrameConfig::new(cfg.duration, cfg.channels)?;
        let n = fcfg.frame_size();
        let ch = cfg.channels;
        let base = cfg.bitrate as f64 * n as f64 / (8.0 * crate::SAMPLE_RATE as f64);
        Ok(Self {
            transform: FrameTransform::new(cfg.duration),
            shared: Shared::new(fcfg, cfg.seed),
            emphasis: vec![PreEmphasis::default(); ch],
            comb: vec![CombFilter::prefilter(); ch],
            pitch_buf: vec![0.0; MAX_PERIOD + 2 + n.max(ANALYSIS_WINDOW)],
            tail: vec![vec![0.0; OVERLAP]; ch],
            prev_pitch: PitchParams::off(),
            prev_flatness: 0.5,
            prev_transient: false,
            prev_coded: NUM_BANDS,
            rate: RateControl::new(base),
            shadow: vec![vec![0.0; n]; ch],
            energy: vec![0.0; ch * NUM_BANDS],
            info: None,
            fcfg,
            cfg,
        })
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.cfg
    }

    /// Samples per channel in one frame.
    pub fn frame_size(&self) -> usize {
        self.fcfg.frame_size()
    }

    /// Parameters of the last encoded frame.
    pub fn last_info(&self) -> Option<&FrameInfo> {
        self.info.as_ref()
    }

    /// Spectrum the decoder will reconstruct for the last frame, per channel.
    pub fn shadow_spectrum(&self) -> &[Vec<f64>] {
        &self.shadow
    }

    /// Measured band energies (log2) of the last frame, channel-major.
    pub fn analysis_energy(&self) -> &[f64] {
        &self.energy
    }

    fn frame_bytes(&mut self, transient: bool, tonality: f64) -> usize {
        match self.cfg.rate_mode {
            RateMode::Cbr => self.cfg.cbr_bytes(),
            RateMode::Vbr => self.rate.next(transient, tonality),
        }
    }

    fn min_bytes(&self) -> usize {
        match self.cfg.rate_mode {
            RateMode::Cbr => self.cfg.cbr_bytes(),
            RateMode::Vbr => self.rate.min_bytes(),
        }
    }

    /// Encodes one frame of interleaved samples in `[-1, 1]`.
    pub fn encode_frame(&mut self, pcm: &[f64]) -> Result<Vec<u8>> {
        let n = self.frame_size();
        let ch = self.cfg.channels;
        if pcm.len() != n * ch {
            return Err(Error::InvalidInput(format!("expected {} samples, got {}", n * ch, pcm.len())));
        }
        let layout = BandLayout::new(n);

        let mut x: Vec<Vec<f64>> = (0..ch)
            .map(|c| pcm.iter().skip(c).step_by(ch).map(|v| v * PCM_SCALE).collect())
            .collect();
        for (c, xc) in x.iter_mut().enumerate() {
            self.emphasis[c].process(xc);
        }

        // pitch analysis on the mono mix, before the prefilter
        self.pitch_buf.drain(..n);
        self.pitch_buf.extend((0..n).map(|i| x.iter().map(|xc| xc[i]).sum::<f64>() / ch as f64));
        let pitch = if self.cfg.complexity > 0 && self.min_bytes() as i64 * 64 >= PITCH_MIN_FRAC {
            pitch_analyze(&self.pitch_buf, n)
        } else {
            PitchParams::off()
        };

        let mut spans = Vec::with_capacity(ch);
        for (c, xc) in x.iter_mut().enumerate() {
            self.comb[c].process(xc, &self.prev_pitch, &pitch, 0);
            let mut span = std::mem::take(&mut self.tail[c]);
            span.extend_from_slice(xc);
            self.tail[c] = span[n..].to_vec();
            spans.push(span);
        }

        let transient = self.fcfg.supports_transients() && spans.iter().any(|s| detect_transient(s));
        let blocks = self.fcfg.blocks(transient);
        let coeffs: Vec<Vec<f64>> = spans.iter().map(|s| self.transform.analyze(s, blocks)).collect();
        let mut energy = Vec::with_capacity(ch * NUM_BANDS);
        for cf in &coeffs {
            energy.extend(band_energy(cf, &layout));
        }
        let long_energy = transient.then(|| {
            spans
                .iter()
                .flat_map(|s| band_energy(&self.transform.analyze(s, 1), &layout))
                .collect::<Vec<f64>>()
        });
        let norm: Vec<Vec<f64>> = coeffs
            .iter()
            .map(|cf| {
                let mut v = vec![0.0; n];
                for b in 0..NUM_BANDS {
                    let r = layout.range(b);
                    let amp = crate::bands::norm(&cf[r.clone()]);
                    if amp > 0.0 {
                        for i in r {
                            v[i] = cf[i] / amp;
                        }
                    } else {
                        // a silent band still gets a dense direction so its
                        // bits are spent
                        let mut rng = Lcg::new(b as u32);
                        let mut d: Vec<f64> = r.clone().map(|_| rng.next_signed()).collect();
                        let _ = normalize_band(&mut d);
                        v[r].copy_from_slice(&d);
                    }
                }
                v
            })
            .collect();

        let flatness = coeffs.iter().map(|cf| spectral_flatness(cf, layout.coded_bins())).sum::<f64>() / ch as f64;
        let bytes = self.frame_bytes(transient, 1.0 - flatness);
        let total = bytes as i64 * 64;

        // allocation parameters from a trial allocation at the expected
        // shape budget
        let acfg = AllocConfig::new(n, ch);
        let overhead = 8 * (24 + (5 * NUM_BANDS * ch) as i64 / 2);
        let est = total - overhead;
        let mut params = AllocParams::default();
        let trial = compute_allocation(&params, &acfg, est);
        if ch == 2 {
            params.dual = channel_correlation(&norm, &layout, trial.coded_bands) < 0.3;
            params.intensity = choose_intensity(&trial, &acfg);
        }
        let trial = compute_allocation(&params, &acfg, est);
        params.boosts = choose_boosts(&energy, long_energy.as_deref(), &layout, ch, &trial);
        let trial = compute_allocation(&params, &acfg, est);
        let top = trial.coded_bands;
        if top > 0 && top > self.prev_coded {
            let t = acfg.threshold(top - 1, params.intensity);
            if trial.grant[top - 1] * 4 < t * 5 {
                params.skip = 1;
            }
        }

        let anti_collapse = match self.cfg.collapse {
            CollapsePolicy::Auto => transient && !self.prev_transient,
            CollapsePolicy::ForceOn => transient,
            CollapsePolicy::ForceOff => false,
        };
        let wants = Wants {
            transient,
            anti_collapse,
            pitch,
            intra: self.shared.frame == 0 || !self.cfg.interframe,
            energy: &energy,
            norm: &norm,
            tf: choose_tf(&norm, &layout, tf_change(&self.fcfg, blocks)),
            spread: choose_spread(self.prev_flatness, transient),
            alloc: params,
        };

        let mut enc = RangeEncoder::new(bytes);
        let decoded = code_frame(&mut enc, &mut self.shared, Some(&wants), total);
        debug_assert_eq!(decoded.info.pitch, pitch);
        let packet = enc.finish()?;

        self.prev_pitch = decoded.info.pitch;
        self.prev_flatness = flatness;
        self.prev_transient = transient;
        self.prev_coded = decoded.info.coded_bands;
        self.shadow = decoded.spectra;
        self.energy = energy;
        self.info = Some(decoded.info);
        Ok(packet)
    }

    /// Encodes a whole interleaved signal, zero-padding the last frame.
    pub fn encode_all(&mut self, pcm: &[f64]) -> Result<Vec<Vec<u8>>> {
        let step = self.frame_size() * self.cfg.channels;
        let mut out = Vec::with_capacity(pcm.len().div_ceil(step));
        for chunk in pcm.chunks(step) {
            if chunk.len() == step {
                out.push(self.encode_frame(chunk)?);
            } else {
                let mut padded = chunk.to_vec();
                padded.resize(step, 0.0);
                out.push(self.encode_frame(&padded)?);
            }
        }
        Ok(out)
    }
}
