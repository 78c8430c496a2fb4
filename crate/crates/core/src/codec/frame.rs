//! The frame syntax, written once for both directions.
//!
//! [`code_frame`] runs against a [`Coder`]: backed by the encoder it writes
//! the decisions in [`Wants`] and doubles as the encoder's shadow decoder,
//! backed by the decoder it reads them. Either way it returns the same
//! reconstruction and leaves [`Shared`] in the same state.

use super::FrameInfo;
use crate::alloc::{code_alloc_params, compute_allocation, AllocConfig, AllocParams};
use crate::bands::{
    coding_blocks, denormalize_band, from_coding_order, prevent_collapse, spectral_fold, tf_transform,
    to_coding_order, BandLayout, Lcg, Spread, NUM_BANDS,
};
use crate::energy::{code_coarse, code_fine, code_final, ENERGY_MIN};
use crate::entropy::Coder;
use crate::prefilter::{code_pitch_params, PitchParams};
use crate::pvq::{code_band, code_band_stereo, BandCoding, StereoMode};
use crate::transform::FrameConfig;

/// Decoder-visible state, kept identically by the decoder and the
/// encoder's shadow.
#[derive(Debug, Clone)]
pub(crate) struct Shared {
    pub cfg: FrameConfig,
    pub seed: u32,
    pub frame: u64,
    /// Quantized energies of the previous frame (`channel * NUM_BANDS + band`).
    pub energy: Vec<f64>,
    /// Quantized energies of the last two frames, newest first.
    pub history: [Option<Vec<f64>>; 2],
}

impl Shared {
    pub fn new(cfg: FrameConfig, seed: u32) -> Self {
        Self {
            cfg,
            seed,
            frame: 0,
            energy: vec![0.0; cfg.channels * NUM_BANDS],
            history: [None, None],
        }
    }

    pub fn rng(&self) -> Lcg {
        Lcg::for_frame(self.seed, self.frame)
    }

    /// Advances to the next frame after `energy` was reconstructed.
    pub fn push_history(&mut self, energy: Vec<f64>) {
        self.history[1] = self.history[0].take();
        self.history[0] = Some(energy);
        self.frame += 1;
    }
}

/// Encoder decisions and analysis for one frame.
pub(crate) struct Wants<'a> {
    pub transient: bool,
    pub anti_collapse: bool,
    pub pitch: PitchParams,
    pub intra: bool,
    /// Unquantized band energies, log2.
    pub energy: &'a [f64],
    /// Unit-norm bands per channel, interleaved layout.
    pub norm: &'a [Vec<f64>],
    pub tf: Vec<bool>,
    pub spread: Spread,
    pub alloc: AllocParams,
}

pub(crate) struct Decoded {
    /// Denormalized spectrum per channel.
    pub spectra: Vec<Vec<f64>>,
    /// Normalized spectrum per channel.
    pub norm: Vec<Vec<f64>>,
    pub blocks: usize,
    /// Quantized band energies.
    pub energy: Vec<f64>,
    pub info: FrameInfo,
}

/// TF change applied to a flagged band.
pub(crate) fn tf_change(cfg: &FrameConfig, blocks: usize) -> u32 {
    if blocks > 1 {
        blocks.trailing_zeros()
    } else {
        cfg.duration.lm()
    }
}

/// Codes one frame of `total` eighth-bits.
pub(crate) fn code_frame<C: Coder>(coder: &mut C, st: &mut Shared, want: Option<&Wants<'_>>, total: i64) -> Decoded {
    let cfg = st.cfg;
    let n = cfg.frame_size();
    let ch = cfg.channels;
    let layout = BandLayout::new(n);
    let fits = |c: &C, cost: i64| c.tell_frac() as i64 + cost <= total;
    let enc = want.filter(|_| C::ENCODER);

    let transient = if cfg.supports_transients() && fits(coder, 24) {
        coder.code_bit_logp(enc.is_some_and(|w| w.transient), 3)
    } else {
        false
    };
    let anti_collapse = transient && fits(coder, 8) && coder.code_bit_logp(enc.is_some_and(|w| w.anti_collapse), 1);
    let pitch = code_pitch_params(coder, &enc.map_or(PitchParams::off(), |w| w.pitch), total);
    let intra = !fits(coder, 24) || coder.code_bit_logp(enc.is_none_or(|w| w.intra), 3);

    let mut energy = st.energy.clone();
    if intra {
        energy.iter_mut().for_each(|e| *e = 0.0);
    }
    code_coarse(coder, enc.map(|w| w.energy), &mut energy, !intra, cfg.duration, ch, total);

    let blocks = cfg.blocks(transient);
    let tfk = tf_change(&cfg, blocks);
    let mut tf = vec![false; NUM_BANDS];
    if tfk > 0 && fits(coder, 32) && coder.code_bit_logp(enc.is_some_and(|w| w.tf.iter().any(|&t| t)), 4) {
        for (b, flag) in tf.iter_mut().enumerate() {
            if !fits(coder, 8) {
                break;
            }
            *flag = coder.code_bit_logp(enc.is_some_and(|w| w.tf[b]), 1);
        }
    }

    let spread = if fits(coder, 16) {
        Spread::from_index(coder.code_uint(enc.map_or(0, |w| w.spread.index()), 4))
    } else {
        Spread::Off
    };

    let acfg = AllocConfig::new(n, ch);
    let params = code_alloc_params(coder, enc.map_or(&AllocParams::default(), |w| &w.alloc), &acfg, total);
    let budget = total - coder.tell_frac() as i64 - 8;
    let alloc = compute_allocation(&params, &acfg, budget);

    code_fine(coder, enc.map(|w| w.energy), &mut energy, &alloc.fine, ch);

    // shapes
    let mut rng = st.rng();
    let mut norm = vec![vec![0.0; n]; ch];
    let mut ctx = BandCoding::new(spread, &mut rng);
    let mut balance = alloc.balance;
    let zeros = vec![0.0; layout.coded_bins()];
    for b in 0..NUM_BANDS {
        let range = layout.range(b);
        let w = range.len();
        let k = if tf[b] { tfk } else { 0 };
        let cb = coding_blocks(blocks, k);
        let target = |c: usize| -> Vec<f64> {
            match enc {
                Some(wt) => {
                    let mut v = wt.norm[c][range.clone()].to_vec();
                    tf_transform(&mut v, k);
                    to_coding_order(&v, blocks, k)
                }
                None => zeros[..w].to_vec(),
            }
        };
        let mut out: Vec<Option<Vec<f64>>> = vec![None; ch];
        if b < alloc.coded_bands {
            let left = (alloc.coded_bands - b).min(3) as i64;
            let bb = (alloc.shape[b] + balance / left).clamp(0, (total - coder.tell_frac() as i64).max(0));
            let start = coder.tell_frac() as i64;
            if ch == 1 {
                out[0] = code_band(coder, &target(0), cb, bb, &mut ctx);
            } else {
                let mode = if b >= params.intensity {
                    StereoMode::Intensity
                } else if params.dual {
                    StereoMode::Dual
                } else {
                    StereoMode::MidSide
                };
                let amps = enc.map_or((1.0, 1.0), |wt| (wt.energy[b].exp2(), wt.energy[NUM_BANDS + b].exp2()));
                let (l, r) = code_band_stereo(coder, &target(0), &target(1), amps, mode, cb, bb, &mut ctx);
                out[0] = l;
                out[1] = r;
            }
            balance += alloc.shape[b] - (coder.tell_frac() as i64 - start);
        }
        for c in 0..ch {
            let v = match out[c].take() {
                Some(y) => {
                    let mut v = from_coding_order(&y, blocks, k);
                    tf_transform(&mut v, k);
                    v
                }
                None => spectral_fold(&norm[c], range.start, w, ctx.rng),
            };
            norm[c][range.clone()].copy_from_slice(&v);
        }
    }
    let angles = std::mem::take(&mut ctx.angles);
    drop(ctx);

    let leftover = total - coder.tell_frac() as i64;
    code_final(coder, enc.map(|w| w.energy), &mut energy, &alloc.fine, &alloc.rounded_down, ch, leftover);

    if anti_collapse && blocks > 1 {
        for c in 0..ch {
            for b in 0..NUM_BANDS {
                let i = c * NUM_BANDS + b;
                let e = energy[i];
                if e <= ENERGY_MIN {
                    continue;
                }
                let hist = st.history.iter().flatten().map(|h| h[i]).fold(e, f64::min);
                prevent_collapse(&mut norm[c][layout.range(b)], blocks, e, hist, &mut rng);
            }
        }
    }

    let mut spectra = norm.clone();
    for c in 0..ch {
        for b in 0..NUM_BANDS {
            denormalize_band(&mut spectra[c][layout.range(b)], energy[c * NUM_BANDS + b]);
        }
    }

    st.energy = energy.clone();
    st.push_history(energy.clone());

    let info = FrameInfo {
        bytes: (total / 64) as usize,
        transient,
        anti_collapse,
        pitch,
        intra,
        tf,
        spread,
        alloc: params,
        coded_bands: alloc.coded_bands,
        fine: alloc.fine.clone(),
        angles,
        used_frac: coder.tell_frac(),
    };
    Decoded { spectra, norm, blocks, energy, info }
}
