//! Per-mixture rendering: spatialization, level calibration and summation.

use serde::{Deserialize, Serialize};

use super::{LengthCondition, LoudnessMeasure, MixtureRecipe, NoiseReference, PEAK_LIMIT};
use crate::audio::{convolve_slices, resample, AudioBuffer};
use crate::error::{Error, Result};
use crate::room::{room_rirs, RoomRirs, RoomSpec};

const VAD_FRAME_SECS: f64 = 0.02;
const VAD_RANGE_DB: f64 = 40.0;

/// Loudness of a mono signal under `measure`; zero for silence.
pub fn loudness(x: &[f64], measure: LoudnessMeasure, sample_rate: u32) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    match measure {
        LoudnessMeasure::Rms => (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt(),
        LoudnessMeasure::ActiveSpeechRms => {
            let frame = ((VAD_FRAME_SECS * sample_rate as f64) as usize).max(1);
            let energies: Vec<f64> = x
                .chunks(frame)
                .map(|c| c.iter().map(|v| v * v).sum::<f64>() / c.len() as f64)
                .collect();
            let peak = energies.iter().cloned().fold(0.0, f64::max);
            if peak == 0.0 {
                return 0.0;
            }
            let floor = peak * 10f64.powf(-VAD_RANGE_DB / 10.0);
            let (mut sum, mut count) = (0.0, 0usize);
            for (c, &e) in x.chunks(frame).zip(&energies) {
                if e >= floor {
                    sum += c.iter().map(|v| v * v).sum::<f64>();
                    count += c.len();
                }
            }
            (sum / count as f64).sqrt()
        }
    }
}

/// Gain `g` such that `20 log10(L(reference) / L(g * scaled)) = snr_db`.
pub fn gain_for_snr(
    reference: &[f64],
    scaled: &[f64],
    snr_db: f64,
    measure: LoudnessMeasure,
    sample_rate: u32,
) -> Result<f64> {
    let lr = loudness(reference, measure, sample_rate);
    let ls = loudness(scaled, measure, sample_rate);
    if !(lr > 0.0) {
        return Err(Error::ZeroEnergy("snr reference signal"));
    }
    if !(ls > 0.0) {
        return Err(Error::ZeroEnergy("signal to be scaled"));
    }
    Ok(lr / (ls * 10f64.powf(snr_db / 20.0)))
}

/// [`gain_for_snr`] on the left channels of two buffers.
pub fn compute_gain_for_snr(
    reference: &AudioBuffer,
    scaled: &AudioBuffer,
    snr_db: f64,
    measure: LoudnessMeasure,
) -> Result<f64> {
    if reference.sample_rate() != scaled.sample_rate() {
        return Err(Error::SampleRateMismatch {
            left: reference.sample_rate(),
            right: scaled.sample_rate(),
        });
    }
    gain_for_snr(
        reference.channel(0),
        scaled.channel(0),
        snr_db,
        measure,
        reference.sample_rate(),
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct Spatialized {
    pub anechoic: AudioBuffer,
    pub reverberant: AudioBuffer,
}

/// Renders one dry source at both microphones. Both images are divided by
/// the direct-path gain of their own channel, so the anechoic image is a
/// unit-gain fractional delay of the source and reappears unchanged inside
/// the reverberant one. Outputs keep the source length.
pub fn spatialize_with(source: &AudioBuffer, rirs: &RoomRirs, source_index: usize) -> Result<Spatialized> {
    if source.channels() != 1 {
        return Err(Error::ChannelCount {
            expected: 1,
            got: source.channels(),
        });
    }
    if source_index > 1 {
        return Err(Error::InvalidRoom(format!("source index {source_index}")));
    }
    let rate = rirs.direct[source_index][0].sample_rate;
    if source.sample_rate() != rate {
        return Err(Error::SampleRateMismatch {
            left: source.sample_rate(),
            right: rate,
        });
    }
    let dry = source.channel(0);
    let render = |taps: &[f64], gain: f64| -> Vec<f64> {
        let mut y = convolve_slices(dry, taps);
        y.truncate(dry.len());
        y.iter_mut().for_each(|v| *v /= gain);
        y
    };
    let mut anechoic = Vec::with_capacity(2);
    let mut reverberant = Vec::with_capacity(2);
    for mic in 0..2 {
        let direct = &rirs.direct[source_index][mic];
        anechoic.push(render(&direct.taps, direct.direct_gain));
        reverberant.push(render(&rirs.reverberant[source_index][mic].taps, direct.direct_gain));
    }
    Ok(Spatialized {
        anechoic: AudioBuffer::from_channels(anechoic, rate)?,
        reverberant: AudioBuffer::from_channels(reverberant, rate)?,
    })
}

pub fn spatialize(source: &AudioBuffer, spec: &RoomSpec, source_index: usize, sample_rate: u32) -> Result<Spatialized> {
    if source.sample_rate() != sample_rate {
        return Err(Error::SampleRateMismatch {
            left: source.sample_rate(),
            right: sample_rate,
        });
    }
    spatialize_with(source, &room_rirs(spec, sample_rate)?, source_index)
}

/// Linear gains applied on top of the spatialized sources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixGains {
    /// Applied to both images of s2.
    pub s2: f64,
    /// Applied to the noise.
    pub noise: f64,
    /// Common factor applied to every component to keep peaks at or below
    /// the limit; 1 when no reduction was needed.
    pub global: f64,
}

/// All components and mixtures of one mixture at one sample rate. Every
/// buffer is two-channel and holds float32-representable values; each
/// mixture is the float32 sum of its components, in the order s1 + s2 + noise.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureSet {
    pub sample_rate: u32,
    /// Dry lengths of s1 and s2 at this rate.
    pub source_frames: [usize; 2],
    pub s1_anechoic: AudioBuffer,
    pub s2_anechoic: AudioBuffer,
    pub s1_reverb: AudioBuffer,
    pub s2_reverb: AudioBuffer,
    pub noise: AudioBuffer,
    pub mix_clean: AudioBuffer,
    pub mix_noisy: AudioBuffer,
    pub mix_reverb: AudioBuffer,
    pub mix_both: AudioBuffer,
    pub gains: MixGains,
}

impl MixtureSet {
    pub fn frames(&self) -> usize {
        self.mix_clean.frames()
    }

    /// Length of the region both sources cover, where levels are measured.
    pub fn overlap_frames(&self) -> usize {
        self.source_frames[0].min(self.source_frames[1])
    }

    /// `(folder name, buffer)` for every component and mixture.
    pub fn components(&self) -> [(&'static str, &AudioBuffer); 9] {
        [
            ("mix_clean", &self.mix_clean),
            ("mix_noisy", &self.mix_noisy),
            ("mix_reverb", &self.mix_reverb),
            ("mix_both", &self.mix_both),
            ("s1_anechoic", &self.s1_anechoic),
            ("s2_anechoic", &self.s2_anechoic),
            ("s1_reverb", &self.s1_reverb),
            ("s2_reverb", &self.s2_reverb),
            ("noise", &self.noise),
        ]
    }
}

/// Float64 components before quantization.
struct Components {
    rate: u32,
    source_frames: [usize; 2],
    s1a: AudioBuffer,
    s2a: AudioBuffer,
    s1r: AudioBuffer,
    s2r: AudioBuffer,
    noise: AudioBuffer,
    s2_gain: f64,
    noise_gain: f64,
}

impl Components {
    fn overlap(&self) -> usize {
        self.source_frames[0].min(self.source_frames[1])
    }

    /// Scales s2 to the speaker ratio, then the noise to the louder speaker.
    fn calibrate(&mut self, recipe: &MixtureRecipe, measure: LoudnessMeasure, reference: NoiseReference) -> Result<()> {
        let m = self.overlap();
        let g2 = gain_for_snr(
            &self.s1a.channel(0)[..m],
            &self.s2a.channel(0)[..m],
            recipe.speaker_gain_snr_db,
            measure,
            self.rate,
        )?;
        self.s2a = self.s2a.scaled(g2);
        self.s2r = self.s2r.scaled(g2);
        self.s2_gain *= g2;

        let (r1, r2) = match reference {
            NoiseReference::Anechoic => (&self.s1a, &self.s2a),
            NoiseReference::Reverberant => (&self.s1r, &self.s2r),
        };
        let l1 = loudness(&r1.channel(0)[..m], measure, self.rate);
        let l2 = loudness(&r2.channel(0)[..m], measure, self.rate);
        let louder = if l1 >= l2 { r1 } else { r2 };
        // Silent noise stays silent; there is no level to set.
        if loudness(&self.noise.channel(0)[..m], measure, self.rate) == 0.0 {
            return Ok(());
        }
        let gn = gain_for_snr(
            &louder.channel(0)[..m],
            &self.noise.channel(0)[..m],
            recipe.noise_snr_db,
            measure,
            self.rate,
        )?;
        self.noise = self.noise.scaled(gn);
        self.noise_gain *= gn;
        Ok(())
    }

    /// Same scene at `rate`. Each source is resampled at its own length so
    /// padding stays silent.
    fn resampled(&self, rate: u32) -> Result<Components> {
        let ratio = rate as f64 / self.rate as f64;
        let scale = |n: usize| (n as f64 * ratio).round() as usize;
        let total = scale(self.s1a.frames());
        let convert = |b: &AudioBuffer, own: usize| -> Result<AudioBuffer> {
            Ok(resample(&b.with_length(own), rate)?.with_length(total))
        };
        let [l1, l2] = self.source_frames;
        Ok(Components {
            rate,
            source_frames: [scale(l1), scale(l2)],
            s1a: convert(&self.s1a, l1)?,
            s2a: convert(&self.s2a, l2)?,
            s1r: convert(&self.s1r, l1)?,
            s2r: convert(&self.s2r, l2)?,
            noise: convert(&self.noise, self.noise.frames())?,
            s2_gain: self.s2_gain,
            noise_gain: self.noise_gain,
        })
    }

    fn peak(&self) -> f64 {
        let mut peak = [&self.s1a, &self.s2a, &self.s1r, &self.s2r, &self.noise]
            .iter()
            .map(|b| b.peak())
            .fold(0.0, f64::max);
        let sums = [
            (&self.s1a, &self.s2a, false),
            (&self.s1a, &self.s2a, true),
            (&self.s1r, &self.s2r, false),
            (&self.s1r, &self.s2r, true),
        ];
        for (a, b, noisy) in sums {
            for ch in 0..a.channels() {
                let n = self.noise.channel(ch);
                for (i, (x, y)) in a.channel(ch).iter().zip(b.channel(ch)).enumerate() {
                    let v = x + y + if noisy { n[i] } else { 0.0 };
                    peak = peak.max(v.abs());
                }
            }
        }
        peak
    }

    fn finish(self, global: f64) -> MixtureSet {
        let q = |b: &AudioBuffer| quantize(&b.scaled(global));
        let (s1a, s2a, s1r, s2r, noise) = (q(&self.s1a), q(&self.s2a), q(&self.s1r), q(&self.s2r), q(&self.noise));
        let mix_clean = sum_f32(&s1a, &s2a);
        let mix_noisy = sum_f32(&mix_clean, &noise);
        let mix_reverb = sum_f32(&s1r, &s2r);
        let mix_both = sum_f32(&mix_reverb, &noise);
        MixtureSet {
            sample_rate: self.rate,
            source_frames: self.source_frames,
            s1_anechoic: s1a,
            s2_anechoic: s2a,
            s1_reverb: s1r,
            s2_reverb: s2r,
            noise,
            mix_clean,
            mix_noisy,
            mix_reverb,
            mix_both,
            gains: MixGains {
                s2: self.s2_gain,
                noise: self.noise_gain,
                global,
            },
        }
    }
}

fn quantize(b: &AudioBuffer) -> AudioBuffer {
    let samples = b.samples().mapv(|v| v as f32 as f64);
    AudioBuffer::new(samples, b.sample_rate()).expect("finite samples stay finite")
}

fn sum_f32(a: &AudioBuffer, b: &AudioBuffer) -> AudioBuffer {
    let samples = ndarray::Zip::from(a.samples())
        .and(b.samples())
        .map_collect(|&x, &y| (x as f32 + y as f32) as f64);
    AudioBuffer::new(samples, a.sample_rate()).expect("finite sums")
}

/// Renders a recipe at the rate of its inputs and at every rate in
/// `rates`, sharing one peak-limiting factor across all of them.
///
/// Levels are set at the input rate on the region both sources cover, then
/// re-set at each resampled rate so the recipe SNRs hold exactly there too.
pub fn build_mixture_variants(
    recipe: &MixtureRecipe,
    s1: &AudioBuffer,
    s2: &AudioBuffer,
    noise: &AudioBuffer,
    measure: LoudnessMeasure,
    reference: NoiseReference,
    rates: &[u32],
) -> Result<Vec<MixtureSet>> {
    let fs = s1.sample_rate();
    for b in [s2, noise] {
        if b.sample_rate() != fs {
            return Err(Error::SampleRateMismatch {
                left: fs,
                right: b.sample_rate(),
            });
        }
    }
    let (l1, l2) = (s1.frames(), s2.frames());
    let len = l1.max(l2);
    if noise.frames() < len {
        return Err(Error::LengthMismatch {
            left: noise.frames(),
            right: len,
        });
    }
    if l1.min(l2) == 0 {
        return Err(Error::ZeroEnergy("empty source"));
    }
    let rirs = room_rirs(&recipe.room, fs)?;
    let a = spatialize_with(s1, &rirs, 0)?;
    let b = spatialize_with(s2, &rirs, 1)?;
    let mut base = Components {
        rate: fs,
        source_frames: [l1, l2],
        s1a: a.anechoic.with_length(len),
        s2a: b.anechoic.with_length(len),
        s1r: a.reverberant.with_length(len),
        s2r: b.reverberant.with_length(len),
        noise: noise.with_length(len).to_channels(2),
        s2_gain: 1.0,
        noise_gain: 1.0,
    };
    base.calibrate(recipe, measure, reference)?;

    let mut variants = Vec::with_capacity(rates.len());
    for &rate in rates {
        if rate == fs {
            variants.push(None);
        } else {
            let mut c = base.resampled(rate)?;
            c.s2_gain = 1.0;
            c.noise_gain = 1.0;
            c.calibrate(recipe, measure, reference)?;
            c.s2_gain *= base.s2_gain;
            c.noise_gain *= base.noise_gain;
            variants.push(Some(c));
        }
    }
    let peak = variants
        .iter()
        .map(|v| v.as_ref().unwrap_or(&base).peak())
        .fold(base.peak(), f64::max);
    let global = if peak > PEAK_LIMIT { PEAK_LIMIT / peak } else { 1.0 };
    let mut out = Vec::with_capacity(rates.len());
    for v in variants {
        out.push(match v {
            Some(c) => c.finish(global),
            None => Components {
                rate: base.rate,
                source_frames: base.source_frames,
                s1a: base.s1a.clone(),
                s2a: base.s2a.clone(),
                s1r: base.s1r.clone(),
                s2r: base.s2r.clone(),
                noise: base.noise.clone(),
                s2_gain: base.s2_gain,
                noise_gain: base.noise_gain,
            }
            .finish(global),
        });
    }
    Ok(out)
}

/// Renders a recipe at the rate of its inputs (max condition).
pub fn build_mixture(
    recipe: &MixtureRecipe,
    s1: &AudioBuffer,
    s2: &AudioBuffer,
    noise: &AudioBuffer,
    measure: LoudnessMeasure,
    reference: NoiseReference,
) -> Result<MixtureSet> {
    let mut v = build_mixture_variants(recipe, s1, s2, noise, measure, reference, &[s1.sample_rate()])?;
    Ok(v.remove(0))
}

/// `Min` truncates everything to the shorter source, `Max` to the longer
/// one (the shorter source is already zero beyond its own length).
pub fn apply_length_condition(set: &MixtureSet, condition: LengthCondition) -> MixtureSet {
    let frames = match condition {
        LengthCondition::Min => set.source_frames[0].min(set.source_frames[1]),
        LengthCondition::Max => set.source_frames[0].max(set.source_frames[1]),
    };
    let cut = |b: &AudioBuffer| b.with_length(frames);
    MixtureSet {
        sample_rate: set.sample_rate,
        source_frames: set.source_frames,
        s1_anechoic: cut(&set.s1_anechoic),
        s2_anechoic: cut(&set.s2_anechoic),
        s1_reverb: cut(&set.s1_reverb),
        s2_reverb: cut(&set.s2_reverb),
        noise: cut(&set.noise),
        mix_clean: cut(&set.mix_clean),
        mix_noisy: cut(&set.mix_noisy),
        mix_reverb: cut(&set.mix_reverb),
        mix_both: cut(&set.mix_both),
        gains: set.gains,
    }
}
