//! Stand-ins for licensed corpora: harmonic speech-like utterances and
//! modulated pink noise. Both are pure functions of their seeds.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::splitmix64;
use crate::audio::AudioBuffer;

const MAX_HARMONIC_HZ: f64 = 4000.0;
const SPEECH_RMS: f64 = 0.05;
const NOISE_RMS: f64 = 0.05;

struct Voice {
    f0: f64,
    formant_scale: f64,
    level: f64,
}

impl Voice {
    fn new(speaker: u32) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(0x5EED_0000 ^ speaker as u64));
        Voice {
            f0: rng.random_range(90.0..220.0),
            formant_scale: rng.random_range(0.85..1.15),
            level: rng.random_range(0.7..1.4),
        }
    }
}

/// Raised-cosine fade in and out over `ramp` samples.
fn envelope(i: usize, len: usize, ramp: usize) -> f64 {
    let ramp = ramp.min(len / 2).max(1);
    let edge = i.min(len - 1 - i);
    if edge >= ramp {
        1.0
    } else {
        0.5 - 0.5 * (PI * edge as f64 / ramp as f64).cos()
    }
}

fn voiced_segment(out: &mut [f64], voice: &Voice, rng: &mut ChaCha8Rng, fs: f64) {
    let len = out.len();
    let f0 = voice.f0 * rng.random_range(0.9..1.1);
    let glide = rng.random_range(-0.12..0.12);
    let vibrato = rng.random_range(2.0..6.0);
    let formants = [
        rng.random_range(300.0..800.0) * voice.formant_scale,
        rng.random_range(900.0..2200.0) * voice.formant_scale,
        rng.random_range(2300.0..3200.0) * voice.formant_scale,
    ];
    let widths = [rng.random_range(80.0..160.0), rng.random_range(100.0..200.0), 250.0];
    let count = (MAX_HARMONIC_HZ / (f0 * 1.2)).floor().max(1.0) as usize;
    let amps: Vec<f64> = (1..=count)
        .map(|k| {
            let f = k as f64 * f0;
            let peaks: f64 = formants
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(n, (fc, bw))| 0.5f64.powi(n as i32) * (-((f - fc) / bw).powi(2)).exp())
                .sum();
            peaks + 0.15 / k as f64
        })
        .collect();
    let ramp = (0.02 * fs) as usize;
    let mut phase = rng.random_range(0.0..2.0 * PI);
    for (i, o) in out.iter_mut().enumerate() {
        let t = i as f64 / len as f64;
        let inst = f0 * (1.0 + glide * (t - 0.5)) * (1.0 + 0.01 * (2.0 * PI * vibrato * i as f64 / fs).sin());
        phase = (phase + 2.0 * PI * inst / fs) % (2.0 * PI);
        let mut v = 0.0;
        for (k, a) in amps.iter().enumerate() {
            v += a * ((k + 1) as f64 * phase).sin();
        }
        *o += v * envelope(i, len, ramp);
    }
}

fn fricative_segment(out: &mut [f64], rng: &mut ChaCha8Rng, fs: f64) {
    let len = out.len();
    let ramp = (0.01 * fs) as usize;
    let gain = rng.random_range(0.1..0.3);
    let (mut x1, mut x2) = (0.0, 0.0);
    for (i, o) in out.iter_mut().enumerate() {
        let x: f64 = StandardNormal.sample(rng);
        // Lag-2 difference: peaks at a quarter of the rate, nothing at Nyquist.
        let bp = x - x2;
        x2 = x1;
        x1 = x;
        *o += gain * bp * envelope(i, len, ramp);
    }
}

/// Speech-like mono signal of `frames` samples for a synthetic talker.
///
/// Voiced syllables are harmonic series on a per-speaker f0 (90 to 220 Hz)
/// shaped by three moving formants; some are preceded by a noisy
/// fricative. At least 100 ms of silence leads and trails.
pub fn synthetic_utterance(speaker: u32, seed: u64, frames: usize, sample_rate: u32) -> Vec<f64> {
    let fs = sample_rate as f64;
    let voice = Voice::new(speaker);
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed));
    let mut out = vec![0.0; frames];
    let lead = (rng.random_range(0.1..0.25) * fs) as usize;
    let trail = (rng.random_range(0.1..0.25) * fs) as usize;
    let end = frames.saturating_sub(trail);
    let mut pos = lead;
    while pos < end {
        if rng.random_bool(0.25) {
            let n = ((rng.random_range(0.04..0.1) * fs) as usize).min(end - pos);
            fricative_segment(&mut out[pos..pos + n], &mut rng, fs);
            pos += n;
        }
        let n = ((rng.random_range(0.12..0.3) * fs) as usize).min(end.saturating_sub(pos));
        if n > 0 {
            voiced_segment(&mut out[pos..pos + n], &voice, &mut rng, fs);
        }
        pos += n;
        let gap = if rng.random_bool(0.15) {
            rng.random_range(0.2..0.4)
        } else {
            rng.random_range(0.03..0.15)
        };
        pos += (gap * fs) as usize;
    }
    let energy: f64 = out.iter().map(|v| v * v).sum();
    if energy > 0.0 {
        let g = SPEECH_RMS * voice.level / (energy / frames as f64).sqrt();
        out.iter_mut().for_each(|v| *v *= g);
    }
    out
}

/// Pink noise via Kellet's filter bank on Gaussian white noise.
struct Pink {
    b: [f64; 7],
}

impl Pink {
    fn new() -> Self {
        Pink { b: [0.0; 7] }
    }

    fn next(&mut self, white: f64) -> f64 {
        let b = &mut self.b;
        b[0] = 0.99886 * b[0] + white * 0.0555179;
        b[1] = 0.99332 * b[1] + white * 0.0750759;
        b[2] = 0.96900 * b[2] + white * 0.1538520;
        b[3] = 0.86650 * b[3] + white * 0.3104856;
        b[4] = 0.55000 * b[4] + white * 0.5329522;
        b[5] = -0.7616 * b[5] - white * 0.0168980;
        let out = b[0] + b[1] + b[2] + b[3] + b[4] + b[5] + b[6] + white * 0.5362;
        b[6] = white * 0.115926;
        out
    }
}

/// Two-channel pink noise with a shared component and slow, independent
/// amplitude modulation per channel. Prefixes agree across lengths.
pub fn synthetic_noise(seed: u64, frames: usize, sample_rate: u32) -> AudioBuffer {
    let fs = sample_rate as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x0015_E000));
    let rate = rng.random_range(0.1..0.5);
    let phases = [rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)];
    let depth = rng.random_range(0.2..0.4);
    let (mut common, mut left, mut right) = (Pink::new(), Pink::new(), Pink::new());
    let mut channels = vec![Vec::with_capacity(frames), Vec::with_capacity(frames)];
    for i in 0..frames {
        let c = common.next(StandardNormal.sample(&mut rng));
        let l = left.next(StandardNormal.sample(&mut rng));
        let r = right.next(StandardNormal.sample(&mut rng));
        let t = i as f64 / fs;
        for (ch, own) in [l, r].into_iter().enumerate() {
            let m = 1.0 + depth * (2.0 * PI * rate * t + phases[ch]).sin();
            // Pink output has roughly unit RMS at this filter gain scale.
            channels[ch].push(NOISE_RMS / 3.0 * m * (0.8 * c + 0.6 * own));
        }
    }
    AudioBuffer::from_channels(channels, sample_rate).expect("finite synthetic noise")
}
