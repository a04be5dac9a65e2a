//! Rational-ratio polyphase resampler with a Kaiser-windowed sinc kernel.
//!
//! The kernel spans 64 taps at the lower of the two rates (so it widens when
//! decimating) and the Kaiser beta targets 80 dB of stopband attenuation.
//! The cutoff is pulled below the lower Nyquist frequency by half the
//! transition width so that the stopband starts at Nyquist.

use std::f64::consts::PI;

use ndarray::Array2;

use super::AudioBuffer;
use crate::error::{Error, Result};

const TAPS_PER_PHASE: usize = 64;
const STOPBAND_DB: f64 = 80.0;
/// Above this many phases the taps are computed per output sample.
const MAX_TABLE_PHASES: usize = 4096;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Zeroth-order modified Bessel function of the first kind.
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64).powi(2);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn kaiser_beta(attenuation_db: f64) -> f64 {
    if attenuation_db > 50.0 {
        0.1102 * (attenuation_db - 8.7)
    } else if attenuation_db >= 21.0 {
        0.5842 * (attenuation_db - 21.0).powf(0.4) + 0.07886 * (attenuation_db - 21.0)
    } else {
        0.0
    }
}

struct Polyphase {
    up: u64,
    down: u64,
    /// Kernel half-width in input samples.
    half: usize,
    /// Cutoff in cycles per input sample.
    cutoff: f64,
    beta: f64,
    i0_beta: f64,
    table: Option<Vec<Vec<f64>>>,
}

impl Polyphase {
    fn new(source: u32, target: u32) -> Self {
        let g = gcd(source as u64, target as u64);
        let up = target as u64 / g;
        let down = source as u64 / g;
        let ratio = (down as f64 / up as f64).max(1.0);
        let half = ((TAPS_PER_PHASE / 2) as f64 * ratio).ceil() as usize;

        let beta = kaiser_beta(STOPBAND_DB);
        // Kaiser order estimate: transition width in rad/sample at the lower rate.
        let transition = (STOPBAND_DB - 8.0) / (2.285 * TAPS_PER_PHASE as f64);
        let low_rate = source.min(target) as f64;
        let cutoff_hz = low_rate / 2.0 - transition / (2.0 * PI) * low_rate / 2.0;
        let cutoff = cutoff_hz / source as f64;

        let mut p = Self {
            up,
            down,
            half,
            cutoff,
            beta,
            i0_beta: bessel_i0(beta),
            table: None,
        };
        if (up as usize) <= MAX_TABLE_PHASES {
            let table = (0..up).map(|phase| p.phase_taps(phase as f64 / up as f64)).collect();
            p.table = Some(table);
        }
        p
    }

    /// Taps for input samples `i + 1 - half ..= i + half` when the output
    /// lands at input time `i + frac`. Normalised to unit DC gain.
    fn phase_taps(&self, frac: f64) -> Vec<f64> {
        let n = 2 * self.half;
        let half = self.half as f64;
        let mut taps: Vec<f64> = (0..n)
            .map(|j| {
                let tau = frac + half - 1.0 - j as f64;
                let r = tau / half;
                if r.abs() >= 1.0 {
                    return 0.0;
                }
                let w = bessel_i0(self.beta * (1.0 - r * r).sqrt()) / self.i0_beta;
                let arg = 2.0 * self.cutoff * tau;
                let sinc = if arg == 0.0 { 1.0 } else { (PI * arg).sin() / (PI * arg) };
                2.0 * self.cutoff * sinc * w
            })
            .collect();
        let sum: f64 = taps.iter().sum();
        if sum != 0.0 {
            taps.iter_mut().for_each(|t| *t /= sum);
        }
        taps
    }

    fn output_len(&self, frames: usize) -> usize {
        ((frames as u128 * self.up as u128 + self.down as u128 / 2) / self.down as u128) as usize
    }

    fn process(&self, input: &[f64]) -> Vec<f64> {
        let out_len = self.output_len(input.len());
        let mut out = Vec::with_capacity(out_len);
        for n in 0..out_len as u64 {
            let scratch;
            let pos = n * self.down;
            let i = (pos / self.up) as isize;
            let phase = pos % self.up;
            let taps: &[f64] = match &self.table {
                Some(t) => &t[phase as usize],
                None => {
                    scratch = self.phase_taps(phase as f64 / self.up as f64);
                    &scratch
                }
            };
            let start = i + 1 - self.half as isize;
            let mut acc = 0.0;
            for (j, &h) in taps.iter().enumerate() {
                let idx = start + j as isize;
                if idx >= 0 && (idx as usize) < input.len() {
                    acc += h * input[idx as usize];
                }
            }
            out.push(acc);
        }
        out
    }
}

/// Resamples every channel to `target_rate`. Output length is
/// `round(frames * target / source)`.
pub fn resample(buffer: &AudioBuffer, target_rate: u32) -> Result<AudioBuffer> {
    if target_rate == 0 {
        return Err(Error::InvalidSampleRate(target_rate));
    }
    if target_rate == buffer.sample_rate() {
        return Ok(buffer.clone());
    }
    let poly = Polyphase::new(buffer.sample_rate(), target_rate);
    let out_len = poly.output_len(buffer.frames());
    let mut out = Array2::zeros((buffer.channels(), out_len));
    for ch in 0..buffer.channels() {
        let y = poly.process(buffer.channel(ch));
        out.row_mut(ch).assign(&ndarray::ArrayView1::from(&y[..]));
    }
    AudioBuffer::new(out, target_rate)
}
