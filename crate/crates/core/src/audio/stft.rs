//! Invertible short-time Fourier transform.
//!
//! Analysis and synthesis use the same window; reconstruction divides by the
//! summed squared window, which is constant wherever the configuration
//! satisfies constant overlap-add. The signal is padded at the front by
//! `frame - hop` samples so every original sample is covered by a full set
//! of frames.

use std::f64::consts::PI;

use ndarray::{Array2, Array3};
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    SqrtHann,
    Rectangular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StftConfig {
    pub window_ms: f64,
    pub hop_ms: f64,
    pub window: WindowKind,
}

impl Default for StftConfig {
    /// 32 ms square-root Hann windows with an 8 ms hop.
    fn default() -> Self {
        Self {
            window_ms: 32.0,
            hop_ms: 8.0,
            window: WindowKind::SqrtHann,
        }
    }
}

impl StftConfig {
    pub fn frame_len(&self, sample_rate: u32) -> usize {
        (self.window_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn hop_len(&self, sample_rate: u32) -> usize {
        (self.hop_ms * sample_rate as f64 / 1000.0).round() as usize
    }

    pub fn window(&self, sample_rate: u32) -> Vec<f64> {
        let n = self.frame_len(sample_rate);
        match self.window {
            // Periodic Hann, square-rooted.
            WindowKind::SqrtHann => (0..n)
                .map(|i| (0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).sqrt())
                .collect(),
            WindowKind::Rectangular => vec![1.0; n],
        }
    }

    /// Checks frame/hop lengths and the overlap-add condition at `sample_rate`.
    pub fn validate(&self, sample_rate: u32) -> Result<()> {
        if !(self.window_ms > 0.0 && self.hop_ms > 0.0) {
            return Err(Error::InvalidStft("window and hop must be positive".into()));
        }
        if self.hop_ms > self.window_ms {
            return Err(Error::InvalidStft(format!(
                "hop {} ms exceeds window {} ms",
                self.hop_ms, self.window_ms
            )));
        }
        let frame = self.frame_len(sample_rate);
        let hop = self.hop_len(sample_rate);
        if frame < 1 || hop < 1 {
            return Err(Error::InvalidStft(format!(
                "frame {frame} / hop {hop} samples at {sample_rate} Hz"
            )));
        }
        let w = self.window(sample_rate);
        let sums: Vec<f64> = (0..hop)
            .map(|n| w.iter().skip(n).step_by(hop).map(|x| x * x).sum())
            .collect();
        let mean = sums.iter().sum::<f64>() / hop as f64;
        if mean <= 0.0 || sums.iter().any(|s| (s - mean).abs() > 1e-9 * mean) {
            return Err(Error::NotCola(format!(
                "{:?} window of {frame} samples at hop {hop}",
                self.window
            )));
        }
        Ok(())
    }
}

/// Complex STFT coefficients `[channels x frames x bins]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub data: Array3<Complex64>,
    pub config: StftConfig,
    pub sample_rate: u32,
    pub original_length: usize,
}

impl Spectrogram {
    pub fn frames(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn bins(&self) -> usize {
        self.data.shape()[2]
    }
}

fn layout(config: &StftConfig, sample_rate: u32, len: usize) -> (usize, usize, usize, usize) {
    let frame = config.frame_len(sample_rate);
    let hop = config.hop_len(sample_rate);
    let pad = frame - hop;
    let frames = (pad + len.max(1) - 1) / hop + 1;
    (frame, hop, pad, frames)
}

pub fn stft(buffer: &AudioBuffer, config: &StftConfig) -> Result<Spectrogram> {
    let rate = buffer.sample_rate();
    config.validate(rate)?;
    let len = buffer.frames();
    let (frame, hop, pad, n_frames) = layout(config, rate, len);
    let bins = frame / 2 + 1;
    let window = config.window(rate);
    let fft = FftPlanner::<f64>::new().plan_fft_forward(frame);

    let mut data = Array3::zeros((buffer.channels(), n_frames, bins));
    let mut scratch = vec![Complex64::new(0.0, 0.0); frame];
    for ch in 0..buffer.channels() {
        let x = buffer.channel(ch);
        for t in 0..n_frames {
            let start = (t * hop) as isize - pad as isize;
            for (k, c) in scratch.iter_mut().enumerate() {
                let idx = start + k as isize;
                let v = if idx >= 0 && (idx as usize) < len {
                    x[idx as usize]
                } else {
                    0.0
                };
                *c = Complex64::new(v * window[k], 0.0);
            }
            fft.process(&mut scratch);
            for b in 0..bins {
                data[[ch, t, b]] = scratch[b];
            }
        }
    }
    Ok(Spectrogram {
        data,
        config: *config,
        sample_rate: rate,
        original_length: len,
    })
}

pub fn istft(spec: &Spectrogram) -> Result<AudioBuffer> {
    let rate = spec.sample_rate;
    spec.config.validate(rate)?;
    let len = spec.original_length;
    let (frame, hop, pad, _) = layout(&spec.config, rate, len);
    let n_frames = spec.frames();
    if spec.bins() != frame / 2 + 1 {
        return Err(Error::InvalidStft(format!(
            "{} bins for a {frame}-sample frame",
            spec.bins()
        )));
    }
    let window = spec.config.window(rate);
    let ifft = FftPlanner::<f64>::new().plan_fft_inverse(frame);
    let total = (n_frames - 1) * hop + frame;

    let mut norm = vec![0.0; total];
    for t in 0..n_frames {
        for (k, w) in window.iter().enumerate() {
            norm[t * hop + k] += w * w;
        }
    }

    let channels = spec.data.shape()[0];
    let mut out = Array2::zeros((channels, len));
    let mut scratch = vec![Complex64::new(0.0, 0.0); frame];
    let mut acc = vec![0.0; total];
    for ch in 0..channels {
        acc.iter_mut().for_each(|v| *v = 0.0);
        for t in 0..n_frames {
            for b in 0..frame {
                scratch[b] = if b <= frame / 2 {
                    spec.data[[ch, t, b]]
                } else {
                    spec.data[[ch, t, frame - b]].conj()
                };
            }
            ifft.process(&mut scratch);
            for (k, c) in scratch.iter().enumerate() {
                acc[t * hop + k] += c.re / frame as f64 * window[k];
            }
        }
        for n in 0..len {
            let i = n + pad;
            out[[ch, n]] = if norm[i] > 0.0 { acc[i] / norm[i] } else { 0.0 };
        }
    }
    AudioBuffer::new(out, rate)
}
