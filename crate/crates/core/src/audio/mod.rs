//! Sample-level signal infrastructure.
//!
//! Every waveform in the crate travels as an [`AudioBuffer`]: a
//! `[channels x frames]` array of `f64` samples plus its sample rate. File
//! encodings (PCM16, float32) only exist at the I/O boundary.

mod convolve;
mod resample;
mod stft;
mod wav;

use ndarray::{s, Array2, ArrayView1, Axis};

use crate::error::{Error, Result};

pub use convolve::{convolve, convolve_direct, convolve_fft, convolve_slices};
pub use resample::resample;
pub use stft::{istft, stft, Spectrogram, StftConfig, WindowKind};
pub use wav::{read_wav, wav_info, write_wav, WavEncoding, WavInfo, WavWriteOptions, WriteReport};

/// Uniformly sampled multi-channel waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Array2<f64>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Array2<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidSampleRate(sample_rate));
        }
        if samples.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidBuffer("non-finite sample".into()));
        }
        // Rows must be contiguous for `channel()`.
        let samples = if samples.is_standard_layout() {
            samples
        } else {
            samples.as_standard_layout().into_owned()
        };
        Ok(Self { samples, sample_rate })
    }

    pub fn from_mono(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        let frames = samples.len();
        let arr = Array2::from_shape_vec((1, frames), samples).map_err(|e| Error::InvalidBuffer(e.to_string()))?;
        Self::new(arr, sample_rate)
    }

    /// Builds a buffer from per-channel vectors, which must all have the same length.
    pub fn from_channels(channels: Vec<Vec<f64>>, sample_rate: u32) -> Result<Self> {
        let frames = channels.first().map_or(0, Vec::len);
        if let Some(bad) = channels.iter().find(|c| c.len() != frames) {
            return Err(Error::LengthMismatch {
                left: frames,
                right: bad.len(),
            });
        }
        let n = channels.len();
        let flat: Vec<f64> = channels.into_iter().flatten().collect();
        let arr = Array2::from_shape_vec((n, frames), flat).map_err(|e| Error::InvalidBuffer(e.to_string()))?;
        Self::new(arr, sample_rate)
    }

    pub fn zeros(channels: usize, frames: usize, sample_rate: u32) -> Self {
        Self {
            samples: Array2::zeros((channels, frames)),
            sample_rate,
        }
    }

    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn frames(&self) -> usize {
        self.samples.ncols()
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn duration_secs(&self) -> f64 {
        self.frames() as f64 / self.sample_rate as f64
    }

    pub fn samples(&self) -> &Array2<f64> {
        &self.samples
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        self.samples.row(index).to_slice().expect("audio rows are contiguous")
    }

    pub fn channel_mut(&mut self, index: usize) -> &mut [f64] {
        self.samples
            .row_mut(index)
            .into_slice()
            .expect("audio rows are contiguous")
    }

    pub fn channel_view(&self, index: usize) -> ArrayView1<'_, f64> {
        self.samples.row(index)
    }

    /// Single-channel buffer holding channel `index`.
    pub fn select_channel(&self, index: usize) -> AudioBuffer {
        let row = self.samples.slice(s![index..index + 1, ..]).to_owned();
        Self {
            samples: row,
            sample_rate: self.sample_rate,
        }
    }

    /// Left (first) channel, the one used for single-channel tasks.
    pub fn left(&self) -> AudioBuffer {
        self.select_channel(0)
    }

    pub fn scaled(&self, gain: f64) -> AudioBuffer {
        Self {
            samples: &self.samples * gain,
            sample_rate: self.sample_rate,
        }
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    /// Truncates or zero-pads every channel to `frames`.
    pub fn with_length(&self, frames: usize) -> AudioBuffer {
        let keep = frames.min(self.frames());
        let mut out = Array2::zeros((self.channels(), frames));
        out.slice_mut(s![.., ..keep])
            .assign(&self.samples.slice(s![.., ..keep]));
        Self {
            samples: out,
            sample_rate: self.sample_rate,
        }
    }

    /// Repeats a mono buffer into `channels` identical channels; multi-channel
    /// buffers are returned unchanged.
    pub fn to_channels(&self, channels: usize) -> AudioBuffer {
        if self.channels() != 1 || channels == 1 {
            return self.clone();
        }
        let row = self.samples.row(0);
        let mut out = Array2::zeros((channels, self.frames()));
        for mut r in out.axis_iter_mut(Axis(0)) {
            r.assign(&row);
        }
        Self {
            samples: out,
            sample_rate: self.sample_rate,
        }
    }

    pub fn into_samples(self) -> Array2<f64> {
        self.samples
    }
}
