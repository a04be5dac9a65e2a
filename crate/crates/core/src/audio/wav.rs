//! RIFF/WAVE reading and writing (PCM16 and IEEE float32, mono or stereo).

use std::io::ErrorKind;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::AudioBuffer;
use crate::error::{Error, Result};

const PCM16_SCALE: f64 = 32768.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WavEncoding {
    Pcm16,
    Float32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavWriteOptions {
    pub encoding: WavEncoding,
    /// Fail when more than this fraction of samples clip (PCM16 only).
    pub max_clip_fraction: Option<f64>,
}

impl WavWriteOptions {
    pub fn new(encoding: WavEncoding) -> Self {
        Self {
            encoding,
            max_clip_fraction: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WriteReport {
    pub clipped: usize,
}

/// Header-level facts about a WAV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WavInfo {
    pub channels: u16,
    pub sample_rate: u32,
    pub frames: usize,
}

fn map_open_error(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) if e.kind() == ErrorKind::NotFound => Error::FileNotFound {
            path: path.to_path_buf(),
        },
        hound::Error::IoError(e) if e.kind() == ErrorKind::UnexpectedEof => Error::MalformedWav {
            path: path.to_path_buf(),
            detail: "header ends prematurely".into(),
        },
        hound::Error::IoError(e) => Error::io(path, e),
        hound::Error::Unsupported => Error::UnsupportedEncoding {
            path: path.to_path_buf(),
            detail: "format not understood".into(),
        },
        other => Error::MalformedWav {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    }
}

fn map_sample_error(path: &Path, err: hound::Error) -> Error {
    match err {
        // hound reports a short data chunk as an `Other` I/O error.
        hound::Error::IoError(e) if matches!(e.kind(), ErrorKind::UnexpectedEof | ErrorKind::Other) => {
            Error::TruncatedData {
                path: path.to_path_buf(),
            }
        }
        other => map_open_error(path, other),
    }
}

fn check_spec(path: &Path, spec: &WavSpec) -> Result<()> {
    if !(1..=2).contains(&spec.channels) {
        return Err(Error::UnsupportedEncoding {
            path: path.to_path_buf(),
            detail: format!("{} channels", spec.channels),
        });
    }
    match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) | (SampleFormat::Float, 32) => Ok(()),
        (fmt, bits) => Err(Error::UnsupportedEncoding {
            path: path.to_path_buf(),
            detail: format!("{bits}-bit {fmt:?}"),
        }),
    }
}

fn open(path: &Path) -> Result<WavReader<std::io::BufReader<std::fs::File>>> {
    if !path.exists() {
        return Err(Error::FileNotFound {
            path: path.to_path_buf(),
        });
    }
    WavReader::open(path).map_err(|e| map_open_error(path, e))
}

/// Reads only the header of a WAV file.
pub fn wav_info(path: impl AsRef<Path>) -> Result<WavInfo> {
    let path = path.as_ref();
    let reader = open(path)?;
    let spec = reader.spec();
    check_spec(path, &spec)?;
    Ok(WavInfo {
        channels: spec.channels,
        sample_rate: spec.sample_rate,
        frames: reader.duration() as usize,
    })
}

/// Reads a PCM16 or float32 WAV file. PCM16 samples are divided by 32768.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let spec = reader.spec();
    check_spec(path, &spec)?;
    let channels = spec.channels as usize;

    let interleaved: Vec<f64> = match spec.sample_format {
        SampleFormat::Int => reader
            .samples::<i16>()
            .map(|s| s.map(|v| v as f64 / PCM16_SCALE))
            .collect::<std::result::Result<_, _>>(),
        SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(|v| v as f64))
            .collect::<std::result::Result<_, _>>(),
    }
    .map_err(|e| map_sample_error(path, e))?;

    if !interleaved.len().is_multiple_of(channels) {
        return Err(Error::TruncatedData {
            path: path.to_path_buf(),
        });
    }
    let frames = interleaved.len() / channels;
    let interleaved_arr = Array2::from_shape_vec((frames, channels), interleaved).expect("length checked above");
    let samples = interleaved_arr.t().as_standard_layout().into_owned();
    AudioBuffer::new(samples, spec.sample_rate).map_err(|e| Error::MalformedWav {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Writes `buffer` to `path`. Samples outside [-1, 1] are clamped for PCM16
/// and counted in the returned report.
pub fn write_wav(path: impl AsRef<Path>, buffer: &AudioBuffer, options: WavWriteOptions) -> Result<WriteReport> {
    let path = path.as_ref();
    let channels = buffer.channels();
    if !(1..=2).contains(&channels) {
        return Err(Error::ChannelCount {
            expected: 2,
            got: channels,
        });
    }
    let (bits, format) = match options.encoding {
        WavEncoding::Pcm16 => (16, SampleFormat::Int),
        WavEncoding::Float32 => (32, SampleFormat::Float),
    };
    let spec = WavSpec {
        channels: channels as u16,
        sample_rate: buffer.sample_rate(),
        bits_per_sample: bits,
        sample_format: format,
    };

    let total = channels * buffer.frames();
    let mut clipped = 0;
    if options.encoding == WavEncoding::Pcm16 {
        clipped = buffer.samples().iter().filter(|x| x.abs() > 1.0).count();
        if let Some(max_fraction) = options.max_clip_fraction {
            if total > 0 && clipped as f64 / total as f64 > max_fraction {
                return Err(Error::ExcessiveClipping {
                    path: path.to_path_buf(),
                    clipped,
                    total,
                    max_fraction,
                });
            }
        }
    }

    let hound_err = |e: hound::Error| match e {
        hound::Error::IoError(io) => Error::io(path, io),
        other => Error::MalformedWav {
            path: path.to_path_buf(),
            detail: other.to_string(),
        },
    };
    let mut writer = WavWriter::create(path, spec).map_err(hound_err)?;
    let samples = buffer.samples();
    for frame in 0..buffer.frames() {
        for ch in 0..channels {
            let x = samples[[ch, frame]];
            match options.encoding {
                WavEncoding::Pcm16 => {
                    let q = (x.clamp(-1.0, 1.0) * PCM16_SCALE)
                        .round()
                        .clamp(i16::MIN as f64, i16::MAX as f64) as i16;
                    writer.write_sample(q).map_err(hound_err)?;
                }
                WavEncoding::Float32 => writer.write_sample(x as f32).map_err(hound_err)?,
            }
        }
    }
    writer.finalize().map_err(hound_err)?;
    Ok(WriteReport { clipped })
}
