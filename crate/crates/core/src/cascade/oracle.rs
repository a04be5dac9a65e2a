//! Ideal time-frequency masks computed from ground truth.

use std::str::FromStr;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use super::{Processor, RemovalSet, StageContext};
use crate::audio::{istft, stft, AudioBuffer, Spectrogram, StftConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OracleMaskKind {
    /// 1 where the target magnitude reaches the interference magnitude.
    Ibm,
    /// `|T| / (|T| + |I|)`.
    Irm,
    /// `|T|^2 / (|T|^2 + |I|^2)`.
    Wiener,
}

impl OracleMaskKind {
    pub const ALL: [OracleMaskKind; 3] = [OracleMaskKind::Ibm, OracleMaskKind::Irm, OracleMaskKind::Wiener];

    pub fn as_str(self) -> &'static str {
        match self {
            OracleMaskKind::Ibm => "ibm",
            OracleMaskKind::Irm => "irm",
            OracleMaskKind::Wiener => "wiener",
        }
    }

    fn value(self, t: f64, i: f64) -> f64 {
        match self {
            OracleMaskKind::Ibm => {
                if t >= i {
                    1.0
                } else {
                    0.0
                }
            }
            OracleMaskKind::Irm => ratio(t, i),
            OracleMaskKind::Wiener => ratio(t * t, i * i),
        }
    }
}

/// `a / (a + b)` with 0/0 taken as 1 (nothing to suppress).
fn ratio(a: f64, b: f64) -> f64 {
    let d = a + b;
    if d > 0.0 {
        a / d
    } else {
        1.0
    }
}

impl FromStr for OracleMaskKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ibm" => Ok(OracleMaskKind::Ibm),
            "irm" => Ok(OracleMaskKind::Irm),
            "wiener" | "wf" => Ok(OracleMaskKind::Wiener),
            other => Err(format!("unknown oracle mask `{other}`")),
        }
    }
}

/// `[frames x bins]` mask of the first channel of two spectrograms.
pub fn oracle_mask(kind: OracleMaskKind, target: &Spectrogram, interference: &Spectrogram) -> Result<Array2<f64>> {
    if target.data.shape() != interference.data.shape() {
        return Err(Error::InvalidStft(
            "target and interference spectrograms differ in shape".into(),
        ));
    }
    let t = target.data.index_axis(ndarray::Axis(0), 0);
    let i = interference.data.index_axis(ndarray::Axis(0), 0);
    Ok(Zip::from(&t).and(&i).map_collect(|a, b| kind.value(a.norm(), b.norm())))
}

fn mono_stft(x: &[f64], config: &StftConfig, rate: u32) -> Result<Spectrogram> {
    stft(&AudioBuffer::from_mono(x.to_vec(), rate)?, config)
}

fn masked(mixture: &Spectrogram, target: &Spectrogram, kind: OracleMaskKind) -> Result<Vec<f64>> {
    // The STFT is linear, so the interference spectrum is X - T.
    let mut interference = mixture.clone();
    interference.data -= &target.data;
    let mask = oracle_mask(kind, target, &interference)?;
    let mut out = mixture.clone();
    out.data
        .index_axis_mut(ndarray::Axis(0), 0)
        .zip_mut_with(&mask, |c, m| *c *= *m);
    let mut y = istft(&out)?.channel(0).to_vec();
    y.resize(mixture.original_length, 0.0);
    Ok(y)
}

/// Masks `input` with the ideal mask for `target` against `input - target`.
pub fn apply_oracle_mask(
    kind: OracleMaskKind,
    input: &[f64],
    target: &[f64],
    config: &StftConfig,
    sample_rate: u32,
) -> Result<Vec<f64>> {
    if input.len() != target.len() {
        return Err(Error::LengthMismatch {
            left: input.len(),
            right: target.len(),
        });
    }
    let x = mono_stft(input, config, sample_rate)?;
    masked(&x, &mono_stft(target, config, sample_rate)?, kind)
}

/// Oracle stage: masks its input towards the ideal output state(s).
#[derive(Debug, Clone, PartialEq)]
pub struct OracleMask {
    pub kind: OracleMaskKind,
    pub stft: StftConfig,
    pub removes: RemovalSet,
    pub arity: usize,
}

impl OracleMask {
    pub fn enhancer(kind: OracleMaskKind, stft: StftConfig, removes: RemovalSet) -> Self {
        OracleMask {
            kind,
            stft,
            removes,
            arity: 1,
        }
    }

    pub fn separator(kind: OracleMaskKind, stft: StftConfig, removes: RemovalSet) -> Self {
        OracleMask {
            kind,
            stft,
            removes: RemovalSet {
                interference: true,
                ..removes
            },
            arity: 2,
        }
    }
}

impl Processor for OracleMask {
    fn name(&self) -> String {
        format!("oracle-{}", self.kind.as_str())
    }

    fn arity(&self) -> usize {
        self.arity
    }

    fn removes(&self) -> RemovalSet {
        self.removes
    }

    fn process(&self, input: &[f64], ctx: &StageContext<'_>) -> Result<Vec<Vec<f64>>> {
        let truth = ctx.truth.ok_or_else(|| {
            Error::MissingComponent(format!("ground truth for {} on {}", self.name(), ctx.mixture_id))
        })?;
        let x = mono_stft(input, &self.stft, ctx.sample_rate)?;
        ctx.output_states
            .iter()
            .map(|&state| {
                let t = truth.target(state, input.len());
                masked(&x, &mono_stft(&t, &self.stft, ctx.sample_rate)?, self.kind)
            })
            .collect()
    }
}
