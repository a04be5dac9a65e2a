//! Mixture recipes, the manifest, scene rendering and the output tree.

mod manifest;
mod render;
mod scene;
mod synth;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::room::RoomSpec;

pub use manifest::{
    generate_manifest, mixture_seed, read_pair_list, scan_noise_root, scan_speech_root, ClassWeights, ImportedPair,
    Manifest, ManifestConfig, ManifestHeader, NoiseFile, NoiseReference, NoiseSource, SpeechSource, SplitSizes,
    Utterance, MANIFEST_FORMAT,
};
pub use render::{
    load_noise, load_source, render_dataset, render_mixture, RenderFailure, RenderOptions, RenderReport, RenderRow,
    VariantSummary, COMPONENTS,
};
pub use scene::{
    apply_length_condition, build_mixture, build_mixture_variants, compute_gain_for_snr, gain_for_snr, loudness,
    spatialize, spatialize_with, MixGains, MixtureSet, Spatialized,
};
pub use synth::{synthetic_noise, synthetic_utterance};

/// Peak level above which a mixture's components are scaled down together.
pub const PEAK_LIMIT: f64 = 0.9;
/// Rate at which all scenes are rendered; other rates are resampled from it.
pub const RENDER_RATE: u32 = 16000;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Valid, Split::Test];

    /// Folder name in the output tree.
    pub fn dir(self) -> &'static str {
        match self {
            Split::Train => "tr",
            Split::Valid => "cv",
            Split::Test => "tt",
        }
    }

    fn tag(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Valid => 1,
            Split::Test => 2,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" | "tr" => Ok(Split::Train),
            "valid" | "cv" | "dev" => Ok(Split::Valid),
            "test" | "tt" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// Where a dry utterance comes from. File paths are relative to the speech root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceRef {
    File {
        path: PathBuf,
        speaker: String,
    },
    /// Generated speech-like signal; not a real recording.
    Synthetic {
        speaker: u32,
        seed: u64,
        frames: usize,
    },
}

impl SourceRef {
    pub fn speaker(&self) -> String {
        match self {
            SourceRef::File { speaker, .. } => speaker.clone(),
            SourceRef::Synthetic { speaker, .. } => format!("syn{speaker:04}"),
        }
    }
}

/// Noise segment. File paths are relative to the noise root; reads wrap
/// around the end of the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseRef {
    File {
        path: PathBuf,
        offset: usize,
    },
    /// Seeded pink noise; not a real recording.
    Synthetic {
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRecipe {
    pub mixture_id: String,
    pub split: Split,
    /// Position within the split.
    pub index: usize,
    pub s1: SourceRef,
    pub s2: SourceRef,
    pub noise: NoiseRef,
    /// Level of s1 over s2, in [0, 5] dB.
    pub speaker_gain_snr_db: f64,
    /// Level of the louder speaker over the noise, in [-6, 3] dB.
    pub noise_snr_db: f64,
    pub room: RoomSpec,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthCondition {
    Min,
    Max,
}

impl LengthCondition {
    pub const ALL: [LengthCondition; 2] = [LengthCondition::Min, LengthCondition::Max];

    pub fn as_str(self) -> &'static str {
        match self {
            LengthCondition::Min => "min",
            LengthCondition::Max => "max",
        }
    }
}

impl FromStr for LengthCondition {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "min" => Ok(LengthCondition::Min),
            "max" => Ok(LengthCondition::Max),
            other => Err(format!("unknown length condition `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoudnessMeasure {
    #[default]
    Rms,
    /// RMS over 20 ms frames within 40 dB of the loudest frame.
    ActiveSpeechRms,
}

impl FromStr for LoudnessMeasure {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "rms" => Ok(LoudnessMeasure::Rms),
            "active_speech_rms" | "active" => Ok(LoudnessMeasure::ActiveSpeechRms),
            other => Err(format!("unknown loudness measure `{other}`")),
        }
    }
}

/// One rendered flavour of the corpus: sample rate and length condition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Variant {
    pub sample_rate: u32,
    pub condition: LengthCondition,
}

impl Variant {
    pub fn all() -> Vec<Variant> {
        [8000, 16000]
            .iter()
            .flat_map(|&sample_rate| {
                LengthCondition::ALL
                    .iter()
                    .map(move |&condition| Variant { sample_rate, condition })
            })
            .collect()
    }

    /// e.g. `wav8k/min`.
    pub fn dir(self) -> PathBuf {
        PathBuf::from(format!("wav{}k", self.sample_rate / 1000)).join(self.condition.as_str())
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}k/{}", self.sample_rate / 1000, self.condition.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;

    /// Accepts `8k/min`, `16k-max`, `wav16k/min`.
    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let s = s.trim().trim_start_matches("wav");
        let (rate, cond) = s
            .split_once(['/', '-', ':'])
            .ok_or_else(|| format!("variant `{s}` is not <rate>/<min|max>"))?;
        let sample_rate = match rate.to_ascii_lowercase().as_str() {
            "8k" | "8000" => 8000,
            "16k" | "16000" => 16000,
            other => return Err(format!("unsupported variant rate `{other}`")),
        };
        Ok(Variant {
            sample_rate,
            condition: cond.parse()?,
        })
    }
}
