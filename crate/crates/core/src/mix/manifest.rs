//! Deterministic mixture plans and their JSON-lines serialization.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{splitmix64, LoudnessMeasure, MixtureRecipe, NoiseRef, SourceRef, Split, RENDER_RATE};
use crate::audio::wav_info;
use crate::error::{Error, Result};
use crate::room::{sample_room, ReverbClass};

pub const MANIFEST_FORMAT: &str = "reverbmix-manifest/1";
const SPEAKER_GAIN_RANGE: (f64, f64) = (0.0, 5.0);
const NOISE_SNR_RANGE: (f64, f64) = (-6.0, 3.0);
const PAIR_ATTEMPTS: usize = 10_000;
const SEED_DERIVATION: &str = "chacha8(splitmix64(splitmix64(global_seed) ^ (split_tag << 56 | index)))";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSizes {
    pub train: usize,
    pub valid: usize,
    pub test: usize,
}

impl Default for SplitSizes {
    fn default() -> Self {
        SplitSizes {
            train: 20000,
            valid: 5000,
            test: 3000,
        }
    }
}

impl SplitSizes {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Valid => self.valid,
            Split::Test => self.test,
        }
    }

    pub fn total(&self) -> usize {
        self.train + self.valid + self.test
    }
}

/// Relative frequency of each reverberation class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    pub low: f64,
    pub medium: f64,
    pub high: f64,
}

impl Default for ClassWeights {
    fn default() -> Self {
        ClassWeights {
            low: 1.0,
            medium: 1.0,
            high: 1.0,
        }
    }
}

impl ClassWeights {
    fn validate(&self) -> Result<()> {
        let w = [self.low, self.medium, self.high];
        if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) || w.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidManifest(format!("class weights {w:?}")));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> ReverbClass {
        let total = self.low + self.medium + self.high;
        let u = rng.random_range(0.0..total);
        if u < self.low {
            ReverbClass::Low
        } else if u < self.low + self.medium {
            ReverbClass::Medium
        } else {
            ReverbClass::High
        }
    }
}

/// Which speaker images the noise level is measured against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseReference {
    #[default]
    Anechoic,
    Reverberant,
}

/// Everything that determines a manifest besides the source lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManifestConfig {
    pub global_seed: u64,
    pub split_sizes: SplitSizes,
    pub class_weights: ClassWeights,
    /// Fixed microphone spacing in meters instead of the sampled one.
    pub mic_separation: Option<f64>,
    pub loudness: LoudnessMeasure,
    pub noise_reference: NoiseReference,
    /// Length range of synthetic utterances, in seconds.
    pub utterance_secs: [f64; 2],
}

impl Default for ManifestConfig {
    fn default() -> Self {
        ManifestConfig {
            global_seed: 0,
            split_sizes: SplitSizes::default(),
            class_weights: ClassWeights::default(),
            mic_separation: None,
            loudness: LoudnessMeasure::Rms,
            noise_reference: NoiseReference::Anechoic,
            utterance_secs: [2.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    /// Relative to the speech root.
    pub path: PathBuf,
    pub speaker: String,
    /// Length at the render rate.
    pub frames: usize,
}

/// A pair from an external list, with its inter-speaker level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportedPair {
    pub s1: Utterance,
    pub s2: Utterance,
    pub speaker_gain_snr_db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SpeechSource {
    Synthetic {
        speakers_per_split: u32,
    },
    /// Utterances per split, paired at random.
    Files(BTreeMap<Split, Vec<Utterance>>),
    /// Fixed pairs per split, used in list order.
    Pairs(BTreeMap<Split, Vec<ImportedPair>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseFile {
    /// Relative to the noise root.
    pub path: PathBuf,
    /// Length at the render rate.
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSource {
    Synthetic,
    Files(BTreeMap<Split, Vec<NoiseFile>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: String,
    pub version: String,
    pub global_seed: u64,
    pub split_sizes: SplitSizes,
    /// False when any synthetic speech or noise is referenced.
    pub canonical: bool,
    pub seed_derivation: String,
    pub config: ManifestConfig,
    /// Caller-supplied description of how the manifest was requested.
    #[serde(default)]
    pub echo: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    /// Train, then valid, then test; index order within each split.
    pub recipes: Vec<MixtureRecipe>,
}

/// Seed of the `index`-th mixture of `split`.
pub fn mixture_seed(global_seed: u64, split: Split, index: usize) -> u64 {
    splitmix64(splitmix64(global_seed) ^ (split.tag() << 56 | index as u64))
}

fn utterance_frames_at_render_rate(path: &Path) -> Result<usize> {
    let info = wav_info(path)?;
    Ok((info.frames as f64 * RENDER_RATE as f64 / info.sample_rate as f64).round() as usize)
}

fn insufficient(split: Split, detail: impl std::fmt::Display) -> Error {
    Error::InsufficientUtterances(format!("{split}: {detail}"))
}

/// Cross-speaker unordered pairs available in a list.
fn distinct_pairs(list: &[Utterance]) -> usize {
    let mut per_speaker: BTreeMap<&str, usize> = BTreeMap::new();
    for u in list {
        *per_speaker.entry(&u.speaker).or_default() += 1;
    }
    let n = list.len();
    let same: usize = per_speaker.values().map(|&k| k * k.saturating_sub(1) / 2).sum();
    n * n.saturating_sub(1) / 2 - same
}

struct Drawn {
    s1: SourceRef,
    s2: SourceRef,
    frames: usize,
    imported_gain: Option<f64>,
}

fn draw_sources(
    speech: &SpeechSource,
    config: &ManifestConfig,
    split: Split,
    index: usize,
    rng: &mut ChaCha8Rng,
    used: &mut HashSet<(usize, usize)>,
) -> Result<Drawn> {
    match speech {
        SpeechSource::Synthetic { speakers_per_split } => {
            let count = *speakers_per_split;
            if count < 2 {
                return Err(insufficient(split, "need at least two synthetic speakers"));
            }
            // Train and valid share talkers; test uses its own.
            let base = if split == Split::Test { 1000 } else { 0 };
            let a = rng.random_range(0..count);
            let b = (a + rng.random_range(1..count)) % count;
            let [lo, hi] = config.utterance_secs;
            let mut utt = |speaker: u32| SourceRef::Synthetic {
                speaker: base + speaker,
                seed: rng.next_u64(),
                frames: (rng.random_range(lo..=hi) * RENDER_RATE as f64).round() as usize,
            };
            let (s1, s2) = (utt(a), utt(b));
            let frames = [&s1, &s2]
                .iter()
                .map(|s| match s {
                    SourceRef::Synthetic { frames, .. } => *frames,
                    SourceRef::File { .. } => 0,
                })
                .max()
                .unwrap_or(0);
            Ok(Drawn {
                s1,
                s2,
                frames,
                imported_gain: None,
            })
        }
        SpeechSource::Files(map) => {
            let list = map.get(&split).map(Vec::as_slice).unwrap_or(&[]);
            for _ in 0..PAIR_ATTEMPTS {
                let i = rng.random_range(0..list.len());
                let j = rng.random_range(0..list.len());
                let key = (i.min(j), i.max(j));
                if list[i].speaker == list[j].speaker || used.contains(&key) {
                    continue;
                }
                used.insert(key);
                let file = |u: &Utterance| SourceRef::File {
                    path: u.path.clone(),
                    speaker: u.speaker.clone(),
                };
                return Ok(Drawn {
                    s1: file(&list[i]),
                    s2: file(&list[j]),
                    frames: list[i].frames.max(list[j].frames),
                    imported_gain: None,
                });
            }
            Err(insufficient(
                split,
                format!("no unused speaker pair found for mixture {index}"),
            ))
        }
        SpeechSource::Pairs(map) => {
            let pair = map
                .get(&split)
                .and_then(|l| l.get(index))
                .ok_or_else(|| insufficient(split, format!("pair list has no entry {index}")))?;
            let file = |u: &Utterance| SourceRef::File {
                path: u.path.clone(),
                speaker: u.speaker.clone(),
            };
            Ok(Drawn {
                s1: file(&pair.s1),
                s2: file(&pair.s2),
                frames: pair.s1.frames.max(pair.s2.frames),
                imported_gain: Some(pair.speaker_gain_snr_db),
            })
        }
    }
}

fn check_sources(speech: &SpeechSource, noise: &NoiseSource, split: Split, n: usize) -> Result<()> {
    match speech {
        SpeechSource::Synthetic { .. } => {}
        SpeechSource::Files(map) => {
            let list = map.get(&split).map(Vec::as_slice).unwrap_or(&[]);
            let available = distinct_pairs(list);
            if available < n {
                return Err(insufficient(
                    split,
                    format!(
                        "{} utterances give {available} cross-speaker pairs, {n} requested",
                        list.len()
                    ),
                ));
            }
        }
        SpeechSource::Pairs(map) => {
            let have = map.get(&split).map_or(0, Vec::len);
            if have < n {
                return Err(insufficient(
                    split,
                    format!("pair list has {have} entries, {n} requested"),
                ));
            }
        }
    }
    if let NoiseSource::Files(map) = noise {
        if map.get(&split).is_none_or(|l| l.iter().all(|f| f.frames == 0)) {
            return Err(insufficient(split, "no noise recordings"));
        }
    }
    Ok(())
}

/// Plans every mixture of every split. Pure in its inputs: the same config
/// and source lists give a byte-identical serialization.
pub fn generate_manifest(
    config: &ManifestConfig,
    speech: &SpeechSource,
    noise: &NoiseSource,
    echo: serde_json::Value,
) -> Result<Manifest> {
    config.class_weights.validate()?;
    let [lo, hi] = config.utterance_secs;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidManifest(format!("utterance length range {lo}..{hi}")));
    }
    let mut recipes = Vec::with_capacity(config.split_sizes.total());
    for split in Split::ALL {
        let n = config.split_sizes.get(split);
        if n == 0 {
            continue;
        }
        check_sources(speech, noise, split, n)?;
        let mut used = HashSet::new();
        for index in 0..n {
            let seed = mixture_seed(config.global_seed, split, index);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            // Fixed draw order; sources come last because pairing may retry.
            let class = config.class_weights.sample(&mut rng);
            let room_seed = rng.next_u64();
            let gain = rng.random_range(SPEAKER_GAIN_RANGE.0..=SPEAKER_GAIN_RANGE.1);
            let noise_snr = rng.random_range(NOISE_SNR_RANGE.0..=NOISE_SNR_RANGE.1);
            let (noise_a, noise_b) = (rng.next_u64(), rng.next_u64());
            let drawn = draw_sources(speech, config, split, index, &mut rng, &mut used)?;

            let noise_ref = match noise {
                NoiseSource::Synthetic => NoiseRef::Synthetic { seed: noise_a },
                NoiseSource::Files(map) => {
                    let list: Vec<&NoiseFile> = map[&split].iter().filter(|f| f.frames > 0).collect();
                    let file = list[(noise_a % list.len() as u64) as usize];
                    let span = if file.frames > drawn.frames {
                        file.frames - drawn.frames + 1
                    } else {
                        file.frames
                    };
                    NoiseRef::File {
                        path: file.path.clone(),
                        offset: (noise_b % span as u64) as usize,
                    }
                }
            };
            recipes.push(MixtureRecipe {
                mixture_id: format!("{}_{index:05}", split.dir()),
                split,
                index,
                s1: drawn.s1,
                s2: drawn.s2,
                noise: noise_ref,
                speaker_gain_snr_db: drawn.imported_gain.unwrap_or(gain),
                noise_snr_db: noise_snr,
                room: sample_room(room_seed, class, config.mic_separation)?,
                seed,
            });
        }
    }
    let canonical = !matches!(speech, SpeechSource::Synthetic { .. }) && !matches!(noise, NoiseSource::Synthetic);
    Ok(Manifest {
        header: ManifestHeader {
            format: MANIFEST_FORMAT.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            global_seed: config.global_seed,
            split_sizes: config.split_sizes,
            canonical,
            seed_derivation: SEED_DERIVATION.to_string(),
            config: config.clone(),
            echo,
        },
        recipes,
    })
}

impl Manifest {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &MixtureRecipe> {
        self.recipes.iter().filter(move |r| r.split == split)
    }

    /// Header line followed by one recipe per line.
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = serde_json::to_string(&self.header)?;
        out.push('\n');
        for r in &self.recipes {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Manifest> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: ManifestHeader = serde_json::from_str(
            lines
                .next()
                .ok_or_else(|| Error::InvalidManifest("empty manifest".into()))?,
        )?;
        if header.format != MANIFEST_FORMAT {
            return Err(Error::InvalidManifest(format!("unknown format `{}`", header.format)));
        }
        let recipes = lines
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<MixtureRecipe>, _>>()?;
        let manifest = Manifest { header, recipes };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for r in &self.recipes {
            if !ids.insert(&r.mixture_id) {
                return Err(Error::InvalidManifest(format!("duplicate id {}", r.mixture_id)));
            }
            let in_range = |v: f64, (lo, hi): (f64, f64)| v >= lo && v <= hi;
            if !in_range(r.speaker_gain_snr_db, SPEAKER_GAIN_RANGE) || !in_range(r.noise_snr_db, NOISE_SNR_RANGE) {
                return Err(Error::InvalidManifest(format!("{}: level out of range", r.mixture_id)));
            }
            r.room.validate()?;
        }
        for split in Split::ALL {
            let have = self.split(split).count();
            if have != self.header.split_sizes.get(split) {
                return Err(Error::InvalidManifest(format!(
                    "{split}: {have} recipes, header says {}",
                    self.header.split_sizes.get(split)
                )));
            }
        }
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()?).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        if !path.exists() {
            return Err(Error::FileNotFound {
                path: path.to_path_buf(),
            });
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Manifest::from_jsonl(&text)
    }
}

fn wav_files(dir: &Path, recursive: bool, out: &mut Vec<PathBuf>) -> Result<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        if path.is_dir() {
            if recursive {
                wav_files(&path, true, out)?;
            }
        } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            out.push(path);
        }
    }
    Ok(())
}

fn relative(root: &Path, path: &Path) -> PathBuf {
    path.strip_prefix(root).unwrap_or(path).to_path_buf()
}

/// Utterances under `<root>/{tr,cv,tt}/<speaker>/.../*.wav`. The speaker is
/// the first folder below the split folder.
pub fn scan_speech_root(root: &Path) -> Result<BTreeMap<Split, Vec<Utterance>>> {
    if !root.is_dir() {
        return Err(Error::FileNotFound {
            path: root.to_path_buf(),
        });
    }
    let mut map = BTreeMap::new();
    for split in Split::ALL {
        let dir = root.join(split.dir());
        if !dir.is_dir() {
            continue;
        }
        let mut files = Vec::new();
        wav_files(&dir, true, &mut files)?;
        files.sort();
        let mut list = Vec::with_capacity(files.len());
        for f in files {
            let rel = relative(&dir, &f);
            let speaker = match rel.components().count() {
                1 => f.file_stem().map(|s| s.to_string_lossy().chars().take(3).collect()),
                _ => rel
                    .components()
                    .next()
                    .map(|c| c.as_os_str().to_string_lossy().into_owned()),
            }
            .unwrap_or_default();
            list.push(Utterance {
                path: relative(root, &f),
                speaker,
                frames: utterance_frames_at_render_rate(&f)?,
            });
        }
        map.insert(split, list);
    }
    Ok(map)
}

/// Noise recordings under `<root>/{tr,cv,tt}/*.wav`.
pub fn scan_noise_root(root: &Path) -> Result<BTreeMap<Split, Vec<NoiseFile>>> {
    if !root.is_dir() {
        return Err(Error::FileNotFound {
            path: root.to_path_buf(),
        });
    }
    let mut map = BTreeMap::new();
    for split in Split::ALL {
        let dir = root.join(split.dir());
        if !dir.is_dir() {
            continue;
        }
        let mut files = Vec::new();
        wav_files(&dir, false, &mut files)?;
        files.sort();
        let list = files
            .iter()
            .map(|f| {
                Ok(NoiseFile {
                    path: relative(root, f),
                    frames: utterance_frames_at_render_rate(f)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        map.insert(split, list);
    }
    Ok(map)
}

/// Reads a two-speaker list in the `s1_path s1_db s2_path s2_db` layout.
/// The level difference `s1_db - s2_db` becomes the speaker gain; pairs
/// where s2 is louder are swapped so s1 is always the louder talker.
/// Speakers are the first three characters of each file name.
pub fn read_pair_list(list: &Path, speech_root: &Path) -> Result<Vec<ImportedPair>> {
    if !list.exists() {
        return Err(Error::FileNotFound {
            path: list.to_path_buf(),
        });
    }
    let text = std::fs::read_to_string(list).map_err(|e| Error::io(list, e))?;
    let mut pairs = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let bad = || Error::InvalidManifest(format!("{}:{}: expected `path db path db`", list.display(), n + 1));
        if fields.len() != 4 {
            return Err(bad());
        }
        let db1: f64 = fields[1].parse().map_err(|_| bad())?;
        let db2: f64 = fields[3].parse().map_err(|_| bad())?;
        let utt = |p: &str| -> Result<Utterance> {
            let path = PathBuf::from(p);
            let speaker = path
                .file_stem()
                .map(|s| s.to_string_lossy().chars().take(3).collect())
                .unwrap_or_default();
            Ok(Utterance {
                frames: utterance_frames_at_render_rate(&speech_root.join(&path))?,
                path,
                speaker,
            })
        };
        let (a, b) = (utt(fields[0])?, utt(fields[2])?);
        let gain = db1 - db2;
        pairs.push(if gain >= 0.0 {
            ImportedPair {
                s1: a,
                s2: b,
                speaker_gain_snr_db: gain,
            }
        } else {
            ImportedPair {
                s1: b,
                s2: a,
                speaker_gain_snr_db: -gain,
            }
        });
    }
    Ok(pairs)
}
