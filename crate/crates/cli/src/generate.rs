use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use reverbmix::audio::WavEncoding;
use reverbmix::mix::{
    generate_manifest, read_pair_list, render_dataset, scan_noise_root, scan_speech_root, ClassWeights,
    LoudnessMeasure, Manifest, ManifestConfig, NoiseReference, NoiseSource, RenderOptions, RenderReport, SpeechSource,
    Split, SplitSizes, Variant,
};

use crate::config::{config_error, corpus_root, is_false, CmdResult, Failure, NOISE_ROOT_ENV, SPEECH_ROOT_ENV};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// 10 test mixtures from synthetic speech and noise.
    Smoke,
    /// 200 test mixtures from synthetic speech and noise.
    Desk,
    /// 20000/5000/3000 mixtures from the speech and noise corpora.
    Full,
}

impl Preset {
    fn sizes(self) -> SplitSizes {
        match self {
            Preset::Smoke => SplitSizes {
                train: 0,
                valid: 0,
                test: 10,
            },
            Preset::Desk => SplitSizes {
                train: 0,
                valid: 0,
                test: 200,
            },
            Preset::Full => SplitSizes::default(),
        }
    }
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateArgs {
    /// Corpus size and source type [default: full]
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    /// Global seed [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output folder [default: reverbmix_out]
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Write the manifest only
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub dry_run: bool,
    /// Speech corpus with tr/cv/tt/<speaker>/*.wav [env: REVERBMIX_SPEECH_ROOT]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speech_root: Option<PathBuf>,
    /// Noise corpus with tr/cv/tt/*.wav [env: REVERBMIX_NOISE_ROOT]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_root: Option<PathBuf>,
    /// Folder with mix_2_spk_{tr,cv,tt}.txt pair lists, used instead of random pairing
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pair_lists: Option<PathBuf>,
    /// Use synthetic speech and noise whatever the preset
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub synthetic: bool,
    /// Synthetic talkers per split [default: 40]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speakers: Option<u32>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub valid: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test: Option<usize>,
    /// Variants to render, e.g. 8k/min,16k/max [default: all four]
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variants: Option<Vec<String>>,
    /// Splits to render (tr, cv, tt) [default: all]
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub splits: Option<Vec<String>>,
    /// Relative weights of the low, medium and high reverberation classes
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class_weights: Option<Vec<f64>>,
    /// Fixed microphone spacing in meters
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mic_separation: Option<f64>,
    /// rms or active_speech_rms [default: rms]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loudness: Option<String>,
    /// Speaker images the noise level refers to: anechoic or reverberant [default: anechoic]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_reference: Option<String>,
    /// float32 or pcm16 [default: float32]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encoding: Option<String>,
}

struct Plan {
    config: ManifestConfig,
    variants: Vec<Variant>,
    splits: Option<Vec<Split>>,
    encoding: WavEncoding,
    synthetic: bool,
}

fn parse_list<T: std::str::FromStr<Err = String>>(items: &[String]) -> CmdResult<Vec<T>> {
    items.iter().map(|s| s.parse().map_err(config_error)).collect()
}

fn plan(a: &GenerateArgs) -> CmdResult<Plan> {
    let preset = a.preset.unwrap_or(Preset::Full);
    let mut sizes = preset.sizes();
    sizes.train = a.train.unwrap_or(sizes.train);
    sizes.valid = a.valid.unwrap_or(sizes.valid);
    sizes.test = a.test.unwrap_or(sizes.test);
    let class_weights = match a.class_weights.as_deref() {
        None => ClassWeights::default(),
        Some([low, medium, high]) => ClassWeights {
            low: *low,
            medium: *medium,
            high: *high,
        },
        Some(other) => {
            return Err(config_error(format!(
                "class weights need three values, got {}",
                other.len()
            )))
        }
    };
    let loudness: LoudnessMeasure = a.loudness.as_deref().unwrap_or("rms").parse().map_err(config_error)?;
    let noise_reference = match a.noise_reference.as_deref().unwrap_or("anechoic") {
        "anechoic" => NoiseReference::Anechoic,
        "reverberant" => NoiseReference::Reverberant,
        other => return Err(config_error(format!("unknown noise reference `{other}`"))),
    };
    let encoding = match a.encoding.as_deref().unwrap_or("float32") {
        "float32" | "f32" => WavEncoding::Float32,
        "pcm16" | "int16" => WavEncoding::Pcm16,
        other => return Err(config_error(format!("unknown encoding `{other}`"))),
    };
    let variants = match &a.variants {
        None => Variant::all(),
        Some(v) => parse_list(v)?,
    };
    if variants.is_empty() {
        return Err(config_error("no variants selected"));
    }
    Ok(Plan {
        config: ManifestConfig {
            global_seed: a.seed.unwrap_or(0),
            split_sizes: sizes,
            class_weights,
            mic_separation: a.mic_separation,
            loudness,
            noise_reference,
            ..Default::default()
        },
        variants,
        splits: a.splits.as_deref().map(parse_list).transpose()?,
        encoding,
        synthetic: a.synthetic || preset != Preset::Full,
    })
}

fn real_sources(a: &GenerateArgs) -> CmdResult<(SpeechSource, NoiseSource, PathBuf, PathBuf)> {
    let speech_root = corpus_root(a.speech_root.as_ref(), SPEECH_ROOT_ENV).ok_or_else(|| {
        Failure::MissingCorpus(format!("no speech root; pass --speech-root or set {SPEECH_ROOT_ENV}"))
    })?;
    let noise_root = corpus_root(a.noise_root.as_ref(), NOISE_ROOT_ENV)
        .ok_or_else(|| Failure::MissingCorpus(format!("no noise root; pass --noise-root or set {NOISE_ROOT_ENV}")))?;
    let speech = match &a.pair_lists {
        Some(dir) => {
            let mut map = BTreeMap::new();
            for split in Split::ALL {
                let list = dir.join(format!("mix_2_spk_{}.txt", split.dir()));
                if list.exists() {
                    map.insert(split, read_pair_list(&list, &speech_root)?);
                }
            }
            SpeechSource::Pairs(map)
        }
        None => SpeechSource::Files(scan_speech_root(&speech_root)?),
    };
    let noise = NoiseSource::Files(scan_noise_root(&noise_root)?);
    Ok((speech, noise, speech_root, noise_root))
}

/// The merged arguments without paths, so outputs do not depend on where
/// they were written or read from.
fn echo(a: &GenerateArgs) -> Value {
    let mut clean = a.clone();
    clean.out = None;
    clean.speech_root = None;
    clean.noise_root = None;
    clean.pair_lists = None;
    serde_json::json!({ "command": "generate", "args": clean })
}

fn print_summary(report: &RenderReport) {
    println!(
        "{:<8} {:<6} {:>5} {:>9} {:>9} {:>12} {:>18}",
        "variant", "split", "n", "clean", "noisy", "reverberant", "noisy_reverberant"
    );
    for s in report.summaries() {
        let m = &s.mean_input_si_sdr_db;
        println!(
            "{:<8} {:<6} {:>5} {:>9.2} {:>9.2} {:>12.2} {:>18.2}",
            s.variant,
            s.split.dir(),
            s.mixtures,
            m["clean"],
            m["noisy"],
            m["reverberant"],
            m["noisy_reverberant"]
        );
    }
}

pub fn run(a: &GenerateArgs, verbose: bool) -> CmdResult {
    let p = plan(a)?;
    let out = a.out.clone().unwrap_or_else(|| PathBuf::from("reverbmix_out"));
    let (speech, noise, speech_root, noise_root) = if p.synthetic {
        (
            SpeechSource::Synthetic {
                speakers_per_split: a.speakers.unwrap_or(40),
            },
            NoiseSource::Synthetic,
            None,
            None,
        )
    } else {
        let (s, n, sr, nr) = real_sources(a)?;
        (s, n, Some(sr), Some(nr))
    };
    let manifest = generate_manifest(&p.config, &speech, &noise, echo(a))?;
    std::fs::create_dir_all(&out)?;
    let manifest_path = out.join("manifest.jsonl");
    manifest.write(&manifest_path)?;
    if verbose {
        eprintln!(
            "wrote {} recipes to {}",
            manifest.recipes.len(),
            manifest_path.display()
        );
    }
    if a.dry_run {
        return Ok(());
    }
    render(&manifest, &out, p, speech_root, noise_root, verbose)
}

fn render(
    manifest: &Manifest,
    out: &Path,
    p: Plan,
    speech_root: Option<PathBuf>,
    noise_root: Option<PathBuf>,
    verbose: bool,
) -> CmdResult {
    let options = RenderOptions {
        out_root: out.to_path_buf(),
        speech_root,
        noise_root,
        variants: p.variants,
        encoding: p.encoding,
        splits: p.splits,
    };
    if verbose {
        eprintln!("rendering {} variant(s) into {}", options.variants.len(), out.display());
    }
    let report = render_dataset(manifest, &options)?;
    report.write_stats(out, manifest)?;
    print_summary(&report);
    for f in &report.failures {
        eprintln!("failed {}: {}", f.mixture_id, f.error);
    }
    if report.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Render(report.failures.len()))
    }
}
