//! Writing a manifest out as the four-variant corpus tree.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::{
    apply_length_condition, build_mixture_variants, synthetic_noise, synthetic_utterance, Manifest, ManifestConfig,
    MixGains, MixtureRecipe, MixtureSet, NoiseRef, SourceRef, Split, Variant, RENDER_RATE,
};
use crate::audio::{read_wav, resample, write_wav, AudioBuffer, WavEncoding, WavWriteOptions};
use crate::error::{Error, Result};
use crate::metrics::{csv_error, si_sdr_slices, TaskKind};

/// Folder names under each `<variant>/<split>/`.
pub const COMPONENTS: [&str; 9] = [
    "mix_clean",
    "mix_noisy",
    "mix_reverb",
    "mix_both",
    "s1_anechoic",
    "s2_anechoic",
    "s1_reverb",
    "s2_reverb",
    "noise",
];

#[derive(Debug, Clone)]
pub struct RenderOptions {
    pub out_root: PathBuf,
    /// Required when the manifest references speech files.
    pub speech_root: Option<PathBuf>,
    /// Required when the manifest references noise files.
    pub noise_root: Option<PathBuf>,
    pub variants: Vec<Variant>,
    pub encoding: WavEncoding,
    /// Render only these splits; all when `None`.
    pub splits: Option<Vec<Split>>,
}

impl RenderOptions {
    pub fn new(out_root: impl Into<PathBuf>) -> Self {
        RenderOptions {
            out_root: out_root.into(),
            speech_root: None,
            noise_root: None,
            variants: Variant::all(),
            encoding: WavEncoding::Float32,
            splits: None,
        }
    }
}

/// One mixture in one variant.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderRow {
    pub mixture_id: String,
    pub split: Split,
    pub variant: String,
    pub frames: usize,
    pub gains: MixGains,
    pub clipped_samples: usize,
    /// SI-SDR of each task's mixture against the anechoic sources, in
    /// task order (clean, noisy, reverberant, noisy_reverberant).
    pub input_si_sdr_db: [f64; 4],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderFailure {
    pub mixture_id: String,
    pub split: Split,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantSummary {
    pub variant: String,
    pub split: Split,
    pub mixtures: usize,
    pub clipped_samples: usize,
    /// Mixtures whose components were scaled down to respect the peak limit.
    pub peak_limited: usize,
    pub min_global_gain: f64,
    pub mean_input_si_sdr_db: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderReport {
    pub rows: Vec<RenderRow>,
    pub failures: Vec<RenderFailure>,
}

fn resolve(root: Option<&Path>, path: &Path, what: &str) -> Result<PathBuf> {
    match root {
        Some(root) => Ok(root.join(path)),
        None if path.is_absolute() => Ok(path.to_path_buf()),
        None => Err(Error::MissingComponent(format!(
            "{what} root needed for {}",
            path.display()
        ))),
    }
}

/// Dry mono utterance at the render rate. Multi-channel files are averaged.
pub fn load_source(source: &SourceRef, speech_root: Option<&Path>) -> Result<AudioBuffer> {
    match source {
        SourceRef::Synthetic { speaker, seed, frames } => {
            AudioBuffer::from_mono(synthetic_utterance(*speaker, *seed, *frames, RENDER_RATE), RENDER_RATE)
        }
        SourceRef::File { path, .. } => {
            let buf = read_wav(resolve(speech_root, path, "speech")?)?;
            let mono = if buf.channels() == 1 {
                buf
            } else {
                let n = buf.channels() as f64;
                AudioBuffer::new(
                    buf.samples()
                        .sum_axis(ndarray::Axis(0))
                        .mapv(|v| v / n)
                        .insert_axis(ndarray::Axis(0)),
                    buf.sample_rate(),
                )?
            };
            resample(&mono, RENDER_RATE)
        }
    }
}

/// Two-channel noise of `frames` samples at the render rate. File reads
/// start at the recipe offset and wrap around the end of the recording.
pub fn load_noise(noise: &NoiseRef, noise_root: Option<&Path>, frames: usize) -> Result<AudioBuffer> {
    match noise {
        NoiseRef::Synthetic { seed } => Ok(synthetic_noise(*seed, frames, RENDER_RATE)),
        NoiseRef::File { path, offset } => {
            let buf = resample(&read_wav(resolve(noise_root, path, "noise")?)?, RENDER_RATE)?.to_channels(2);
            let len = buf.frames();
            if len == 0 {
                return Err(Error::ZeroEnergy("empty noise recording"));
            }
            let channels = (0..2)
                .map(|ch| {
                    let src = buf.channel(ch);
                    (0..frames).map(|i| src[(offset + i) % len]).collect()
                })
                .collect();
            AudioBuffer::from_channels(channels, RENDER_RATE)
        }
    }
}

/// Every requested variant of one recipe, in `options.variants` order.
pub fn render_mixture(
    recipe: &MixtureRecipe,
    config: &ManifestConfig,
    options: &RenderOptions,
) -> Result<Vec<(Variant, MixtureSet)>> {
    let s1 = load_source(&recipe.s1, options.speech_root.as_deref())?;
    let s2 = load_source(&recipe.s2, options.speech_root.as_deref())?;
    let noise = load_noise(
        &recipe.noise,
        options.noise_root.as_deref(),
        s1.frames().max(s2.frames()),
    )?;
    let mut rates: Vec<u32> = options.variants.iter().map(|v| v.sample_rate).collect();
    rates.sort_unstable();
    rates.dedup();
    let sets = build_mixture_variants(
        recipe,
        &s1,
        &s2,
        &noise,
        config.loudness,
        config.noise_reference,
        &rates,
    )?;
    Ok(options
        .variants
        .iter()
        .map(|&v| {
            let set = &sets[rates.iter().position(|&r| r == v.sample_rate).expect("rate listed")];
            (v, apply_length_condition(set, v.condition))
        })
        .collect())
}

fn input_si_sdr(set: &MixtureSet) -> Result<[f64; 4]> {
    let refs = [set.s1_anechoic.channel(0), set.s2_anechoic.channel(0)];
    let mut out = [0.0; 4];
    for (slot, task) in out.iter_mut().zip(TaskKind::ALL) {
        let mix = set
            .components()
            .into_iter()
            .find(|(name, _)| *name == task.mixture_component())
            .map(|(_, b)| b.channel(0))
            .expect("every task has a mixture");
        let mut sum = 0.0;
        for r in refs {
            sum += si_sdr_slices(mix, r)?.db;
        }
        *slot = sum / refs.len() as f64;
    }
    Ok(out)
}

fn component_dir(out_root: &Path, variant: Variant, split: Split, component: &str) -> PathBuf {
    out_root.join(variant.dir()).join(split.dir()).join(component)
}

fn render_one(recipe: &MixtureRecipe, config: &ManifestConfig, options: &RenderOptions) -> Result<Vec<RenderRow>> {
    let write_opts = WavWriteOptions::new(options.encoding);
    let mut rows = Vec::with_capacity(options.variants.len());
    for (variant, set) in render_mixture(recipe, config, options)? {
        let mut clipped = 0;
        for (name, buf) in set.components() {
            let path = component_dir(&options.out_root, variant, recipe.split, name)
                .join(format!("{}.wav", recipe.mixture_id));
            clipped += write_wav(&path, buf, write_opts)?.clipped;
        }
        rows.push(RenderRow {
            mixture_id: recipe.mixture_id.clone(),
            split: recipe.split,
            variant: variant.to_string(),
            frames: set.frames(),
            gains: set.gains,
            clipped_samples: clipped,
            input_si_sdr_db: input_si_sdr(&set)?,
        });
    }
    Ok(rows)
}

/// Renders every selected recipe. A mixture that fails (e.g. a missing
/// source file) becomes a failure entry and the rest still render; only
/// errors creating the output tree abort.
pub fn render_dataset(manifest: &Manifest, options: &RenderOptions) -> Result<RenderReport> {
    let selected: Vec<&MixtureRecipe> = manifest
        .recipes
        .iter()
        .filter(|r| options.splits.as_ref().is_none_or(|s| s.contains(&r.split)))
        .collect();
    let mut splits: Vec<Split> = selected.iter().map(|r| r.split).collect();
    splits.sort_unstable();
    splits.dedup();
    for &variant in &options.variants {
        for &split in &splits {
            for name in COMPONENTS {
                let dir = component_dir(&options.out_root, variant, split, name);
                std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
            }
        }
    }
    let config = &manifest.header.config;
    let results: Vec<std::result::Result<Vec<RenderRow>, RenderFailure>> = selected
        .par_iter()
        .map(|r| {
            render_one(r, config, options).map_err(|e| RenderFailure {
                mixture_id: r.mixture_id.clone(),
                split: r.split,
                error: e.to_string(),
            })
        })
        .collect();
    let mut report = RenderReport {
        rows: Vec::new(),
        failures: Vec::new(),
    };
    for r in results {
        match r {
            Ok(rows) => report.rows.extend(rows),
            Err(f) => report.failures.push(f),
        }
    }
    Ok(report)
}

impl RenderReport {
    /// Per (variant, split) aggregates, in first-seen order.
    pub fn summaries(&self) -> Vec<VariantSummary> {
        let mut groups: Vec<((String, Split), Vec<&RenderRow>)> = Vec::new();
        for row in &self.rows {
            let key = (row.variant.clone(), row.split);
            match groups.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push(row),
                None => groups.push((key, vec![row])),
            }
        }
        groups
            .into_iter()
            .map(|((variant, split), rows)| {
                let n = rows.len() as f64;
                let mean_input_si_sdr_db = TaskKind::ALL
                    .iter()
                    .enumerate()
                    .map(|(i, t)| {
                        (
                            t.as_str().to_string(),
                            rows.iter().map(|r| r.input_si_sdr_db[i]).sum::<f64>() / n,
                        )
                    })
                    .collect();
                VariantSummary {
                    variant,
                    split,
                    mixtures: rows.len(),
                    clipped_samples: rows.iter().map(|r| r.clipped_samples).sum(),
                    peak_limited: rows.iter().filter(|r| r.gains.global < 1.0).count(),
                    min_global_gain: rows.iter().map(|r| r.gains.global).fold(1.0, f64::min),
                    mean_input_si_sdr_db,
                }
            })
            .collect()
    }

    /// Writes `render_stats.csv` (one line per mixture and variant) and
    /// `render_summary.json` into `dir`.
    pub fn write_stats(&self, dir: &Path, manifest: &Manifest) -> Result<()> {
        let path = dir.join("render_stats.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| csv_error(&path, e))?;
        let mut header: Vec<String> = [
            "mixture_id",
            "split",
            "variant",
            "frames",
            "s2_gain",
            "noise_gain",
            "global_gain",
            "clipped_samples",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        header.extend(TaskKind::ALL.iter().map(|t| format!("input_si_sdr_{t}")));
        w.write_record(&header).map_err(|e| csv_error(&path, e))?;
        for r in &self.rows {
            let mut rec = vec![
                r.mixture_id.clone(),
                r.split.dir().to_string(),
                r.variant.clone(),
                r.frames.to_string(),
                r.gains.s2.to_string(),
                r.gains.noise.to_string(),
                r.gains.global.to_string(),
                r.clipped_samples.to_string(),
            ];
            rec.extend(r.input_si_sdr_db.iter().map(|v| v.to_string()));
            w.write_record(&rec).map_err(|e| csv_error(&path, e))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;

        let summary = serde_json::json!({
            "canonical": manifest.header.canonical,
            "global_seed": manifest.header.global_seed,
            "config": manifest.header.config,
            "echo": manifest.header.echo,
            "rendered": self.rows.len(),
            "failures": self.failures,
            "variants": self.summaries(),
        });
        let path = dir.join("render_summary.json");
        std::fs::write(&path, serde_json::to_string_pretty(&summary)?).map_err(|e| Error::io(&path, e))
    }
}
