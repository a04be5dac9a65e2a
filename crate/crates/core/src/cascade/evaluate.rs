//! Running chains over a rendered split and tabulating the results.

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::{run_cascade, CascadeChain, CascadeInput, GroundTruth, StageBeta, StageRole};
use crate::audio::read_wav;
use crate::error::{Error, Result};
use crate::metrics::{csv_error, evaluate_task, split_ids, EvalReport, EvalRow, TaskKind, AVERAGING_CONVENTION};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageBetaStats {
    pub role: StageRole,
    pub count: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// One pipeline's line in the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CascadeRow {
    pub pre_removes: String,
    pub separate_while_removing: String,
    pub post_removes: String,
    pub rescale: bool,
    pub mixtures: usize,
    pub output_db: f64,
    pub delta_db: f64,
    pub input_db: f64,
    /// Fraction of mixtures whose SI-SDR improved.
    pub improved_fraction: f64,
    pub betas: Vec<StageBetaStats>,
}

#[derive(Debug, Clone)]
pub struct CascadeReport {
    pub task: TaskKind,
    pub rows: Vec<CascadeRow>,
    /// Per-mixture scores for each row.
    pub details: Vec<EvalReport>,
}

fn beta_stats(betas: &[StageBeta]) -> Vec<StageBetaStats> {
    [StageRole::Pre, StageRole::Separator, StageRole::Post]
        .into_iter()
        .filter_map(|role| {
            let v: Vec<f64> = betas.iter().filter(|b| b.role == role).filter_map(|b| b.beta).collect();
            if v.is_empty() {
                return None;
            }
            Some(StageBetaStats {
                role,
                count: v.len(),
                mean: v.iter().sum::<f64>() / v.len() as f64,
                min: v.iter().cloned().fold(f64::INFINITY, f64::min),
                max: v.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            })
        })
        .collect()
}

fn left(path: &Path) -> Result<(Vec<f64>, u32)> {
    let b = read_wav(path)?;
    Ok((b.channel(0).to_vec(), b.sample_rate()))
}

struct Loaded {
    id: String,
    rate: u32,
    mixture: Vec<f64>,
    truth: GroundTruth,
}

fn load(split_dir: &Path, id: &str, task: TaskKind) -> Result<Loaded> {
    let file = |c: &str| split_dir.join(c).join(format!("{id}.wav"));
    let (mixture, rate) = left(&file(task.mixture_component()))?;
    let get = |c: &str| left(&file(c)).map(|(x, _)| x);
    Ok(Loaded {
        id: id.to_string(),
        rate,
        mixture,
        truth: GroundTruth {
            anechoic: [get("s1_anechoic")?, get("s2_anechoic")?],
            reverberant: [get("s1_reverb")?, get("s2_reverb")?],
            noise: get("noise")?,
        },
    })
}

/// Runs every chain on every mixture of a rendered split folder and scores
/// the outputs against the anechoic sources with permutation search.
pub fn evaluate_cascades(split_dir: &Path, task: TaskKind, chains: &[CascadeChain]) -> Result<CascadeReport> {
    let ids = split_ids(split_dir)?;
    if ids.is_empty() {
        return Err(Error::MissingComponent(format!(
            "no mixtures under {}",
            split_dir.display()
        )));
    }
    // Per mixture: one (row, betas) per chain.
    let per_mixture: Vec<Vec<(EvalRow, Vec<StageBeta>)>> = ids
        .par_iter()
        .map(|id| {
            let m = load(split_dir, id, task)?;
            let input = CascadeInput {
                mixture_id: &m.id,
                sample_rate: m.rate,
                task,
                mixture: &m.mixture,
                truth: Some(&m.truth),
            };
            chains
                .iter()
                .map(|chain| {
                    let out = run_cascade(chain, &input)?;
                    let row = evaluate_task(&m.id, &out.estimates, &m.mixture, task, &m.truth.anechoic)?;
                    Ok((row, out.betas))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::with_capacity(chains.len());
    let mut details = Vec::with_capacity(chains.len());
    for (c, chain) in chains.iter().enumerate() {
        let eval: Vec<EvalRow> = per_mixture.iter().map(|m| m[c].0.clone()).collect();
        let betas: Vec<StageBeta> = per_mixture.iter().flat_map(|m| m[c].1.iter().copied()).collect();
        let n = eval.len() as f64;
        let mean = |f: fn(&EvalRow) -> f64| eval.iter().map(f).sum::<f64>() / n;
        let [pre, sep, post] = chain.columns();
        rows.push(CascadeRow {
            pre_removes: pre,
            separate_while_removing: sep,
            post_removes: post,
            rescale: chain.rescale,
            mixtures: eval.len(),
            output_db: mean(|r| r.mean_db),
            delta_db: mean(|r| r.delta_db),
            input_db: mean(|r| r.input_db),
            improved_fraction: eval.iter().filter(|r| r.delta_db > 0.0).count() as f64 / n,
            betas: beta_stats(&betas),
        });
        details.push(EvalReport::new(eval));
    }
    Ok(CascadeReport { task, rows, details })
}

impl CascadeReport {
    /// Table layout: system columns, output SI-SDR, improvement, then
    /// the input level and per-stage scale statistics.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record([
            "task",
            "pre_removes",
            "separate_while_removing",
            "post_removes",
            "output_si_sdr_db",
            "delta_db",
            "input_si_sdr_db",
            "mixtures",
            "improved_fraction",
            "rescale",
            "beta_pre_mean",
            "beta_separator_mean",
            "beta_post_mean",
        ])
        .map_err(|e| csv_error(path, e))?;
        for r in &self.rows {
            let beta = |role: StageRole| {
                r.betas
                    .iter()
                    .find(|b| b.role == role)
                    .map_or(String::new(), |b| b.mean.to_string())
            };
            w.write_record([
                self.task.to_string(),
                r.pre_removes.clone(),
                r.separate_while_removing.clone(),
                r.post_removes.clone(),
                format!("{:.4}", r.output_db),
                format!("{:.4}", r.delta_db),
                format!("{:.4}", r.input_db),
                r.mixtures.to_string(),
                format!("{:.4}", r.improved_fraction),
                r.rescale.to_string(),
                beta(StageRole::Pre),
                beta(StageRole::Separator),
                beta(StageRole::Post),
            ])
            .map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "task": self.task,
            "averaging": AVERAGING_CONVENTION,
            "rows": self.rows,
        })
    }

    /// Fixed-width text table.
    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<10} {:<10} {:<10} {:>9} {:>8}\n",
            "pre", "separate", "post", "output", "delta"
        );
        for r in &self.rows {
            s.push_str(&format!(
                "{:<10} {:<10} {:<10} {:>9.2} {:>8.2}\n",
                r.pre_removes, r.separate_while_removing, r.post_removes, r.output_db, r.delta_db
            ));
        }
        if let Some(r) = self.rows.first() {
            s.push_str(&format!(
                "input SI-SDR: {:.2} dB over {} mixtures\n",
                r.input_db, r.mixtures
            ));
        }
        s
    }
}
