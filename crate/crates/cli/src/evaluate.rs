use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use serde::{Deserialize, Serialize};

use reverbmix::audio::StftConfig;
use reverbmix::cascade::{
    enumerate_task_pipelines, evaluate_cascades, Identity, OracleMask, OracleMaskKind, PipelineSpec, Processor,
    StageRole,
};
use reverbmix::metrics::{evaluate_directory, TaskKind};
use reverbmix::mix::{Split, Variant};

use crate::config::{config_error, is_false, CmdResult, Failure};

/// The rendered split folder: `--split-dir`, or root, variant and split.
fn resolve(
    split_dir: &Option<PathBuf>,
    root: &Option<PathBuf>,
    variant: &Option<String>,
    split: &Option<String>,
) -> CmdResult<PathBuf> {
    let dir = match (split_dir, root) {
        (Some(d), _) => d.clone(),
        (None, Some(root)) => {
            let variant: Variant = variant.as_deref().unwrap_or("8k/min").parse().map_err(config_error)?;
            let split: Split = split.as_deref().unwrap_or("tt").parse().map_err(config_error)?;
            root.join(variant.dir()).join(split.dir())
        }
        (None, None) => return Err(config_error("pass --split-dir or --root")),
    };
    if !dir.join("s1_anechoic").is_dir() {
        return Err(Failure::MissingCorpus(format!(
            "{} is not a rendered split",
            dir.display()
        )));
    }
    Ok(dir)
}

fn parse_task(t: Option<&str>) -> CmdResult<TaskKind> {
    t.unwrap_or("noisy_reverberant").parse().map_err(config_error)
}

fn write_json(path: &Path, v: &serde_json::Value) -> CmdResult {
    std::fs::write(path, serde_json::to_string_pretty(v).map_err(anyhow::Error::from)?)?;
    Ok(())
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateArgs {
    /// Rendered split folder, e.g. out/wav8k/min/tt
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_dir: Option<PathBuf>,
    /// Output root of `generate`
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
    /// Variant under the root [default: 8k/min]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// Split under the variant [default: tt]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    /// Estimates with s1/<id>.wav and s2/<id>.wav
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub estimates: Option<PathBuf>,
    /// clean, noisy, reverberant or noisy_reverberant [default: noisy_reverberant]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    /// Folder for eval.csv and eval_summary.json [default: the estimates folder]
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

pub fn run_evaluate(a: &EvaluateArgs) -> CmdResult {
    let dir = resolve(&a.split_dir, &a.root, &a.variant, &a.split)?;
    let task = parse_task(a.task.as_deref())?;
    let estimates = a
        .estimates
        .clone()
        .ok_or_else(|| config_error("--estimates is required"))?;
    if !estimates.is_dir() {
        return Err(Failure::MissingCorpus(format!(
            "estimates folder {}",
            estimates.display()
        )));
    }
    let eval = evaluate_directory(&dir, &estimates, task)?;
    let out = a.out.clone().unwrap_or_else(|| estimates.clone());
    std::fs::create_dir_all(&out)?;
    eval.report.write_csv(&out.join("eval.csv"))?;
    let mut summary = eval.report.summary_json();
    summary["config"] = serde_json::json!({ "command": "evaluate", "task": task });
    write_json(&out.join("eval_summary.json"), &summary)?;
    println!(
        "{:<18} {:>5} {:>9} {:>9} {:>9}",
        "task", "n", "output", "input", "delta"
    );
    for s in eval.report.summary() {
        println!(
            "{:<18} {:>5} {:>9.2} {:>9.2} {:>9.2}",
            s.task.as_str(),
            s.mixtures,
            s.mean_output_db,
            s.mean_input_db,
            s.mean_delta_db
        );
    }
    Ok(())
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeArgs {
    /// Rendered split folder, e.g. out/wav8k/min/tt
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split_dir: Option<PathBuf>,
    /// Output root of `generate`
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root: Option<PathBuf>,
    /// Variant under the root [default: 8k/min]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    /// Split under the variant [default: tt]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<String>,
    /// clean, noisy, reverberant or noisy_reverberant [default: noisy_reverberant]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    /// Stage type for every legal pipeline: ibm, irm, wiener or identity [default: irm]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<String>,
    /// JSON pipeline description (one pipeline or a list) instead of --oracle
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pipeline: Option<PathBuf>,
    /// Feed stage outputs on without rescaling them
    #[arg(long)]
    #[serde(skip_serializing_if = "is_false")]
    pub no_rescale: bool,
    /// Oracle STFT window in ms [default: 32]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_ms: Option<f64>,
    /// Oracle STFT hop in ms [default: 8]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hop_ms: Option<f64>,
    /// Folder for cascade_<task>.csv and cascade_<task>.json
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

pub fn run_cascade(a: &CascadeArgs) -> CmdResult {
    let dir = resolve(&a.split_dir, &a.root, &a.variant, &a.split)?;
    let task = parse_task(a.task.as_deref())?;
    let rescale = !a.no_rescale;
    let defaults = StftConfig::default();
    let stft = StftConfig {
        window_ms: a.window_ms.unwrap_or(defaults.window_ms),
        hop_ms: a.hop_ms.unwrap_or(defaults.hop_ms),
        ..defaults
    };
    let chains = match &a.pipeline {
        Some(path) => PipelineSpec::read(path)?
            .into_iter()
            .map(|mut spec| {
                spec.rescale &= rescale;
                spec.build()
            })
            .collect::<reverbmix::Result<Vec<_>>>()?,
        None => {
            let oracle = a.oracle.as_deref().unwrap_or("irm");
            let kind = if oracle == "identity" {
                None
            } else {
                Some(oracle.parse::<OracleMaskKind>().map_err(config_error)?)
            };
            enumerate_task_pipelines(task, rescale, |role, removes| {
                let arity = if role == StageRole::Separator { 2 } else { 1 };
                Ok(match kind {
                    None => Arc::new(Identity { arity, removes }) as Arc<dyn Processor>,
                    Some(k) => Arc::new(OracleMask {
                        kind: k,
                        stft,
                        removes,
                        arity,
                    }),
                })
            })?
        }
    };
    let report = evaluate_cascades(&dir, task, &chains)?;
    print!("{}", report.table());
    if let Some(out) = &a.out {
        std::fs::create_dir_all(out)?;
        report.write_csv(&out.join(format!("cascade_{task}.csv")))?;
        let mut echo = a.clone();
        echo.out = None;
        echo.split_dir = None;
        echo.root = None;
        let mut json = report.to_json();
        json["config"] = serde_json::json!({ "command": "cascade", "args": echo });
        write_json(&out.join(format!("cascade_{task}.json")), &json)?;
    }
    Ok(())
}
