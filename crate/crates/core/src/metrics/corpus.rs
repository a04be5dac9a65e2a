//! Evaluation of estimate folders against a rendered split.

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{evaluate_task, EvalReport, TaskKind};
use crate::audio::read_wav;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DirectoryEval {
    pub report: EvalReport,
    /// Mixture ids in evaluation order.
    pub ids: Vec<String>,
}

/// `<estimates>/s{i}/<id>.wav`, falling back to `<estimates>/s{i}_anechoic/<id>.wav`.
pub fn estimate_path(estimates: &Path, source: usize, id: &str) -> PathBuf {
    let primary = estimates.join(format!("s{}", source + 1)).join(format!("{id}.wav"));
    if primary.exists() {
        return primary;
    }
    estimates
        .join(format!("s{}_anechoic", source + 1))
        .join(format!("{id}.wav"))
}

fn left_channel(path: &Path) -> Result<Vec<f64>> {
    Ok(read_wav(path)?.channel(0).to_vec())
}

/// Mixture ids present in a split folder, sorted.
pub(crate) fn split_ids(split_dir: &Path) -> Result<Vec<String>> {
    let folder = split_dir.join("s1_anechoic");
    let entries = std::fs::read_dir(&folder).map_err(|e| Error::io(&folder, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(&folder, e))?.path();
        if path.extension().is_some_and(|e| e == "wav") {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                ids.push(stem.to_string());
            }
        }
    }
    ids.sort();
    Ok(ids)
}

/// Scores every mixture of a rendered split folder (e.g.
/// `wav16k/min/tt`) for `task`, using left channels. Estimates are
/// truncated or zero-padded to the reference length.
pub fn evaluate_directory(split_dir: &Path, estimates: &Path, task: TaskKind) -> Result<DirectoryEval> {
    let ids = split_ids(split_dir)?;
    let rows = ids
        .par_iter()
        .map(|id| {
            let refs = (1..=2)
                .map(|i| left_channel(&split_dir.join(format!("s{i}_anechoic")).join(format!("{id}.wav"))))
                .collect::<Result<Vec<_>>>()?;
            let mixture = left_channel(&split_dir.join(task.mixture_component()).join(format!("{id}.wav")))?;
            let outputs = (0..2)
                .map(|i| {
                    let path = estimate_path(estimates, i, id);
                    if !path.exists() {
                        return Err(Error::MissingComponent(format!("estimate {} for {id}", path.display())));
                    }
                    let mut e = left_channel(&path)?;
                    e.resize(refs[i].len(), 0.0);
                    Ok(e)
                })
                .collect::<Result<Vec<_>>>()?;
            evaluate_task(id, &outputs, &mixture, task, &refs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DirectoryEval {
        report: EvalReport::new(rows),
        ids,
    })
}
