use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::pit_assign;
use crate::error::{Error, Result};

/// How corpus means are formed.
pub const AVERAGING_CONVENTION: &str = "per-mixture mean over sources, then unweighted mean over mixtures";

/// The four core tasks. Targets are always the anechoic sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Clean,
    Noisy,
    Reverberant,
    NoisyReverberant,
}

impl TaskKind {
    pub const ALL: [TaskKind; 4] = [
        TaskKind::Clean,
        TaskKind::Noisy,
        TaskKind::Reverberant,
        TaskKind::NoisyReverberant,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Clean => "clean",
            TaskKind::Noisy => "noisy",
            TaskKind::Reverberant => "reverberant",
            TaskKind::NoisyReverberant => "noisy_reverberant",
        }
    }

    /// Output-tree folder holding this task's input mixture.
    pub fn mixture_component(self) -> &'static str {
        match self {
            TaskKind::Clean => "mix_clean",
            TaskKind::Noisy => "mix_noisy",
            TaskKind::Reverberant => "mix_reverb",
            TaskKind::NoisyReverberant => "mix_both",
        }
    }

    pub fn noisy(self) -> bool {
        matches!(self, TaskKind::Noisy | TaskKind::NoisyReverberant)
    }

    pub fn reverberant(self) -> bool {
        matches!(self, TaskKind::Reverberant | TaskKind::NoisyReverberant)
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "clean" => Ok(TaskKind::Clean),
            "noisy" => Ok(TaskKind::Noisy),
            "reverberant" | "reverb" => Ok(TaskKind::Reverberant),
            "noisy_reverberant" | "both" => Ok(TaskKind::NoisyReverberant),
            other => Err(format!("unknown task `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub mixture_id: String,
    pub task: TaskKind,
    /// Output SI-SDR per reference, in reference order.
    pub source_db: Vec<f64>,
    pub capped: Vec<bool>,
    /// `permutation[j]` is the output assigned to reference `j`.
    pub permutation: Vec<usize>,
    pub mean_db: f64,
    pub input_db: f64,
    pub delta_db: f64,
}

/// Scores `outputs` against the anechoic `references`; the input score uses
/// the unprocessed mixture as the estimate for every reference.
pub fn evaluate_task<O: AsRef<[f64]>, R: AsRef<[f64]>>(
    mixture_id: &str,
    outputs: &[O],
    mixture: &[f64],
    task: TaskKind,
    references: &[R],
) -> Result<EvalRow> {
    if references.is_empty() {
        return Err(Error::MissingComponent("reference sources".into()));
    }
    let output = pit_assign(outputs, references)?;
    let copies = vec![mixture; references.len()];
    let input = pit_assign(&copies, references)?;
    Ok(EvalRow {
        mixture_id: mixture_id.to_string(),
        task,
        source_db: output.scores.iter().map(|s| s.db).collect(),
        capped: output.scores.iter().map(|s| s.capped).collect(),
        permutation: output.permutation,
        mean_db: output.mean_db,
        input_db: input.mean_db,
        delta_db: output.mean_db - input.mean_db,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub task: TaskKind,
    pub mixtures: usize,
    pub mean_output_db: f64,
    pub mean_input_db: f64,
    pub mean_delta_db: f64,
    /// Rows with at least one capped source score.
    pub capped_rows: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    pub fn new(rows: Vec<EvalRow>) -> Self {
        EvalReport { rows }
    }

    /// Per-task means, tasks in canonical order. Independent of row order.
    pub fn summary(&self) -> Vec<TaskSummary> {
        TaskKind::ALL
            .iter()
            .filter_map(|&task| {
                let rows: Vec<&EvalRow> = self.rows.iter().filter(|r| r.task == task).collect();
                if rows.is_empty() {
                    return None;
                }
                let mean = |f: fn(&EvalRow) -> f64| {
                    let mut v: Vec<f64> = rows.iter().map(|r| f(r)).collect();
                    v.sort_by(f64::total_cmp);
                    v.iter().sum::<f64>() / v.len() as f64
                };
                Some(TaskSummary {
                    task,
                    mixtures: rows.len(),
                    mean_output_db: mean(|r| r.mean_db),
                    mean_input_db: mean(|r| r.input_db),
                    mean_delta_db: mean(|r| r.delta_db),
                    capped_rows: rows.iter().filter(|r| r.capped.iter().any(|&c| c)).count(),
                })
            })
            .collect()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let sources = self.rows.iter().map(|r| r.source_db.len()).max().unwrap_or(0);
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        let mut header = vec!["mixture_id".to_string(), "task".to_string()];
        header.extend((1..=sources).map(|i| format!("s{i}_db")));
        header.extend(
            ["mean_db", "input_db", "delta_db", "permutation", "capped"]
                .iter()
                .map(|s| s.to_string()),
        );
        w.write_record(&header).map_err(|e| csv_error(path, e))?;
        for r in &self.rows {
            let mut rec = vec![r.mixture_id.clone(), r.task.to_string()];
            rec.extend((0..sources).map(|i| r.source_db.get(i).map_or(String::new(), |v| v.to_string())));
            rec.push(r.mean_db.to_string());
            rec.push(r.input_db.to_string());
            rec.push(r.delta_db.to_string());
            rec.push(
                r.permutation
                    .iter()
                    .map(|p| p.to_string())
                    .collect::<Vec<_>>()
                    .join(" "),
            );
            rec.push(r.capped.iter().any(|&c| c).to_string());
            w.write_record(&rec).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// JSON summary: per-task means plus the averaging convention.
    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "averaging": AVERAGING_CONVENTION,
            "tasks": self.summary(),
        })
    }
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}
