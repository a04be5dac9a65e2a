//! JSON description of a pipeline.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{
    CascadeChain, FileProcessor, Identity, Miscaled, OracleMask, OracleMaskKind, Processor, RemovalSet, StageRole,
    Topology,
};
use crate::audio::StftConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StageKind {
    Identity,
    Oracle {
        mask: OracleMaskKind,
        #[serde(default)]
        stft: StftConfig,
    },
    /// Outputs read from disk; see [`FileProcessor`] for the layout.
    File {
        dir: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDescriptor {
    pub role: StageRole,
    #[serde(flatten)]
    pub kind: StageKind,
    /// Interference is implied for the separator.
    #[serde(default)]
    pub removes: RemovalSet,
    /// Multiplies the stage outputs, to emulate a level mismatch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
}

impl StageDescriptor {
    fn build(&self) -> Result<Arc<dyn Processor>> {
        let separator = self.role == StageRole::Separator;
        let arity = if separator { 2 } else { 1 };
        let removes = RemovalSet {
            interference: separator,
            ..self.removes
        };
        let base: Arc<dyn Processor> = match &self.kind {
            StageKind::Identity => Arc::new(Identity { arity, removes }),
            StageKind::Oracle { mask, stft } => Arc::new(OracleMask {
                kind: *mask,
                stft: *stft,
                removes,
                arity,
            }),
            StageKind::File { dir } => Arc::new(FileProcessor {
                dir: dir.clone(),
                arity,
                removes,
            }),
        };
        Ok(match self.scale {
            Some(factor) if factor != 1.0 => Arc::new(Miscaled { inner: base, factor }),
            _ => base,
        })
    }
}

fn default_rescale() -> bool {
    true
}

/// Ordered stage list plus the rescaling flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    #[serde(default = "default_rescale")]
    pub rescale: bool,
    pub stages: Vec<StageDescriptor>,
}

impl PipelineSpec {
    /// Uses `kind` for every stage of a topology.
    pub fn from_topology(topology: Topology, kind: StageKind, rescale: bool) -> Self {
        let stage = |role, removes| StageDescriptor {
            role,
            kind: kind.clone(),
            removes,
            scale: None,
        };
        let mut stages = Vec::new();
        if let Some(r) = topology.pre {
            stages.push(stage(StageRole::Pre, r));
        }
        stages.push(stage(StageRole::Separator, topology.separator));
        if let Some(r) = topology.post {
            stages.push(stage(StageRole::Post, r));
        }
        PipelineSpec { rescale, stages }
    }

    pub fn build(&self) -> Result<CascadeChain> {
        let (mut pre, mut sep, mut post) = (None, None, None);
        let mut last = None;
        for s in &self.stages {
            let slot = match s.role {
                StageRole::Pre => &mut pre,
                StageRole::Separator => &mut sep,
                StageRole::Post => &mut post,
            };
            if slot.is_some() {
                return Err(Error::InvalidChain(format!("more than one {} stage", s.role.as_str())));
            }
            if last.is_some_and(|r| r as u8 > s.role as u8) {
                return Err(Error::InvalidChain("stages must be listed pre, separator, post".into()));
            }
            last = Some(s.role);
            *slot = Some(s.build()?);
        }
        let separator = sep.ok_or_else(|| Error::InvalidChain("no separator stage".into()))?;
        CascadeChain::new(pre, separator, post, self.rescale)
    }

    pub fn read(path: &Path) -> Result<Vec<PipelineSpec>> {
        if !path.exists() {
            return Err(Error::FileNotFound {
                path: path.to_path_buf(),
            });
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        // A file holds either one pipeline or a list of them.
        match serde_json::from_str::<Vec<PipelineSpec>>(&text) {
            Ok(list) => Ok(list),
            Err(_) => Ok(vec![serde_json::from_str(&text)?]),
        }
    }
}
