use std::path::PathBuf;
use std::sync::Arc;

use super::{Processor, RemovalSet, StageContext};
use crate::audio::read_wav;
use crate::error::{Error, Result};

/// Passes its input through, once per output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Identity {
    pub arity: usize,
    pub removes: RemovalSet,
}

impl Processor for Identity {
    fn name(&self) -> String {
        "identity".into()
    }

    fn arity(&self) -> usize {
        self.arity
    }

    fn removes(&self) -> RemovalSet {
        self.removes
    }

    fn process(&self, input: &[f64], _ctx: &StageContext<'_>) -> Result<Vec<Vec<f64>>> {
        Ok(vec![input.to_vec(); self.arity])
    }
}

/// Wraps a stage and multiplies its outputs by a constant.
#[derive(Debug, Clone)]
pub struct Miscaled {
    pub inner: Arc<dyn Processor>,
    pub factor: f64,
}

impl Processor for Miscaled {
    fn name(&self) -> String {
        format!("{}x{}", self.inner.name(), self.factor)
    }

    fn arity(&self) -> usize {
        self.inner.arity()
    }

    fn removes(&self) -> RemovalSet {
        self.inner.removes()
    }

    fn process(&self, input: &[f64], ctx: &StageContext<'_>) -> Result<Vec<Vec<f64>>> {
        let mut out = self.inner.process(input, ctx)?;
        for o in &mut out {
            o.iter_mut().for_each(|v| *v *= self.factor);
        }
        Ok(out)
    }
}

/// Stage whose outputs were produced elsewhere and stored as WAV files.
///
/// Layout under `dir`: a pre-enhancer reads `<id>.wav`; a separator reads
/// `s1/<id>.wav` and `s2/<id>.wav`; a post-enhancer on source `k` reads
/// `s{k+1}/<id>.wav`. Only the first channel is used.
#[derive(Debug, Clone, PartialEq)]
pub struct FileProcessor {
    pub dir: PathBuf,
    pub arity: usize,
    pub removes: RemovalSet,
}

impl Processor for FileProcessor {
    fn name(&self) -> String {
        format!("file:{}", self.dir.display())
    }

    fn arity(&self) -> usize {
        self.arity
    }

    fn removes(&self) -> RemovalSet {
        self.removes
    }

    fn process(&self, _input: &[f64], ctx: &StageContext<'_>) -> Result<Vec<Vec<f64>>> {
        let file = format!("{}.wav", ctx.mixture_id);
        let paths: Vec<PathBuf> = match (self.arity, ctx.branch) {
            (1, None) => vec![self.dir.join(&file)],
            (1, Some(k)) => vec![self.dir.join(format!("s{}", k + 1)).join(&file)],
            (n, _) => (1..=n).map(|k| self.dir.join(format!("s{k}")).join(&file)).collect(),
        };
        paths
            .iter()
            .map(|p| {
                if !p.exists() {
                    return Err(Error::MissingComponent(format!("stage output {}", p.display())));
                }
                let buf = read_wav(p)?;
                if buf.sample_rate() != ctx.sample_rate {
                    return Err(Error::SampleRateMismatch {
                        left: buf.sample_rate(),
                        right: ctx.sample_rate,
                    });
                }
                Ok(buf.channel(0).to_vec())
            })
            .collect()
    }
}
