//! Enhancement and separation stages chained into pipelines, with optional
//! rescaling of every stage output against that stage's input.

mod evaluate;
mod oracle;
mod processors;
mod spec;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{dot, TaskKind};

pub use evaluate::{evaluate_cascades, CascadeReport, CascadeRow, StageBetaStats};
pub use oracle::{apply_oracle_mask, oracle_mask, OracleMask, OracleMaskKind};
pub use processors::{FileProcessor, Identity, Miscaled};
pub use spec::{PipelineSpec, StageDescriptor, StageKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Removal {
    Noise,
    Reverberation,
    Interference,
}

/// What a stage takes out of its input.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "Vec<Removal>", into = "Vec<Removal>")]
pub struct RemovalSet {
    pub noise: bool,
    pub reverberation: bool,
    pub interference: bool,
}

impl RemovalSet {
    pub const NONE: RemovalSet = RemovalSet {
        noise: false,
        reverberation: false,
        interference: false,
    };
    pub const NOISE: RemovalSet = RemovalSet {
        noise: true,
        ..RemovalSet::NONE
    };
    pub const REVERBERATION: RemovalSet = RemovalSet {
        reverberation: true,
        ..RemovalSet::NONE
    };

    pub fn with(mut self, r: Removal) -> Self {
        match r {
            Removal::Noise => self.noise = true,
            Removal::Reverberation => self.reverberation = true,
            Removal::Interference => self.interference = true,
        }
        self
    }

    pub fn is_empty(&self) -> bool {
        !(self.noise || self.reverberation || self.interference)
    }

    /// Noise and reverberation only, as shown in the system columns:
    /// `noise+rev`, `noise`, `rev` or `-`.
    pub fn enhancement_label(&self) -> &'static str {
        match (self.noise, self.reverberation) {
            (true, true) => "noise+rev",
            (true, false) => "noise",
            (false, true) => "rev",
            (false, false) => "-",
        }
    }
}

impl From<Vec<Removal>> for RemovalSet {
    fn from(v: Vec<Removal>) -> Self {
        v.into_iter().fold(RemovalSet::NONE, RemovalSet::with)
    }
}

impl From<RemovalSet> for Vec<Removal> {
    fn from(s: RemovalSet) -> Self {
        let mut v = Vec::new();
        if s.noise {
            v.push(Removal::Noise);
        }
        if s.reverberation {
            v.push(Removal::Reverberation);
        }
        if s.interference {
            v.push(Removal::Interference);
        }
        v
    }
}

/// Which ground-truth signal a waveform is supposed to equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SignalState {
    /// `None` for both speakers, `Some(i)` for speaker `i` alone.
    pub source: Option<usize>,
    pub reverberant: bool,
    pub noisy: bool,
}

impl SignalState {
    /// State of a task's input mixture.
    pub fn mixture(task: TaskKind) -> Self {
        SignalState {
            source: None,
            reverberant: task.reverberant(),
            noisy: task.noisy(),
        }
    }

    /// States of the outputs of a stage with `arity` outputs applied to `self`.
    pub fn after(self, removes: RemovalSet, arity: usize) -> Vec<SignalState> {
        let base = SignalState {
            source: self.source,
            reverberant: self.reverberant && !removes.reverberation,
            noisy: self.noisy && !removes.noise,
        };
        if removes.interference {
            (0..arity)
                .map(|k| SignalState {
                    source: Some(k),
                    ..base
                })
                .collect()
        } else {
            vec![base; arity]
        }
    }
}

/// Left-channel components of one mixture, for oracle stages.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub anechoic: [Vec<f64>; 2],
    pub reverberant: [Vec<f64>; 2],
    pub noise: Vec<f64>,
}

impl GroundTruth {
    /// The ideal waveform for `state`, `len` samples long.
    pub fn target(&self, state: SignalState, len: usize) -> Vec<f64> {
        let speech = if state.reverberant {
            &self.reverberant
        } else {
            &self.anechoic
        };
        let mut out = vec![0.0; len];
        let sources: Vec<usize> = match state.source {
            Some(i) => vec![i],
            None => vec![0, 1],
        };
        for i in sources {
            for (o, v) in out.iter_mut().zip(&speech[i]) {
                *o += v;
            }
        }
        if state.noisy {
            for (o, v) in out.iter_mut().zip(&self.noise) {
                *o += v;
            }
        }
        out
    }
}

/// Everything a stage may consult besides its input waveform.
#[derive(Debug, Clone)]
pub struct StageContext<'a> {
    pub mixture_id: &'a str,
    pub sample_rate: u32,
    pub truth: Option<&'a GroundTruth>,
    /// Separated source this stage works on, for post-enhancers.
    pub branch: Option<usize>,
    pub input_state: SignalState,
    /// Ideal state of each output, in output order.
    pub output_states: Vec<SignalState>,
}

/// One waveform-to-waveform stage.
pub trait Processor: Send + Sync + fmt::Debug {
    fn name(&self) -> String;
    /// 1 for enhancers, 2 for separators.
    fn arity(&self) -> usize;
    fn removes(&self) -> RemovalSet;
    fn process(&self, input: &[f64], ctx: &StageContext<'_>) -> Result<Vec<Vec<f64>>>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageRole {
    Pre,
    Separator,
    Post,
}

impl StageRole {
    pub fn as_str(self) -> &'static str {
        match self {
            StageRole::Pre => "pre",
            StageRole::Separator => "separator",
            StageRole::Post => "post",
        }
    }
}

/// Optional pre-enhancer, one separator, optional per-source post-enhancer.
#[derive(Debug, Clone)]
pub struct CascadeChain {
    pub pre: Option<Arc<dyn Processor>>,
    pub separator: Arc<dyn Processor>,
    pub post: Option<Arc<dyn Processor>>,
    pub rescale: bool,
}

impl CascadeChain {
    pub fn new(
        pre: Option<Arc<dyn Processor>>,
        separator: Arc<dyn Processor>,
        post: Option<Arc<dyn Processor>>,
        rescale: bool,
    ) -> Result<Self> {
        let chain = CascadeChain {
            pre,
            separator,
            post,
            rescale,
        };
        chain.validate()?;
        Ok(chain)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidChain(m));
        if self.separator.arity() != 2 || !self.separator.removes().interference {
            return bad(format!(
                "separator `{}` must be 1->2 and remove interference",
                self.separator.name()
            ));
        }
        for (role, stage) in [(StageRole::Pre, &self.pre), (StageRole::Post, &self.post)] {
            if let Some(p) = stage {
                if p.arity() != 1 || p.removes().interference {
                    return bad(format!(
                        "{} stage `{}` must be a 1->1 enhancer",
                        role.as_str(),
                        p.name()
                    ));
                }
            }
        }
        if let Some(p) = &self.post {
            if p.removes().noise {
                return bad(format!("post stage `{}` removes noise after separation", p.name()));
            }
        }
        Ok(())
    }

    /// Pre, separator and post removal labels; `none` for an absent stage.
    pub fn columns(&self) -> [String; 3] {
        let stage = |p: &Option<Arc<dyn Processor>>| {
            p.as_ref()
                .map_or("none".to_string(), |p| p.removes().enhancement_label().to_string())
        };
        [
            stage(&self.pre),
            self.separator.removes().enhancement_label().to_string(),
            stage(&self.post),
        ]
    }

    /// Removal sets of the final outputs relative to the input mixture.
    pub fn total_removal(&self) -> RemovalSet {
        let mut total = self.separator.removes();
        for p in self.pre.iter().chain(&self.post) {
            let r = p.removes();
            total.noise |= r.noise;
            total.reverberation |= r.reverberation;
        }
        total
    }
}

impl fmt::Display for CascadeChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [pre, sep, post] = self.columns();
        write!(f, "pre={pre} sep={sep} post={post}")
    }
}

/// `beta = <x, s> / |s|^2`; returns `beta * s` and `beta`.
pub fn rescale_to_mixture(estimate: &[f64], mixture: &[f64]) -> Result<(Vec<f64>, f64)> {
    if estimate.len() != mixture.len() {
        return Err(Error::LengthMismatch {
            left: estimate.len(),
            right: mixture.len(),
        });
    }
    let energy = dot(estimate, estimate);
    if !(energy > 0.0) {
        return Err(Error::ZeroEnergy("estimate to rescale"));
    }
    let beta = dot(estimate, mixture) / energy;
    Ok((estimate.iter().map(|v| beta * v).collect(), beta))
}

/// Scale factor observed at one stage output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StageBeta {
    pub role: StageRole,
    /// Output index for the separator, source index for post stages.
    pub output: usize,
    /// `None` when the output was silent.
    pub beta: Option<f64>,
    pub applied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CascadeOutput {
    pub estimates: Vec<Vec<f64>>,
    pub betas: Vec<StageBeta>,
}

/// Per-mixture inputs to a chain run.
#[derive(Debug, Clone)]
pub struct CascadeInput<'a> {
    pub mixture_id: &'a str,
    pub sample_rate: u32,
    pub task: TaskKind,
    pub mixture: &'a [f64],
    pub truth: Option<&'a GroundTruth>,
}

fn run_stage(
    processor: &dyn Processor,
    role: StageRole,
    input: &[f64],
    state: SignalState,
    branch: Option<usize>,
    run: &CascadeInput<'_>,
    rescale: bool,
    betas: &mut Vec<StageBeta>,
) -> Result<(Vec<Vec<f64>>, Vec<SignalState>)> {
    let output_states = state.after(processor.removes(), processor.arity());
    let ctx = StageContext {
        mixture_id: run.mixture_id,
        sample_rate: run.sample_rate,
        truth: run.truth,
        branch,
        input_state: state,
        output_states: output_states.clone(),
    };
    let outputs = processor.process(input, &ctx)?;
    if outputs.len() != processor.arity() {
        return Err(Error::Arity {
            stage: processor.name(),
            expected: processor.arity(),
            got: outputs.len(),
        });
    }
    let mut locked = Vec::with_capacity(outputs.len());
    for (k, mut out) in outputs.into_iter().enumerate() {
        out.resize(input.len(), 0.0);
        let beta = rescale_to_mixture(&out, input).ok().map(|(_, b)| b);
        betas.push(StageBeta {
            role,
            output: branch.unwrap_or(k),
            beta,
            applied: rescale,
        });
        if rescale {
            out = rescale_to_mixture(&out, input)?.0;
        }
        locked.push(out);
    }
    Ok((locked, output_states))
}

/// Runs the stages in order. Every stage output is length-locked to the
/// chain input and, with rescaling on, scaled against the stage's own input.
pub fn run_cascade(chain: &CascadeChain, run: &CascadeInput<'_>) -> Result<CascadeOutput> {
    chain.validate()?;
    let mut betas = Vec::new();
    let mut state = SignalState::mixture(run.task);
    let mut signal = run.mixture.to_vec();
    if let Some(pre) = &chain.pre {
        let (mut out, states) = run_stage(
            pre.as_ref(),
            StageRole::Pre,
            &signal,
            state,
            None,
            run,
            chain.rescale,
            &mut betas,
        )?;
        signal = out.remove(0);
        state = states[0];
    }
    let (separated, states) = run_stage(
        chain.separator.as_ref(),
        StageRole::Separator,
        &signal,
        state,
        None,
        run,
        chain.rescale,
        &mut betas,
    )?;
    let estimates = match &chain.post {
        None => separated,
        Some(post) => separated
            .iter()
            .zip(states)
            .enumerate()
            .map(|(k, (s, st))| {
                run_stage(
                    post.as_ref(),
                    StageRole::Post,
                    s,
                    st,
                    Some(k),
                    run,
                    chain.rescale,
                    &mut betas,
                )
                .map(|(mut o, _)| o.remove(0))
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(CascadeOutput { estimates, betas })
}

/// Stage layout of one pipeline: removal sets for pre, separator, post.
/// The separator set always includes interference; `None` means no stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Topology {
    pub pre: Option<RemovalSet>,
    pub separator: RemovalSet,
    pub post: Option<RemovalSet>,
}

/// Legal layouts for a task: noise is removed before or during separation,
/// reverberation before, during or after it. The order is fixed, with the
/// single-separator layout first.
pub fn task_topologies(task: TaskKind) -> Vec<Topology> {
    let sep = |r: RemovalSet| RemovalSet {
        interference: true,
        ..r
    };
    let both = RemovalSet {
        noise: true,
        reverberation: true,
        interference: false,
    };
    let t = |pre: Option<RemovalSet>, s: RemovalSet, post: Option<RemovalSet>| Topology {
        pre,
        separator: sep(s),
        post,
    };
    use RemovalSet as R;
    match task {
        TaskKind::Clean => vec![t(None, R::NONE, None)],
        TaskKind::Noisy => vec![t(None, R::NOISE, None), t(Some(R::NOISE), R::NONE, None)],
        TaskKind::Reverberant => vec![
            t(None, R::REVERBERATION, None),
            t(Some(R::REVERBERATION), R::NONE, None),
            t(None, R::NONE, Some(R::REVERBERATION)),
        ],
        TaskKind::NoisyReverberant => vec![
            t(None, both, None),
            t(Some(R::NOISE), R::REVERBERATION, None),
            t(Some(both), R::NONE, None),
            t(Some(R::REVERBERATION), R::NOISE, None),
            t(None, R::NOISE, Some(R::REVERBERATION)),
            t(Some(R::NOISE), R::NONE, Some(R::REVERBERATION)),
        ],
    }
}

/// Builds every legal chain for `task`, asking `make` for a processor with
/// a given role, removal set and arity.
pub fn enumerate_task_pipelines<F>(task: TaskKind, rescale: bool, mut make: F) -> Result<Vec<CascadeChain>>
where
    F: FnMut(StageRole, RemovalSet) -> Result<Arc<dyn Processor>>,
{
    task_topologies(task)
        .into_iter()
        .map(|t| {
            let pre = t.pre.map(|r| make(StageRole::Pre, r)).transpose()?;
            let separator = make(StageRole::Separator, t.separator)?;
            let post = t.post.map(|r| make(StageRole::Post, r)).transpose()?;
            CascadeChain::new(pre, separator, post, rescale)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescale_examples() {
        let (out, beta) = rescale_to_mixture(&[1.0, 0.0], &[3.0, 4.0]).unwrap();
        assert_eq!(beta, 3.0);
        assert_eq!(out, vec![3.0, 0.0]);
        let x = [0.5, -1.0, 2.0];
        let (out, beta) = rescale_to_mixture(&x, &x).unwrap();
        assert_eq!(beta, 1.0);
        assert_eq!(out, x.to_vec());
        assert!(matches!(
            rescale_to_mixture(&[0.0, 0.0], &[1.0, 1.0]),
            Err(Error::ZeroEnergy(_))
        ));
    }

    #[test]
    fn collinear_estimate_recovers_source() {
        let s = [1.0, 2.0, -1.0, 0.5];
        // n is orthogonal to s.
        let n = [2.0, -1.0, 0.0, 0.0];
        let x: Vec<f64> = s.iter().zip(&n).map(|(a, b)| a + b).collect();
        let est: Vec<f64> = s.iter().map(|v| 0.5 * v).collect();
        let (out, beta) = rescale_to_mixture(&est, &x).unwrap();
        assert!((beta - 2.0).abs() < 1e-15);
        for (o, v) in out.iter().zip(&s) {
            assert!((o - v).abs() < 1e-15);
        }
    }

    #[test]
    fn topology_counts_and_rules() {
        let counts: Vec<usize> = TaskKind::ALL.iter().map(|&t| task_topologies(t).len()).collect();
        assert_eq!(counts, vec![1, 2, 3, 6]);
        for task in TaskKind::ALL {
            for t in task_topologies(task) {
                assert!(t.separator.interference);
                assert!(t.post.is_none_or(|p| !p.noise));
                let noise = t.separator.noise || t.pre.is_some_and(|p| p.noise);
                let rev = t.separator.reverberation
                    || t.pre.is_some_and(|p| p.reverberation)
                    || t.post.is_some_and(|p| p.reverberation);
                assert_eq!(noise, task.noisy());
                assert_eq!(rev, task.reverberant());
            }
        }
    }

    #[test]
    fn states_follow_removals() {
        let s = SignalState::mixture(TaskKind::NoisyReverberant);
        let out = s.after(
            RemovalSet {
                noise: true,
                reverberation: false,
                interference: true,
            },
            2,
        );
        assert_eq!(out[1].source, Some(1));
        assert!(out[1].reverberant && !out[1].noisy);
    }

    #[test]
    fn removal_set_json() {
        let r = RemovalSet::NOISE.with(Removal::Interference);
        let j = serde_json::to_string(&r).unwrap();
        assert_eq!(j, "[\"noise\",\"interference\"]");
        assert_eq!(serde_json::from_str::<RemovalSet>(&j).unwrap(), r);
    }
}
