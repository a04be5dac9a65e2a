//! Chains run on rendered synthetic mixtures with oracle stages.

use std::sync::Arc;

use reverbmix::audio::StftConfig;
use reverbmix::cascade::{
    enumerate_task_pipelines, run_cascade, CascadeChain, CascadeInput, GroundTruth, Identity, OracleMask,
    OracleMaskKind, Processor, RemovalSet, StageContext, StageRole,
};
use reverbmix::metrics::{evaluate_task, TaskKind};
use reverbmix::mix::{
    generate_manifest, render_mixture, LengthCondition, ManifestConfig, MixtureSet, NoiseSource, RenderOptions,
    SpeechSource, SplitSizes, Variant,
};

/// Emits the ideal output waveforms, times `factor`.
#[derive(Debug)]
struct Truth {
    factor: f64,
    arity: usize,
    removes: RemovalSet,
}

impl Processor for Truth {
    fn name(&self) -> String {
        format!("truth x{}", self.factor)
    }
    fn arity(&self) -> usize {
        self.arity
    }
    fn removes(&self) -> RemovalSet {
        self.removes
    }
    fn process(&self, input: &[f64], ctx: &StageContext<'_>) -> reverbmix::Result<Vec<Vec<f64>>> {
        let truth = ctx.truth.expect("oracle stage");
        Ok(ctx
            .output_states
            .iter()
            .map(|&s| truth.target(s, input.len()).iter().map(|v| v * self.factor).collect())
            .collect())
    }
}

fn rendered(n: usize) -> Vec<(String, MixtureSet)> {
    let config = ManifestConfig {
        global_seed: 5,
        split_sizes: SplitSizes {
            train: 0,
            valid: 0,
            test: n,
        },
        ..Default::default()
    };
    let m = generate_manifest(
        &config,
        &SpeechSource::Synthetic { speakers_per_split: 40 },
        &NoiseSource::Synthetic,
        serde_json::Value::Null,
    )
    .unwrap();
    let mut options = RenderOptions::new("unused");
    options.variants = vec![Variant {
        sample_rate: 8000,
        condition: LengthCondition::Min,
    }];
    m.recipes
        .iter()
        .map(|r| {
            let set = render_mixture(r, &config, &options).unwrap().remove(0).1;
            (r.mixture_id.clone(), set)
        })
        .collect()
}

fn truth(set: &MixtureSet) -> GroundTruth {
    let left = |b: &reverbmix::audio::AudioBuffer| b.channel(0).to_vec();
    GroundTruth {
        anechoic: [left(&set.s1_anechoic), left(&set.s2_anechoic)],
        reverberant: [left(&set.s1_reverb), left(&set.s2_reverb)],
        noise: left(&set.noise),
    }
}

fn mixture(set: &MixtureSet, task: TaskKind) -> Vec<f64> {
    set.components()
        .into_iter()
        .find(|(n, _)| *n == task.mixture_component())
        .unwrap()
        .1
        .channel(0)
        .to_vec()
}

fn score(chain: &CascadeChain, id: &str, set: &MixtureSet, task: TaskKind) -> reverbmix::metrics::EvalRow {
    let t = truth(set);
    let x = mixture(set, task);
    let input = CascadeInput {
        mixture_id: id,
        sample_rate: set.sample_rate,
        task,
        mixture: &x,
        truth: Some(&t),
    };
    let out = run_cascade(chain, &input).unwrap();
    evaluate_task(id, &out.estimates, &x, task, &t.anechoic).unwrap()
}

fn oracle(kind: OracleMaskKind) -> impl FnMut(StageRole, RemovalSet) -> reverbmix::Result<Arc<dyn Processor>> {
    move |role, removes| {
        let stft = StftConfig::default();
        Ok(if role == StageRole::Separator {
            Arc::new(OracleMask::separator(kind, stft, removes)) as Arc<dyn Processor>
        } else {
            Arc::new(OracleMask::enhancer(kind, stft, removes))
        })
    }
}

#[test]
fn pipeline_counts_per_task() {
    let counts: Vec<usize> = TaskKind::ALL
        .iter()
        .map(|&t| enumerate_task_pipelines(t, true, identity).unwrap().len())
        .collect();
    assert_eq!(counts, vec![1, 2, 3, 6]);
}

fn identity(role: StageRole, removes: RemovalSet) -> reverbmix::Result<Arc<dyn Processor>> {
    let arity = if role == StageRole::Separator { 2 } else { 1 };
    Ok(Arc::new(Identity { arity, removes }))
}

#[test]
fn identity_chain_returns_mixture_copies() {
    let mixes = rendered(1);
    let (id, set) = &mixes[0];
    let chains = enumerate_task_pipelines(TaskKind::NoisyReverberant, true, identity).unwrap();
    for chain in &chains {
        let row = score(chain, id, set, TaskKind::NoisyReverberant);
        assert_eq!(row.delta_db, 0.0, "{chain}");
    }
}

#[test]
fn rescaling_undoes_a_miscaled_stage() {
    let task = TaskKind::Noisy;
    let stft = StftConfig::default();
    let chain = |factor: f64, rescale: bool| {
        let pre = Truth {
            factor,
            arity: 1,
            removes: RemovalSet::NOISE,
        };
        let sep = OracleMask::separator(OracleMaskKind::Ibm, stft, RemovalSet::NONE);
        CascadeChain::new(Some(Arc::new(pre)), Arc::new(sep), None, rescale).unwrap()
    };
    // A soft mask barely reacts to input scale; the binary threshold does.
    for (id, set) in &rendered(3) {
        let base = score(&chain(1.0, true), id, set, task).mean_db;
        let fixed = score(&chain(10.0, true), id, set, task).mean_db;
        let broken = score(&chain(10.0, false), id, set, task).mean_db;
        let plain = score(&chain(1.0, false), id, set, task).mean_db;
        assert!((fixed - base).abs() < 1e-6, "{id}: {fixed} vs {base}");
        assert!(plain - broken > 3.0, "{id}: {plain} vs {broken}");
    }
}

#[test]
fn oracle_pipelines_improve_every_mixture() {
    let mixes = rendered(4);
    for task in TaskKind::ALL {
        let chains = enumerate_task_pipelines(task, true, oracle(OracleMaskKind::Irm)).unwrap();
        for chain in &chains {
            for (id, set) in &mixes {
                let row = score(chain, id, set, task);
                assert!(row.delta_db > 0.0, "{task:?} {chain} {id}: {}", row.delta_db);
            }
        }
    }
}

#[test]
fn wiener_beats_binary_masks() {
    let mixes = rendered(4);
    let task = TaskKind::NoisyReverberant;
    let mean = |kind| {
        let chains = enumerate_task_pipelines(task, true, oracle(kind)).unwrap();
        let mut total = 0.0;
        for (id, set) in &mixes {
            total += score(&chains[0], id, set, task).mean_db;
        }
        total / mixes.len() as f64
    };
    assert!(mean(OracleMaskKind::Wiener) >= mean(OracleMaskKind::Ibm));
}
