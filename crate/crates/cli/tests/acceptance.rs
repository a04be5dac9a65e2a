//! Acceptance suite: one PASS/FAIL/SKIP line per criterion, nonzero exit on
//! any failure. Criterion 10 runs only when REVERBMIX_SPEECH_ROOT and
//! REVERBMIX_NOISE_ROOT point at the real corpora.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use reverbmix::audio::{read_wav, StftConfig};
use reverbmix::cascade::{
    enumerate_task_pipelines, evaluate_cascades, rescale_to_mixture, run_cascade, CascadeChain, CascadeInput,
    GroundTruth, OracleMask, OracleMaskKind, Processor, RemovalSet, StageContext, StageRole,
};
use reverbmix::metrics::{evaluate_task, pit_assign, si_sdr_slices, TaskKind};
use reverbmix::mix::{
    generate_manifest, load_source, render_mixture, spatialize_with, LengthCondition, Manifest, ManifestConfig,
    MixtureSet, NoiseSource, RenderOptions, SpeechSource, SplitSizes, Variant, COMPONENTS, RENDER_RATE,
};
use reverbmix::room::{image_source_rir, measure_t60, room_rirs, sample_room, ReverbClass};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = Result<String, String>;

fn run(n: u32, title: &str, budget: Duration, f: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let result = f();
    let took = start.elapsed();
    let outcome = match result {
        Ok(detail) if took <= budget => Outcome::Pass(detail),
        Ok(detail) => Outcome::Fail(format!("{detail}; took {took:.1?}, budget {budget:?}")),
        Err(detail) => Outcome::Fail(detail),
    };
    report(n, title, took, outcome)
}

fn report(n: u32, title: &str, took: Duration, outcome: Outcome) -> bool {
    let (tag, detail, ok) = match outcome {
        Outcome::Pass(d) => ("PASS", d, true),
        Outcome::Fail(d) => ("FAIL", d, false),
        Outcome::Skip(d) => ("SKIP", d, true),
    };
    println!("criterion {n:>2} {tag} [{took:.2?}] {title}: {detail}");
    ok
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn rms(x: &[f64]) -> f64 {
    (dot(x, x) / x.len() as f64).sqrt()
}

fn random_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn orthogonalize(n: &[f64], s: &[f64]) -> Vec<f64> {
    let k = dot(n, s) / dot(s, s);
    n.iter().zip(s).map(|(a, b)| a - k * b).collect()
}

/// Projection form of SI-SDR, written out independently of the library.
fn si_sdr_oracle(est: &[f64], reference: &[f64]) -> f64 {
    let alpha = dot(est, reference) / dot(reference, reference);
    let target: Vec<f64> = reference.iter().map(|r| alpha * r).collect();
    let noise: Vec<f64> = target.iter().zip(est).map(|(t, e)| e - t).collect();
    10.0 * (dot(&target, &target) / dot(&noise, &noise)).log10()
}

fn si_sdr_1() -> Check {
    let db = |e: &[f64], r: &[f64]| si_sdr_slices(e, r).map(|s| s.db).map_err(|e| e.to_string());
    let hand: [(&[f64], &[f64], f64); 4] = [
        (&[1.0, 1.0], &[1.0, 0.0], 0.0),
        (&[1.0, 0.5], &[1.0, 0.0], 10.0 * 4f64.log10()),
        (&[1.0, 0.0], &[1.0, 1.0], 0.0),
        (&[3.0, 0.0], &[3.0, 4.0], 10.0 * (9.0f64 / 16.0).log10()),
    ];
    for (e, r, want) in hand {
        let got = db(e, r)?;
        ensure((got - want).abs() <= 1e-9, || {
            format!("hand case {e:?} vs {r:?}: {got} != {want}")
        })?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst_scale: f64 = 0.0;
    for _ in 0..1000 {
        let e = random_vec(&mut rng, 256);
        let r = random_vec(&mut rng, 256);
        let magnitude = 10f64.powf(rng.random_range(-3.0..3.0));
        let c = if rng.random_bool(0.5) { magnitude } else { -magnitude };
        let scaled: Vec<f64> = e.iter().map(|v| c * v).collect();
        worst_scale = worst_scale.max((db(&scaled, &r)? - db(&e, &r)?).abs());
    }
    ensure(worst_scale <= 1e-9, || {
        format!("scale invariance off by {worst_scale:e} dB")
    })?;
    let s = random_vec(&mut rng, 8000);
    let n = orthogonalize(&random_vec(&mut rng, 8000), &s);
    let mut worst_eps: f64 = 0.0;
    for eps in [1e-1, 1e-2, 1e-3] {
        let est: Vec<f64> = s.iter().zip(&n).map(|(a, b)| a + eps * b).collect();
        let want = -20.0 * (eps * dot(&n, &n).sqrt() / dot(&s, &s).sqrt()).log10();
        worst_eps = worst_eps.max((db(&est, &s)? - want).abs());
    }
    ensure(worst_eps <= 1e-6, || {
        format!("perturbation formula off by {worst_eps:e} dB")
    })?;
    Ok(format!(
        "4 hand cases; 1000 scale triples max dev {worst_scale:.1e} dB; perturbation max dev {worst_eps:.1e} dB"
    ))
}

fn rescale_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut orth, mut recover, mut idem): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..1000 {
        let s_hat = random_vec(&mut rng, 512);
        let x = random_vec(&mut rng, 512);
        let (out, _) = rescale_to_mixture(&s_hat, &x).map_err(|e| e.to_string())?;
        let residual: Vec<f64> = x.iter().zip(&out).map(|(a, b)| a - b).collect();
        orth = orth.max(dot(&out, &residual).abs() / (dot(&out, &out) * dot(&residual, &residual)).sqrt());
        let (_, beta) = rescale_to_mixture(&out, &x).map_err(|e| e.to_string())?;
        idem = idem.max((beta - 1.0).abs());

        let s = random_vec(&mut rng, 512);
        let n = orthogonalize(&random_vec(&mut rng, 512), &s);
        let mix: Vec<f64> = s.iter().zip(&n).map(|(a, b)| a + b).collect();
        let k = 10f64.powf(rng.random_range(-2.0..2.0));
        let est: Vec<f64> = s.iter().map(|v| k * v).collect();
        let (out, _) = rescale_to_mixture(&est, &mix).map_err(|e| e.to_string())?;
        for (o, v) in out.iter().zip(&s) {
            recover = recover.max((o - v).abs());
        }
    }
    ensure(orth <= 1e-9, || format!("orthogonality {orth:e}"))?;
    ensure(recover <= 1e-10, || format!("recovery error {recover:e}"))?;
    ensure(idem <= 1e-12, || format!("second beta off by {idem:e}"))?;
    Ok(format!(
        "1000 pairs: orthogonality {orth:.1e}, recovery {recover:.1e}, idempotence {idem:.1e}"
    ))
}

fn all_permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn pit_3() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in 2..=4 {
        let perms = all_permutations(n);
        for trial in 0..200 {
            let refs: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut rng, 400)).collect();
            let mut order: Vec<usize> = (0..n).collect();
            for i in (1..n).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let level = rng.random_range(0.2..3.0);
            let est: Vec<Vec<f64>> = order
                .iter()
                .map(|&j| {
                    refs[j]
                        .iter()
                        .map(|v| v + level * rng.random_range(-1.0..1.0))
                        .collect()
                })
                .collect();
            let best = perms
                .iter()
                .map(|p| {
                    p.iter()
                        .enumerate()
                        .map(|(j, &i)| si_sdr_oracle(&est[i], &refs[j]))
                        .sum::<f64>()
                        / n as f64
                })
                .fold(f64::NEG_INFINITY, f64::max);
            let got = pit_assign(&est, &refs).map_err(|e| e.to_string())?;
            let chosen = got
                .permutation
                .iter()
                .enumerate()
                .map(|(j, &i)| si_sdr_oracle(&est[i], &refs[j]))
                .sum::<f64>()
                / n as f64;
            ensure(
                (got.mean_db - best).abs() <= 1e-9 && (chosen - best).abs() <= 1e-9,
                || format!("N={n} trial {trial}: pit {} vs enumeration {best}", got.mean_db),
            )?;
        }
    }
    Ok("N=2,3,4 x 200 trials agree with enumeration".into())
}

fn t60_4() -> Check {
    let mut medians = Vec::new();
    let mut parts = Vec::new();
    let mut total_within = 0;
    for class in ReverbClass::ALL {
        let mut measured = Vec::with_capacity(100);
        let mut within = 0;
        for seed in 0..100u64 {
            let spec = sample_room(seed, class, None).map_err(|e| e.to_string())?;
            let rir = image_source_rir(&spec, 0, 0, RENDER_RATE, None).map_err(|e| e.to_string())?;
            let t60 = measure_t60(&rir).map_err(|e| format!("{class} room {seed}: {e}"))?;
            if (t60 / spec.t60_target - 1.0).abs() <= 0.2 {
                within += 1;
            }
            measured.push(t60);
        }
        measured.sort_by(f64::total_cmp);
        let median = (measured[49] + measured[50]) / 2.0;
        medians.push(median);
        total_within += within;
        parts.push(format!("{class} {within}/100 median {median:.3}s"));
        ensure(within >= 90, || format!("{class}: only {within}/100 rooms within 20%"))?;
    }
    ensure(medians[0] < medians[1] && medians[1] < medians[2], || {
        format!("medians out of order: {medians:?}")
    })?;
    ensure(medians[2] - medians[0] >= 0.2, || {
        format!("high-low median gap {:.3}", medians[2] - medians[0])
    })?;
    Ok(format!("{} ({total_within}/300 overall)", parts.join(", ")))
}

fn synthetic_manifest(test: usize, seed: u64) -> Result<(Manifest, ManifestConfig), String> {
    let config = ManifestConfig {
        global_seed: seed,
        split_sizes: SplitSizes {
            train: 0,
            valid: 0,
            test,
        },
        ..Default::default()
    };
    let m = generate_manifest(
        &config,
        &SpeechSource::Synthetic { speakers_per_split: 40 },
        &NoiseSource::Synthetic,
        serde_json::Value::Null,
    )
    .map_err(|e| e.to_string())?;
    Ok((m, config))
}

/// Band-limited delay through a phase ramp; the reference for anechoic images.
fn fft_delay(x: &[f64], d: f64, len: usize) -> Vec<f64> {
    let n = (len + d.ceil() as usize + 4096).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = (0..n)
        .map(|i| Complex::new(x.get(i).copied().unwrap_or(0.0), 0.0))
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let f = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        *v *= Complex::from_polar(1.0, -2.0 * PI * f * d / n as f64);
    }
    buf[n / 2] = Complex::new(buf[n / 2].re, 0.0);
    planner.plan_fft_inverse(n).process(&mut buf);
    buf[..len].iter().map(|c| c.re / n as f64).collect()
}

fn spatial_5() -> Check {
    let (m, _) = synthetic_manifest(100, 7)?;
    let (mut worst_ncc, mut worst_rms): (f64, f64) = (1.0, 0.0);
    for r in &m.recipes {
        let rirs = room_rirs(&r.room, RENDER_RATE).map_err(|e| e.to_string())?;
        for (k, src) in [&r.s1, &r.s2].into_iter().enumerate() {
            let dry = load_source(src, None).map_err(|e| e.to_string())?;
            let image = spatialize_with(&dry, &rirs, k).map_err(|e| e.to_string())?;
            for mic in 0..2 {
                let got = image.anechoic.channel(mic);
                let want = fft_delay(dry.channel(0), rirs.direct[k][mic].direct_delay, got.len());
                let ncc = dot(got, &want) / (dot(got, got) * dot(&want, &want)).sqrt();
                worst_ncc = worst_ncc.min(ncc);
                worst_rms = worst_rms.max((rms(got) / rms(dry.channel(0)) - 1.0).abs());
            }
        }
    }
    ensure(worst_ncc >= 0.999, || format!("min NCC {worst_ncc:.6}"))?;
    ensure(worst_rms <= 1e-3, || {
        format!("max RMS deviation {:.4}%", worst_rms * 100.0)
    })?;
    Ok(format!(
        "100 mixtures x 2 sources x 2 mics: min NCC {worst_ncc:.6}, max RMS deviation {:.4}%",
        worst_rms * 100.0
    ))
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_reverbmix"))
}

fn generate(out: &Path, preset: &str, seed: u64, threads: usize) -> Result<(), String> {
    let status = bin()
        .args(["--threads", &threads.to_string(), "generate", "--preset", preset])
        .args(["--seed", &seed.to_string(), "--out"])
        .arg(out)
        .stdout(std::process::Stdio::null())
        .status()
        .map_err(|e| e.to_string())?;
    ensure(status.success(), || format!("generate {preset} exited with {status}"))
}

fn wav_f32(path: &Path) -> Result<Vec<Vec<f32>>, String> {
    let b = read_wav(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((0..b.channels())
        .map(|c| b.channel(c).iter().map(|&v| v as f32).collect())
        .collect())
}

fn identities_6(root: &Path) -> Check {
    let manifest = Manifest::read(&root.join("manifest.jsonl")).map_err(|e| e.to_string())?;
    let (mut files, mut worst_spk, mut worst_noise): (usize, f64, f64) = (0, 0.0, 0.0);
    for variant in Variant::all() {
        let split_dir = root.join(variant.dir()).join("tt");
        let min_dir = root
            .join(
                Variant {
                    condition: LengthCondition::Min,
                    ..variant
                }
                .dir(),
            )
            .join("tt");
        for r in &manifest.recipes {
            let name = format!("{}.wav", r.mixture_id);
            let load = |c: &str| wav_f32(&split_dir.join(c).join(&name));
            let (s1a, s2a, s1r, s2r, n) = (
                load("s1_anechoic")?,
                load("s2_anechoic")?,
                load("s1_reverb")?,
                load("s2_reverb")?,
                load("noise")?,
            );
            let mixes = [
                ("mix_clean", &s1a, &s2a, false),
                ("mix_noisy", &s1a, &s2a, true),
                ("mix_reverb", &s1r, &s2r, false),
                ("mix_both", &s1r, &s2r, true),
            ];
            for (name_mix, a, b, noisy) in mixes {
                let mix = load(name_mix)?;
                files += 1;
                for ch in 0..mix.len() {
                    for i in 0..mix[ch].len() {
                        let mut v = a[ch][i] + b[ch][i];
                        if noisy {
                            v += n[ch][i];
                        }
                        ensure(mix[ch][i].to_bits() == v.to_bits(), || {
                            format!("{variant} {} {name_mix} ch{ch} sample {i}: not the sum", r.mixture_id)
                        })?;
                    }
                }
            }
            let overlap = wav_f32(&min_dir.join("s1_anechoic").join(&name))?[0].len();
            let left = |x: &[Vec<f32>]| x[0][..overlap].iter().map(|&v| v as f64).collect::<Vec<_>>();
            let (l1, l2, ln) = (rms(&left(&s1a)), rms(&left(&s2a)), rms(&left(&n)));
            let spk = 20.0 * (l1 / l2).log10();
            let noise = 20.0 * (l1.max(l2) / ln).log10();
            worst_spk = worst_spk.max((spk - r.speaker_gain_snr_db).abs());
            worst_noise = worst_noise.max((noise - r.noise_snr_db).abs());
        }
    }
    ensure(worst_spk <= 1e-6 && worst_noise <= 1e-6, || {
        format!("SNR error speaker {worst_spk:e} dB, noise {worst_noise:e} dB")
    })?;
    Ok(format!(
        "{files} mixture files are exact f32 sums; SNR error speaker {worst_spk:.1e} dB, noise {worst_noise:.1e} dB"
    ))
}

/// Emits the ideal output waveforms, times `factor`.
#[derive(Debug)]
struct Truth {
    factor: f64,
}

impl Processor for Truth {
    fn name(&self) -> String {
        format!("truth x{}", self.factor)
    }
    fn arity(&self) -> usize {
        1
    }
    fn removes(&self) -> RemovalSet {
        RemovalSet::NOISE
    }
    fn process(&self, input: &[f64], ctx: &StageContext<'_>) -> reverbmix::Result<Vec<Vec<f64>>> {
        let truth = ctx.truth.expect("oracle stage");
        let t = truth.target(ctx.output_states[0], input.len());
        Ok(vec![t.iter().map(|v| v * self.factor).collect()])
    }
}

fn truth_of(set: &MixtureSet) -> GroundTruth {
    let left = |b: &reverbmix::audio::AudioBuffer| b.channel(0).to_vec();
    GroundTruth {
        anechoic: [left(&set.s1_anechoic), left(&set.s2_anechoic)],
        reverberant: [left(&set.s1_reverb), left(&set.s2_reverb)],
        noise: left(&set.noise),
    }
}

fn cascade_7() -> Check {
    let counts: Vec<usize> = TaskKind::ALL
        .iter()
        .map(|&t| {
            enumerate_task_pipelines(t, true, |role, removes| {
                let arity = if role == StageRole::Separator { 2 } else { 1 };
                Ok(Arc::new(reverbmix::cascade::Identity { arity, removes }) as Arc<dyn Processor>)
            })
            .map(|c| c.len())
        })
        .collect::<reverbmix::Result<_>>()
        .map_err(|e| e.to_string())?;
    ensure(counts == [1, 2, 3, 6], || format!("pipeline counts {counts:?}"))?;

    let (m, config) = synthetic_manifest(10, 7)?;
    let mut options = RenderOptions::new("unused");
    options.variants = vec![Variant {
        sample_rate: 8000,
        condition: LengthCondition::Min,
    }];
    let stft = StftConfig::default();
    let chain = |factor: f64, rescale: bool| {
        let sep = OracleMask::separator(OracleMaskKind::Ibm, stft, RemovalSet::NONE);
        CascadeChain::new(Some(Arc::new(Truth { factor })), Arc::new(sep), None, rescale)
    };
    let (mut worst_recovery, mut least_loss): (f64, f64) = (0.0, f64::INFINITY);
    for r in &m.recipes {
        let set = render_mixture(r, &config, &options)
            .map_err(|e| e.to_string())?
            .remove(0)
            .1;
        let truth = truth_of(&set);
        let x = set.mix_noisy.channel(0).to_vec();
        let input = CascadeInput {
            mixture_id: &r.mixture_id,
            sample_rate: set.sample_rate,
            task: TaskKind::Noisy,
            mixture: &x,
            truth: Some(&truth),
        };
        let score = |factor: f64, rescale: bool| -> Result<f64, String> {
            let c = chain(factor, rescale).map_err(|e| e.to_string())?;
            let out = run_cascade(&c, &input).map_err(|e| e.to_string())?;
            let row = evaluate_task(&r.mixture_id, &out.estimates, &x, TaskKind::Noisy, &truth.anechoic)
                .map_err(|e| e.to_string())?;
            Ok(row.mean_db)
        };
        worst_recovery = worst_recovery.max((score(10.0, true)? - score(1.0, true)?).abs());
        least_loss = least_loss.min(score(1.0, false)? - score(10.0, false)?);
    }
    ensure(worst_recovery <= 1e-6, || {
        format!("rescaled run differs by {worst_recovery:e} dB")
    })?;
    ensure(least_loss > 3.0, || format!("unrescaled loss only {least_loss:.2} dB"))?;
    Ok(format!(
        "counts 1/2/3/6; x10 stage, 10 mixtures: rescaled max dev {worst_recovery:.1e} dB, unrescaled loss >= {least_loss:.1} dB"
    ))
}

fn oracle_chains(task: TaskKind, kind: OracleMaskKind) -> reverbmix::Result<Vec<CascadeChain>> {
    enumerate_task_pipelines(task, true, |role, removes| {
        let stft = StftConfig::default();
        Ok(if role == StageRole::Separator {
            Arc::new(OracleMask::separator(kind, stft, removes)) as Arc<dyn Processor>
        } else {
            Arc::new(OracleMask::enhancer(kind, stft, removes))
        })
    })
}

fn oracle_8(root: &Path) -> Check {
    let split = root.join("wav8k/min/tt");
    let mut lines = Vec::new();
    for task in TaskKind::ALL {
        let err = |e: reverbmix::Error| e.to_string();
        let irm =
            evaluate_cascades(&split, task, &oracle_chains(task, OracleMaskKind::Irm).map_err(err)?).map_err(err)?;
        for (row, detail) in irm.rows.iter().zip(&irm.details) {
            ensure(row.mixtures == 200, || format!("{} mixtures evaluated", row.mixtures))?;
            let worst = detail.rows.iter().map(|r| r.delta_db).fold(f64::INFINITY, f64::min);
            ensure(worst > 0.0, || {
                format!(
                    "{task:?} pre={} sep={} post={}: min delta {worst:.2} dB",
                    row.pre_removes, row.separate_while_removing, row.post_removes
                )
            })?;
        }
        let min_delta = irm
            .details
            .iter()
            .flat_map(|d| d.rows.iter().map(|r| r.delta_db))
            .fold(f64::INFINITY, f64::min);
        // Wiener and IBM compared on the single-separator pipeline of each task.
        let single = |kind| -> Result<f64, String> {
            let chains = oracle_chains(task, kind).map_err(err)?;
            let r = evaluate_cascades(&split, task, &chains[..1]).map_err(err)?;
            Ok(r.rows[0].output_db)
        };
        let (wiener, ibm) = (single(OracleMaskKind::Wiener)?, single(OracleMaskKind::Ibm)?);
        ensure(wiener >= ibm, || format!("{task:?}: wiener {wiener:.2} < ibm {ibm:.2}"))?;
        lines.push(format!(
            "{} {} IRM pipelines min delta {min_delta:.2} dB, wiener {wiener:.2} >= ibm {ibm:.2}",
            task.as_str(),
            irm.rows.len()
        ));
    }
    Ok(lines.join("; "))
}

fn tree(root: &Path) -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).map_err(|e| e.to_string())? {
            let path = entry.map_err(|e| e.to_string())?.path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = std::fs::read(&path).map_err(|e| e.to_string())?;
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), bytes);
            }
        }
    }
    Ok(out)
}

fn determinism_9(a: &Path, b: &Path) -> Check {
    let (ta, tb) = (tree(a)?, tree(b)?);
    ensure(ta.keys().eq(tb.keys()), || "file lists differ".into())?;
    let wavs = ta.keys().filter(|p| p.extension().is_some_and(|e| e == "wav")).count();
    ensure(wavs == 200 * COMPONENTS.len() * 4, || format!("{wavs} wav files"))?;
    for (path, bytes) in &ta {
        ensure(&tb[path] == bytes, || format!("{} differs", path.display()))?;
    }
    Ok(format!(
        "{} files ({wavs} wav) byte-identical between --threads 1 and --threads 2",
        ta.len()
    ))
}

fn corpus_10(out: &Path) -> Outcome {
    let (Ok(speech), Ok(noise)) = (
        std::env::var("REVERBMIX_SPEECH_ROOT"),
        std::env::var("REVERBMIX_NOISE_ROOT"),
    ) else {
        return Outcome::Skip("REVERBMIX_SPEECH_ROOT / REVERBMIX_NOISE_ROOT not set".into());
    };
    let mut cmd = bin();
    cmd.args([
        "generate",
        "--preset",
        "full",
        "--train",
        "0",
        "--valid",
        "0",
        "--variants",
        "8k/min",
    ])
    .args(["--speech-root", &speech, "--noise-root", &noise, "--out"])
    .arg(out)
    .stdout(std::process::Stdio::null());
    if let Ok(lists) = std::env::var("REVERBMIX_PAIR_LISTS") {
        cmd.args(["--pair-lists", &lists]);
    }
    match cmd.status() {
        Ok(s) if s.success() => {}
        other => return Outcome::Fail(format!("generate on the corpora failed: {other:?}")),
    }
    let summary: serde_json::Value = match std::fs::read_to_string(out.join("render_summary.json"))
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(v) => v,
        Err(e) => return Outcome::Fail(e),
    };
    let Some(means) = summary["variants"]
        .as_array()
        .and_then(|v| v.first())
        .map(|v| v["mean_input_si_sdr_db"].clone())
    else {
        return Outcome::Fail("render summary has no variants".into());
    };
    let targets = [
        ("clean", 0.0, 0.3),
        ("noisy", -4.5, 0.7),
        ("reverberant", -3.29, 1.5),
        ("noisy_reverberant", -6.13, 1.5),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (task, want, tol) in targets {
        let got = means[task].as_f64().unwrap_or(f64::NAN);
        let hit = (got - want).abs() <= tol;
        ok &= hit;
        parts.push(format!("{task} {got:.2} (target {want} +- {tol})"));
    }
    if ok {
        Outcome::Pass(parts.join(", "))
    } else {
        Outcome::Fail(parts.join(", "))
    }
}

fn main() {
    let scratch = tempfile::tempdir().expect("temp dir");
    let mut ok = true;
    let secs = Duration::from_secs;
    ok &= run(1, "SI-SDR correctness", secs(1), si_sdr_1);
    ok &= run(2, "rescaling algebra", secs(1), rescale_2);
    ok &= run(3, "PIT vs enumeration", secs(10), pit_3);
    ok &= run(4, "room T60", secs(300), t60_4);
    ok &= run(5, "spatialization fidelity", secs(60), spatial_5);

    let smoke = scratch.path().join("smoke");
    ok &= run(6, "mixture identities", secs(60), || {
        generate(&smoke, "smoke", 7, 0)?;
        identities_6(&smoke)
    });
    ok &= run(7, "cascade enumeration and rescaling", secs(60), cascade_7);

    let (desk_a, desk_b) = (scratch.path().join("desk_a"), scratch.path().join("desk_b"));
    let start = Instant::now();
    let rendered = generate(&desk_a, "desk", 7, 1).and_then(|_| generate(&desk_b, "desk", 7, 2));
    let render_time = start.elapsed();
    ok &= run(8, "oracle sanity on desk", secs(600), || {
        rendered.clone()?;
        oracle_8(&desk_a)
    });
    ok &= report(
        9,
        "determinism",
        render_time,
        match rendered.and_then(|_| determinism_9(&desk_a, &desk_b)) {
            Ok(d) if render_time <= secs(600) => Outcome::Pass(d),
            Ok(d) => Outcome::Fail(format!("{d}; two renders took {render_time:.1?}")),
            Err(e) => Outcome::Fail(e),
        },
    );
    let start = Instant::now();
    let outcome = corpus_10(&scratch.path().join("corpus"));
    ok &= report(10, "corpus input statistics (conditional)", start.elapsed(), outcome);
    if !ok {
        std::process::exit(1);
    }
}
