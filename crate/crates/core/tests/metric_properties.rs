//! Property tests for SI-SDR, the rescaling factor and PIT, each checked
//! against a separate straightforward computation.

use proptest::prelude::*;
use reverbmix::cascade::rescale_to_mixture;
use reverbmix::metrics::{pit_assign, si_sdr_slices};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Textbook form: project, then compare energies.
fn si_sdr_oracle(est: &[f64], reference: &[f64]) -> f64 {
    let alpha = dot(est, reference) / dot(reference, reference);
    let target: Vec<f64> = reference.iter().map(|r| alpha * r).collect();
    let noise: Vec<f64> = target.iter().zip(est).map(|(t, e)| e - t).collect();
    10.0 * (dot(&target, &target) / dot(&noise, &noise)).log10()
}

/// Component of `n` orthogonal to `s`.
fn orthogonalize(n: &[f64], s: &[f64]) -> Vec<f64> {
    let k = dot(n, s) / dot(s, s);
    n.iter().zip(s).map(|(a, b)| a - k * b).collect()
}

/// Every permutation by recursive insertion, scored independently.
fn best_by_enumeration(est: &[Vec<f64>], refs: &[Vec<f64>]) -> (Vec<usize>, f64) {
    fn perms(n: usize) -> Vec<Vec<usize>> {
        if n == 0 {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for p in perms(n - 1) {
            for pos in 0..=p.len() {
                let mut q = p.clone();
                q.insert(pos, n - 1);
                out.push(q);
            }
        }
        out
    }
    let mut best: Option<(Vec<usize>, f64)> = None;
    for p in perms(refs.len()) {
        let mean = p
            .iter()
            .enumerate()
            .map(|(j, &i)| si_sdr_oracle(&est[i], &refs[j]))
            .sum::<f64>()
            / refs.len() as f64;
        if best.as_ref().is_none_or(|(_, b)| mean > *b) {
            best = Some((p, mean));
        }
    }
    best.unwrap()
}

fn signal(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

fn nonzero(v: &[f64]) -> bool {
    dot(v, v) > 1e-3
}

#[test]
fn hand_cases() {
    let db = |e: &[f64], r: &[f64]| si_sdr_slices(e, r).unwrap().db;
    assert!(db(&[1.0, 1.0], &[1.0, 0.0]).abs() < 1e-9);
    // alpha = 1, error [0, 0.5]: 10 log10(1 / 0.25)
    assert!((db(&[1.0, 0.5], &[1.0, 0.0]) - 10.0 * 4f64.log10()).abs() < 1e-9);
    // alpha = 1/2, target [1/2, 1/2], error [1/2, -1/2]: 0 dB
    assert!(db(&[1.0, 0.0], &[1.0, 1.0]).abs() < 1e-9);
    // alpha = 3/5, |target|^2 = 9/5, |error|^2 = 16/5
    assert!((db(&[3.0, 0.0], &[3.0, 4.0]) - 10.0 * (9.0f64 / 16.0).log10()).abs() < 1e-9);
}

#[test]
fn perturbation_matches_closed_form() {
    let s: Vec<f64> = (0..4000)
        .map(|i| (i as f64 * 0.013).sin() + 0.3 * (i as f64 * 0.071).cos())
        .collect();
    let raw: Vec<f64> = (0..4000).map(|i| ((i * 7919 % 1013) as f64 / 1013.0) - 0.5).collect();
    let n = orthogonalize(&raw, &s);
    for eps in [1e-1, 1e-2, 1e-3] {
        let est: Vec<f64> = s.iter().zip(&n).map(|(a, b)| a + eps * b).collect();
        let expected = -20.0 * (eps * dot(&n, &n).sqrt() / dot(&s, &s).sqrt()).log10();
        let got = si_sdr_slices(&est, &s).unwrap().db;
        assert!((got - expected).abs() < 1e-6, "eps {eps}: {got} vs {expected}");
    }
}

#[test]
fn two_source_pit_is_the_better_assignment() {
    let refs = [vec![1.0, 0.2, -0.3, 0.5], vec![-0.4, 0.9, 0.1, 0.0]];
    let est = [vec![-0.3, 1.0, 0.2, 0.1], vec![0.9, 0.1, -0.2, 0.6]];
    let keep = (si_sdr_oracle(&est[0], &refs[0]) + si_sdr_oracle(&est[1], &refs[1])) / 2.0;
    let swap = (si_sdr_oracle(&est[1], &refs[0]) + si_sdr_oracle(&est[0], &refs[1])) / 2.0;
    let r = pit_assign(&est, &refs).unwrap();
    assert_eq!(r.permutation, vec![1, 0]);
    assert!((r.mean_db - keep.max(swap)).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn si_sdr_matches_projection_form(e in signal(64), r in signal(64)) {
        prop_assume!(nonzero(&e) && nonzero(&r));
        let expected = si_sdr_oracle(&e, &r);
        prop_assume!(expected.abs() < 90.0);
        prop_assert!((si_sdr_slices(&e, &r).unwrap().db - expected).abs() < 1e-9);
    }

    #[test]
    fn si_sdr_is_scale_invariant(e in signal(64), r in signal(64), c in prop_oneof![-100.0f64..-0.01, 0.01f64..100.0]) {
        prop_assume!(nonzero(&e) && nonzero(&r));
        let base = si_sdr_slices(&e, &r).unwrap();
        prop_assume!(!base.capped);
        let scaled: Vec<f64> = e.iter().map(|v| c * v).collect();
        prop_assert!((si_sdr_slices(&scaled, &r).unwrap().db - base.db).abs() < 1e-9);
    }

    #[test]
    fn rescaled_estimate_is_orthogonal_to_residual(s in signal(128), x in signal(128)) {
        prop_assume!(nonzero(&s) && nonzero(&x));
        let (out, _) = rescale_to_mixture(&s, &x).unwrap();
        let residual: Vec<f64> = x.iter().zip(&out).map(|(a, b)| a - b).collect();
        let scale = dot(&out, &out).sqrt() * dot(&residual, &residual).sqrt();
        prop_assert!(dot(&out, &residual).abs() <= 1e-9 * scale.max(1e-300));
    }

    #[test]
    fn rescaling_is_idempotent(s in signal(128), x in signal(128)) {
        prop_assume!(nonzero(&s) && nonzero(&x) && dot(&s, &x).abs() > 1e-3);
        let (once, _) = rescale_to_mixture(&s, &x).unwrap();
        let (_, beta) = rescale_to_mixture(&once, &x).unwrap();
        prop_assert!((beta - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn collinear_estimate_recovers_the_source(s in signal(128), n in signal(128), k in 0.05f64..20.0) {
        prop_assume!(nonzero(&s));
        let n = orthogonalize(&n, &s);
        let x: Vec<f64> = s.iter().zip(&n).map(|(a, b)| a + b).collect();
        let est: Vec<f64> = s.iter().map(|v| k * v).collect();
        let (out, _) = rescale_to_mixture(&est, &x).unwrap();
        for (o, v) in out.iter().zip(&s) {
            prop_assert!((o - v).abs() <= 1e-10);
        }
    }

    #[test]
    fn pit_matches_enumeration(n in 2usize..=4, seed in prop::collection::vec(-1.0f64..1.0, 4 * 4 * 32)) {
        let take = |k: usize| seed[k * 32..(k + 1) * 32].to_vec();
        let refs: Vec<Vec<f64>> = (0..n).map(take).collect();
        let est: Vec<Vec<f64>> = (0..n).map(|k| take(4 + k)).collect();
        prop_assume!(refs.iter().chain(&est).all(|v| nonzero(v)));
        let (perm, mean) = best_by_enumeration(&est, &refs);
        let r = pit_assign(&est, &refs).unwrap();
        prop_assert!((r.mean_db - mean).abs() < 1e-9);
        // Equal means can come from different permutations only on ties.
        if r.permutation != perm {
            let alt = r.permutation.iter().enumerate().map(|(j, &i)| si_sdr_oracle(&est[i], &refs[j])).sum::<f64>() / n as f64;
            prop_assert!((alt - mean).abs() < 1e-9);
        }
    }

    #[test]
    fn permuting_estimates_keeps_the_mean(a in signal(48), b in signal(48), c in signal(48), r1 in signal(48), r2 in signal(48), r3 in signal(48)) {
        let est = [a, b, c];
        let refs = [r1, r2, r3];
        prop_assume!(est.iter().chain(&refs).all(|v| nonzero(v)));
        let fwd = pit_assign(&est, &refs).unwrap();
        let rev = [est[2].clone(), est[0].clone(), est[1].clone()];
        let back = pit_assign(&rev, &refs).unwrap();
        prop_assert!((fwd.mean_db - back.mean_db).abs() < 1e-9);
    }
}
