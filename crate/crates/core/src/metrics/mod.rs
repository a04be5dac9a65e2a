//! Scale-invariant SDR, permutation-invariant assignment and task reports.

mod corpus;
mod report;

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

pub(crate) use corpus::split_ids;
pub use corpus::{estimate_path, evaluate_directory, DirectoryEval};
pub(crate) use report::csv_error;
pub use report::{evaluate_task, EvalReport, EvalRow, TaskKind, TaskSummary, AVERAGING_CONVENTION};

/// Values are clamped to `[-SI_SDR_CAP_DB, SI_SDR_CAP_DB]`.
pub const SI_SDR_CAP_DB: f64 = 100.0;
/// Largest source count accepted by the exhaustive permutation search.
pub const MAX_PIT_SOURCES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiSdr {
    pub db: f64,
    /// True when the raw value was unbounded or beyond the cap.
    pub capped: bool,
}

impl SiSdr {
    fn clamp(raw: f64) -> SiSdr {
        if raw.is_nan() || raw >= SI_SDR_CAP_DB {
            SiSdr {
                db: SI_SDR_CAP_DB,
                capped: true,
            }
        } else if raw <= -SI_SDR_CAP_DB {
            SiSdr {
                db: -SI_SDR_CAP_DB,
                capped: true,
            }
        } else {
            SiSdr { db: raw, capped: false }
        }
    }
}

/// Inner product with compensated products and sums, as accurate as if
/// computed in twice the working precision.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let (mut sum, mut err) = (0.0f64, 0.0f64);
    for (x, y) in a.iter().zip(b) {
        let p = x * y;
        let p_err = x.mul_add(*y, -p);
        let t = sum + p;
        let z = t - sum;
        err += (sum - (t - z)) + (p - z) + p_err;
        sum = t;
    }
    sum + err
}

/// SI-SDR of `estimate` against `reference`, no mean removal.
///
/// `alpha = <est, ref> / |ref|^2`, result `10 log10(|alpha ref|^2 / |alpha ref - est|^2)`.
/// A vanishing error gives `+cap`; an estimate orthogonal to (or zero
/// against) the reference gives `-cap`.
pub fn si_sdr_slices(estimate: &[f64], reference: &[f64]) -> Result<SiSdr> {
    if estimate.len() != reference.len() {
        return Err(Error::LengthMismatch {
            left: estimate.len(),
            right: reference.len(),
        });
    }
    let ref_energy = dot(reference, reference);
    if !(ref_energy > 0.0) {
        return Err(Error::ZeroEnergy("reference"));
    }
    let alpha = dot(estimate, reference) / ref_energy;
    let mut target = 0.0;
    let mut error = 0.0;
    for (e, r) in estimate.iter().zip(reference) {
        let t = alpha * r;
        target += t * t;
        error += (t - e) * (t - e);
    }
    if target == 0.0 {
        return Ok(SiSdr::clamp(f64::NEG_INFINITY));
    }
    if error == 0.0 {
        return Ok(SiSdr::clamp(f64::INFINITY));
    }
    Ok(SiSdr::clamp(10.0 * (target / error).log10()))
}

/// SI-SDR between two single-channel buffers.
pub fn si_sdr(estimate: &AudioBuffer, reference: &AudioBuffer) -> Result<SiSdr> {
    for b in [estimate, reference] {
        if b.channels() != 1 {
            return Err(Error::ChannelCount {
                expected: 1,
                got: b.channels(),
            });
        }
    }
    si_sdr_slices(estimate.channel(0), reference.channel(0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PitResult {
    /// `permutation[j]` is the estimate assigned to reference `j`.
    pub permutation: Vec<usize>,
    /// SI-SDR of each reference against its assigned estimate.
    pub scores: Vec<SiSdr>,
    pub mean_db: f64,
}

/// Rearranges `p` into the next lexicographic permutation; false at the last.
fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = p.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = p.iter().rposition(|&x| x > p[i]).unwrap_or(i + 1);
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}

/// Exhaustive search for the assignment maximizing mean SI-SDR. Ties keep
/// the lexicographically smallest permutation.
pub fn pit_assign<E: AsRef<[f64]>, R: AsRef<[f64]>>(estimates: &[E], references: &[R]) -> Result<PitResult> {
    let n = references.len();
    if estimates.len() != n {
        return Err(Error::CountMismatch {
            estimates: estimates.len(),
            references: n,
        });
    }
    if n > MAX_PIT_SOURCES {
        return Err(Error::TooManySources {
            got: n,
            max: MAX_PIT_SOURCES,
        });
    }
    if n == 0 {
        return Err(Error::CountMismatch {
            estimates: 0,
            references: 0,
        });
    }
    // scores[j][i]: reference j against estimate i.
    let mut scores = Vec::with_capacity(n);
    for r in references {
        let row = estimates
            .iter()
            .map(|e| si_sdr_slices(e.as_ref(), r.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        scores.push(row);
    }

    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_sum = f64::NEG_INFINITY;
    loop {
        let sum: f64 = perm.iter().enumerate().map(|(j, &i)| scores[j][i].db).sum();
        if sum > best_sum {
            best_sum = sum;
            best.clone_from(&perm);
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(PitResult {
        scores: best.iter().enumerate().map(|(j, &i)| scores[j][i]).collect(),
        mean_db: best_sum / n as f64,
        permutation: best,
    })
}
