//! Reverberation time from Schroeder backward integration.

use super::Rir;
use crate::error::{Error, Result};

const FIT_START_DB: f64 = -5.0;
const FIT_END_DB: f64 = -25.0;
const TRUNCATION_GUARD: f64 = 0.75;

/// Normalized energy decay curve in dB (0 dB at the first tap).
pub fn energy_decay_curve_db(taps: &[f64]) -> Vec<f64> {
    let mut edc = vec![0.0; taps.len()];
    let mut acc = 0.0;
    for (e, t) in edc.iter_mut().zip(taps).rev() {
        acc += t * t;
        *e = acc;
    }
    let total = acc;
    edc.iter()
        .map(|&e| {
            if e > 0.0 {
                10.0 * (e / total).log10()
            } else {
                f64::NEG_INFINITY
            }
        })
        .collect()
}

/// T60 in seconds: a least-squares line through the -5 to -25 dB portion of
/// the energy decay curve, extrapolated to 60 dB.
pub fn measure_t60(rir: &Rir) -> Result<f64> {
    if rir.energy() <= 0.0 {
        return Err(Error::ZeroEnergy("room impulse response"));
    }
    let edc = energy_decay_curve_db(&rir.taps);
    let start = edc
        .iter()
        .position(|&d| d <= FIT_START_DB)
        .ok_or_else(|| Error::InsufficientDecay("never decays by 5 dB".into()))?;
    let end = edc
        .iter()
        .rposition(|&d| d >= FIT_END_DB)
        .ok_or_else(|| Error::InsufficientDecay("no point above -25 dB".into()))?;
    if edc.last().is_some_and(|&d| d > FIT_END_DB) {
        return Err(Error::InsufficientDecay(format!(
            "decay curve ends at {:.1} dB",
            edc.last().copied().unwrap_or(0.0)
        )));
    }
    // A truncated response always plunges at its end; require the fit range
    // to finish well before that.
    if end as f64 > TRUNCATION_GUARD * edc.len() as f64 {
        return Err(Error::InsufficientDecay(format!(
            "-25 dB reached only at tap {end} of {}",
            edc.len()
        )));
    }
    if end <= start {
        return Err(Error::InsufficientDecay("no samples between -5 and -25 dB".into()));
    }

    let fs = rir.sample_rate as f64;
    let n = (end - start + 1) as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for (i, &y) in edc.iter().enumerate().take(end + 1).skip(start) {
        let x = i as f64 / fs;
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    if !(slope < 0.0) {
        return Err(Error::InsufficientDecay(format!("non-negative slope {slope}")));
    }
    Ok(-60.0 / slope)
}
