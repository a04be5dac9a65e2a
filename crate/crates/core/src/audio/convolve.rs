//! Full linear convolution, direct for short kernels and FFT-based otherwise.

use std::cell::RefCell;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use super::AudioBuffer;
use crate::error::{Error, Result};
use crate::room::Rir;

/// Kernels with at most this many non-zero-bounded taps use the direct sum.
const DIRECT_MAX_TAPS: usize = 96;
/// Signals longer than this are processed with overlap-save blocks.
const SINGLE_FFT_MAX_FRAMES: usize = 1 << 20;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Convolves a mono signal with one RIR channel. Output length is
/// `len(signal) + len(rir) - 1`.
pub fn convolve(signal: &AudioBuffer, rir: &Rir) -> Result<AudioBuffer> {
    if signal.channels() != 1 {
        return Err(Error::ChannelCount {
            expected: 1,
            got: signal.channels(),
        });
    }
    if signal.sample_rate() != rir.sample_rate {
        return Err(Error::SampleRateMismatch {
            left: signal.sample_rate(),
            right: rir.sample_rate,
        });
    }
    AudioBuffer::from_mono(convolve_slices(signal.channel(0), &rir.taps), signal.sample_rate())
}

/// Full convolution picking the cheaper evaluation path. Leading and
/// trailing zero taps of `kernel` are skipped.
pub fn convolve_slices(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    let out_len = signal.len() + kernel.len() - 1;
    let Some(first) = kernel.iter().position(|&h| h != 0.0) else {
        return vec![0.0; out_len];
    };
    let last = kernel.iter().rposition(|&h| h != 0.0).unwrap_or(first);
    let support = &kernel[first..=last];

    let partial = if support.len() <= DIRECT_MAX_TAPS || signal.len() <= DIRECT_MAX_TAPS {
        convolve_direct(signal, support)
    } else {
        convolve_fft(signal, support)
    };
    let mut out = vec![0.0; out_len];
    out[first..first + partial.len()].copy_from_slice(&partial);
    out
}

/// Direct-sum full convolution.
pub fn convolve_direct(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; signal.len() + kernel.len() - 1];
    for (i, &x) in signal.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (o, &h) in out[i..i + kernel.len()].iter_mut().zip(kernel) {
            *o += x * h;
        }
    }
    out
}

/// FFT-based full convolution. Long signals are split into overlap-save blocks.
pub fn convolve_fft(signal: &[f64], kernel: &[f64]) -> Vec<f64> {
    if signal.is_empty() || kernel.is_empty() {
        return Vec::new();
    }
    let out_len = signal.len() + kernel.len() - 1;
    if signal.len() <= SINGLE_FFT_MAX_FRAMES {
        let n = out_len.next_power_of_two();
        let mut y = fft_product(signal, kernel, n);
        y.truncate(out_len);
        return y;
    }
    overlap_save(signal, kernel, out_len)
}

fn with_planner<T>(f: impl FnOnce(&mut FftPlanner<f64>) -> T) -> T {
    PLANNER.with(|p| f(&mut p.borrow_mut()))
}

fn fft_product(signal: &[f64], kernel: &[f64], n: usize) -> Vec<f64> {
    let (fwd, inv) = with_planner(|p| (p.plan_fft_forward(n), p.plan_fft_inverse(n)));
    let mut xs = padded(signal, n);
    let mut hs = padded(kernel, n);
    fwd.process(&mut xs);
    fwd.process(&mut hs);
    for (x, h) in xs.iter_mut().zip(&hs) {
        *x *= h;
    }
    inv.process(&mut xs);
    let scale = 1.0 / n as f64;
    xs.iter().map(|c| c.re * scale).collect()
}

fn padded(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for (c, &r) in v.iter_mut().zip(x) {
        c.re = r;
    }
    v
}

fn overlap_save(signal: &[f64], kernel: &[f64], out_len: usize) -> Vec<f64> {
    let m = kernel.len();
    let n = (4 * m).max(1 << 16).next_power_of_two();
    let block = n - (m - 1);
    let (fwd, inv) = with_planner(|p| (p.plan_fft_forward(n), p.plan_fft_inverse(n)));
    let mut hs = padded(kernel, n);
    fwd.process(&mut hs);
    let scale = 1.0 / n as f64;

    let mut out = Vec::with_capacity(out_len);
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    let mut start = 0usize;
    while start < out_len {
        // Input window covers output samples [start, start + block).
        for (k, c) in buf.iter_mut().enumerate() {
            let idx = (start + k) as isize - (m as isize - 1);
            let v = if idx >= 0 && (idx as usize) < signal.len() {
                signal[idx as usize]
            } else {
                0.0
            };
            *c = Complex64::new(v, 0.0);
        }
        fwd.process(&mut buf);
        for (x, h) in buf.iter_mut().zip(&hs) {
            *x *= h;
        }
        inv.process(&mut buf);
        let take = block.min(out_len - start);
        out.extend(buf[m - 1..m - 1 + take].iter().map(|c| c.re * scale));
        start += block;
    }
    out
}
