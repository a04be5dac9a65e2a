use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use reverbmix::audio::{write_wav, AudioBuffer, WavEncoding, WavWriteOptions};
use reverbmix::room::{measure_t60, room_rirs, sample_room_with, t60_to_absorption, ReverbClass, RoomOverrides};

use crate::config::{config_error, CmdResult};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RirArgs {
    /// low, medium or high [default: medium]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<String>,
    /// Room seed [default: 0]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Fixed T60 in seconds instead of the class draw
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t60: Option<f64>,
    /// Fixed room size as length,width,height in meters
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dims: Option<Vec<f64>>,
    /// Fixed microphone spacing in meters
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mic_separation: Option<f64>,
    /// Sample rate [default: 16000]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rate: Option<u32>,
    /// Source 1 or 2 [default: 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<usize>,
    /// Folder for rir.wav (one channel per microphone) and rir_stats.json
    #[arg(long, short)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct ChannelStats {
    mic: usize,
    direct_delay_samples: f64,
    direct_gain: f64,
    measured_t60: Option<f64>,
    measure_error: Option<String>,
    taps: usize,
}

pub fn run(a: &RirArgs) -> CmdResult {
    let class: ReverbClass = a.class.as_deref().unwrap_or("medium").parse().map_err(config_error)?;
    let dims = match a.dims.as_deref() {
        None => None,
        Some(&[x, y, z]) => Some([x, y, z]),
        Some(d) => return Err(config_error(format!("--dims needs three values, got {}", d.len()))),
    };
    let rate = a.rate.unwrap_or(16000);
    let source = a.source.unwrap_or(1);
    if !(1..=2).contains(&source) {
        return Err(config_error(format!("source must be 1 or 2, got {source}")));
    }
    let spec = sample_room_with(
        a.seed.unwrap_or(0),
        class,
        &RoomOverrides {
            dims,
            t60: a.t60,
            mic_separation: a.mic_separation,
        },
    )?;
    spec.validate()?;
    let closed_form = t60_to_absorption(spec.dims, spec.t60_target)?;
    let rirs = room_rirs(&spec, rate)?;
    let set = &rirs.reverberant[source - 1];
    let channels: Vec<ChannelStats> = set
        .iter()
        .enumerate()
        .map(|(m, r)| {
            let t60 = measure_t60(r);
            ChannelStats {
                mic: m + 1,
                direct_delay_samples: r.direct_delay,
                direct_gain: r.direct_gain,
                measured_t60: t60.as_ref().ok().copied(),
                measure_error: t60.err().map(|e| e.to_string()),
                taps: r.taps.len(),
            }
        })
        .collect();
    let mut echo = a.clone();
    echo.out = None;
    let stats = serde_json::json!({
        "command": "rir",
        "args": echo,
        "room": spec,
        "t60_target": spec.t60_target,
        "sample_rate": rate,
        "source": source,
        "absorption": {
            "sabine": closed_form.sabine,
            "closed_form": closed_form.coefficient,
            "closed_form_formula": closed_form.formula,
            "simulated": rirs.absorption.coefficient,
            "simulated_formula": rirs.absorption.formula,
        },
        "channels": channels,
    });
    let text = serde_json::to_string_pretty(&stats).map_err(anyhow::Error::from)?;
    println!("{text}");
    if let Some(out) = &a.out {
        std::fs::create_dir_all(out)?;
        let len = set.iter().map(|r| r.taps.len()).max().unwrap_or(0);
        let taps = set
            .iter()
            .map(|r| {
                let mut t = r.taps.clone();
                t.resize(len, 0.0);
                t
            })
            .collect();
        let buf = AudioBuffer::from_channels(taps, rate)?;
        write_wav(out.join("rir.wav"), &buf, WavWriteOptions::new(WavEncoding::Float32))?;
        std::fs::write(out.join("rir_stats.json"), text)?;
    }
    Ok(())
}
