use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use reverbmix::mix::{Manifest, Split};

use crate::config::{config_error, CmdResult, Failure};

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InspectArgs {
    /// Manifest written by `generate`
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    /// Print the full recipe of one mixture
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

pub fn run(a: &InspectArgs) -> CmdResult {
    let path = a
        .manifest
        .clone()
        .ok_or_else(|| config_error("a manifest path is required"))?;
    if !path.exists() {
        return Err(Failure::MissingCorpus(format!("manifest {}", path.display())));
    }
    let m = Manifest::read(&path)?;
    if let Some(id) = &a.id {
        let r = m
            .recipes
            .iter()
            .find(|r| &r.mixture_id == id)
            .ok_or_else(|| config_error(format!("no mixture `{id}` in the manifest")))?;
        println!("{}", serde_json::to_string_pretty(r).map_err(anyhow::Error::from)?);
        return Ok(());
    }
    let h = &m.header;
    println!("format     {} (version {})", h.format, h.version);
    println!("seed       {}", h.global_seed);
    println!("canonical  {}", h.canonical);
    println!(
        "{:<6} {:>6} {:>5} {:>7} {:>5} {:>10} {:>10} {:>9}",
        "split", "n", "low", "medium", "high", "spk_gain", "noise_snr", "mean_t60"
    );
    for split in Split::ALL {
        let rs: Vec<_> = m.split(split).collect();
        if rs.is_empty() {
            continue;
        }
        let mut classes = BTreeMap::new();
        for r in &rs {
            *classes.entry(r.room.reverb_class).or_insert(0usize) += 1;
        }
        let count = |c| classes.get(&c).copied().unwrap_or(0);
        use reverbmix::room::ReverbClass::*;
        println!(
            "{:<6} {:>6} {:>5} {:>7} {:>5} {:>10.2} {:>10.2} {:>9.3}",
            split.dir(),
            rs.len(),
            count(Low),
            count(Medium),
            count(High),
            mean(&rs.iter().map(|r| r.speaker_gain_snr_db).collect::<Vec<_>>()),
            mean(&rs.iter().map(|r| r.noise_snr_db).collect::<Vec<_>>()),
            mean(&rs.iter().map(|r| r.room.t60_target).collect::<Vec<_>>()),
        );
    }
    Ok(())
}
