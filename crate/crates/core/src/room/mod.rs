//! Acoustic scene sampling and shoebox room impulse responses.

mod acoustics;
mod decay;
mod ism;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use acoustics::{t60_to_absorption, Absorption, AbsorptionFormula};
pub use decay::{energy_decay_curve_db, measure_t60};
pub use ism::{
    direct_path_rir, image_source_rir, ism_absorption, room_rirs, shoebox_rir, RoomRirs, ShoeboxParams, KERNEL_TAPS,
};

/// Speed of sound in m/s.
pub const SPEED_OF_SOUND: f64 = 343.0;
/// Minimum distance between any transducer and a wall, in meters.
pub const WALL_CLEARANCE: f64 = 0.1;
const MAX_PLACEMENT_ATTEMPTS: usize = 1000;

pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReverbClass {
    Low,
    Medium,
    High,
}

impl ReverbClass {
    pub const ALL: [ReverbClass; 3] = [ReverbClass::Low, ReverbClass::Medium, ReverbClass::High];

    /// Uniform T60 sampling range in seconds.
    pub fn t60_range(self) -> (f64, f64) {
        match self {
            ReverbClass::High => (0.4, 1.0),
            ReverbClass::Medium => (0.2, 0.6),
            ReverbClass::Low => (0.1, 0.3),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ReverbClass::Low => "low",
            ReverbClass::Medium => "medium",
            ReverbClass::High => "high",
        }
    }
}

impl fmt::Display for ReverbClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReverbClass {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(ReverbClass::Low),
            "medium" | "med" => Ok(ReverbClass::Medium),
            "high" => Ok(ReverbClass::High),
            other => Err(format!("unknown reverb class `{other}`")),
        }
    }
}

/// Source placement relative to the microphone-array center. The distance
/// is measured in the horizontal plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourcePlacement {
    pub height: f64,
    pub distance: f64,
    pub azimuth: f64,
}

/// One sampled acoustic scene: a shoebox room, a two-microphone array and
/// two talker positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomSpec {
    /// Length, width and height in meters.
    pub dims: [f64; 3],
    pub t60_target: f64,
    pub reverb_class: ReverbClass,
    pub mic_center: Point,
    pub mic_separation: f64,
    pub mic_angle: f64,
    pub sources: [SourcePlacement; 2],
    pub rng_seed: u64,
}

impl RoomSpec {
    pub fn mic_positions(&self) -> [Point; 2] {
        let (s, c) = self.mic_angle.sin_cos();
        let h = self.mic_separation / 2.0;
        let [x, y, z] = self.mic_center;
        [[x - h * c, y - h * s, z], [x + h * c, y + h * s, z]]
    }

    pub fn mic_position(&self, index: usize) -> Point {
        self.mic_positions()[index]
    }

    pub fn source_position(&self, index: usize) -> Point {
        let p = &self.sources[index];
        let (s, c) = p.azimuth.sin_cos();
        [
            self.mic_center[0] + p.distance * c,
            self.mic_center[1] + p.distance * s,
            p.height,
        ]
    }

    fn inside(&self, p: &Point) -> bool {
        p.iter()
            .zip(&self.dims)
            .all(|(&v, &d)| v >= WALL_CLEARANCE && v <= d - WALL_CLEARANCE)
    }

    /// Geometric sanity: positive dimensions, positive T60 and every
    /// transducer at least [`WALL_CLEARANCE`] from the walls.
    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|&d| !(d.is_finite() && d > 2.0 * WALL_CLEARANCE)) {
            return Err(Error::InvalidRoom(format!("dimensions {:?}", self.dims)));
        }
        if !(self.t60_target.is_finite() && self.t60_target > 0.0) {
            return Err(Error::InvalidT60(self.t60_target));
        }
        for (i, m) in self.mic_positions().iter().enumerate() {
            if !self.inside(m) {
                return Err(Error::InvalidRoom(format!("microphone {i} at {m:?} is outside")));
            }
        }
        for i in 0..2 {
            let s = self.source_position(i);
            if !self.inside(&s) {
                return Err(Error::InvalidRoom(format!("source {i} at {s:?} is outside")));
            }
        }
        Ok(())
    }
}

/// Fixed values that replace the corresponding random draws.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RoomOverrides {
    pub dims: Option<[f64; 3]>,
    pub t60: Option<f64>,
    pub mic_separation: Option<f64>,
}

/// Samples a scene from the room/array/source distributions. Pure in `seed`.
pub fn sample_room(seed: u64, class: ReverbClass, mic_separation_override: Option<f64>) -> Result<RoomSpec> {
    sample_room_with(
        seed,
        class,
        &RoomOverrides {
            mic_separation: mic_separation_override,
            ..Default::default()
        },
    )
}

pub fn sample_room_with(seed: u64, class: ReverbClass, overrides: &RoomOverrides) -> Result<RoomSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Every draw happens regardless of overrides so the stream stays aligned.
    let drawn_dims = [
        rng.random_range(5.0..=10.0),
        rng.random_range(5.0..=10.0),
        rng.random_range(3.0..=4.0),
    ];
    let (t_lo, t_hi) = class.t60_range();
    let drawn_t60 = rng.random_range(t_lo..=t_hi);
    let offset_x: f64 = rng.random_range(-0.2..=0.2);
    let offset_y: f64 = rng.random_range(-0.2..=0.2);
    let mic_height = rng.random_range(0.9..=1.8);
    let drawn_sep = rng.random_range(0.15..=0.17);
    let mic_angle = rng.random_range(0.0..2.0 * PI);

    let dims = overrides.dims.unwrap_or(drawn_dims);
    let t60 = overrides.t60.unwrap_or(drawn_t60);
    if !(t60.is_finite() && t60 > 0.0) {
        return Err(Error::InvalidT60(t60));
    }
    let mut spec = RoomSpec {
        dims,
        t60_target: t60,
        reverb_class: class,
        mic_center: [dims[0] / 2.0 + offset_x, dims[1] / 2.0 + offset_y, mic_height],
        mic_separation: overrides.mic_separation.unwrap_or(drawn_sep),
        mic_angle,
        sources: [SourcePlacement {
            height: 0.0,
            distance: 0.0,
            azimuth: 0.0,
        }; 2],
        rng_seed: seed,
    };
    if spec.mic_positions().iter().any(|m| !spec.inside(m)) {
        return Err(Error::InvalidRoom(format!("microphones do not fit in a {dims:?} room")));
    }

    for i in 0..2 {
        let mut placed = false;
        for _ in 0..MAX_PLACEMENT_ATTEMPTS {
            spec.sources[i] = SourcePlacement {
                height: rng.random_range(0.9..=1.8),
                distance: rng.random_range(0.66..=2.0),
                azimuth: rng.random_range(0.0..2.0 * PI),
            };
            if spec.inside(&spec.source_position(i)) {
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::PlacementFailed(MAX_PLACEMENT_ATTEMPTS));
        }
    }
    Ok(spec)
}

/// A finite impulse response for one (source, microphone) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rir {
    pub taps: Vec<f64>,
    pub sample_rate: u32,
    /// Direct-path delay in (fractional) samples.
    pub direct_delay: f64,
    /// Direct-path amplitude, `1 / (4 pi d)`.
    pub direct_gain: f64,
}

impl Rir {
    pub fn energy(&self) -> f64 {
        self.taps.iter().map(|t| t * t).sum()
    }
}

pub(crate) fn distance(a: &Point, b: &Point) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}
