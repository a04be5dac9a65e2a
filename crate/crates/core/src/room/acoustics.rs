use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `24 ln(10) / c` at c = 343 m/s, rounded as it is usually quoted.
const SABINE_CONSTANT: f64 = 0.161;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AbsorptionFormula {
    Sabine,
    Eyring,
    /// Solved against the image-source energy envelope of a specific room.
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Absorption {
    /// Uniform energy absorption coefficient of every wall, in (0, 1).
    pub coefficient: f64,
    pub formula: AbsorptionFormula,
    /// The Sabine value, reported even when the Eyring inversion was used.
    pub sabine: f64,
}

/// Wall absorption that yields `t60` in a room of `dims` (meters).
///
/// Sabine inversion `a = 0.161 V / (S t60)`; when that is not a valid
/// coefficient (a >= 1) the Eyring form `1 - exp(-0.161 V / (S t60))` is used.
pub fn t60_to_absorption(dims: [f64; 3], t60: f64) -> Result<Absorption> {
    if !(t60.is_finite() && t60 > 0.0) {
        return Err(Error::InvalidT60(t60));
    }
    let [l, w, h] = dims;
    if !(l > 0.0 && w > 0.0 && h > 0.0) {
        return Err(Error::InvalidRoom(format!("dimensions {dims:?}")));
    }
    let volume = l * w * h;
    let surface = 2.0 * (l * w + l * h + w * h);
    let sabine = SABINE_CONSTANT * volume / (surface * t60);
    let (coefficient, formula) = if sabine < 1.0 {
        (sabine, AbsorptionFormula::Sabine)
    } else {
        (1.0 - (-sabine).exp(), AbsorptionFormula::Eyring)
    };
    Ok(Absorption {
        coefficient,
        formula,
        sabine,
    })
}
