//! Sign-magnitude weights: the magnitude drives the AWC, the sign picks the
//! waveguide.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveguide {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuantWeight(i8);

impl QuantWeight {
    pub const ZERO: QuantWeight = QuantWeight(0);

    pub fn new(value: i32, bits: u8) -> Result<Self> {
        if !(1..=4).contains(&bits) || value.unsigned_abs() > max_magnitude(bits) {
            return Err(SimError::BitWidthOverflow {
                weight: value,
                bits,
            });
        }
        Ok(QuantWeight(value as i8))
    }

    pub fn value(self) -> i32 {
        self.0 as i32
    }

    pub fn magnitude(self) -> u32 {
        self.0.unsigned_abs() as u32
    }

    /// Zero weights ride the positive rail at level 0.
    pub fn waveguide(self) -> Waveguide {
        if self.0 < 0 {
            Waveguide::Negative
        } else {
            Waveguide::Positive
        }
    }

    pub fn fits(self, bits: u8) -> bool {
        self.magnitude() <= max_magnitude(bits)
    }
}

pub fn max_magnitude(bits: u8) -> u32 {
    (1u32 << bits) - 1
}

/// Symmetric linear quantization to `bits` magnitude bits:
/// `scale = max|w| / (2^n − 1)`, codes rounded half away from zero.
pub fn quantize_symmetric(weights: &[f64], bits: u8) -> Result<(Vec<QuantWeight>, f64)> {
    let levels = max_magnitude(bits) as f64;
    let max_abs = weights.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    if max_abs == 0.0 {
        return Ok((vec![QuantWeight::ZERO; weights.len()], 1.0));
    }
    let scale = max_abs / levels;
    let codes = weights
        .iter()
        .map(|w| {
            let q = w / scale;
            let code = q.signum() * (q.abs() + 0.5).floor();
            QuantWeight::new(code as i32, bits)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((codes, scale))
}
