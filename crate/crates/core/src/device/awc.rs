//! Approximate weight converter: binary-weighted current sources, one per
//! weight bit, summed at a shared node.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::seed;

pub const MAX_BITS: u8 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AwcConfig {
    /// Magnitude bits per weight, 1..=4.
    pub bit_width: u8,
    /// Current of the LSB branch, normalized.
    pub unit_current: f64,
    /// Fractional gain mismatch of each branch, LSB first. Missing entries are
    /// zero; entries at or above `bit_width` are ignored.
    pub gain_error_per_bit: Vec<f64>,
    /// Standard deviation of additive output noise, in the same units as
    /// `unit_current`.
    pub noise_sigma: f64,
}

impl Default for AwcConfig {
    fn default() -> Self {
        AwcConfig {
            bit_width: 4,
            unit_current: 1.0,
            gain_error_per_bit: Vec::new(),
            noise_sigma: 0.0,
        }
    }
}

impl AwcConfig {
    pub fn ideal(bit_width: u8) -> Self {
        AwcConfig {
            bit_width,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_BITS).contains(&self.bit_width) {
            return Err(SimError::InvalidConfig(format!(
                "AWC bit width must be 1..={MAX_BITS}, got {}",
                self.bit_width
            )));
        }
        if self.gain_error_per_bit.len() > MAX_BITS as usize {
            return Err(SimError::InvalidConfig(format!(
                "at most {MAX_BITS} gain error terms, got {}",
                self.gain_error_per_bit.len()
            )));
        }
        if !(self.unit_current > 0.0) || !(self.noise_sigma >= 0.0) {
            return Err(SimError::InvalidConfig(
                "AWC unit current must be positive and noise non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn max_code(&self) -> u32 {
        (1u32 << self.bit_width) - 1
    }

    /// Nominal full-scale current, `(2^n − 1) · unit`.
    pub fn full_scale(&self) -> f64 {
        self.max_code() as f64 * self.unit_current
    }

    pub fn gain_error(&self, bit: usize) -> f64 {
        self.gain_error_per_bit.get(bit).copied().unwrap_or(0.0)
    }

    /// Copy of this converter with per-branch mismatch `σ · z` added, `z ~ N(0, 1)`.
    pub fn with_mismatch(&self, sigma: f64, rng: &mut impl Rng) -> AwcConfig {
        let mut out = self.clone();
        let n = self.bit_width as usize;
        out.gain_error_per_bit = (0..n)
            .map(|bit| {
                let z: f64 = rand_distr::StandardNormal.sample(rng);
                self.gain_error(bit) + sigma * z
            })
            .collect();
        out
    }

    fn deterministic_current(&self, code: u32) -> f64 {
        (0..self.bit_width as usize)
            .filter(|bit| code >> bit & 1 == 1)
            .map(|bit| self.unit_current * (1u32 << bit) as f64 * (1.0 + self.gain_error(bit)))
            .sum()
    }
}

/// Output current for `weight_code`, drawing noise from `rng`.
pub fn awc_convert_with(weight_code: u32, cfg: &AwcConfig, rng: &mut impl Rng) -> Result<f64> {
    if weight_code > cfg.max_code() {
        return Err(SimError::CodeOutOfRange {
            code: weight_code,
            bits: cfg.bit_width,
        });
    }
    let mut current = cfg.deterministic_current(weight_code);
    if cfg.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, cfg.noise_sigma)
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        current += normal.sample(rng);
    }
    Ok(current)
}

/// Output current for `weight_code`; deterministic for a fixed `seed`.
pub fn awc_convert(weight_code: u32, cfg: &AwcConfig, seed: u64) -> Result<f64> {
    awc_convert_with(weight_code, cfg, &mut seed::rng(seed, &[weight_code as u64]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_levels_are_exact() {
        let cfg = AwcConfig::ideal(4);
        for code in 0..16 {
            assert_eq!(awc_convert(code, &cfg, 1).unwrap(), code as f64);
        }
        let cfg = AwcConfig {
            unit_current: 0.25,
            ..AwcConfig::ideal(3)
        };
        for code in 0..8 {
            assert_eq!(awc_convert(code, &cfg, 1).unwrap(), code as f64 * 0.25);
        }
    }

    #[test]
    fn msb_gain_error() {
        let cfg = AwcConfig {
            gain_error_per_bit: vec![0.0, 0.0, 0.0, 0.05],
            ..AwcConfig::ideal(4)
        };
        let i = awc_convert(8, &cfg, 0).unwrap();
        assert!((i - 8.4).abs() < 1e-12);
        assert_eq!(awc_convert(0, &cfg, 0).unwrap(), 0.0);
    }

    #[test]
    fn code_out_of_range() {
        let cfg = AwcConfig::ideal(2);
        assert!(matches!(
            awc_convert(4, &cfg, 0),
            Err(SimError::CodeOutOfRange { code: 4, bits: 2 })
        ));
    }

    #[test]
    fn noise_is_seeded() {
        let cfg = AwcConfig {
            noise_sigma: 0.1,
            ..AwcConfig::ideal(4)
        };
        let a = awc_convert(9, &cfg, 42).unwrap();
        let b = awc_convert(9, &cfg, 42).unwrap();
        let c = awc_convert(9, &cfg, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!((a - 9.0).abs() < 1.0);
    }

    #[test]
    fn small_mismatch_keeps_levels_monotone() {
        // |e_i| < 2^-n keeps every step positive.
        let cfg = AwcConfig {
            gain_error_per_bit: vec![0.06, -0.06, 0.06, -0.06],
            ..AwcConfig::ideal(4)
        };
        let levels: Vec<f64> = (0..16).map(|c| awc_convert(c, &cfg, 0).unwrap()).collect();
        assert!(levels.windows(2).all(|w| w[1] >= w[0]), "{levels:?}");
    }
}
