//! Core geometry and device constants.

use serde::{Deserialize, Serialize};

use crate::device::{AwcConfig, BpdConfig, MrConfig, VamConfig};
use crate::error::{Result, SimError};
use crate::perf::TimingEnergyConstants;
use crate::pixel::PixelConfig;

/// Evaluation mode of the optical core.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Exact integer arithmetic scaled by the calibration constant.
    #[default]
    Ideal,
    /// Full device chain with the configured non-idealities.
    Noisy,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Ideal => "ideal",
            Mode::Noisy => "noisy",
        })
    }
}

/// Non-idealities beyond the AWC's own gain error and noise.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    /// Per-unit random branch mismatch of the 40 AWC units in a row (σ of the
    /// fractional gain error added to every bit).
    pub awc_mismatch_sigma: f64,
    /// σ of the resonance error left after tuning, nm.
    pub mr_drift_sigma_nm: f64,
    /// Relative σ of VCSEL emitted intensity, per emission.
    pub vam_intensity_sigma: f64,
    /// σ of additive BPD output noise, in calibrated output units.
    pub bpd_noise_sigma: f64,
    /// σ of the multiplicative re-modulation error of the output modulator.
    pub vom_sigma: f64,
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.awc_mismatch_sigma,
            self.mr_drift_sigma_nm,
            self.vam_intensity_sigma,
            self.bpd_noise_sigma,
            self.vom_sigma,
        ];
        if all.iter().any(|s| !(*s >= 0.0)) {
            return Err(SimError::InvalidConfig(
                "noise sigmas must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> NoiseConfig {
        NoiseConfig {
            awc_mismatch_sigma: self.awc_mismatch_sigma * c,
            mr_drift_sigma_nm: self.mr_drift_sigma_nm * c,
            vam_intensity_sigma: self.vam_intensity_sigma * c,
            bpd_noise_sigma: self.bpd_noise_sigma * c,
            vom_sigma: self.vom_sigma * c,
        }
    }
}

/// Geometry of the optical core plus every device and timing constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoreConfig {
    pub num_banks: usize,
    pub bank_columns: usize,
    pub arms_per_bank: usize,
    pub mrs_per_arm: usize,
    pub awc_units_per_row: usize,
    /// Lumped VAM-to-BPD optical transmission (multiplexers, splitters, waveguide).
    pub insertion_loss: f64,
    pub mr: MrConfig,
    pub awc: AwcConfig,
    pub vam: VamConfig,
    pub bpd: BpdConfig,
    pub pixel: PixelConfig,
    pub noise: NoiseConfig,
    pub constants: TimingEnergyConstants,
}

impl Default for CoreConfig {
    fn default() -> Self {
        CoreConfig {
            num_banks: 80,
            bank_columns: 4,
            arms_per_bank: 5,
            mrs_per_arm: 10,
            awc_units_per_row: 40,
            insertion_loss: 0.5,
            mr: MrConfig::default(),
            awc: AwcConfig::default(),
            vam: VamConfig::default(),
            bpd: BpdConfig::default(),
            pixel: PixelConfig::default(),
            noise: NoiseConfig::default(),
            constants: TimingEnergyConstants::default(),
        }
    }
}

impl CoreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_banks == 0 || self.bank_columns == 0 || self.arms_per_bank == 0 {
            return Err(SimError::InvalidConfig("geometry counts must be >= 1".into()));
        }
        if !self.num_banks.is_multiple_of(self.bank_columns) {
            return Err(SimError::InvalidConfig(format!(
                "{} banks do not split into {} columns",
                self.num_banks, self.bank_columns
            )));
        }
        if self.mrs_per_arm < 9 {
            return Err(SimError::InvalidConfig(format!(
                "an arm needs at least 9 rings, got {}",
                self.mrs_per_arm
            )));
        }
        if self.arms_per_bank * self.mrs_per_arm < 49 {
            return Err(SimError::InvalidConfig(
                "a bank must hold one 7x7 kernel".into(),
            ));
        }
        if self.awc_units_per_row != self.bank_columns * self.mrs_per_arm {
            return Err(SimError::InvalidConfig(format!(
                "{} AWC units cannot serve a row of {} rings",
                self.awc_units_per_row,
                self.bank_columns * self.mrs_per_arm
            )));
        }
        if !(self.insertion_loss > 0.0 && self.insertion_loss <= 1.0) {
            return Err(SimError::InvalidConfig(
                "insertion loss must be a transmission in (0, 1]".into(),
            ));
        }
        self.mr.validate()?;
        self.awc.validate()?;
        self.vam.validate()?;
        self.pixel.validate()?;
        self.noise.validate()?;
        self.constants.validate()?;
        if !(self.bpd.responsivity > 0.0) {
            return Err(SimError::InvalidConfig("responsivity must be positive".into()));
        }
        Ok(())
    }

    pub fn bit_width(&self) -> u8 {
        self.awc.bit_width
    }

    pub fn total_mrs(&self) -> usize {
        self.num_banks * self.arms_per_bank * self.mrs_per_arm
    }

    pub fn total_arms(&self) -> usize {
        self.num_banks * self.arms_per_bank
    }

    /// Rows of rings programmed together by the row of AWC units.
    pub fn awc_rows(&self) -> usize {
        self.num_banks / self.bank_columns * self.arms_per_bank
    }

    /// Copy with every non-ideality multiplied by `c`.
    pub fn with_noise_scaled(&self, c: f64) -> CoreConfig {
        let mut out = self.clone();
        out.noise = self.noise.scaled(c);
        out.awc.noise_sigma *= c;
        for e in &mut out.awc.gain_error_per_bit {
            *e *= c;
        }
        out
    }

    /// True when noisy mode would reproduce ideal mode.
    pub fn is_noiseless(&self) -> bool {
        self.noise == NoiseConfig::default()
            && self.awc.noise_sigma == 0.0
            && self.awc.gain_error_per_bit.iter().all(|&e| e == 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let cfg = CoreConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.total_mrs(), 4000);
        assert_eq!(cfg.total_arms(), 400);
        assert_eq!(cfg.awc_rows(), 100);
        assert_eq!(cfg.awc_rows() * cfg.awc_units_per_row, cfg.total_mrs());
    }

    #[test]
    fn rejects_inconsistent_geometry() {
        let cfg = CoreConfig {
            awc_units_per_row: 32,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = CoreConfig {
            num_banks: 81,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn noise_scaling() {
        let mut cfg = CoreConfig::default();
        assert!(cfg.is_noiseless());
        cfg.noise.vom_sigma = 0.1;
        cfg.awc.gain_error_per_bit = vec![0.0, 0.02];
        let half = cfg.with_noise_scaled(0.5);
        assert_eq!(half.noise.vom_sigma, 0.05);
        assert_eq!(half.awc.gain_error_per_bit, vec![0.0, 0.01]);
        assert!(cfg.with_noise_scaled(0.0).is_noiseless());
    }
}
