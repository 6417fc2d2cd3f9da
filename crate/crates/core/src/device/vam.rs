//! VCSEL-based activation modulator: two sense amplifiers threshold the pixel
//! signal into a ternary code that selects the laser drive current.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Ternary activation produced by the two sense amplifiers.
///
/// `One` corresponds to (t1, t2) = (1, 0); the pair (0, 1) cannot occur since
/// the high-threshold amplifier only fires when the low one does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum TernaryCode {
    #[default]
    Zero,
    One,
    Two,
}

impl TernaryCode {
    pub const ALL: [TernaryCode; 3] = [TernaryCode::Zero, TernaryCode::One, TernaryCode::Two];

    pub fn value(self) -> u8 {
        match self {
            TernaryCode::Zero => 0,
            TernaryCode::One => 1,
            TernaryCode::Two => 2,
        }
    }

    pub fn sa_outputs(self) -> (bool, bool) {
        match self {
            TernaryCode::Zero => (false, false),
            TernaryCode::One => (true, false),
            TernaryCode::Two => (true, true),
        }
    }

    pub fn from_sa_outputs(t1: bool, t2: bool) -> Result<Self> {
        match (t1, t2) {
            (false, false) => Ok(TernaryCode::Zero),
            (true, false) => Ok(TernaryCode::One),
            (true, true) => Ok(TernaryCode::Two),
            (false, true) => Err(SimError::InvalidState(
                "sense amplifier outputs (t1=0, t2=1) are unrepresentable".into(),
            )),
        }
    }

    pub fn from_value(v: u8) -> Result<Self> {
        match v {
            0 => Ok(TernaryCode::Zero),
            1 => Ok(TernaryCode::One),
            2 => Ok(TernaryCode::Two),
            _ => Err(SimError::InvalidState(format!("ternary code {v}"))),
        }
    }
}

impl From<TernaryCode> for u8 {
    fn from(c: TernaryCode) -> u8 {
        c.value()
    }
}

impl TryFrom<u8> for TernaryCode {
    type Error = SimError;

    fn try_from(v: u8) -> Result<Self> {
        TernaryCode::from_value(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VamConfig {
    pub v_ref_low: f64,
    pub v_ref_high: f64,
    pub supply: f64,
    /// Emission at code 0; the driver keeps the laser above threshold.
    pub bias_intensity: f64,
    /// Added emission per ternary level.
    pub intensity_per_level: f64,
}

impl Default for VamConfig {
    fn default() -> Self {
        VamConfig {
            v_ref_low: 0.16,
            v_ref_high: 0.32,
            supply: 1.0,
            bias_intensity: 0.1,
            intensity_per_level: 1.0,
        }
    }
}

impl VamConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.v_ref_low && self.v_ref_low < self.v_ref_high && self.v_ref_high < self.supply) {
            return Err(SimError::InvalidConfig(format!(
                "need 0 < v_ref_low ({}) < v_ref_high ({}) < supply ({})",
                self.v_ref_low, self.v_ref_high, self.supply
            )));
        }
        if !(self.bias_intensity > 0.0) || !(self.intensity_per_level > 0.0) {
            return Err(SimError::InvalidConfig(
                "VCSEL bias and level step must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Optical intensity emitted for `code`.
    pub fn emitted_intensity(&self, code: TernaryCode) -> f64 {
        self.bias_intensity + code.value() as f64 * self.intensity_per_level
    }
}

/// Thresholds a sense voltage into a ternary code. A voltage equal to a
/// reference resolves to the lower code.
pub fn vam_encode(v_pd: f64, cfg: &VamConfig) -> Result<TernaryCode> {
    if v_pd < 0.0 || v_pd.is_nan() {
        return Err(SimError::NegativeVoltage(v_pd));
    }
    if v_pd > cfg.supply {
        return Err(SimError::VoltageAboveSupply {
            value: v_pd,
            supply: cfg.supply,
        });
    }
    let t1 = v_pd > cfg.v_ref_low;
    let t2 = v_pd > cfg.v_ref_high;
    TernaryCode::from_sa_outputs(t1, t2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truth_table() {
        let cfg = VamConfig::default();
        assert_eq!(vam_encode(0.40, &cfg).unwrap(), TernaryCode::Two);
        assert_eq!(vam_encode(0.20, &cfg).unwrap(), TernaryCode::One);
        assert_eq!(vam_encode(0.10, &cfg).unwrap(), TernaryCode::Zero);
        assert_eq!(vam_encode(0.16, &cfg).unwrap(), TernaryCode::Zero);
        assert_eq!(vam_encode(0.32, &cfg).unwrap(), TernaryCode::One);
        assert_eq!(vam_encode(0.0, &cfg).unwrap(), TernaryCode::Zero);
        assert_eq!(vam_encode(1.0, &cfg).unwrap(), TernaryCode::Two);
    }

    #[test]
    fn rejects_out_of_range_voltage() {
        let cfg = VamConfig::default();
        assert!(matches!(vam_encode(-0.01, &cfg), Err(SimError::NegativeVoltage(_))));
        assert!(matches!(
            vam_encode(1.2, &cfg),
            Err(SimError::VoltageAboveSupply { .. })
        ));
    }

    #[test]
    fn sa_outputs_round_trip() {
        for c in TernaryCode::ALL {
            let (t1, t2) = c.sa_outputs();
            assert_eq!(TernaryCode::from_sa_outputs(t1, t2).unwrap(), c);
            assert_eq!(c.value(), t1 as u8 + t2 as u8);
        }
        assert!(TernaryCode::from_sa_outputs(false, true).is_err());
    }

    #[test]
    fn bias_floor_never_dark() {
        let cfg = VamConfig::default();
        assert_eq!(cfg.emitted_intensity(TernaryCode::Zero), cfg.bias_intensity);
        assert!(cfg.emitted_intensity(TernaryCode::Zero) > 0.0);
        assert!(cfg.emitted_intensity(TernaryCode::Two) > cfg.emitted_intensity(TernaryCode::One));
    }

    #[test]
    fn invalid_thresholds_rejected() {
        let cfg = VamConfig {
            v_ref_low: 0.4,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }
}
