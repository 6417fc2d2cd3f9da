use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BpdConfig {
    /// A/W, normalized.
    pub responsivity: f64,
}

impl Default for BpdConfig {
    fn default() -> Self {
        BpdConfig { responsivity: 0.8 }
    }
}

/// Balanced photodiode: responsivity-weighted difference of the two rails.
pub fn bpd_detect(pos_intensity: f64, neg_intensity: f64, responsivity: f64) -> Result<f64> {
    if pos_intensity < 0.0 || pos_intensity.is_nan() {
        return Err(SimError::NegativeIntensity(pos_intensity));
    }
    if neg_intensity < 0.0 || neg_intensity.is_nan() {
        return Err(SimError::NegativeIntensity(neg_intensity));
    }
    Ok(responsivity * (pos_intensity - neg_intensity))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(bpd_detect(5.0, 5.0, 1.0).unwrap(), 0.0);
        assert_eq!(bpd_detect(7.0, 3.0, 1.0).unwrap(), 4.0);
        assert_eq!(bpd_detect(0.0, 2.5, 0.8).unwrap(), -2.0);
        assert!(matches!(
            bpd_detect(-1.0, 0.0, 1.0),
            Err(SimError::NegativeIntensity(_))
        ));
        assert!(bpd_detect(1.0, -0.5, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn common_mode_rejection(a in 0.0f64..100.0, b in 0.0f64..100.0, c in 0.0f64..100.0, r in 0.1f64..2.0) {
            let base = bpd_detect(a, b, r).unwrap();
            let shifted = bpd_detect(a + c, b + c, r).unwrap();
            prop_assert!((base - shifted).abs() <= 1e-12 * (1.0 + a + b + c) * r);
        }
    }
}
