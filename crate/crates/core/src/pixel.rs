//! ADC-less global-shutter imager: 3T pixels discharge from a reset voltage in
//! proportion to absorbed light, and the activation modulator thresholds the
//! resulting swing into ternary codes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::device::vam::{vam_encode, TernaryCode, VamConfig};
use crate::error::{Result, SimError};
use crate::plane::Plane;

/// Normalized light intensities in [0, 1], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    intensities: Plane<f64>,
}

impl Frame {
    pub fn new(width: usize, height: usize, intensities: Vec<f64>) -> Result<Self> {
        if let Some(bad) = intensities.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(SimError::DimensionMismatch(format!(
                "intensity {bad} outside [0, 1]"
            )));
        }
        Ok(Frame {
            intensities: Plane::from_vec(width, height, intensities)?,
        })
    }

    pub fn uniform(width: usize, height: usize, intensity: f64) -> Result<Self> {
        Frame::new(width, height, vec![intensity; width * height])
    }

    /// 8-bit grayscale, mapped linearly so that 255 is full intensity.
    pub fn from_gray8(width: usize, height: usize, pixels: &[u8]) -> Result<Self> {
        Frame::from_gray(width, height, pixels, 255)
    }

    fn from_gray(width: usize, height: usize, pixels: &[u8], maxval: u8) -> Result<Self> {
        let scale = maxval as f64;
        Frame::new(
            width,
            height,
            pixels.iter().map(|&p| (p.min(maxval)) as f64 / scale).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.intensities.width()
    }

    pub fn height(&self) -> usize {
        self.intensities.height()
    }

    pub fn intensities(&self) -> &Plane<f64> {
        &self.intensities
    }

    /// Reads an 8-bit binary (P5) or ASCII (P2) PGM image.
    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| SimError::io(path, e))?;
        Frame::parse_pgm(&bytes).map_err(|reason| SimError::fixture(path, reason))
    }

    pub fn parse_pgm(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut pos = 0usize;
        let mut token = || -> std::result::Result<String, String> {
            loop {
                while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                    pos += 1;
                }
                if pos < bytes.len() && bytes[pos] == b'#' {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err("truncated PGM header".into());
            }
            Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
        };
        let magic = token()?;
        let num = |s: String| s.parse::<usize>().map_err(|_| format!("bad PGM header field `{s}`"));
        let width = num(token()?)?;
        let height = num(token()?)?;
        let maxval = num(token()?)?;
        if maxval == 0 || maxval > 255 {
            return Err(format!("only 8-bit PGM is supported (maxval {maxval})"));
        }
        let pixels: Vec<u8> = match magic.as_str() {
            "P5" => {
                let start = pos + 1;
                let end = start + width * height;
                if end > bytes.len() {
                    return Err(format!(
                        "PGM data truncated: need {} bytes, have {}",
                        width * height,
                        bytes.len().saturating_sub(start)
                    ));
                }
                bytes[start..end].to_vec()
            }
            "P2" => {
                let mut out = Vec::with_capacity(width * height);
                for _ in 0..width * height {
                    let v = num(token()?)?;
                    out.push(v.min(255) as u8);
                }
                out
            }
            other => return Err(format!("unsupported PGM magic `{other}`")),
        };
        Frame::from_gray(width, height, &pixels, maxval as u8).map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PixelConfig {
    pub v_reset: f64,
    /// Volts of discharge per unit intensity per unit exposure.
    pub discharge_gain: f64,
    /// Global-shutter exposure, normalized.
    pub exposure: f64,
}

impl Default for PixelConfig {
    // 0.48 V full-scale swing puts the 0.16/0.32 V references at 1/3 and 2/3
    // of the intensity range.
    fn default() -> Self {
        PixelConfig {
            v_reset: 1.0,
            discharge_gain: 0.48,
            exposure: 1.0,
        }
    }
}

impl PixelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_reset > 0.0) || !(self.discharge_gain >= 0.0) || !(self.exposure >= 0.0) {
            return Err(SimError::InvalidConfig(
                "pixel needs v_reset > 0, discharge_gain >= 0, exposure >= 0".into(),
            ));
        }
        Ok(())
    }
}

/// Photodiode voltage after exposure; brighter pixels discharge further.
pub fn expose(frame: &Frame, cfg: &PixelConfig) -> Plane<f64> {
    let swing = cfg.discharge_gain * cfg.exposure;
    frame
        .intensities()
        .map(|&i| (cfg.v_reset - swing * i).clamp(0.0, cfg.v_reset))
}

/// Converts a photodiode voltage plane into ternary codes. The driver senses
/// the discharge `v_reset − v_pd`, so the brightest pixels map to code 2.
pub fn ternarize(v_pd: &Plane<f64>, pixel: &PixelConfig, vam: &VamConfig) -> Result<Plane<TernaryCode>> {
    v_pd.try_map(|&v| {
        if v < 0.0 || v.is_nan() {
            return Err(SimError::NegativeVoltage(v));
        }
        vam_encode(pixel.v_reset - v, vam)
    })
}

/// `expose` followed by `ternarize`.
pub fn sense(frame: &Frame, pixel: &PixelConfig, vam: &VamConfig) -> Result<Plane<TernaryCode>> {
    ternarize(&expose(frame, pixel), pixel, vam)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expose_examples() {
        let cfg = PixelConfig {
            v_reset: 1.0,
            discharge_gain: 1.0,
            exposure: 1.0,
        };
        let f = Frame::new(3, 1, vec![0.0, 1.0, 0.5]).unwrap();
        let v = expose(&f, &cfg);
        assert_eq!(v.as_slice(), &[1.0, 0.0, 0.5]);
        // over-exposure clamps at zero
        let hot = PixelConfig {
            exposure: 3.0,
            ..cfg
        };
        assert_eq!(expose(&f, &hot).as_slice(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn ternarize_uniform_frames() {
        let (p, v) = (PixelConfig::default(), VamConfig::default());
        let dark = sense(&Frame::uniform(4, 3, 0.0).unwrap(), &p, &v).unwrap();
        assert!(dark.as_slice().iter().all(|&c| c == TernaryCode::Zero));
        assert_eq!((dark.width(), dark.height()), (4, 3));
        let bright = sense(&Frame::uniform(4, 3, 1.0).unwrap(), &p, &v).unwrap();
        assert!(bright.as_slice().iter().all(|&c| c == TernaryCode::Two));
    }

    #[test]
    fn three_level_card() {
        let f = Frame::new(3, 1, vec![0.1, 0.5, 0.9]).unwrap();
        let codes = sense(&f, &PixelConfig::default(), &VamConfig::default()).unwrap();
        let values: Vec<u8> = codes.as_slice().iter().map(|c| c.value()).collect();
        assert_eq!(values, vec![0, 1, 2]);
    }

    #[test]
    fn frame_validation() {
        assert!(Frame::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Frame::new(1, 1, vec![1.5]).is_err());
        assert!(ternarize(
            &Plane::from_vec(1, 1, vec![-0.1]).unwrap(),
            &PixelConfig::default(),
            &VamConfig::default()
        )
        .is_err());
    }

    #[test]
    fn pgm_binary_and_ascii() {
        let mut p5 = b"P5\n# comment\n3 2\n255\n".to_vec();
        p5.extend_from_slice(&[0, 128, 255, 51, 102, 204]);
        let f = Frame::parse_pgm(&p5).unwrap();
        assert_eq!((f.width(), f.height()), (3, 2));
        assert_eq!(f.intensities().get(2, 0), &1.0);
        assert_eq!(f.intensities().get(0, 1), &0.2);

        let p2 = b"P2 2 1 255\n0 255\n";
        let f = Frame::parse_pgm(p2).unwrap();
        assert_eq!(f.intensities().as_slice(), &[0.0, 1.0]);

        assert!(Frame::parse_pgm(b"P6 1 1 255\n\0\0\0").is_err());
        assert!(Frame::parse_pgm(b"P5 4 4 255\n\0\0").is_err());
    }
}
