//! Microring resonator: Lorentzian through-port notch and hybrid TO/EO tuning.
//!
//! The through port of an all-pass ring is modelled as
//!
//! ```text
//! T(λ) = 1 − (1 − T_min) · (w/2)² / ((λ − λ_res)² + (w/2)²),   w = λ_res / Q
//! ```
//!
//! so the notch bottoms out at the extinction floor `T_min` and sits exactly
//! halfway between `T_min` and 1 at `λ_res ± w/2`.
//!
//! A weight level `k` of an `n`-bit weight is written by detuning the ring away
//! from its channel until the calibrated pass fraction equals `k / (2^n − 1)`.
//! The pass fraction is measured against the floor (fully on resonance, level 0)
//! and the transmission at the maximum detuning (full scale).

use serde::{Deserialize, Serialize};

use crate::config::CoreConfig;
use crate::error::{Result, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MrConfig {
    /// Wavelength of slot 0 of every arm, nm.
    pub base_wavelength_nm: f64,
    /// Channel spacing between consecutive slots of an arm, nm.
    pub channel_spacing_nm: f64,
    pub q_factor: f64,
    /// Through-port transmission on resonance.
    pub extinction_floor: f64,
    /// Largest detuning the hybrid tuner applies; defines full-scale pass.
    pub max_detuning_nm: f64,
}

impl Default for MrConfig {
    fn default() -> Self {
        MrConfig {
            base_wavelength_nm: 1550.0,
            channel_spacing_nm: 0.8,
            q_factor: 5000.0,
            extinction_floor: 0.01,
            max_detuning_nm: 20.0,
        }
    }
}

impl MrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_factor > 0.0) {
            return Err(SimError::InvalidState(format!(
                "q_factor must be positive, got {}",
                self.q_factor
            )));
        }
        if !(self.base_wavelength_nm > 0.0) || !(self.channel_spacing_nm >= 0.0) {
            return Err(SimError::InvalidConfig(
                "wavelength grid must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.extinction_floor) {
            return Err(SimError::InvalidConfig(format!(
                "extinction floor must lie in [0, 1), got {}",
                self.extinction_floor
            )));
        }
        if !(self.max_detuning_nm > 0.0) {
            return Err(SimError::InvalidConfig(
                "max detuning must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn channel_wavelength(&self, slot: usize) -> f64 {
        self.base_wavelength_nm + slot as f64 * self.channel_spacing_nm
    }

    /// Notch transmission at a given detuning from resonance (nm).
    pub fn transmission_at_detuning(&self, lambda_res: f64, detuning_nm: f64) -> f64 {
        let h = 0.5 * lambda_res / self.q_factor;
        let h2 = h * h;
        1.0 - (1.0 - self.extinction_floor) * h2 / (detuning_nm * detuning_nm + h2)
    }

    /// Transmission of a ring parked at the maximum detuning.
    pub fn full_scale_transmission(&self, channel_nm: f64) -> f64 {
        self.transmission_at_detuning(channel_nm + self.max_detuning_nm, self.max_detuning_nm)
    }

    /// Maps a raw through-port transmission to a calibrated pass fraction:
    /// 0 on resonance, 1 at full-scale detuning.
    pub fn pass_fraction(&self, channel_nm: f64, transmission: f64) -> f64 {
        let full = self.full_scale_transmission(channel_nm);
        (transmission - self.extinction_floor) / (full - self.extinction_floor)
    }

    /// Red-shift (nm, ≥ 0) of the resonance that realizes a calibrated pass
    /// fraction in [0, 1] on `channel_nm`.
    ///
    /// The linewidth follows the shifted resonance, `w = (λ_ch + δ) / Q`, so
    /// `δ = a (λ_ch + δ)` with `a = sqrt(1/r − 1) / 2Q`, solved in closed form.
    pub fn detuning_for_pass(&self, channel_nm: f64, pass: f64) -> f64 {
        if pass >= 1.0 {
            return self.max_detuning_nm;
        }
        let pass = pass.max(0.0);
        let full = self.full_scale_transmission(channel_nm);
        let target = self.extinction_floor + pass * (full - self.extinction_floor);
        let depth = (1.0 - target) / (1.0 - self.extinction_floor);
        let a = (1.0 / depth - 1.0).max(0.0).sqrt() / (2.0 * self.q_factor);
        a * channel_nm / (1.0 - a)
    }
}

/// State of one programmed microring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MrState {
    /// Resonance wavelength, nm.
    pub lambda_res: f64,
    pub q_factor: f64,
    pub extinction_floor: f64,
    pub tuning_level: u32,
    /// Calibrated pass fraction realized on the assigned channel, in [0, 1].
    pub tuned_transmission: f64,
}

impl MrState {
    /// An untuned ring sitting on its channel (level 0, full extinction).
    pub fn on_resonance(channel_nm: f64, cfg: &MrConfig) -> Self {
        MrState {
            lambda_res: channel_nm,
            q_factor: cfg.q_factor,
            extinction_floor: cfg.extinction_floor,
            tuning_level: 0,
            tuned_transmission: 0.0,
        }
    }

    pub fn fwhm(&self) -> f64 {
        self.lambda_res / self.q_factor
    }
}

/// Through-port power fraction of `state` at wavelength `lambda` (nm).
pub fn mr_transmission(state: &MrState, lambda: f64) -> Result<f64> {
    if !(state.q_factor > 0.0) {
        return Err(SimError::InvalidState(format!(
            "q_factor must be positive, got {}",
            state.q_factor
        )));
    }
    if !(state.lambda_res > 0.0) {
        return Err(SimError::InvalidState(format!(
            "resonance must be positive, got {} nm",
            state.lambda_res
        )));
    }
    if !(lambda > 0.0) {
        return Err(SimError::InvalidWavelength(lambda));
    }
    let h = 0.5 * state.fwhm();
    let h2 = h * h;
    let d = lambda - state.lambda_res;
    Ok(1.0 - (1.0 - state.extinction_floor) * h2 / (d * d + h2))
}

/// Energy and latency of one hybrid tuning operation, split by stage.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TuningCost {
    pub coarse_steps: u32,
    pub fine_steps: u32,
    pub coarse_energy: f64,
    pub fine_energy: f64,
    pub coarse_latency: f64,
    pub fine_latency: f64,
}

impl TuningCost {
    pub fn energy(&self) -> f64 {
        self.coarse_energy + self.fine_energy
    }

    pub fn latency(&self) -> f64 {
        self.coarse_latency + self.fine_latency
    }
}

/// Step counts of the hybrid tuner for a level: the thermo-optic stage moves
/// in quartiles of the level range, the electro-optic stage covers the rest.
/// Each stage issues one lock step on top of its moves.
pub fn tuning_steps(level: u32, bits: u8) -> (u32, u32) {
    let quartile = ((1u32 << bits) / 4).max(1);
    (level / quartile + 1, level % quartile + 1)
}

/// Programs a ring on `slot`'s channel to `target_level`.
pub fn tune_mr_slot(target_level: u32, slot: usize, cfg: &CoreConfig) -> Result<(MrState, TuningCost)> {
    let bits = cfg.awc.bit_width;
    let max_level = (1u32 << bits) - 1;
    if target_level > max_level {
        return Err(SimError::LevelOutOfRange {
            level: target_level,
            bits,
        });
    }
    let mr = &cfg.mr;
    mr.validate()?;
    let channel = mr.channel_wavelength(slot);
    let pass = target_level as f64 / max_level as f64;
    let detuning = mr.detuning_for_pass(channel, pass);
    let mut state = MrState {
        lambda_res: channel + detuning,
        q_factor: mr.q_factor,
        extinction_floor: mr.extinction_floor,
        tuning_level: target_level,
        tuned_transmission: 0.0,
    };
    let t = mr_transmission(&state, channel)?;
    state.tuned_transmission = mr.pass_fraction(channel, t).clamp(0.0, 1.0);

    let (coarse_steps, fine_steps) = tuning_steps(target_level, bits);
    let k = &cfg.constants;
    let cost = TuningCost {
        coarse_steps,
        fine_steps,
        coarse_energy: coarse_steps as f64 * k.to_step_energy,
        fine_energy: fine_steps as f64 * k.eo_step_energy,
        coarse_latency: coarse_steps as f64 * k.to_step_latency,
        fine_latency: fine_steps as f64 * k.eo_step_latency,
    };
    Ok((state, cost))
}

/// Programs a slot-0 ring to `target_level`, returning the state, energy (J)
/// and latency (s).
pub fn tune_mr(target_level: u32, cfg: &CoreConfig) -> Result<(MrState, f64, f64)> {
    let (state, cost) = tune_mr_slot(target_level, 0, cfg)?;
    Ok((state, cost.energy(), cost.latency()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state(lambda_res: f64, q: f64) -> MrState {
        MrState {
            lambda_res,
            q_factor: q,
            extinction_floor: 0.01,
            tuning_level: 0,
            tuned_transmission: 0.0,
        }
    }

    #[test]
    fn notch_minimum_and_half_depth() {
        let s = state(1550.0, 5000.0);
        assert!((s.fwhm() - 0.31).abs() < 1e-12);
        let floor = mr_transmission(&s, 1550.0).unwrap();
        assert!((floor - 0.01).abs() < 1e-15);
        let mid = 0.5 * (0.01 + 1.0);
        for l in [1550.0 - 0.155, 1550.0 + 0.155] {
            let t = mr_transmission(&s, l).unwrap();
            assert!(((t - mid) / mid).abs() < 1e-9, "{t}");
        }
        assert!(mr_transmission(&s, 1400.0).unwrap() >= 0.999);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            mr_transmission(&state(1550.0, 0.0), 1550.0),
            Err(SimError::InvalidState(_))
        ));
        assert!(matches!(
            mr_transmission(&state(1550.0, -3.0), 1550.0),
            Err(SimError::InvalidState(_))
        ));
        assert!(matches!(
            mr_transmission(&state(1550.0, 5000.0), 0.0),
            Err(SimError::InvalidWavelength(_))
        ));
    }

    #[test]
    fn tune_levels_are_linear() {
        let cfg = CoreConfig::default();
        let (s0, _, _) = tune_mr(0, &cfg).unwrap();
        assert!(s0.tuned_transmission.abs() < 1e-12);
        assert_eq!(s0.lambda_res, 1550.0);
        let (s15, _, _) = tune_mr(15, &cfg).unwrap();
        assert!((s15.tuned_transmission - 1.0).abs() < 1e-12);
        let (s5, _, _) = tune_mr(5, &cfg).unwrap();
        assert!((s5.tuned_transmission - 5.0 / 15.0).abs() < 1e-12);
        assert!(matches!(
            tune_mr(16, &cfg),
            Err(SimError::LevelOutOfRange { level: 16, bits: 4 })
        ));
    }

    #[test]
    fn tuning_cost_is_positive_and_additive() {
        let cfg = CoreConfig::default();
        for level in 0..16 {
            let (_, cost) = tune_mr_slot(level, 3, &cfg).unwrap();
            assert!(cost.energy() > 0.0 && cost.latency() > 0.0);
            assert_eq!(cost.energy(), cost.coarse_energy + cost.fine_energy);
            assert_eq!(cost.latency(), cost.coarse_latency + cost.fine_latency);
        }
        assert_eq!(tuning_steps(0, 4), (1, 1));
        assert_eq!(tuning_steps(5, 4), (2, 2));
        assert_eq!(tuning_steps(15, 4), (4, 4));
        assert_eq!(tuning_steps(1, 1), (2, 1));
    }
}
