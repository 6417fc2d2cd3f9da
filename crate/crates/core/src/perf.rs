//! Analytical latency, energy, power and throughput of a planned layer.
//!
//! Energy is event-driven: every counted event (modulated activation, ring
//! tuning step, BPD readout, ...) costs a fixed amount, and static power is
//! integrated over the whole wall-clock latency, tuning included.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::mapper::{Schedule, TuningSummary};

pub const CONSTANTS_FORMAT: &str = "optisense-constants";
pub const CONSTANTS_VERSION: u32 = 1;

/// Per-event energies (J), per-step latencies (s) and static terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingEnergyConstants {
    /// Duration of one architecture-wide MAC step.
    pub t_mac: f64,
    /// Thermo-optic (coarse) tuning step.
    pub to_step_energy: f64,
    pub to_step_latency: f64,
    /// Electro-optic (fine) tuning step.
    pub eo_step_energy: f64,
    pub eo_step_latency: f64,
    /// One activation modulated onto one ring's wavelength for one cycle.
    pub vcsel_emission_energy: f64,
    /// One balanced-photodiode readout of an arm.
    pub bpd_detection_energy: f64,
    /// One weight conversion by an AWC unit.
    pub awc_conversion_energy: f64,
    /// One weight fetched from the on-chip kernel banks.
    pub kernel_bank_read_energy: f64,
    /// One partial sum re-emitted by the output modulator.
    pub vom_remodulation_energy: f64,
    /// Always-on power (W), e.g. VCSEL bias and control.
    pub static_power: f64,
    /// Frame-level overheads outside the first layer.
    pub exposure_time: f64,
    pub readout_time: f64,
}

const REQUIRED: [&str; 13] = [
    "t_mac",
    "to_step_energy",
    "to_step_latency",
    "eo_step_energy",
    "eo_step_latency",
    "vcsel_emission_energy",
    "bpd_detection_energy",
    "awc_conversion_energy",
    "kernel_bank_read_energy",
    "vom_remodulation_energy",
    "static_power",
    "exposure_time",
    "readout_time",
];

impl Default for TimingEnergyConstants {
    /// The `paper_cal` calibration.
    fn default() -> Self {
        TimingEnergyConstants {
            t_mac: 55.8e-12,
            to_step_energy: 175e-12,
            to_step_latency: 100e-9,
            eo_step_energy: 17.5e-15,
            eo_step_latency: 1e-9,
            vcsel_emission_energy: 87.5e-15,
            bpd_detection_energy: 175e-15,
            awc_conversion_energy: 87.5e-15,
            kernel_bank_read_energy: 17.5e-15,
            vom_remodulation_energy: 175e-15,
            static_power: 1.75e-3,
            exposure_time: 0.8e-3,
            readout_time: 0.1e-3,
        }
    }
}

impl TimingEnergyConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_mac > 0.0) {
            return Err(SimError::InvalidConfig("t_mac must be positive".into()));
        }
        let fields = [
            self.to_step_energy,
            self.to_step_latency,
            self.eo_step_energy,
            self.eo_step_latency,
            self.vcsel_emission_energy,
            self.bpd_detection_energy,
            self.awc_conversion_energy,
            self.kernel_bank_read_energy,
            self.vom_remodulation_energy,
            self.static_power,
            self.exposure_time,
            self.readout_time,
        ];
        if fields.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(SimError::InvalidConfig(
                "timing and energy constants must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Copy with every energy and static power multiplied by `c`.
    pub fn with_energy_scaled(&self, c: f64) -> Self {
        TimingEnergyConstants {
            to_step_energy: self.to_step_energy * c,
            eo_step_energy: self.eo_step_energy * c,
            vcsel_emission_energy: self.vcsel_emission_energy * c,
            bpd_detection_energy: self.bpd_detection_energy * c,
            awc_conversion_energy: self.awc_conversion_energy * c,
            kernel_bank_read_energy: self.kernel_bank_read_energy * c,
            vom_remodulation_energy: self.vom_remodulation_energy * c,
            static_power: self.static_power * c,
            ..self.clone()
        }
    }

    /// Parses a constants fixture: `format`, `version`, optional `name` and
    /// `provenance`, and a complete `[constants]` table.
    pub fn from_toml_str(text: &str) -> Result<ConstantsFixture> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| SimError::InvalidConfig(format!("constants: {e}")))?;
        match table.get("format").and_then(|v| v.as_str()) {
            Some(CONSTANTS_FORMAT) => {}
            other => {
                return Err(SimError::InvalidConfig(format!(
                    "constants: expected format `{CONSTANTS_FORMAT}`, found {other:?}"
                )))
            }
        }
        let version = table.get("version").and_then(|v| v.as_integer()).unwrap_or(0);
        if version != CONSTANTS_VERSION as i64 {
            return Err(SimError::InvalidConfig(format!(
                "constants: unsupported version {version}"
            )));
        }
        let body = table
            .get("constants")
            .and_then(|v| v.as_table())
            .ok_or(SimError::MissingConstant("[constants]".into()))?;
        if let Some(missing) = REQUIRED.iter().find(|k| !body.contains_key(**k)) {
            return Err(SimError::MissingConstant((*missing).to_string()));
        }
        let constants: TimingEnergyConstants = body
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| SimError::InvalidConfig(format!("constants: {e}")))?;
        constants.validate()?;
        let text_field = |k: &str| table.get(k).and_then(|v| v.as_str()).unwrap_or_default().to_string();
        Ok(ConstantsFixture {
            name: text_field("name"),
            provenance: text_field("provenance"),
            constants,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<ConstantsFixture> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsFixture {
    pub name: String,
    pub provenance: String,
    pub constants: TimingEnergyConstants,
}

/// How many operations one multiply-accumulate counts as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpsAccounting {
    /// One MAC is one operation.
    OnePerMac,
    /// One MAC is a multiply plus an add.
    #[default]
    TwoPerMac,
}

impl OpsAccounting {
    pub fn ops_per_mac(self) -> u64 {
        match self {
            OpsAccounting::OnePerMac => 1,
            OpsAccounting::TwoPerMac => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EventCounts {
    pub vcsel_emissions: u64,
    pub bpd_detections: u64,
    pub awc_conversions: u64,
    pub kernel_bank_reads: u64,
    pub vom_remodulations: u64,
    pub to_steps: u64,
    pub eo_steps: u64,
}

impl EventCounts {
    pub fn from_schedule(schedule: &Schedule, tuning: &TuningSummary) -> Self {
        EventCounts {
            vcsel_emissions: schedule.counters.total_macs,
            bpd_detections: schedule.counters.arm_evaluations,
            awc_conversions: tuning.programmed_rings,
            kernel_bank_reads: tuning.programmed_rings,
            vom_remodulations: schedule.counters.vom_partials,
            to_steps: tuning.coarse_steps,
            eo_steps: tuning.fine_steps,
        }
    }
}

/// Energy per component, joules.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub vcsel: f64,
    pub mr_tuning: f64,
    pub bpd: f64,
    pub awc: f64,
    pub kernel_bank: f64,
    pub vom: f64,
    #[serde(rename = "static")]
    pub static_: f64,
}

impl EnergyBreakdown {
    pub fn total(&self) -> f64 {
        self.vcsel + self.mr_tuning + self.bpd + self.awc + self.kernel_bank + self.vom + self.static_
    }

    pub fn dynamic(&self) -> f64 {
        self.total() - self.static_
    }

    pub fn entries(&self) -> [(&'static str, f64); 7] {
        [
            ("vcsel", self.vcsel),
            ("mr_tuning", self.mr_tuning),
            ("bpd", self.bpd),
            ("awc", self.awc),
            ("kernel_bank", self.kernel_bank),
            ("vom", self.vom),
            ("static", self.static_),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    /// Duration of one architecture-wide MAC step, s.
    pub cycle_time: f64,
    pub cycles: u64,
    pub compute_latency: f64,
    pub tuning_latency: f64,
    pub latency: f64,
    pub macs: u64,
    pub ops: u64,
    pub ops_accounting: OpsAccounting,
    pub events: EventCounts,
    pub energy: EnergyBreakdown,
    pub total_energy: f64,
    /// Mean power over `latency`, W.
    pub average_power: f64,
    /// Op/s over `latency`.
    pub throughput: f64,
    /// Op/s/W.
    pub efficiency: f64,
    pub frame_rate: f64,
    /// Frame rate if only the optical compute steps were on the critical path.
    pub compute_frame_rate: f64,
    /// Energy per frame times frame rate, W.
    pub frame_power: f64,
    pub utilization: f64,
}

/// Estimates latency, energy and throughput of `schedule`.
pub fn estimate(
    schedule: &Schedule,
    tuning: &TuningSummary,
    constants: &TimingEnergyConstants,
    accounting: OpsAccounting,
) -> Result<PerfReport> {
    if !(constants.t_mac > 0.0) {
        return Err(SimError::MissingConstant("t_mac".into()));
    }
    constants.validate()?;
    let k = constants;
    let events = EventCounts::from_schedule(schedule, tuning);
    let cycles = schedule.counters.total_cycles;
    let compute_latency = cycles as f64 * k.t_mac;
    let latency = compute_latency + tuning.latency;

    let energy = EnergyBreakdown {
        vcsel: events.vcsel_emissions as f64 * k.vcsel_emission_energy,
        mr_tuning: events.to_steps as f64 * k.to_step_energy + events.eo_steps as f64 * k.eo_step_energy,
        bpd: events.bpd_detections as f64 * k.bpd_detection_energy,
        awc: events.awc_conversions as f64 * k.awc_conversion_energy,
        kernel_bank: events.kernel_bank_reads as f64 * k.kernel_bank_read_energy,
        vom: events.vom_remodulations as f64 * k.vom_remodulation_energy,
        static_: k.static_power * latency,
    };
    let total_energy = energy.total();
    let macs = schedule.counters.total_macs;
    let ops = macs * accounting.ops_per_mac();
    let (average_power, throughput) = if latency > 0.0 {
        (total_energy / latency, ops as f64 / latency)
    } else {
        (0.0, 0.0)
    };
    let efficiency = if average_power > 0.0 {
        throughput / average_power
    } else {
        0.0
    };
    let frame_rate = frame_rate(latency, k)?;
    Ok(PerfReport {
        cycle_time: k.t_mac,
        cycles,
        compute_latency,
        tuning_latency: tuning.latency,
        latency,
        macs,
        ops,
        ops_accounting: accounting,
        events,
        energy,
        total_energy,
        average_power,
        throughput,
        efficiency,
        frame_rate,
        compute_frame_rate: if compute_latency > 0.0 { 1.0 / compute_latency } else { 0.0 },
        frame_power: total_energy * frame_rate,
        utilization: schedule.utilization(),
    })
}

/// Frames per second when the first layer takes `latency` seconds.
pub fn frame_rate(latency: f64, constants: &TimingEnergyConstants) -> Result<f64> {
    let period = latency + constants.exposure_time + constants.readout_time;
    if !(period > 0.0) {
        return Err(SimError::ZeroLatency);
    }
    Ok(1.0 / period)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::CoreConfig;
    use crate::mapper::{plan_layer, ConvSpec, LayerSpec};

    fn zero_constants() -> TimingEnergyConstants {
        TimingEnergyConstants {
            t_mac: 55.8e-12,
            to_step_energy: 0.0,
            to_step_latency: 0.0,
            eo_step_energy: 0.0,
            eo_step_latency: 0.0,
            vcsel_emission_energy: 0.0,
            bpd_detection_energy: 0.0,
            awc_conversion_energy: 0.0,
            kernel_bank_read_energy: 0.0,
            vom_remodulation_energy: 0.0,
            static_power: 0.0,
            exposure_time: 0.0,
            readout_time: 0.0,
        }
    }

    fn single_arm() -> Schedule {
        let layer = LayerSpec::Conv(ConvSpec {
            in_height: 3,
            in_width: 3,
            in_channels: 1,
            kernel: 3,
            out_channels: 1,
            stride: 1,
            padding: 0,
        });
        plan_layer(&layer, &CoreConfig::default()).unwrap()
    }

    #[test]
    fn one_cycle_latency_is_t_mac() {
        let r = estimate(&single_arm(), &TuningSummary::default(), &zero_constants(), OpsAccounting::OnePerMac)
            .unwrap();
        assert_eq!(r.latency, 55.8e-12);
        assert_eq!(r.cycle_time, 55.8e-12);
    }

    #[test]
    fn single_bpd_event() {
        let e = 3.5e-15;
        let k = TimingEnergyConstants {
            bpd_detection_energy: e,
            ..zero_constants()
        };
        let r = estimate(&single_arm(), &TuningSummary::default(), &k, OpsAccounting::OnePerMac).unwrap();
        assert_eq!(r.events.bpd_detections, 1);
        assert_eq!(r.total_energy, e);
        assert_eq!(r.energy.bpd, e);
        assert_eq!(r.energy.total() - r.energy.bpd, 0.0);
    }

    #[test]
    fn zero_work_schedule() {
        let mut s = single_arm();
        s.rounds.clear();
        s.counters = Default::default();
        let tuning = TuningSummary {
            latency: 2e-6,
            ..Default::default()
        };
        let r = estimate(&s, &tuning, &TimingEnergyConstants::default(), OpsAccounting::TwoPerMac).unwrap();
        assert_eq!(r.energy.dynamic(), 0.0);
        assert_eq!(r.latency, 2e-6);
    }

    #[test]
    fn frame_rate_reciprocal() {
        let k = TimingEnergyConstants {
            exposure_time: 0.0,
            readout_time: 0.0,
            ..Default::default()
        };
        assert!((frame_rate(1e-3, &k).unwrap() - 1000.0).abs() < 1e-9);
        assert!(matches!(frame_rate(0.0, &k), Err(SimError::ZeroLatency)));
    }

    #[test]
    fn constants_fixture_parsing() {
        let mut text = String::from("format = \"optisense-constants\"\nversion = 1\nname = \"t\"\n[constants]\n");
        let k = TimingEnergyConstants::default();
        let body = toml::to_string(&k).unwrap();
        text.push_str(&body);
        let f = TimingEnergyConstants::from_toml_str(&text).unwrap();
        assert_eq!(f.constants, k);
        assert_eq!(f.name, "t");

        let partial = text.replace("static_power", "# static_power");
        assert!(matches!(
            TimingEnergyConstants::from_toml_str(&partial),
            Err(SimError::MissingConstant(name)) if name == "static_power"
        ));
        assert!(TimingEnergyConstants::from_toml_str("format = \"x\"").is_err());
    }
}
