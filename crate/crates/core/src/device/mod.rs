//! Behavioral transfer functions of the analog and optical devices.

pub mod awc;
pub mod bpd;
pub mod mr;
pub mod vam;

pub use awc::{awc_convert, awc_convert_with, AwcConfig};
pub use bpd::{bpd_detect, BpdConfig};
pub use mr::{mr_transmission, tune_mr, tune_mr_slot, MrConfig, MrState, TuningCost};
pub use vam::{vam_encode, TernaryCode, VamConfig};
