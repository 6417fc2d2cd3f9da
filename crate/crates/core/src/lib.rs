//! Device-to-architecture simulator of a photonic in-sensor DNN accelerator.
//!
//! The pipeline runs from a light frame through ternary pixel readout,
//! microring dot products on the optical core, and digital epilogue layers.
//! Planning ([`mapper`]) and cost estimation ([`perf`]) work on layer shapes
//! alone; [`opc`] and [`inference`] compute actual values.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod device;
pub mod error;
pub mod fixture;
pub mod inference;
pub mod mapper;
pub mod opc;
pub mod perf;
pub mod pixel;
pub mod plane;
pub mod quant;
pub mod seed;

pub use config::{CoreConfig, Mode, NoiseConfig};
pub use device::TernaryCode;
pub use error::{Result, SimError};
pub use mapper::{plan_layer, ConvSpec, LayerSpec, MlpSpec, Schedule};
pub use opc::{arm_mac, MacReading, OpticalCore};
pub use perf::{estimate, OpsAccounting, PerfReport, TimingEnergyConstants};
pub use pixel::{Frame, PixelConfig};
pub use plane::Plane;
pub use quant::{QuantWeight, Waveguide};
