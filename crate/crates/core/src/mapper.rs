//! Kernel-to-hardware mapping: which 2-D kernels sit on which arms in each
//! remap round, how many cycles each round runs, and what programming the
//! rings costs.
//!
//! Packing rules:
//! - 3×3 kernels take one arm each (9 of its 10 rings; the last ring is a
//!   spare), so a bank holds `arms_per_bank` kernels.
//! - 5×5 and 7×7 kernels take a whole bank and use every ring of the arms
//!   they touch (10+10+5 and 10+10+10+10+9); the arm partials are reduced by
//!   the output modulator.
//! - A `C`-channel kernel is split into `C` independent 2-D kernels whose
//!   per-stride results are accumulated digitally.
//! - Fully connected layers split each neuron's fan-in into 9-element chunks
//!   laid out like 3×3 kernels.
//!
//! Kernels fill banks in (bank, arm) order; within a round, cycle `t` evaluates
//! stride position `t` (raster order) of every resident kernel.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::CoreConfig;
use crate::device::mr::{tune_mr_slot, TuningCost};
use crate::error::{Result, SimError};
use crate::quant::{QuantWeight, Waveguide};

pub const SCHEDULE_FORMAT_VERSION: u32 = 1;

/// Elements per fully-connected chunk.
pub const MLP_CHUNK: usize = 9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvSpec {
    pub in_height: usize,
    pub in_width: usize,
    pub in_channels: usize,
    pub kernel: usize,
    pub out_channels: usize,
    pub stride: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub fn out_height(&self) -> usize {
        out_dim(self.in_height, self.kernel, self.stride, self.padding)
    }

    pub fn out_width(&self) -> usize {
        out_dim(self.in_width, self.kernel, self.stride, self.padding)
    }
}

fn out_dim(input: usize, k: usize, stride: usize, pad: usize) -> usize {
    let padded = input + 2 * pad;
    if stride == 0 || padded < k {
        0
    } else {
        (padded - k) / stride + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MlpSpec {
    pub fan_in: usize,
    pub outputs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    Conv(ConvSpec),
    Mlp(MlpSpec),
}

impl LayerSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            LayerSpec::Conv(c) => {
                if ![3, 5, 7].contains(&c.kernel) {
                    return Err(SimError::UnsupportedKernelSize(c.kernel));
                }
                if c.in_height == 0 || c.in_width == 0 || c.in_channels == 0 || c.out_channels == 0 || c.stride == 0 {
                    return Err(SimError::ZeroOutputGeometry(format!(
                        "all dimensions must be >= 1: {c:?}"
                    )));
                }
                if c.out_height() == 0 || c.out_width() == 0 {
                    return Err(SimError::ZeroOutputGeometry(format!(
                        "{}x{} input with K={}, pad={} has no output",
                        c.in_height, c.in_width, c.kernel, c.padding
                    )));
                }
            }
            LayerSpec::Mlp(m) => {
                if m.fan_in == 0 || m.outputs == 0 {
                    return Err(SimError::ZeroOutputGeometry(format!(
                        "fan-in and outputs must be >= 1: {m:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Kernel size driving the packing rule (3 for fully connected chunks).
    pub fn packing_kernel(&self) -> usize {
        match self {
            LayerSpec::Conv(c) => c.kernel,
            LayerSpec::Mlp(_) => 3,
        }
    }

    pub fn stride_positions(&self) -> usize {
        match self {
            LayerSpec::Conv(c) => c.out_height() * c.out_width(),
            LayerSpec::Mlp(_) => 1,
        }
    }

    /// Every 2-D kernel instance of the layer in packing order.
    pub fn kernel_instances(&self) -> Vec<KernelId> {
        match self {
            LayerSpec::Conv(c) => (0..c.out_channels)
                .flat_map(|o| (0..c.in_channels).map(move |i| KernelId::new(o, i)))
                .collect(),
            LayerSpec::Mlp(m) => {
                let chunks = m.fan_in.div_ceil(MLP_CHUNK);
                (0..m.outputs)
                    .flat_map(|o| (0..chunks).map(move |i| KernelId::new(o, i)))
                    .collect()
            }
        }
    }

    /// Number of weights in a kernel instance.
    pub fn instance_len(&self, id: KernelId) -> usize {
        match self {
            LayerSpec::Conv(c) => c.kernel * c.kernel,
            LayerSpec::Mlp(m) => {
                let start = id.part as usize * MLP_CHUNK;
                (m.fan_in - start).min(MLP_CHUNK)
            }
        }
    }
}

/// A 2-D kernel instance: `(output channel, input channel)` for convolutions,
/// `(neuron, chunk)` for fully connected layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct KernelId {
    pub output: u32,
    pub part: u32,
}

impl KernelId {
    pub fn new(output: usize, part: usize) -> Self {
        KernelId {
            output: output as u32,
            part: part as u32,
        }
    }
}

/// Contiguous run of kernel elements on one arm, starting at ring 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmSpan {
    pub arm: u32,
    /// Index of the first kernel element held by this arm.
    pub first_element: u32,
    pub len: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub kernel: KernelId,
    pub bank: u32,
    pub spans: Vec<ArmSpan>,
}

impl Placement {
    pub fn elements(&self) -> usize {
        self.spans.iter().map(|s| s.len as usize).sum()
    }

    /// Arm and ring holding kernel element `e`.
    pub fn locate(&self, e: usize) -> Option<(u32, u32)> {
        self.spans.iter().find_map(|s| {
            let start = s.first_element as usize;
            (start..start + s.len as usize)
                .contains(&e)
                .then(|| (s.arm, (e - start) as u32))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Round {
    pub index: u32,
    pub placements: Vec<Placement>,
    /// Cycles in this round; cycle `t` evaluates stride position `t`.
    pub cycles: u64,
}

impl Round {
    pub fn arms_used(&self) -> usize {
        self.placements.iter().map(|p| p.spans.len()).sum()
    }

    pub fn macs_per_cycle(&self) -> u64 {
        self.placements.iter().map(|p| p.elements() as u64).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counters {
    pub total_cycles: u64,
    pub total_macs: u64,
    pub remap_count: u64,
    pub idle_arm_cycles: u64,
    /// Arm evaluations, one BPD readout each.
    pub arm_evaluations: u64,
    /// Partial sums re-emitted through the output modulator.
    pub vom_partials: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Geometry {
    pub num_banks: usize,
    pub bank_columns: usize,
    pub arms_per_bank: usize,
    pub mrs_per_arm: usize,
}

impl From<&CoreConfig> for Geometry {
    fn from(c: &CoreConfig) -> Self {
        Geometry {
            num_banks: c.num_banks,
            bank_columns: c.bank_columns,
            arms_per_bank: c.arms_per_bank,
            mrs_per_arm: c.mrs_per_arm,
        }
    }
}

impl Geometry {
    pub fn total_arms(&self) -> usize {
        self.num_banks * self.arms_per_bank
    }

    /// Rings per arm usable by a kernel of size `k`.
    pub fn usable_slots(&self, k: usize) -> usize {
        if k == 3 {
            9
        } else {
            self.mrs_per_arm
        }
    }

    pub fn kernels_per_bank(&self, k: usize) -> usize {
        if k == 3 {
            self.arms_per_bank
        } else {
            1
        }
    }

    pub fn macs_per_cycle(&self, k: usize) -> u64 {
        (self.num_banks * self.kernels_per_bank(k) * k * k) as u64
    }

    /// AWC row programming a ring: one row spans an arm index across the
    /// banks of one bank-row.
    pub fn awc_row(&self, bank: u32, arm: u32) -> usize {
        bank as usize / self.bank_columns * self.arms_per_bank + arm as usize
    }
}

/// Peak MACs per cycle with `f` banks of 5 arms: `f · n · K²`, `n = 5` for
/// 3×3 kernels and 1 otherwise.
pub fn macs_per_cycle(f: usize, k: usize) -> Result<u64> {
    let n = match k {
        3 => 5,
        5 | 7 => 1,
        _ => return Err(SimError::UnsupportedKernelSize(k)),
    };
    Ok((f * n * k * k) as u64)
}

/// Execution plan of one layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub format_version: u32,
    pub layer: LayerSpec,
    pub geometry: Geometry,
    pub kernels_per_bank: usize,
    pub usable_slots: usize,
    pub stride_positions: u64,
    pub rounds: Vec<Round>,
    pub counters: Counters,
}

impl Schedule {
    pub fn peak_macs_per_cycle(&self) -> u64 {
        self.geometry.macs_per_cycle(self.layer.packing_kernel())
    }

    /// Fraction of peak MAC slots used over the whole schedule.
    pub fn utilization(&self) -> f64 {
        let capacity = self.counters.total_cycles * self.peak_macs_per_cycle();
        if capacity == 0 {
            0.0
        } else {
            self.counters.total_macs as f64 / capacity as f64
        }
    }

    /// Number of partials reduced per kernel result (1 when no reduction).
    pub fn vom_depth(&self) -> usize {
        match self.layer {
            LayerSpec::Conv(c) => c.kernel.pow(2).div_ceil(self.usable_slots),
            LayerSpec::Mlp(m) => m.fan_in.div_ceil(MLP_CHUNK),
        }
    }

    /// Every (kernel instance, stride index) pair evaluated by the plan.
    pub fn pairs(&self) -> impl Iterator<Item = (KernelId, u64)> + '_ {
        self.rounds.iter().flat_map(|r| {
            (0..r.cycles).flat_map(move |t| r.placements.iter().map(move |p| (p.kernel, t)))
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sched: Schedule = serde_json::from_str(s)
            .map_err(|e| SimError::InvalidConfig(format!("schedule: {e}")))?;
        if sched.format_version != SCHEDULE_FORMAT_VERSION {
            return Err(SimError::InvalidConfig(format!(
                "schedule format version {} (expected {SCHEDULE_FORMAT_VERSION})",
                sched.format_version
            )));
        }
        Ok(sched)
    }
}

fn spans_for(len: usize, slots: usize) -> Vec<ArmSpan> {
    (0..len.div_ceil(slots))
        .map(|a| ArmSpan {
            arm: a as u32,
            first_element: (a * slots) as u32,
            len: (len - a * slots).min(slots) as u32,
        })
        .collect()
}

/// True when the partials of `kernel` are re-modulated by the output
/// modulator: kernels spread over several arms, and every chunk of a fully
/// connected neuron with more than one chunk.
pub fn routes_through_vom(layer: &LayerSpec, usable_slots: usize, kernel: KernelId) -> bool {
    layer.instance_len(kernel) > usable_slots || matches!(layer, LayerSpec::Mlp(m) if m.fan_in > MLP_CHUNK)
}

/// Plans `layer` on the core described by `cfg`.
pub fn plan_layer(layer: &LayerSpec, cfg: &CoreConfig) -> Result<Schedule> {
    layer.validate()?;
    cfg.validate()?;
    let geometry = Geometry::from(cfg);
    let k = layer.packing_kernel();
    let slots = geometry.usable_slots(k);
    let per_bank = geometry.kernels_per_bank(k);
    let capacity = geometry.num_banks * per_bank;
    let positions = layer.stride_positions() as u64;

    let instances = layer.kernel_instances();
    let mut rounds = Vec::with_capacity(instances.len().div_ceil(capacity));
    let mut counters = Counters::default();
    for (index, chunk) in instances.chunks(capacity).enumerate() {
        let placements: Vec<Placement> = chunk
            .iter()
            .enumerate()
            .map(|(j, &kernel)| {
                let len = layer.instance_len(kernel);
                let mut spans = spans_for(len, slots);
                if per_bank > 1 {
                    spans[0].arm = (j % per_bank) as u32;
                }
                Placement {
                    kernel,
                    bank: (j / per_bank) as u32,
                    spans,
                }
            })
            .collect();
        let round = Round {
            index: index as u32,
            placements,
            cycles: positions,
        };
        let arms = round.arms_used() as u64;
        counters.total_cycles += positions;
        counters.total_macs += positions * round.macs_per_cycle();
        counters.arm_evaluations += positions * arms;
        counters.idle_arm_cycles += positions * (geometry.total_arms() as u64 - arms);
        counters.vom_partials += positions
            * round
                .placements
                .iter()
                .filter(|p| routes_through_vom(layer, slots, p.kernel))
                .map(|p| p.spans.len() as u64)
                .sum::<u64>();
        rounds.push(round);
    }
    counters.remap_count = rounds.len() as u64;

    Ok(Schedule {
        format_version: SCHEDULE_FORMAT_VERSION,
        layer: *layer,
        geometry,
        kernels_per_bank: per_bank,
        usable_slots: slots,
        stride_positions: positions,
        rounds,
        counters,
    })
}

/// Source of quantized weights for the kernel instances of a layer.
pub trait WeightSource: Sync {
    fn bit_width(&self) -> u8;
    fn weight(&self, kernel: KernelId, element: usize) -> QuantWeight;
}

/// The same weight at every position; used to cost synthetic workloads.
#[derive(Debug, Clone, Copy)]
pub struct UniformWeights {
    pub weight: QuantWeight,
    pub bits: u8,
}

impl UniformWeights {
    /// Full-scale positive weights: the most expensive programming.
    pub fn full_scale(bits: u8) -> Self {
        UniformWeights {
            weight: QuantWeight::new(crate::quant::max_magnitude(bits) as i32, bits)
                .expect("full scale fits"),
            bits,
        }
    }
}

impl WeightSource for UniformWeights {
    fn bit_width(&self) -> u8 {
        self.bits
    }

    fn weight(&self, _: KernelId, _: usize) -> QuantWeight {
        self.weight
    }
}

/// One programmed ring.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MrAssignment {
    pub bank: u32,
    pub arm: u32,
    pub slot: u32,
    pub waveguide: Waveguide,
    pub level: u32,
}

/// Result of programming one round of weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMap {
    pub assignments: Vec<MrAssignment>,
    pub energy: f64,
    pub latency: f64,
    pub coarse_steps: u64,
    pub fine_steps: u64,
    /// Serialized AWC row iterations needed for this round.
    pub awc_iterations: u64,
}

/// Converts a round's kernels into ring levels and costs their programming.
/// The AWC units of a row tune their rings in parallel, rows run one after
/// another, and a row takes as long as its slowest ring.
pub fn map_weights(round: &Round, weights: &dyn WeightSource, cfg: &CoreConfig) -> Result<WeightMap> {
    let geometry = Geometry::from(cfg);
    let bits = cfg.bit_width();
    if weights.bit_width() > bits {
        return Err(SimError::BitWidthOverflow {
            weight: crate::quant::max_magnitude(weights.bit_width()) as i32,
            bits,
        });
    }
    let mut assignments = Vec::with_capacity(round.macs_per_cycle() as usize);
    let mut row_latency: BTreeMap<usize, f64> = BTreeMap::new();
    let mut energy_terms = Vec::new();
    let mut total = TuningCost::default();
    for p in &round.placements {
        if p.bank as usize >= geometry.num_banks {
            return Err(SimError::GeometryMismatch(format!(
                "bank {} outside a {}-bank core",
                p.bank, geometry.num_banks
            )));
        }
        for span in &p.spans {
            if span.arm as usize >= geometry.arms_per_bank || span.len as usize > geometry.mrs_per_arm {
                return Err(SimError::GeometryMismatch(format!(
                    "arm span {span:?} does not fit a {}x{} bank",
                    geometry.arms_per_bank, geometry.mrs_per_arm
                )));
            }
            for slot in 0..span.len {
                let e = (span.first_element + slot) as usize;
                let w = weights.weight(p.kernel, e);
                if !w.fits(bits) {
                    return Err(SimError::BitWidthOverflow {
                        weight: w.value(),
                        bits,
                    });
                }
                let (_, cost) = tune_mr_slot(w.magnitude(), slot as usize, cfg)?;
                total.coarse_steps += cost.coarse_steps;
                total.fine_steps += cost.fine_steps;
                energy_terms.push(cost.energy());
                let row = row_latency.entry(geometry.awc_row(p.bank, span.arm)).or_insert(0.0);
                *row = row.max(cost.latency());
                assignments.push(MrAssignment {
                    bank: p.bank,
                    arm: span.arm,
                    slot,
                    waveguide: w.waveguide(),
                    level: w.magnitude(),
                });
            }
        }
    }
    Ok(WeightMap {
        assignments,
        energy: energy_terms.iter().sum(),
        latency: row_latency.values().sum(),
        coarse_steps: total.coarse_steps as u64,
        fine_steps: total.fine_steps as u64,
        awc_iterations: row_latency.len() as u64,
    })
}

/// Programming cost of every round of a schedule.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TuningSummary {
    pub energy: f64,
    pub latency: f64,
    pub coarse_steps: u64,
    pub fine_steps: u64,
    pub programmed_rings: u64,
    pub awc_iterations: u64,
}

pub fn tuning_summary(schedule: &Schedule, weights: &dyn WeightSource, cfg: &CoreConfig) -> Result<TuningSummary> {
    let mut s = TuningSummary::default();
    for round in &schedule.rounds {
        let m = map_weights(round, weights, cfg)?;
        s.energy += m.energy;
        s.latency += m.latency;
        s.coarse_steps += m.coarse_steps;
        s.fine_steps += m.fine_steps;
        s.programmed_rings += m.assignments.len() as u64;
        s.awc_iterations += m.awc_iterations;
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(h: usize, w: usize, c: usize, k: usize, o: usize, s: usize, p: usize) -> LayerSpec {
        LayerSpec::Conv(ConvSpec {
            in_height: h,
            in_width: w,
            in_channels: c,
            kernel: k,
            out_channels: o,
            stride: s,
            padding: p,
        })
    }

    #[test]
    fn peak_macs() {
        assert_eq!(macs_per_cycle(80, 3).unwrap(), 3600);
        assert_eq!(macs_per_cycle(80, 5).unwrap(), 2000);
        assert_eq!(macs_per_cycle(80, 7).unwrap(), 3920);
        assert!(matches!(macs_per_cycle(80, 4), Err(SimError::UnsupportedKernelSize(4))));
        let g = Geometry::from(&CoreConfig::default());
        for k in [3, 5, 7] {
            assert_eq!(g.macs_per_cycle(k), macs_per_cycle(80, k).unwrap());
        }
    }

    #[test]
    fn full_core_3x3() {
        let s = plan_layer(&conv(3, 3, 1, 3, 400, 1, 0), &CoreConfig::default()).unwrap();
        assert_eq!(s.counters.remap_count, 1);
        assert_eq!(s.counters.total_cycles, 1);
        assert_eq!(s.counters.total_macs, 3600);
        assert_eq!(s.counters.idle_arm_cycles, 0);
        assert_eq!(s.utilization(), 1.0);
        assert_eq!(s.rounds[0].placements[7].bank, 1);
        assert_eq!(s.rounds[0].placements[7].spans[0].arm, 2);
    }

    #[test]
    fn large_kernel_spans() {
        let s = plan_layer(&conv(5, 5, 1, 5, 2, 1, 0), &CoreConfig::default()).unwrap();
        let lens: Vec<u32> = s.rounds[0].placements[0].spans.iter().map(|s| s.len).collect();
        assert_eq!(lens, vec![10, 10, 5]);
        assert_eq!(s.vom_depth(), 3);
        assert_eq!(s.counters.vom_partials, 6);
        let s = plan_layer(&conv(7, 7, 1, 7, 1, 1, 0), &CoreConfig::default()).unwrap();
        let lens: Vec<u32> = s.rounds[0].placements[0].spans.iter().map(|s| s.len).collect();
        assert_eq!(lens, vec![10, 10, 10, 10, 9]);
        assert_eq!(s.vom_depth(), 5);
        assert_eq!(s.rounds[0].placements[0].locate(48), Some((4, 8)));
    }

    #[test]
    fn resnet_conv1_counters() {
        let layer = conv(128, 128, 3, 7, 64, 2, 3);
        let s = plan_layer(&layer, &CoreConfig::default()).unwrap();
        // brute force: 64x64 outputs, 192 2-D kernels, 80 per round
        assert_eq!(s.stride_positions, 64 * 64);
        assert_eq!(s.counters.remap_count, 3);
        assert_eq!(s.counters.total_cycles, 3 * 4096);
        assert_eq!(s.counters.total_macs, 4096 * 49 * 192);
        let bound = s.counters.total_macs.div_ceil(3920);
        assert!(s.counters.total_cycles >= bound);
    }

    #[test]
    fn mlp_chunks() {
        let layer = LayerSpec::Mlp(MlpSpec { fan_in: 90, outputs: 1 });
        let s = plan_layer(&layer, &CoreConfig::default()).unwrap();
        assert_eq!(s.counters.remap_count, 1);
        assert_eq!(s.counters.total_cycles, 1);
        assert_eq!(s.counters.total_macs, 90);
        assert_eq!(s.vom_depth(), 10);
        assert_eq!(s.counters.vom_partials, 10);
        let layer = LayerSpec::Mlp(MlpSpec { fan_in: 20, outputs: 3 });
        let s = plan_layer(&layer, &CoreConfig::default()).unwrap();
        assert_eq!(s.counters.total_macs, 60);
        assert_eq!(layer.instance_len(KernelId::new(0, 2)), 2);
    }

    #[test]
    fn rejects_bad_layers() {
        let cfg = CoreConfig::default();
        assert!(matches!(
            plan_layer(&conv(8, 8, 1, 4, 1, 1, 0), &cfg),
            Err(SimError::UnsupportedKernelSize(4))
        ));
        assert!(matches!(
            plan_layer(&conv(2, 2, 1, 3, 1, 1, 0), &cfg),
            Err(SimError::ZeroOutputGeometry(_))
        ));
        assert!(matches!(
            plan_layer(&LayerSpec::Mlp(MlpSpec { fan_in: 0, outputs: 1 }), &cfg),
            Err(SimError::ZeroOutputGeometry(_))
        ));
    }

    struct Table(Vec<i32>, u8);

    impl WeightSource for Table {
        fn bit_width(&self) -> u8 {
            self.1
        }
        fn weight(&self, _: KernelId, e: usize) -> QuantWeight {
            QuantWeight::new(self.0[e], self.1).unwrap()
        }
    }

    #[test]
    fn map_signed_kernel() {
        let cfg = CoreConfig::default();
        let s = plan_layer(&conv(3, 3, 1, 3, 1, 1, 0), &cfg).unwrap();
        let w = Table(vec![1, -2, 3, 0, 4, -4, 2, -1, 0], 3);
        let m = map_weights(&s.rounds[0], &w, &cfg).unwrap();
        assert_eq!(m.assignments.len(), 9);
        let pos = m.assignments.iter().filter(|a| a.waveguide == Waveguide::Positive).count();
        assert_eq!(pos, 6);
        let levels: Vec<u32> = m.assignments.iter().map(|a| a.level).collect();
        assert_eq!(levels, vec![1, 2, 3, 0, 4, 4, 2, 1, 0]);
        assert_eq!(m.awc_iterations, 1);
    }

    #[test]
    fn map_zero_kernel() {
        let cfg = CoreConfig::default();
        let s = plan_layer(&conv(3, 3, 1, 3, 2, 1, 0), &cfg).unwrap();
        let w = UniformWeights {
            weight: QuantWeight::ZERO,
            bits: 4,
        };
        let m = map_weights(&s.rounds[0], &w, &cfg).unwrap();
        assert!(m
            .assignments
            .iter()
            .all(|a| a.level == 0 && a.waveguide == Waveguide::Positive));
    }

    #[test]
    fn full_load_programming_runs_one_iteration_per_awc_row() {
        let cfg = CoreConfig::default();
        let s = plan_layer(&conv(3, 3, 1, 3, 400, 1, 0), &cfg).unwrap();
        let w = UniformWeights::full_scale(4);
        let m = map_weights(&s.rounds[0], &w, &cfg).unwrap();
        assert_eq!(m.assignments.len(), 3600);
        assert_eq!(m.awc_iterations, 100);
        let (_, per_ring) = tune_mr_slot(15, 0, &cfg).unwrap();
        assert!((m.latency - 100.0 * per_ring.latency()).abs() < 1e-18);
        assert!((m.energy - 3600.0 * per_ring.energy()).abs() <= 1e-9 * m.energy);
    }

    #[test]
    fn bit_width_overflow() {
        let cfg = CoreConfig {
            awc: crate::device::AwcConfig::ideal(2),
            ..Default::default()
        };
        let s = plan_layer(&conv(3, 3, 1, 3, 1, 1, 0), &cfg).unwrap();
        let w = Table(vec![7; 9], 3);
        assert!(matches!(
            map_weights(&s.rounds[0], &w, &cfg),
            Err(SimError::BitWidthOverflow { .. })
        ));
    }
}
