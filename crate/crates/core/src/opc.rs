//! Optical processing core: arms of microrings on a positive and a negative
//! waveguide, balanced detection per arm, banks of arms, and the output
//! modulator that reduces arm partials.
//!
//! Results are reported in calibrated integer units: a reading of `x` means
//! the arm computed the dot product `x`. Ideal mode returns the exact integer
//! dot product. Noisy mode runs the device chain:
//!
//! 1. every weight magnitude goes through an AWC unit, and the resulting
//!    current sets the ring's pass fraction (plus resonance drift);
//! 2. every activation drives a VCSEL on its slot's channel;
//! 3. the selected rail passes the light through the programmed ring, the
//!    other rail's ring sits on resonance;
//! 4. the BPD subtracts the rails, the dark reading of the programmed arm
//!    (all activations at code 0) is removed, and the result is divided by
//!    the calibration scale.
//!
//! VCSEL powers are equalized per channel so that a full-scale ring passes
//! the same power on every slot.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{CoreConfig, Mode};
use crate::device::{awc_convert_with, bpd_detect, AwcConfig, TernaryCode};
use crate::error::{Result, SimError};
use crate::mapper::{routes_through_vom, KernelId, LayerSpec, Round, Schedule, WeightSource, MLP_CHUNK};
use crate::quant::{QuantWeight, Waveguide};
use crate::seed::{self, TAG_CYCLE, TAG_MISMATCH, TAG_PROGRAM};

/// Output of one arm evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MacReading {
    /// Dark-corrected BPD output.
    pub electrical: f64,
    /// `electrical / scale`: the dot product in integer units.
    pub units: f64,
}

/// Electrical-to-integer correspondence of a core configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    /// Dark-corrected BPD output for one code-1 activation times one level-1
    /// weight.
    pub scale: f64,
    /// VCSEL power trim of each slot's channel.
    channel_gain: Vec<f64>,
}

impl Calibration {
    /// Probes a slot-0 ring at weight 1 with activation 1 through the
    /// noiseless device chain.
    pub fn probe(cfg: &CoreConfig) -> Result<Self> {
        cfg.validate()?;
        let mr = &cfg.mr;
        let span = |slot| mr.full_scale_transmission(mr.channel_wavelength(slot)) - mr.extinction_floor;
        let reference = span(0);
        let channel_gain = (0..cfg.mrs_per_arm).map(|s| reference / span(s)).collect();
        let mut cal = Calibration {
            scale: 1.0,
            channel_gain,
        };
        let quiet = CoreConfig {
            noise: Default::default(),
            ..cfg.clone()
        };
        let unit = AwcConfig::ideal(cfg.bit_width());
        let one = QuantWeight::new(1, cfg.bit_width())?;
        let arm = program_physical(&[one], std::slice::from_ref(&unit), &quiet, &cal, &mut NoRng)?;
        let bright = arm.detect(&[TernaryCode::One], &quiet, None)?;
        if !(bright > 0.0) {
            return Err(SimError::InvalidConfig(
                "calibration probe produced no signal".into(),
            ));
        }
        cal.scale = bright;
        Ok(cal)
    }

    pub fn channel_gain(&self, slot: usize) -> f64 {
        self.channel_gain[slot]
    }
}

// Stand-in generator for noiseless programming; never sampled because every
// sigma is zero on that path.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("noiseless path draws no samples")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("noiseless path draws no samples")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("noiseless path draws no samples")
    }
}

fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Physical state of a programmed arm.
#[derive(Debug, Clone, PartialEq)]
struct PhysicalArm {
    /// Per slot: channel gain × through-port transmission of the positive
    /// and negative rail rings.
    pos: Vec<f64>,
    neg: Vec<f64>,
    dark: f64,
}

impl PhysicalArm {
    fn rails(&self, activations: &[TernaryCode], cfg: &CoreConfig, mut rng: Option<&mut ChaCha8Rng>) -> (f64, f64) {
        let sigma = cfg.noise.vam_intensity_sigma;
        let (mut p, mut n) = (0.0, 0.0);
        for (i, &a) in activations.iter().enumerate() {
            let mut light = cfg.vam.emitted_intensity(a);
            if sigma > 0.0 {
                if let Some(r) = rng.as_deref_mut() {
                    light *= (1.0 + sigma * normal(r)).max(0.0);
                }
            }
            p += light * self.pos[i];
            n += light * self.neg[i];
        }
        (cfg.insertion_loss * p, cfg.insertion_loss * n)
    }

    /// Dark-corrected BPD output.
    fn detect(&self, activations: &[TernaryCode], cfg: &CoreConfig, rng: Option<&mut ChaCha8Rng>) -> Result<f64> {
        let (p, n) = self.rails(activations, cfg, rng);
        Ok(bpd_detect(p, n, cfg.bpd.responsivity)? - self.dark)
    }
}

fn program_physical(
    weights: &[QuantWeight],
    units: &[AwcConfig],
    cfg: &CoreConfig,
    cal: &Calibration,
    rng: &mut impl Rng,
) -> Result<PhysicalArm> {
    let mr = &cfg.mr;
    let floor = mr.extinction_floor;
    let nominal_full = cfg.awc.full_scale();
    let drift = cfg.noise.mr_drift_sigma_nm;
    let mut pos = Vec::with_capacity(weights.len());
    let mut neg = Vec::with_capacity(weights.len());
    for (slot, (&w, unit)) in weights.iter().zip(units).enumerate() {
        let channel = mr.channel_wavelength(slot);
        let current = awc_convert_with(w.magnitude(), unit, rng)?;
        let pass = (current / nominal_full).clamp(0.0, 1.0);
        let mut detuning = mr.detuning_for_pass(channel, pass);
        if drift > 0.0 {
            detuning += drift * normal(rng);
        }
        let t = mr.transmission_at_detuning(channel + detuning, detuning);
        let g = cal.channel_gain(slot);
        let (tp, tn) = match w.waveguide() {
            Waveguide::Positive => (t, floor),
            Waveguide::Negative => (floor, t),
        };
        pos.push(g * tp);
        neg.push(g * tn);
    }
    let mut arm = PhysicalArm { pos, neg, dark: 0.0 };
    let dark_codes = vec![TernaryCode::Zero; weights.len()];
    let (p, n) = arm.rails(&dark_codes, cfg, None);
    arm.dark = bpd_detect(p, n, cfg.bpd.responsivity)?;
    Ok(arm)
}

/// An arm with its rings tuned to a fixed weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgrammedArm {
    weights: Vec<QuantWeight>,
    physical: Option<PhysicalArm>,
}

impl ProgrammedArm {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[QuantWeight] {
        &self.weights
    }

    /// Evaluates the arm on one activation vector. `rng` feeds the per-cycle
    /// VCSEL and BPD noise in noisy mode.
    pub fn evaluate(
        &self,
        activations: &[TernaryCode],
        core: &OpticalCore,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<MacReading> {
        if activations.len() != self.weights.len() {
            return Err(SimError::LengthMismatch {
                activations: activations.len(),
                weights: self.weights.len(),
            });
        }
        let scale = core.calibration.scale;
        match &self.physical {
            None => {
                let dot: i64 = activations
                    .iter()
                    .zip(&self.weights)
                    .map(|(a, w)| a.value() as i64 * w.value() as i64)
                    .sum();
                let units = dot as f64;
                Ok(MacReading {
                    electrical: scale * units,
                    units,
                })
            }
            Some(arm) => {
                let electrical = arm.detect(activations, &core.cfg, rng.as_deref_mut())?;
                let mut units = electrical / scale;
                let sigma = core.cfg.noise.bpd_noise_sigma;
                if sigma > 0.0 {
                    if let Some(r) = rng {
                        units += sigma * normal(r);
                    }
                }
                Ok(MacReading {
                    electrical: units * scale,
                    units,
                })
            }
        }
    }
}

/// A configured core instance: calibration plus the AWC units of one chip.
#[derive(Debug, Clone)]
pub struct OpticalCore {
    cfg: CoreConfig,
    mode: Mode,
    seed: u64,
    calibration: Calibration,
    /// One converter per AWC unit of a row; unit `column · mrs_per_arm + slot`
    /// tunes slot `slot` of every arm in bank column `column`.
    awc_units: Vec<AwcConfig>,
}

impl OpticalCore {
    /// `seed` fixes the chip (AWC mismatch) and the programming noise.
    pub fn new(cfg: &CoreConfig, mode: Mode, seed: u64) -> Result<Self> {
        let calibration = Calibration::probe(cfg)?;
        let sigma = cfg.noise.awc_mismatch_sigma;
        let mut rng = seed::rng(seed, &[TAG_MISMATCH]);
        let awc_units = (0..cfg.awc_units_per_row)
            .map(|_| {
                if sigma > 0.0 {
                    cfg.awc.with_mismatch(sigma, &mut rng)
                } else {
                    cfg.awc.clone()
                }
            })
            .collect();
        Ok(OpticalCore {
            cfg: cfg.clone(),
            mode,
            seed,
            calibration,
            awc_units,
        })
    }

    pub fn config(&self) -> &CoreConfig {
        &self.cfg
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calibration
    }

    fn draws_per_cycle(&self) -> bool {
        let n = &self.cfg.noise;
        self.mode == Mode::Noisy && (n.vam_intensity_sigma > 0.0 || n.bpd_noise_sigma > 0.0 || n.vom_sigma > 0.0)
    }

    /// Tunes an arm in bank column `column` to `weights` (at most
    /// `mrs_per_arm` of them, slot 0 first).
    pub fn program_arm(&self, weights: &[QuantWeight], column: usize, rng: &mut impl Rng) -> Result<ProgrammedArm> {
        let capacity = self.cfg.mrs_per_arm;
        if weights.len() > capacity {
            return Err(SimError::LengthOverflow {
                len: weights.len(),
                capacity,
            });
        }
        if column >= self.cfg.bank_columns {
            return Err(SimError::GeometryMismatch(format!(
                "bank column {column} outside {} columns",
                self.cfg.bank_columns
            )));
        }
        let bits = self.cfg.bit_width();
        if let Some(w) = weights.iter().find(|w| !w.fits(bits)) {
            return Err(SimError::BitWidthOverflow { weight: w.value(), bits });
        }
        let physical = match self.mode {
            Mode::Ideal => None,
            Mode::Noisy => {
                let start = column * capacity;
                let units = &self.awc_units[start..start + capacity];
                Some(program_physical(weights, units, &self.cfg, &self.calibration, rng)?)
            }
        };
        Ok(ProgrammedArm {
            weights: weights.to_vec(),
            physical,
        })
    }

    /// Programs every placement of a round.
    pub fn program_round(&self, schedule: &Schedule, round: &Round, weights: &dyn WeightSource) -> Result<ProgrammedRound> {
        let g = &schedule.geometry;
        if g.num_banks != self.cfg.num_banks
            || g.arms_per_bank != self.cfg.arms_per_bank
            || g.mrs_per_arm != self.cfg.mrs_per_arm
            || g.bank_columns != self.cfg.bank_columns
        {
            return Err(SimError::GeometryMismatch(format!(
                "schedule planned for {g:?}, core has {} banks of {}x{}",
                self.cfg.num_banks, self.cfg.arms_per_bank, self.cfg.mrs_per_arm
            )));
        }
        let mut placements = Vec::with_capacity(round.placements.len());
        let mut rng: Option<(u32, ChaCha8Rng)> = None;
        for p in &round.placements {
            if p.bank as usize >= self.cfg.num_banks {
                return Err(SimError::GeometryMismatch(format!(
                    "bank {} outside a {}-bank core",
                    p.bank, self.cfg.num_banks
                )));
            }
            // one programming stream per (round, bank), independent of how
            // many placements precede the bank
            if rng.as_ref().map(|(b, _)| *b) != Some(p.bank) {
                rng = Some((
                    p.bank,
                    seed::rng(self.seed, &[TAG_PROGRAM, round.index as u64, p.bank as u64]),
                ));
            }
            let r = &mut rng.as_mut().expect("stream set above").1;
            let column = p.bank as usize % self.cfg.bank_columns;
            let mut arms = Vec::with_capacity(p.spans.len());
            for span in &p.spans {
                if span.arm as usize >= self.cfg.arms_per_bank {
                    return Err(SimError::GeometryMismatch(format!(
                        "arm {} outside a {}-arm bank",
                        span.arm, self.cfg.arms_per_bank
                    )));
                }
                let ws: Vec<QuantWeight> = (0..span.len as usize)
                    .map(|i| weights.weight(p.kernel, span.first_element as usize + i))
                    .collect();
                arms.push((span.first_element as usize, self.program_arm(&ws, column, r)?));
            }
            placements.push(ProgrammedPlacement {
                kernel: p.kernel,
                bank: p.bank,
                vom: routes_through_vom(&schedule.layer, schedule.usable_slots, p.kernel),
                arms,
            });
        }
        Ok(ProgrammedRound {
            index: round.index,
            cycles: round.cycles,
            placements,
        })
    }

    /// Programs every round of `schedule`.
    pub fn program(&self, schedule: &Schedule, weights: &dyn WeightSource) -> Result<ProgrammedSchedule> {
        let rounds = schedule
            .rounds
            .iter()
            .map(|r| self.program_round(schedule, r, weights))
            .collect::<Result<Vec<_>>>()?;
        let outputs = match schedule.layer {
            LayerSpec::Conv(c) => c.out_channels,
            LayerSpec::Mlp(m) => m.outputs,
        };
        Ok(ProgrammedSchedule {
            outputs,
            positions: schedule.stride_positions as usize,
            rounds,
        })
    }

    /// Evaluates every placement of `round` on stride position `cycle`.
    /// Results come back in (bank, arm) order.
    pub fn cycle(
        &self,
        round: &ProgrammedRound,
        cycle: u64,
        activations: &dyn ActivationSource,
        frame_seed: u64,
    ) -> Result<Vec<StrideResult>> {
        let mut out = Vec::with_capacity(round.placements.len());
        self.cycle_into(round, cycle, activations, frame_seed, &mut out)?;
        Ok(out)
    }

    fn cycle_into(
        &self,
        round: &ProgrammedRound,
        cycle: u64,
        activations: &dyn ActivationSource,
        frame_seed: u64,
        out: &mut Vec<StrideResult>,
    ) -> Result<()> {
        if cycle >= round.cycles {
            return Err(SimError::GeometryMismatch(format!(
                "cycle {cycle} outside a {}-cycle round",
                round.cycles
            )));
        }
        let noisy = self.draws_per_cycle();
        let vom_sigma = if self.mode == Mode::Noisy { self.cfg.noise.vom_sigma } else { 0.0 };
        let mut rng: Option<(u32, ChaCha8Rng)> = None;
        let mut codes = Vec::with_capacity(self.cfg.mrs_per_arm);
        let mut partials = Vec::with_capacity(self.cfg.arms_per_bank);
        for p in &round.placements {
            if noisy && rng.as_ref().map(|(b, _)| *b) != Some(p.bank) {
                rng = Some((
                    p.bank,
                    seed::rng(frame_seed, &[TAG_CYCLE, round.index as u64, cycle, p.bank as u64]),
                ));
            }
            partials.clear();
            for (first, arm) in &p.arms {
                codes.clear();
                activations.fill(p.kernel, cycle, *first, arm.len(), &mut codes);
                let r = rng.as_mut().map(|(_, r)| r);
                partials.push(arm.evaluate(&codes, self, r)?.units);
            }
            let units = if p.vom && vom_sigma > 0.0 {
                let r = &mut rng.as_mut().expect("noisy stream").1;
                vom_reduce_noisy(&partials, vom_sigma, r)?
            } else {
                vom_reduce(&partials)?
            };
            out.push(StrideResult {
                kernel: p.kernel,
                stride: cycle,
                bank: p.bank,
                units,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ProgrammedPlacement {
    kernel: KernelId,
    bank: u32,
    vom: bool,
    /// (first kernel element, arm) per span.
    arms: Vec<(usize, ProgrammedArm)>,
}

/// One remap round with its rings tuned.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgrammedRound {
    pub index: u32,
    pub cycles: u64,
    placements: Vec<ProgrammedPlacement>,
}

impl ProgrammedRound {
    pub fn kernels(&self) -> impl Iterator<Item = KernelId> + '_ {
        self.placements.iter().map(|p| p.kernel)
    }
}

/// A whole layer with every round programmed.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgrammedSchedule {
    outputs: usize,
    positions: usize,
    rounds: Vec<ProgrammedRound>,
}

impl ProgrammedSchedule {
    pub fn rounds(&self) -> &[ProgrammedRound] {
        &self.rounds
    }

    /// Runs every cycle of every round and accumulates kernel-instance results
    /// per output. Returns `outputs × positions` values, output-major.
    pub fn run(&self, core: &OpticalCore, activations: &dyn ActivationSource, frame_seed: u64) -> Result<Vec<f64>> {
        let mut acc = vec![0.0; self.outputs * self.positions];
        let mut results = Vec::new();
        for round in &self.rounds {
            for t in 0..round.cycles {
                results.clear();
                core.cycle_into(round, t, activations, frame_seed, &mut results)?;
                for r in &results {
                    acc[r.kernel.output as usize * self.positions + r.stride as usize] += r.units;
                }
            }
        }
        Ok(acc)
    }
}

/// Result of one kernel instance at one stride position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrideResult {
    pub kernel: KernelId,
    pub stride: u64,
    pub bank: u32,
    pub units: f64,
}

/// Activation seen by element `element` of `kernel` at stride position
/// `stride`.
pub trait ActivationSource: Sync {
    fn activation(&self, kernel: KernelId, stride: u64, element: usize) -> TernaryCode;

    /// Appends the activations of elements `first..first + len`.
    fn fill(&self, kernel: KernelId, stride: u64, first: usize, len: usize, out: &mut Vec<TernaryCode>) {
        out.extend((first..first + len).map(|e| self.activation(kernel, stride, e)));
    }
}

/// Ternary input planes of a convolution, one per input channel.
#[derive(Debug, Clone, Copy)]
pub struct ConvActivations<'a> {
    pub spec: crate::mapper::ConvSpec,
    pub planes: &'a [crate::plane::Plane<TernaryCode>],
}

impl<'a> ConvActivations<'a> {
    pub fn new(spec: crate::mapper::ConvSpec, planes: &'a [crate::plane::Plane<TernaryCode>]) -> Result<Self> {
        if planes.len() != spec.in_channels
            || planes
                .iter()
                .any(|p| p.width() != spec.in_width || p.height() != spec.in_height)
        {
            return Err(SimError::ShapeMismatch(format!(
                "{} planes do not match a {}x{}x{} input",
                planes.len(),
                spec.in_channels,
                spec.in_height,
                spec.in_width
            )));
        }
        Ok(ConvActivations { spec, planes })
    }
}

impl ActivationSource for ConvActivations<'_> {
    fn activation(&self, kernel: KernelId, stride: u64, element: usize) -> TernaryCode {
        let s = &self.spec;
        let ow = s.out_width() as u64;
        let (oy, ox) = ((stride / ow) as usize, (stride % ow) as usize);
        let (ky, kx) = (element / s.kernel, element % s.kernel);
        let y = (oy * s.stride + ky) as isize - s.padding as isize;
        let x = (ox * s.stride + kx) as isize - s.padding as isize;
        self.planes[kernel.part as usize]
            .get_padded(x, y)
            .copied()
            .unwrap_or(TernaryCode::Zero)
    }

    fn fill(&self, kernel: KernelId, stride: u64, first: usize, len: usize, out: &mut Vec<TernaryCode>) {
        let s = &self.spec;
        let ow = s.out_width() as u64;
        let y0 = (stride / ow) as isize * s.stride as isize - s.padding as isize;
        let x0 = (stride % ow) as isize * s.stride as isize - s.padding as isize;
        let plane = &self.planes[kernel.part as usize];
        let (mut ky, mut kx) = (first / s.kernel, first % s.kernel);
        for _ in 0..len {
            out.push(
                plane
                    .get_padded(x0 + kx as isize, y0 + ky as isize)
                    .copied()
                    .unwrap_or(TernaryCode::Zero),
            );
            kx += 1;
            if kx == s.kernel {
                kx = 0;
                ky += 1;
            }
        }
    }
}

/// Flat ternary input of a fully connected layer.
#[derive(Debug, Clone, Copy)]
pub struct MlpActivations<'a> {
    pub input: &'a [TernaryCode],
}

impl ActivationSource for MlpActivations<'_> {
    fn activation(&self, kernel: KernelId, _: u64, element: usize) -> TernaryCode {
        self.input[kernel.part as usize * MLP_CHUNK + element]
    }
}

/// One arm workload: equal-length activations and weights.
#[derive(Debug, Clone, Copy)]
pub struct ArmWorkload<'a> {
    pub activations: &'a [TernaryCode],
    pub weights: &'a [QuantWeight],
}

/// Signed dot product of at most 9 activations and weights on one arm.
pub fn arm_mac(
    activations: &[TernaryCode],
    weights: &[QuantWeight],
    cfg: &CoreConfig,
    mode: Mode,
    seed: u64,
) -> Result<MacReading> {
    if activations.len() != weights.len() {
        return Err(SimError::LengthMismatch {
            activations: activations.len(),
            weights: weights.len(),
        });
    }
    if weights.len() > MLP_CHUNK {
        return Err(SimError::LengthOverflow {
            len: weights.len(),
            capacity: MLP_CHUNK,
        });
    }
    let core = OpticalCore::new(cfg, mode, seed)?;
    let arm = core.program_arm(weights, 0, &mut seed::rng(seed, &[TAG_PROGRAM]))?;
    arm.evaluate(activations, &core, Some(&mut seed::rng(seed, &[TAG_CYCLE])))
}

/// Readings of one bank; idle arms read 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankOutput {
    pub readings: Vec<MacReading>,
    pub idle: Vec<bool>,
}

/// Evaluates up to `arms_per_bank` independent arm workloads on one bank.
pub fn bank_compute(workloads: &[ArmWorkload], cfg: &CoreConfig, mode: Mode, seed: u64) -> Result<BankOutput> {
    if workloads.len() > cfg.arms_per_bank {
        return Err(SimError::GeometryMismatch(format!(
            "{} workloads for a {}-arm bank",
            workloads.len(),
            cfg.arms_per_bank
        )));
    }
    let core = OpticalCore::new(cfg, mode, seed)?;
    let mut program = seed::rng(seed, &[TAG_PROGRAM]);
    let mut cycle = seed::rng(seed, &[TAG_CYCLE]);
    let mut readings = vec![MacReading::default(); cfg.arms_per_bank];
    let mut idle = vec![true; cfg.arms_per_bank];
    for (i, w) in workloads.iter().enumerate() {
        if w.activations.len() != w.weights.len() {
            return Err(SimError::LengthMismatch {
                activations: w.activations.len(),
                weights: w.weights.len(),
            });
        }
        let arm = core.program_arm(w.weights, 0, &mut program)?;
        readings[i] = arm.evaluate(w.activations, &core, Some(&mut cycle))?;
        idle[i] = false;
    }
    Ok(BankOutput { readings, idle })
}

/// Exact sum of arm partials.
pub fn vom_reduce(partials: &[f64]) -> Result<f64> {
    if partials.is_empty() {
        return Err(SimError::EmptyInput("partials"));
    }
    Ok(partials.iter().sum())
}

/// Sum of partials, each re-modulated with a relative error `N(0, sigma)`.
pub fn vom_reduce_noisy(partials: &[f64], sigma: f64, rng: &mut impl Rng) -> Result<f64> {
    if partials.is_empty() {
        return Err(SimError::EmptyInput("partials"));
    }
    Ok(partials.iter().map(|p| p * (1.0 + sigma * normal(rng))).sum())
}

/// Evaluates one cycle of a programmed round; see [`OpticalCore::cycle`].
pub fn core_cycle(
    core: &OpticalCore,
    round: &ProgrammedRound,
    cycle: u64,
    activations: &dyn ActivationSource,
    frame_seed: u64,
) -> Result<Vec<StrideResult>> {
    core.cycle(round, cycle, activations, frame_seed)
}
