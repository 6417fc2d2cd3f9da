use std::path::Path;

use optisense_core::inference::EvalResult;
use optisense_core::mapper::{macs_per_cycle, Counters, LayerSpec, Schedule, TuningSummary};
use optisense_core::{CoreConfig, Mode, PerfReport};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const REPORT_FORMAT: &str = "optisense-report";
pub const REPORT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSummary {
    pub kernel: usize,
    pub stride_positions: u64,
    pub rounds: usize,
    pub counters: Counters,
    pub utilization: f64,
    pub peak_macs_per_cycle: u64,
    /// `f · n · K²` for the configured bank count.
    pub formula_macs_per_cycle: Option<u64>,
    pub kernels_per_bank: usize,
    pub usable_slots: usize,
    pub vom_depth: usize,
    /// Most arms occupied in any round.
    pub max_arms_used: usize,
    pub total_arms: usize,
}

impl ScheduleSummary {
    pub fn new(s: &Schedule) -> Self {
        let kernel = s.layer.packing_kernel();
        ScheduleSummary {
            kernel,
            stride_positions: s.stride_positions,
            rounds: s.rounds.len(),
            counters: s.counters,
            utilization: s.utilization(),
            peak_macs_per_cycle: s.peak_macs_per_cycle(),
            formula_macs_per_cycle: macs_per_cycle(s.geometry.num_banks, kernel).ok(),
            kernels_per_bank: s.kernels_per_bank,
            usable_slots: s.usable_slots,
            vom_depth: s.vom_depth(),
            max_arms_used: s.rounds.iter().map(|r| r.arms_used()).max().unwrap_or(0),
            total_arms: s.geometry.total_arms(),
        }
    }
}

/// Ideal-mode accuracy compared with the frozen software golden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenCheck {
    pub bit_width: u8,
    pub expected_correct: u64,
    pub correct: u64,
    pub matches: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageResult {
    pub path: String,
    pub width: usize,
    pub height: usize,
    pub logits: Vec<f64>,
    pub predicted: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Unix seconds; the only field that differs between identical runs.
    pub generated_at: u64,
    pub format: String,
    pub version: u32,
    pub mode: Mode,
    pub seed: u64,
    pub constants: Option<String>,
    pub model: Option<String>,
    pub core: CoreConfig,
    pub layer: LayerSpec,
    pub schedule: ScheduleSummary,
    pub tuning: TuningSummary,
    pub perf: PerfReport,
    pub eval: Option<EvalResult>,
    pub golden: Option<GoldenCheck>,
    pub image: Option<ImageResult>,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> CliResult<Report> {
        let r: Report = serde_json::from_str(text).map_err(|e| CliError::Fixture(format!("report: {e}")))?;
        if r.format != REPORT_FORMAT || r.version != REPORT_VERSION {
            return Err(CliError::Fixture(format!(
                "not an {REPORT_FORMAT} v{REPORT_VERSION} file ({} v{})",
                r.format, r.version
            )));
        }
        Ok(r)
    }

    pub fn summary(&self) -> String {
        let p = &self.perf;
        let s = &self.schedule;
        let mut out = String::new();
        let mut line = |l: String| {
            out.push_str(&l);
            out.push('\n');
        };
        line(format!("mode {}  seed {}", self.mode, self.seed));
        if let Some(c) = &self.constants {
            line(format!("constants {c}"));
        }
        line(format!("layer {}", layer_label(&self.layer)));
        line(format!(
            "schedule: {} rounds, {} cycles, {} MACs, utilization {:.4}",
            s.rounds, s.counters.total_cycles, s.counters.total_macs, s.utilization
        ));
        line(format!(
            "  peak {} MACs/cycle, {} kernels/bank, VOM depth {}, arms {}/{}",
            s.peak_macs_per_cycle, s.kernels_per_bank, s.vom_depth, s.max_arms_used, s.total_arms
        ));
        line(format!(
            "tuning: {} rings, {} AWC iterations, {:.3} us",
            self.tuning.programmed_rings,
            self.tuning.awc_iterations,
            self.tuning.latency * 1e6
        ));
        line(format!(
            "perf: t_mac {:.1} ps, latency {:.3} us, energy {:.4} uJ, {:.3} TOp/s/W, {:.1} fps",
            p.cycle_time * 1e12,
            p.latency * 1e6,
            p.total_energy * 1e6,
            p.efficiency / 1e12,
            p.frame_rate
        ));
        for (name, e) in p.energy.entries() {
            line(format!("  {name:<12} {:.4} uJ", e * 1e6));
        }
        if let Some(e) = &self.eval {
            line(format!(
                "accuracy {} {}/{} = {:.4}  noise {}",
                e.config_id, e.correct, e.total, e.accuracy, e.noise_hash
            ));
        }
        if let Some(g) = &self.golden {
            line(format!(
                "golden {}-bit: expected {}, got {} ({})",
                g.bit_width,
                g.expected_correct,
                g.correct,
                if g.matches { "match" } else { "MISMATCH" }
            ));
        }
        if let Some(i) = &self.image {
            line(format!("image {} ({}x{}): class {}", i.path, i.width, i.height, i.predicted));
        }
        out
    }
}

pub fn layer_label(layer: &LayerSpec) -> String {
    match layer {
        LayerSpec::Conv(c) => format!(
            "conv {}x{}x{} K={} out={} stride={} pad={}",
            c.in_channels, c.in_height, c.in_width, c.kernel, c.out_channels, c.stride, c.padding
        ),
        LayerSpec::Mlp(m) => format!("mlp {} -> {}", m.fan_in, m.outputs),
    }
}

/// Writes `contents` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, contents: &str) -> CliResult<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)
        .and_then(|_| std::fs::rename(&tmp, path))
        .map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}
