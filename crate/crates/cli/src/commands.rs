use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use optisense_core::fixture::{Fixture, TensorData};
use optisense_core::inference::noise_hash;
use optisense_core::mapper::Schedule;
use optisense_core::plan_layer;
use rayon::prelude::*;
use toml::Value;

use crate::config::{Axis, ConfigLayers};
use crate::error::{CliError, CliResult};
use crate::report::{layer_label, write_atomic, Report};
use crate::run::run;

pub const DEFAULT_OUTPUT_DIR: &str = "optisense-out";

fn output_dir(explicit: Option<&Path>, configured: Option<&PathBuf>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| configured.cloned())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))
}

/// Runs one configuration and writes `report.json`, `schedule.json` and
/// `summary.txt` into the output directory.
pub fn simulate(layers: &ConfigLayers, out: Option<&Path>) -> CliResult<(PathBuf, Report)> {
    let cfg = layers.resolve()?;
    let dir = output_dir(out, cfg.run.output_dir.as_ref());
    let result = run(&cfg)?;
    create_dir(&dir)?;
    write_atomic(&dir.join("report.json"), &result.report.to_json())?;
    write_atomic(&dir.join("schedule.json"), &result.schedule.to_json())?;
    write_atomic(&dir.join("summary.txt"), &result.report.summary())?;
    Ok((dir, result.report))
}

/// Outcome of one sweep grid point.
#[derive(Debug)]
pub struct SweepPoint {
    pub index: usize,
    pub values: Vec<Value>,
    pub result: CliResult<Report>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub dir: PathBuf,
    pub points: Vec<SweepPoint>,
}

impl SweepOutcome {
    pub fn failures(&self) -> impl Iterator<Item = &SweepPoint> {
        self.points.iter().filter(|p| p.result.is_err())
    }
}

fn grid(axes: &[Axis]) -> Vec<Vec<Value>> {
    let mut points = vec![Vec::new()];
    for axis in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                axis.values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v.clone());
                    q
                })
            })
            .collect();
    }
    points
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Runs the Cartesian grid of the config's and `extra_axes`' values.
pub fn sweep(layers: &ConfigLayers, extra_axes: &[Axis], out: Option<&Path>) -> CliResult<SweepOutcome> {
    let axes: Vec<Axis> = layers.axes.iter().chain(extra_axes).cloned().collect();
    if axes.is_empty() {
        return Err(CliError::Config("sweep needs at least one axis".into()));
    }
    for axis in &axes {
        if axis.values.is_empty() {
            return Err(CliError::Config(format!("axis `{}` has no values", axis.param)));
        }
        layers.with_override(&axis.param, axis.values[0].clone()).resolve()?;
    }
    let base = layers.resolve()?;
    let dir = output_dir(out, base.run.output_dir.as_ref());
    create_dir(&dir.join("points"))?;

    let points: Vec<SweepPoint> = grid(&axes)
        .into_par_iter()
        .enumerate()
        .map(|(index, values)| {
            let mut point = layers.clone();
            for (axis, v) in axes.iter().zip(&values) {
                point = point.with_override(&axis.param, v.clone());
            }
            let result = point.resolve().and_then(|cfg| run(&cfg)).and_then(|r| {
                let pdir = dir.join("points").join(format!("point_{index:04}"));
                create_dir(&pdir)?;
                write_atomic(&pdir.join("report.json"), &r.report.to_json())?;
                write_atomic(&pdir.join("summary.txt"), &r.report.summary())?;
                Ok(r.report)
            });
            SweepPoint { index, values, result }
        })
        .collect();

    let mut csv = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = vec!["point".into()];
    header.extend(axes.iter().map(|a| a.param.clone()));
    header.extend(
        [
            "bit_width",
            "kernel",
            "macs_per_cycle",
            "mode",
            "noise_hash",
            "accuracy",
            "correct",
            "power",
            "frame_power",
            "efficiency",
            "frame_rate",
            "latency",
            "status",
        ]
        .map(String::from),
    );
    let csv_err = |e: csv::Error| CliError::Internal(format!("sweep table: {e}"));
    csv.write_record(&header).map_err(csv_err)?;
    for p in &points {
        let mut row = vec![p.index.to_string()];
        row.extend(p.values.iter().map(cell));
        match &p.result {
            Ok(r) => {
                let (acc, correct) = r
                    .eval
                    .as_ref()
                    .map(|e| (e.accuracy.to_string(), e.correct.to_string()))
                    .unwrap_or_default();
                row.extend([
                    r.core.awc.bit_width.to_string(),
                    r.schedule.kernel.to_string(),
                    r.schedule.peak_macs_per_cycle.to_string(),
                    r.mode.to_string(),
                    noise_hash(&r.core, r.mode),
                    acc,
                    correct,
                    r.perf.average_power.to_string(),
                    r.perf.frame_power.to_string(),
                    r.perf.efficiency.to_string(),
                    r.perf.frame_rate.to_string(),
                    r.perf.latency.to_string(),
                    "ok".into(),
                ]);
            }
            Err(e) => {
                row.extend(std::iter::repeat_n(String::new(), 12));
                row.push(format!("failed: {e}"));
            }
        }
        csv.write_record(&row).map_err(csv_err)?;
    }
    let table = csv.into_inner().map_err(|e| CliError::Internal(e.to_string()))?;
    write_atomic(&dir.join("sweep.csv"), &String::from_utf8_lossy(&table))?;
    Ok(SweepOutcome { dir, points })
}

/// Human-readable dump of a schedule.
pub fn describe_schedule(s: &Schedule) -> String {
    let g = &s.geometry;
    let c = &s.counters;
    let mut out = String::new();
    let rows = g.num_banks / g.bank_columns;
    let _ = writeln!(
        out,
        "geometry: {} banks ({rows} x {}), {} arms/bank, {} rings/arm",
        g.num_banks, g.bank_columns, g.arms_per_bank, g.mrs_per_arm
    );
    let _ = writeln!(out, "layer: {}", layer_label(&s.layer));
    let k = s.layer.packing_kernel();
    let per_bank_arms = s
        .rounds
        .iter()
        .flat_map(|r| {
            let mut used = BTreeMap::new();
            for p in &r.placements {
                *used.entry(p.bank).or_insert(0usize) += p.spans.len();
            }
            used.into_values()
        })
        .max()
        .unwrap_or(0);
    let _ = writeln!(
        out,
        "packing: K={k}, {} kernels/bank, {} usable rings/arm, per-bank arm usage {per_bank_arms}/{}, VOM depth {}",
        s.kernels_per_bank,
        s.usable_slots,
        g.arms_per_bank,
        s.vom_depth()
    );
    let _ = writeln!(
        out,
        "peak {} MACs/cycle, utilization {:.4}",
        s.peak_macs_per_cycle(),
        s.utilization()
    );
    let _ = writeln!(
        out,
        "counters: {} cycles, {} MACs, {} remap rounds, {} idle arm-cycles, {} arm evaluations, {} VOM partials",
        c.total_cycles, c.total_macs, c.remap_count, c.idle_arm_cycles, c.arm_evaluations, c.vom_partials
    );
    const SHOWN: usize = 4;
    for r in s.rounds.iter().take(SHOWN) {
        let _ = writeln!(
            out,
            "round {}: {} kernels, occupancy {}/{} arms, {} cycles",
            r.index,
            r.placements.len(),
            r.arms_used(),
            g.total_arms(),
            r.cycles
        );
        let mut used = vec![0usize; g.num_banks];
        for p in &r.placements {
            used[p.bank as usize] += p.spans.len();
        }
        for row in used.chunks(g.bank_columns) {
            let cells: Vec<String> = row.iter().map(|u| format!("{u}/{}", g.arms_per_bank)).collect();
            let _ = writeln!(out, "  {}", cells.join(" "));
        }
    }
    if s.rounds.len() > SHOWN {
        let _ = writeln!(out, "... {} more rounds", s.rounds.len() - SHOWN);
    }
    out
}

fn describe_fixture(fx: &Fixture) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "fixture {} ({:?})", fx.dir.display(), fx.kind);
    let _ = writeln!(out, "checksums: ok ({} tensors)", fx.tensors.len());
    for t in &fx.tensors {
        let dtype = match t.data {
            TensorData::F32(_) => "f32",
            TensorData::F64(_) => "f64",
            TensorData::U8(_) => "u8",
        };
        let _ = writeln!(out, "  {:<16} {dtype} {:?}", t.name, t.shape);
    }
    if !fx.meta.is_null() {
        let _ = writeln!(
            out,
            "meta: {}",
            serde_json::to_string_pretty(&fx.meta).unwrap_or_default()
        );
    }
    out
}

/// Dumps a schedule, report, fixture or config file.
pub fn inspect(path: &Path, layers: Option<&ConfigLayers>) -> CliResult<String> {
    if path.is_dir() || path.file_name().is_some_and(|n| n == "manifest.json") {
        return Ok(describe_fixture(&Fixture::open(path)?));
    }
    let is_json = path.extension().is_some_and(|e| e == "json");
    if !is_json {
        let layers = match layers {
            Some(l) => l.clone(),
            None => ConfigLayers::load(path)?,
        };
        let cfg = layers.resolve()?;
        let layer = cfg
            .workload
            .ok_or_else(|| CliError::Config(format!("{} has no [workload] to plan", path.display())))?;
        return Ok(describe_schedule(&plan_layer(&layer, &cfg.core)?));
    }
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Fixture(format!("cannot read {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Fixture(format!("{}: {e}", path.display())))?;
    if value.get("format").is_some() {
        return Ok(Report::from_json(&text)?.summary());
    }
    let schedule = Schedule::from_json(&text).map_err(|e| CliError::Fixture(format!("{}: {e}", path.display())))?;
    Ok(describe_schedule(&schedule))
}
