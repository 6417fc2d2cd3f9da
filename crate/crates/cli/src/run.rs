//! One simulation run: plan, cost and (optionally) evaluate a resolved config.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use optisense_core::fixture::Fixture;
use optisense_core::inference::{evaluate, infer, sample_seed, Dataset, FirstLayerEngine, QuantModel};
use optisense_core::mapper::{tuning_summary, UniformWeights, WeightSource};
use optisense_core::{estimate, plan_layer, Frame, Schedule};

use crate::config::Resolved;
use crate::error::{CliError, CliResult};
use crate::report::{GoldenCheck, ImageResult, Report, ScheduleSummary, REPORT_FORMAT, REPORT_VERSION};

/// Opens a fixture, naming the path on failure.
fn open_fixture(path: &Path) -> CliResult<Fixture> {
    if !path.exists() {
        return Err(CliError::Fixture(format!("{}: no such file or directory", path.display())));
    }
    Fixture::open(path).map_err(CliError::from)
}

pub struct RunOutput {
    pub report: Report,
    pub schedule: Schedule,
}

pub fn run(cfg: &Resolved) -> CliResult<RunOutput> {
    let run = &cfg.run;
    let core = &cfg.core;
    let model = match &run.model {
        Some(p) => Some(QuantModel::from_fixture(&open_fixture(p)?, Some(core.awc.bit_width))?),
        None => None,
    };
    let layer = match (&cfg.workload, &model) {
        (Some(w), _) => *w,
        (None, Some(m)) => m.layer_spec(),
        (None, None) => {
            return Err(CliError::Config(
                "nothing to simulate: set [workload] or run.model".into(),
            ))
        }
    };
    let schedule = plan_layer(&layer, core)?;
    let full_scale = UniformWeights::full_scale(core.awc.bit_width);
    let weights: &dyn WeightSource = match &model {
        Some(m) if m.layer_spec() == layer => &m.first.kernels,
        _ => &full_scale,
    };
    let tuning = tuning_summary(&schedule, weights, core)?;
    let perf = estimate(&schedule, &tuning, &core.constants, run.ops_accounting)?;

    let eval = match (&run.dataset, &model) {
        (Some(p), Some(m)) => {
            let mut data = Dataset::from_fixture(&open_fixture(p)?)?;
            if let Some(n) = run.samples {
                data = data.take(n);
            }
            Some(evaluate(&data, m, core, run.mode, run.seed)?)
        }
        (Some(_), None) => return Err(CliError::Config("run.dataset needs run.model".into())),
        _ => None,
    };

    let golden = match (&run.golden, &eval) {
        (Some(p), Some(e)) => {
            let fx = open_fixture(p)?;
            let bits = core.awc.bit_width;
            let expected = fx
                .meta
                .get("correct_by_bit_width")
                .and_then(|m| m.get(bits.to_string()))
                .and_then(|v| v.as_u64())
                .ok_or_else(|| {
                    CliError::Fixture(format!("{}: no golden count for {bits}-bit weights", p.display()))
                })?;
            let samples = fx.meta.get("samples").and_then(|v| v.as_u64());
            if samples.is_some_and(|s| s != e.total) {
                return Err(CliError::Config(format!(
                    "golden counts cover {} samples, evaluated {}",
                    samples.unwrap_or(0),
                    e.total
                )));
            }
            Some(GoldenCheck {
                bit_width: bits,
                expected_correct: expected,
                correct: e.correct,
                matches: expected == e.correct,
            })
        }
        (Some(_), None) => return Err(CliError::Config("run.golden needs run.dataset".into())),
        _ => None,
    };

    let image = match (&run.image, &model) {
        (Some(p), Some(m)) => {
            if !p.exists() {
                return Err(CliError::Fixture(format!("{}: no such file or directory", p.display())));
            }
            let frame = Frame::read_pgm(p)?;
            let engine = FirstLayerEngine::new(&m.first, core, run.mode, run.seed)?;
            let logits = infer(&engine, m, &frame, sample_seed(run.seed, 0))?;
            let predicted = logits
                .iter()
                .enumerate()
                .fold(0, |best, (i, &v)| if v > logits[best] { i } else { best });
            Some(ImageResult {
                path: p.display().to_string(),
                width: frame.width(),
                height: frame.height(),
                logits,
                predicted,
            })
        }
        (Some(_), None) => return Err(CliError::Config("run.image needs run.model".into())),
        _ => None,
    };

    let report = Report {
        generated_at: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
        format: REPORT_FORMAT.to_string(),
        version: REPORT_VERSION,
        mode: run.mode,
        seed: run.seed,
        constants: cfg.constants_name.clone(),
        model: model.as_ref().map(|m| m.name.clone()),
        core: core.clone(),
        layer,
        schedule: ScheduleSummary::new(&schedule),
        tuning,
        perf,
        eval,
        golden,
        image,
    };
    Ok(RunOutput { report, schedule })
}
