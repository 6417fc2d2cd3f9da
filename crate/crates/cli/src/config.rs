//! Layered run configuration.
//!
//! Layers, lowest first: built-in defaults, the config file, the constants
//! fixture named by `run.constants`, then `--set path=value` overrides (and
//! sweep axis values, which are overrides too). Every layer is merged into one
//! TOML document that is then deserialized with unknown keys rejected, so a
//! misspelled parameter is a config error rather than a silent no-op.

use std::path::{Path, PathBuf};

use optisense_core::mapper::LayerSpec;
use optisense_core::perf::{OpsAccounting, TimingEnergyConstants};
use optisense_core::{CoreConfig, Mode};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

const PATH_KEYS: [&str; 6] = ["constants", "model", "dataset", "golden", "image", "output_dir"];

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub mode: Mode,
    pub seed: u64,
    /// Timing/energy constants fixture.
    pub constants: Option<PathBuf>,
    /// Model fixture; its first layer is the workload unless `[workload]` is set.
    pub model: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    /// Golden fixture with per-bit-width correct counts.
    pub golden: Option<PathBuf>,
    /// 8-bit PGM frame classified in addition to the dataset.
    pub image: Option<PathBuf>,
    /// Evaluate only the first `samples` images.
    pub samples: Option<usize>,
    pub output_dir: Option<PathBuf>,
    pub ops_accounting: OpsAccounting,
}

/// One sweep dimension: a dotted parameter path and its values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub param: String,
    pub values: Vec<Value>,
}

impl Axis {
    /// Parses `path=v1,v2,...`.
    pub fn parse(spec: &str) -> CliResult<Axis> {
        let (param, values) = spec
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("axis `{spec}` is not `param=v1,v2,...`")))?;
        let values: Vec<Value> = values
            .split(',')
            .filter(|v| !v.trim().is_empty())
            .map(|v| parse_value(v.trim()))
            .collect();
        if values.is_empty() {
            return Err(CliError::Config(format!("axis `{param}` has no values")));
        }
        Ok(Axis {
            param: param.trim().to_string(),
            values,
        })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SweepSection {
    axis: Vec<Axis>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    core: CoreConfig,
    run: RunSection,
    workload: Option<LayerSpec>,
    // axes are read separately; parsed here only so typos are rejected
    #[serde(default, rename = "sweep")]
    _sweep: SweepSection,
}

/// A fully merged configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub core: CoreConfig,
    pub run: RunSection,
    pub workload: Option<LayerSpec>,
    pub constants_name: Option<String>,
}

/// The config file plus command-line overrides, before resolution.
#[derive(Debug, Clone)]
pub struct ConfigLayers {
    file: Table,
    overrides: Vec<(String, Value)>,
    pub axes: Vec<Axis>,
}

/// Parses an override value as a TOML literal, falling back to a bare string.
pub fn parse_value(text: &str) -> Value {
    format!("v = {text}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(text.to_string()))
}

fn merge(into: &mut Table, from: Table) {
    for (k, v) in from {
        match (into.get_mut(&k), v) {
            (Some(Value::Table(dst)), Value::Table(src)) => merge(dst, src),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

fn set_path(doc: &mut Table, path: &str, value: Value) -> CliResult<()> {
    let mut parts: Vec<&str> = path.split('.').collect();
    let last = parts
        .pop()
        .filter(|p| !p.is_empty())
        .ok_or_else(|| CliError::Config(format!("empty parameter path `{path}`")))?;
    let mut table = doc;
    for p in parts {
        let entry = table.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{p}` in `{path}` is not a section")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

fn defaults() -> Table {
    let mut doc = Table::new();
    doc.insert(
        "core".into(),
        Value::try_from(CoreConfig::default()).expect("default core serializes"),
    );
    doc.insert(
        "run".into(),
        Value::try_from(RunSection::default()).expect("default run serializes"),
    );
    doc
}

impl ConfigLayers {
    /// Reads a config file. Relative paths under `[run]` are taken relative
    /// to the file.
    pub fn load(path: &Path) -> CliResult<ConfigLayers> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut file: Table = text
            .parse()
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        if let Some(Value::Table(run)) = file.get_mut("run") {
            for key in PATH_KEYS {
                if let Some(Value::String(p)) = run.get_mut(key) {
                    *p = base.join(&*p).to_string_lossy().into_owned();
                }
            }
        }
        let axes = match file.get("sweep") {
            Some(v) => {
                let s: SweepSection = v
                    .clone()
                    .try_into()
                    .map_err(|e| CliError::Config(format!("[sweep]: {e}")))?;
                s.axis
            }
            None => Vec::new(),
        };
        Ok(ConfigLayers {
            file,
            overrides: Vec::new(),
            axes,
        })
    }

    /// Layers with no config file.
    pub fn empty() -> ConfigLayers {
        ConfigLayers {
            file: Table::new(),
            overrides: Vec::new(),
            axes: Vec::new(),
        }
    }

    /// Adds a `path=value` override.
    pub fn set(&mut self, assignment: &str) -> CliResult<()> {
        let (path, value) = assignment
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("override `{assignment}` is not `path=value`")))?;
        self.overrides.push((path.trim().to_string(), parse_value(value.trim())));
        Ok(())
    }

    pub fn with_override(&self, path: &str, value: Value) -> ConfigLayers {
        let mut out = self.clone();
        out.overrides.push((path.to_string(), value));
        out
    }

    pub fn resolve(&self) -> CliResult<Resolved> {
        let mut doc = defaults();
        merge(&mut doc, self.file.clone());
        for (path, value) in &self.overrides {
            set_path(&mut doc, path, value.clone())?;
        }
        let parsed = parse_document(&doc)?;
        let mut constants_name = None;
        if let Some(path) = &parsed.run.constants {
            let fixture = TimingEnergyConstants::load(path).map_err(|e| match e {
                e if e.is_fixture_error() => CliError::Fixture(e.to_string()),
                e => CliError::Config(format!("{}: {e}", path.display())),
            })?;
            constants_name = Some(fixture.name);
            set_path(
                &mut doc,
                "core.constants",
                Value::try_from(&fixture.constants).expect("constants serialize"),
            )?;
            for (path, value) in &self.overrides {
                if path.starts_with("core.constants.") {
                    set_path(&mut doc, path, value.clone())?;
                }
            }
        }
        let parsed = parse_document(&doc)?;
        parsed.core.validate()?;
        if let Some(w) = &parsed.workload {
            w.validate()?;
        }
        Ok(Resolved {
            core: parsed.core,
            run: parsed.run,
            workload: parsed.workload,
            constants_name,
        })
    }
}

fn parse_document(doc: &Table) -> CliResult<Document> {
    Value::Table(doc.clone())
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.to_string().trim().to_string()))
}
