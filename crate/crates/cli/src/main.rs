use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use optisense_cli::commands;
use optisense_cli::{Axis, CliError, CliResult, ConfigLayers};

#[derive(Parser)]
#[command(name = "optisense", version, about = "Functional and cost simulator for an in-sensor optical processing core")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration (TOML).
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override any parameter, e.g. `--set core.awc.bit_width=2`.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    overrides: Vec<String>,
}

impl ConfigArgs {
    fn layers(&self) -> CliResult<ConfigLayers> {
        let mut layers = match &self.config {
            Some(p) => ConfigLayers::load(p)?,
            None => ConfigLayers::empty(),
        };
        for o in &self.overrides {
            layers.set(o)?;
        }
        Ok(layers)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Plan, cost and evaluate one configuration.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory (overrides run.output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every point of a parameter grid.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Extra axis, e.g. `--axis core.awc.bit_width=1,2,3,4`.
        #[arg(long = "axis", value_name = "PATH=V1,V2,...")]
        axes: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump a schedule, report, fixture or config.
    Inspect {
        path: PathBuf,
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
    },
}

fn execute(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate { config, out } => {
            let (dir, report) = commands::simulate(&config.layers()?, out.as_deref())?;
            emit(&report.summary());
            emit(&format!("wrote {}\n", dir.display()));
            if report.golden.as_ref().is_some_and(|g| !g.matches) {
                eprintln!("warning: accuracy differs from the golden count");
            }
        }
        Command::Sweep { config, axes, out } => {
            let axes = axes.iter().map(|a| Axis::parse(a)).collect::<CliResult<Vec<_>>>()?;
            let outcome = commands::sweep(&config.layers()?, &axes, out.as_deref())?;
            emit(&format!(
                "{} points, table {}\n",
                outcome.points.len(),
                outcome.dir.join("sweep.csv").display()
            ));
            let mut first = None;
            for p in outcome.failures() {
                if let Err(e) = &p.result {
                    eprintln!("point {} failed: {e}", p.index);
                    first.get_or_insert_with(|| e.clone());
                }
            }
            if let Some(e) = first {
                return Err(e);
            }
        }
        Command::Inspect { path, overrides } => {
            let layers = if overrides.is_empty() || is_fixture_or_json(&path) {
                None
            } else {
                let mut l = ConfigLayers::load(&path)?;
                for o in &overrides {
                    l.set(o)?;
                }
                Some(l)
            };
            emit(&commands::inspect(&path, layers.as_ref())?);
        }
    }
    Ok(())
}

// a closed pipe (`| head`) is not an error worth a panic
fn emit(text: &str) {
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn is_fixture_or_json(path: &Path) -> bool {
    path.is_dir() || path.extension().is_some_and(|e| e == "json")
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
