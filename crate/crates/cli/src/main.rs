use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use boresight::scenario::export::{read_telemetry_csv, write_run};
use boresight::scenario::run::{RunSummary, ViolationKind};
use boresight::scenario::{check_records, monte_carlo, preset, run, MonitorLimits, ScenarioConfig};
use boresight::ScenarioError;
use clap::{Args, Parser, Subcommand};

const EXIT_VIOLATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;

/// Boresight alignment scenarios with forbidden-zone avoidance.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
#[group(multiple = false)]
struct Source {
    /// Built-in scenario: two-cone, three-cone or monte-carlo.
    #[arg(long)]
    preset: Option<String>,
    /// TOML scenario file.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Source {
    fn load(&self, default: &str) -> Result<ScenarioConfig, ScenarioError> {
        match (&self.preset, &self.config) {
            (_, Some(path)) => ScenarioConfig::load(path),
            (Some(name), None) => preset(name),
            (None, None) => preset(default),
        }
    }
}

#[derive(Args)]
struct Overrides {
    /// Integration step, s.
    #[arg(long)]
    dt: Option<f64>,
    /// Final time, s.
    #[arg(long)]
    t_final: Option<f64>,
    /// Turn the environmental disturbance off.
    #[arg(long)]
    no_disturbance: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut ScenarioConfig) {
        if let Some(dt) = self.dt {
            cfg.run.dt = dt;
        }
        if let Some(t) = self.t_final {
            cfg.run.t_final = t;
        }
        if self.no_disturbance {
            cfg.run.disturbance = false;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and print its JSON summary.
    Simulate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        /// Directory for telemetry.csv, summary.json and boresight.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a seeded campaign over targets sampled on a latitude circle.
    Montecarlo {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value_t = 50)]
        runs: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
        /// Worker threads (all cores by default).
        #[arg(long)]
        jobs: Option<usize>,
        /// Directory for report.json and per-run outputs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the constraint monitors on recorded telemetry.
    Check {
        telemetry: PathBuf,
        /// Scenario whose limits apply; inferred from the zone count if omitted.
        #[command(flatten)]
        source: Source,
    },
}

fn summary_code(s: &RunSummary) -> u8 {
    match &s.first_violation {
        None => 0,
        Some(v) if v.kind == ViolationKind::NonFinite => EXIT_DIVERGED,
        Some(_) => EXIT_VIOLATION,
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    let written = serde_json::to_writer_pretty(&mut out, v)
        .map_err(std::io::Error::from)
        .and_then(|_| writeln!(out));
    match written {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn simulate(source: &Source, overrides: &Overrides, out: Option<&Path>) -> anyhow::Result<u8> {
    let mut cfg = source.load("two-cone")?;
    overrides.apply(&mut cfg);
    let o = run(&cfg)?;
    for w in &o.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = out {
        write_run(dir, &o)?;
    }
    print_json(&o.summary)?;
    Ok(summary_code(&o.summary))
}

fn campaign(
    source: &Source,
    overrides: &Overrides,
    runs: usize,
    seed: u64,
    jobs: Option<usize>,
    out: Option<&Path>,
) -> anyhow::Result<u8> {
    let mut cfg = source.load("monte-carlo")?;
    overrides.apply(&mut cfg);
    let mut mc = cfg.monte_carlo.unwrap_or_default();
    mc.runs = runs;
    mc.seed = seed;
    if let Some(dir) = out {
        std::fs::create_dir_all(dir).map_err(ScenarioError::from)?;
    }
    let report = monte_carlo(&cfg, &mc, jobs, out)?;
    if let Some(dir) = out {
        let f = File::create(dir.join("report.json")).context("writing report.json")?;
        serde_json::to_writer_pretty(BufWriter::new(f), &report)?;
    }
    print_json(&report)?;
    let diverged = report
        .runs
        .iter()
        .any(|r| r.summary.as_ref().is_some_and(|s| summary_code(s) == EXIT_DIVERGED));
    let broken = report.runs.iter().any(|r| r.summary.is_none());
    Ok(if report.all_pass {
        0
    } else if diverged {
        EXIT_DIVERGED
    } else if broken {
        EXIT_CONFIG
    } else {
        EXIT_VIOLATION
    })
}

fn check(path: &Path, source: &Source) -> anyhow::Result<u8> {
    let f = File::open(path).map_err(ScenarioError::from)?;
    let records = read_telemetry_csv(BufReader::new(f))?;
    let zones = records.first().map_or(0, |r| r.gamma.len());
    let default = match zones {
        2 => "two-cone",
        3 => "three-cone",
        _ => "monte-carlo",
    };
    let cfg = source.load(default)?;
    if cfg.zones.len() != zones {
        return Err(ScenarioError::ConfigInvalid(format!(
            "telemetry has {zones} zone columns but the scenario defines {}",
            cfg.zones.len()
        ))
        .into());
    }
    let params = cfg.closed_loop_params(&cfg.resolve_target()?)?;
    let t_end = records.last().map_or(0.0, |r| r.t);
    let summary = check_records(&records, MonitorLimits::from_params(&params, t_end));
    print_json(&summary)?;
    Ok(summary_code(&summary))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate { source, overrides, out } => simulate(source, overrides, out.as_deref()),
        Command::Montecarlo {
            source,
            overrides,
            runs,
            seed,
            jobs,
            out,
        } => campaign(source, overrides, *runs, *seed, *jobs, out.as_deref()),
        Command::Check { telemetry, source } => check(telemetry, source),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}
