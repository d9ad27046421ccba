//! Seeded Monte Carlo campaigns over sampled targets.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attitude::Vec3;
use crate::error::ScenarioError;

use super::config::{sample_target, MonteCarloSettings, ScenarioConfig};
use super::export::write_run;
use super::run::{run_with_target, RunSummary};

/// Outcome of one campaign member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignRun {
    pub index: usize,
    /// Target longitude, rad.
    pub longitude: f64,
    pub target: [f64; 3],
    pub summary: Option<RunSummary>,
    /// Set when the run could not be set up at all.
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub seed: u64,
    pub runs: Vec<CampaignRun>,
    pub all_pass: bool,
    pub worst_terminal_deg: f64,
    pub max_eps_q: f64,
}

/// Target of run `index`: an independent ChaCha stream keyed by the master
/// seed and selected by the run index.
pub fn run_target(mc: &MonteCarloSettings, index: usize) -> (Vec3, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(mc.seed);
    rng.set_stream(index as u64);
    sample_target(&mut rng, mc.target_latitude_deg)
}

fn one(cfg: &ScenarioConfig, mc: &MonteCarloSettings, index: usize, out: Option<&Path>) -> CampaignRun {
    let (target, longitude) = run_target(mc, index);
    let (summary, error) = match run_with_target(cfg, &target) {
        Ok(o) => {
            let written = out.map(|dir| write_run(&dir.join(format!("run_{index:03}")), &o));
            match written {
                Some(Err(e)) => (Some(o.summary), Some(e.to_string())),
                _ => (Some(o.summary), None),
            }
        }
        Err(e) => (None, Some(e.to_string())),
    };
    CampaignRun {
        index,
        longitude,
        target: [target.x, target.y, target.z],
        summary,
        error,
    }
}

/// Runs `mc.runs` scenarios in parallel on `jobs` threads (all cores when
/// `None`). Per-run telemetry is written under `out` when given. The report
/// depends only on the configuration and seed.
pub fn monte_carlo(
    cfg: &ScenarioConfig,
    mc: &MonteCarloSettings,
    jobs: Option<usize>,
    out: Option<&Path>,
) -> Result<CampaignReport, ScenarioError> {
    if mc.runs == 0 {
        return Err(ScenarioError::ConfigInvalid("a campaign needs at least one run".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| ScenarioError::ConfigInvalid(format!("thread pool: {e}")))?;
    let runs: Vec<CampaignRun> =
        pool.install(|| (0..mc.runs).into_par_iter().map(|i| one(cfg, mc, i, out)).collect());

    let summaries = || runs.iter().filter_map(|r| r.summary.as_ref());
    let all_pass = runs
        .iter()
        .all(|r| r.error.is_none() && r.summary.as_ref().is_some_and(|s| s.pass));
    let worst_terminal_deg = summaries()
        .map(|s| s.terminal_accuracy_deg)
        .fold(0.0, |a: f64, b| if a.is_nan() || b.is_nan() { f64::NAN } else { a.max(b) });
    let max_eps_q = summaries().map(|s| s.max_eps_q).fold(0.0, f64::max);
    Ok(CampaignReport {
        seed: mc.seed,
        runs,
        all_pass,
        worst_terminal_deg,
        max_eps_q,
    })
}
