//! Presets, configuration, the monitored run loop, Monte Carlo campaigns and
//! file export.

pub mod config;
pub mod export;
pub mod monte_carlo;
pub mod run;

pub use config::{preset, sample_target, MonteCarloSettings, ScenarioConfig, PRESETS};
pub use monte_carlo::{monte_carlo, CampaignReport};
pub use run::{check_records, run, run_with_target, MonitorLimits, RunOutput, RunSummary, TelemetryRecord};
