//! Scenario configuration: presets, TOML I/O and admissibility checks.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::apf::{ApfGains, ForbiddenZone};
use crate::attitude::{pointing_error, UnitQuaternion, Vec3};
use crate::closed_loop::{ClosedLoopParams, ControllerMode};
use crate::controller::ControllerGains;
use crate::error::ScenarioError;
use crate::governor::{GovernorParams, SwitchSpec};
use crate::plant::PlantParams;

const DEG: f64 = std::f64::consts::PI / 180.0;

/// Run-level settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub name: String,
    /// Final time, s.
    pub t_final: f64,
    /// Integration step, s.
    pub dt: f64,
    /// Telemetry output rate, Hz.
    pub telemetry_rate: f64,
    pub disturbance: bool,
    #[serde(default)]
    pub mode: ControllerMode,
    /// Sensor axis in body coordinates.
    pub boresight: Vec3,
    /// Inertial target direction. Monte Carlo scenarios sample it instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Vec3>,
    /// Initial attitude as `[x, y, z, w]`, body to inertial.
    pub initial_quaternion: [f64; 4],
    /// Initial body rate, rad/s.
    pub initial_rate: Vec3,
    /// Initial effective inertia estimate `θ̂ + β`, kg·m².
    pub theta_guess: Vec3,
}

/// Governor settings in configuration form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GovernorConfig {
    pub k_rho: f64,
    pub rho_inf: f64,
    pub rho0: f64,
    pub k_b: f64,
    pub k_s: f64,
    /// Dimensionless steepness `p (S₁ − S₀)` shared by every indicator.
    pub steepness: f64,
    /// Rate indicator segment as fractions of `M_ω²`.
    pub rate_band: [f64; 2],
    /// Performance indicator segment over `ε_q`.
    pub ppc_band: [f64; 2],
    /// Envelope indicator segment as offsets above `ρ_∞`.
    pub rho_band: [f64; 2],
}

impl Default for GovernorConfig {
    fn default() -> Self {
        Self {
            k_rho: 0.05,
            rho_inf: 1e-4,
            rho0: 4.0,
            k_b: 0.4,
            k_s: 100.0,
            steepness: 2.0,
            rate_band: [0.8, 0.9],
            ppc_band: [0.9, 0.95],
            rho_band: [0.001, 0.002],
        }
    }
}

impl GovernorConfig {
    pub fn build(&self, max_rate: f64) -> Result<GovernorParams, String> {
        let m2 = max_rate * max_rate;
        let p = GovernorParams {
            k_rho: self.k_rho,
            rho_inf: self.rho_inf,
            rho0: self.rho0,
            k_b: self.k_b,
            k_s: self.k_s,
            rate_indicator: SwitchSpec::with_steepness(
                self.rate_band[0] * m2,
                self.rate_band[1] * m2,
                self.steepness,
            )?,
            ppc_indicator: SwitchSpec::with_steepness(self.ppc_band[0], self.ppc_band[1], self.steepness)?,
            rho_indicator: SwitchSpec::with_steepness(
                self.rho_inf + self.rho_band[0],
                self.rho_inf + self.rho_band[1],
                self.steepness,
            )?,
        };
        p.validate()?;
        Ok(p)
    }
}

/// One forbidden cone; angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneConfig {
    pub axis: Vec3,
    pub half_angle_deg: f64,
    #[serde(default = "default_acting_margin")]
    pub acting_margin_deg: f64,
    /// Indicator starts switching at `half_angle + indicator_outer`.
    #[serde(default = "default_indicator_outer")]
    pub indicator_outer_deg: f64,
    /// Indicator saturates at `half_angle + indicator_inner`.
    #[serde(default = "default_indicator_inner")]
    pub indicator_inner_deg: f64,
}

fn default_acting_margin() -> f64 {
    10.0
}
fn default_indicator_outer() -> f64 {
    10.0
}
fn default_indicator_inner() -> f64 {
    5.0
}

impl ZoneConfig {
    pub fn new(axis: [f64; 3], half_angle_deg: f64) -> Self {
        Self {
            axis: Vec3::from(axis),
            half_angle_deg,
            acting_margin_deg: default_acting_margin(),
            indicator_outer_deg: default_indicator_outer(),
            indicator_inner_deg: default_indicator_inner(),
        }
    }

    fn build(&self, steepness: f64) -> Result<ForbiddenZone, String> {
        ForbiddenZone::new(
            self.axis,
            self.half_angle_deg * DEG,
            self.acting_margin_deg * DEG,
            self.indicator_outer_deg * DEG,
            self.indicator_inner_deg * DEG,
            steepness,
        )
    }
}

/// Monte Carlo campaign settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSettings {
    pub runs: usize,
    pub seed: u64,
    /// Targets are drawn uniformly in longitude on this latitude circle.
    pub target_latitude_deg: f64,
}

impl Default for MonteCarloSettings {
    fn default() -> Self {
        Self {
            runs: 50,
            seed: 2024,
            target_latitude_deg: 70.0,
        }
    }
}

/// A complete scenario description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub run: RunSettings,
    pub plant: PlantParams,
    pub apf: ApfGains,
    pub governor: GovernorConfig,
    pub controller: ControllerGains,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloSettings>,
    #[serde(default)]
    pub zones: Vec<ZoneConfig>,
}

pub const PRESETS: [&str; 3] = ["two-cone", "three-cone", "monte-carlo"];

const THREE_CONE_AXES: [[f64; 3]; 3] = [
    [0.6529, 0.7255, 0.2176],
    [-0.4402, 0.8805, 0.1761],
    [0.0741, 0.7412, -0.6671],
];

/// Named scenario.
pub fn preset(name: &str) -> Result<ScenarioConfig, ScenarioError> {
    let axes: Vec<[f64; 3]> = match name {
        "two-cone" => vec![[0.5715, 0.8165, 0.0816], [-0.3369, 0.8422, -0.4211]],
        "three-cone" => THREE_CONE_AXES.to_vec(),
        "monte-carlo" => {
            let mut v = THREE_CONE_AXES.to_vec();
            v.push([-0.6529, -0.7255, -0.2176]);
            v.push([0.4402, -0.8805, -0.1761]);
            v
        }
        other => return Err(ScenarioError::UnknownPreset(other.to_string())),
    };
    let mc = name == "monte-carlo";
    Ok(ScenarioConfig {
        run: RunSettings {
            name: name.to_string(),
            t_final: 200.0,
            dt: 1e-3,
            telemetry_rate: 10.0,
            disturbance: true,
            mode: ControllerMode::Full,
            boresight: Vec3::x(),
            target: (!mc).then(|| Vec3::new(-0.8617, 0.4975, -0.0995)),
            initial_quaternion: if mc {
                [0.0, 0.6428, 0.0, 0.7660]
            } else {
                [0.0, 0.0, 0.0, 1.0]
            },
            initial_rate: Vec3::zeros(),
            theta_guess: Vec3::repeat(1.5),
        },
        plant: PlantParams::default(),
        apf: ApfGains::default(),
        governor: GovernorConfig::default(),
        controller: ControllerGains::default(),
        monte_carlo: mc.then(MonteCarloSettings::default),
        zones: axes.into_iter().map(|a| ZoneConfig::new(a, 20.0)).collect(),
    })
}

/// Point on the given latitude circle at longitude `phi`.
pub fn latitude_point(latitude_deg: f64, phi: f64) -> Vec3 {
    let lat = latitude_deg * DEG;
    Vec3::new(lat.cos() * phi.cos(), lat.cos() * phi.sin(), lat.sin())
}

/// Target drawn uniformly in longitude on a latitude circle; returns the
/// direction and the longitude.
pub fn sample_target(rng: &mut impl rand::Rng, latitude_deg: f64) -> (Vec3, f64) {
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    (latitude_point(latitude_deg, phi), phi)
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, ScenarioError> {
        let cfg: Self = toml::from_str(s)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String, ScenarioError> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn initial_quaternion(&self) -> Result<UnitQuaternion, ScenarioError> {
        UnitQuaternion::from_xyzw(self.run.initial_quaternion)
            .ok_or_else(|| ScenarioError::ConfigInvalid("initial quaternion has zero norm".into()))
    }

    /// Builds the closed-loop parameters for a concrete target and checks
    /// every admissibility condition.
    pub fn closed_loop_params(&self, target: &Vec3) -> Result<ClosedLoopParams, ScenarioError> {
        let invalid = ScenarioError::ConfigInvalid;
        let r = &self.run;
        if !(r.dt.is_finite() && r.dt > 0.0 && r.t_final.is_finite() && r.t_final > 0.0) {
            return Err(invalid(format!("need dt > 0 and t_final > 0, got {} and {}", r.dt, r.t_final)));
        }
        if !(r.telemetry_rate.is_finite() && r.telemetry_rate > 0.0) {
            return Err(invalid("telemetry_rate must be positive".into()));
        }
        self.plant.validate().map_err(invalid)?;
        self.apf.validate().map_err(invalid)?;
        self.controller.validate().map_err(invalid)?;
        let governor = self.governor.build(self.apf.max_rate).map_err(invalid)?;
        let zones = self
            .zones
            .iter()
            .map(|z| z.build(self.governor.steepness))
            .collect::<Result<Vec<_>, _>>()
            .map_err(invalid)?;

        let unit = |v: &Vec3, what: &str| {
            let n = v.norm();
            if n.is_finite() && n > 0.0 {
                Ok(v / n)
            } else {
                Err(invalid(format!("{what} must be a non-zero vector")))
            }
        };
        let boresight = unit(&r.boresight, "boresight")?;
        let target = unit(target, "target")?;
        let q = self.initial_quaternion()?;
        let b_i = q.body_to_inertial(&boresight);

        for (n, z) in zones.iter().enumerate() {
            if b_i.dot(&z.axis) >= z.p1 {
                return Err(invalid(format!("initial boresight lies inside forbidden zone {}", n + 1)));
            }
            if target.dot(&z.axis) >= z.p1 {
                return Err(invalid(format!("target lies inside forbidden zone {}", n + 1)));
            }
            if target.dot(&z.axis) >= z.indicator.s0 {
                return Err(invalid(format!(
                    "target lies inside the indicator band of zone {}; the freeze would never release",
                    n + 1
                )));
            }
        }
        if !r.initial_rate.iter().all(|w| w.abs() < self.apf.max_rate) {
            return Err(invalid("initial rate exceeds the rate limit".into()));
        }
        let x_e0 = pointing_error(&boresight, &q.dcm().to_body(&target));
        if x_e0 >= governor.rho0 {
            return Err(invalid(format!(
                "initial pointing error {x_e0} not inside the initial envelope {}",
                governor.rho0
            )));
        }
        Ok(ClosedLoopParams {
            plant: self.plant,
            apf: self.apf,
            governor,
            controller: self.controller,
            zones,
            boresight,
            target,
            disturbance: r.disturbance,
            mode: r.mode,
        })
    }

    /// Non-fatal observations about the configuration.
    pub fn warnings(&self, target: &Vec3) -> Vec<String> {
        let mut out = self.controller.proof_condition_warnings();
        if let Ok(q) = self.initial_quaternion() {
            let b_i = q.body_to_inertial(&self.run.boresight.normalize());
            if b_i.dot(&target.normalize()) < -1.0 + 1e-6 {
                out.push("target is antipodal to the initial boresight; the attraction gradient vanishes".into());
            }
        }
        out
    }

    /// Target for a single run: the configured one, or the first Monte Carlo
    /// sample.
    pub fn resolve_target(&self) -> Result<Vec3, ScenarioError> {
        if let Some(t) = self.run.target {
            return Ok(t);
        }
        match &self.monte_carlo {
            Some(mc) => Ok(super::monte_carlo::run_target(mc, 0).0),
            None => Err(ScenarioError::ConfigInvalid(
                "no target given and no Monte Carlo section to sample one".into(),
            )),
        }
    }
}
