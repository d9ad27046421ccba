//! Single-scenario execution with per-step constraint monitoring.

use serde::{Deserialize, Serialize};

use crate::attitude::Vec3;
use crate::closed_loop::{evaluate, step, ClosedLoopParams, ClosedLoopState, ControllerMode, Evaluation};
use crate::error::{ControlError, ScenarioError};

use super::config::ScenarioConfig;

/// One telemetry row.
#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    pub t: f64,
    pub x_e: f64,
    pub theta_deg: f64,
    pub eps_q: f64,
    pub rho_q: f64,
    pub omega_q_raw: f64,
    pub omega_q: f64,
    pub omega: [f64; 3],
    pub torque: [f64; 3],
    pub gamma: Vec<f64>,
    pub theta_eff: [f64; 3],
    pub g_a: f64,
    pub filt_err: f64,
    pub v_omega: f64,
    pub v_b: f64,
}

/// Maximal span of monitored steps with `Ω_Q = 1` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreezeInterval {
    pub start: f64,
    pub end: f64,
    /// `ε_q` at the start of the interval.
    pub eps_q: f64,
    /// Largest `|ε_q − ε_q(start)| / ε_q(start)` inside the interval.
    pub max_rel_change: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    ForbiddenZone,
    RateLimit,
    Envelope,
    NonFinite,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub kind: ViolationKind,
    pub message: String,
}

impl Violation {
    pub fn from_error(t: f64, e: &ControlError) -> Self {
        let kind = match e {
            ControlError::OutsideDomain { .. } => ViolationKind::ForbiddenZone,
            ControlError::RateLimitViolated { .. } => ViolationKind::RateLimit,
            ControlError::EnvelopeViolated { .. } => ViolationKind::Envelope,
            ControlError::NonFiniteState { .. } => ViolationKind::NonFinite,
        };
        Self {
            t,
            kind,
            message: e.to_string(),
        }
    }
}

/// Aggregate outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub pass: bool,
    /// Mean `x_e` over the last 30 s.
    pub terminal_accuracy_xe: f64,
    /// Pointing angle corresponding to `terminal_accuracy_xe`, deg.
    pub terminal_accuracy_deg: f64,
    pub max_abs_rate_dps: f64,
    pub max_eps_q: f64,
    /// Smallest `cos Θ_f − γ` over all zones and steps.
    pub min_zone_margin: f64,
    pub freeze_intervals: Vec<FreezeInterval>,
    pub first_violation: Option<Violation>,
}

/// Limits checked by the monitors.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorLimits {
    /// `cos Θ_f` per zone.
    pub zone_boundaries: Vec<f64>,
    pub max_rate: f64,
    /// Whether `ε_q < 1` is a hard constraint.
    pub envelope: bool,
    /// Start of the terminal-accuracy window, s.
    pub terminal_window_start: f64,
}

impl MonitorLimits {
    pub fn from_params(p: &ClosedLoopParams, t_final: f64) -> Self {
        Self {
            zone_boundaries: p.zones.iter().map(|z| z.p1).collect(),
            max_rate: p.apf.max_rate,
            envelope: p.mode == ControllerMode::Full,
            terminal_window_start: t_final - 30.0,
        }
    }
}

/// Monitored quantities at one instant.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub t: f64,
    pub x_e: f64,
    pub eps_q: f64,
    pub omega: [f64; 3],
    pub gamma: &'a [f64],
    pub omega_q: f64,
}

/// Folds observations into a [`RunSummary`], recording the first breach.
#[derive(Debug, Clone)]
pub struct SummaryBuilder {
    limits: MonitorLimits,
    xe_sum: f64,
    xe_count: usize,
    max_rate: f64,
    max_eps: f64,
    min_margin: f64,
    freeze: Vec<FreezeInterval>,
    open: Option<FreezeInterval>,
    violation: Option<Violation>,
}

impl SummaryBuilder {
    pub fn new(limits: MonitorLimits) -> Self {
        Self {
            limits,
            xe_sum: 0.0,
            xe_count: 0,
            max_rate: 0.0,
            max_eps: 0.0,
            min_margin: f64::INFINITY,
            freeze: Vec::new(),
            open: None,
            violation: None,
        }
    }

    /// Records an observation; returns `false` once a constraint is breached.
    pub fn observe(&mut self, o: &Observation) -> bool {
        let finite = o.x_e.is_finite()
            && o.omega.iter().all(|w| w.is_finite())
            && o.gamma.iter().all(|g| g.is_finite())
            && (!self.limits.envelope || o.eps_q.is_finite());
        if !finite {
            return self.breach(o.t, ViolationKind::NonFinite, "non-finite telemetry value".into());
        }
        if o.t >= self.limits.terminal_window_start - 1e-9 {
            self.xe_sum += o.x_e;
            self.xe_count += 1;
        }
        let rate = o.omega.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        self.max_rate = self.max_rate.max(rate);
        self.max_eps = self.max_eps.max(o.eps_q);
        for (n, (g, b)) in o.gamma.iter().zip(&self.limits.zone_boundaries).enumerate() {
            self.min_margin = self.min_margin.min(b - g);
            if g >= b {
                return self.breach(
                    o.t,
                    ViolationKind::ForbiddenZone,
                    format!("boresight inside forbidden zone {}", n + 1),
                );
            }
        }
        if rate >= self.limits.max_rate {
            return self.breach(o.t, ViolationKind::RateLimit, format!("rate {rate} rad/s at limit"));
        }
        if self.limits.envelope && o.eps_q >= 1.0 {
            return self.breach(o.t, ViolationKind::Envelope, format!("eps_q = {}", o.eps_q));
        }
        self.track_freeze(o);
        true
    }

    fn track_freeze(&mut self, o: &Observation) {
        if o.omega_q == 1.0 {
            let iv = self.open.get_or_insert(FreezeInterval {
                start: o.t,
                end: o.t,
                eps_q: o.eps_q,
                max_rel_change: 0.0,
            });
            iv.end = o.t;
            iv.max_rel_change = iv.max_rel_change.max(((o.eps_q - iv.eps_q) / iv.eps_q).abs());
        } else if let Some(iv) = self.open.take() {
            self.freeze.push(iv);
        }
    }

    /// Records a failure reported by the integrator.
    pub fn fail(&mut self, v: Violation) {
        if self.violation.is_none() {
            self.violation = Some(v);
        }
    }

    fn breach(&mut self, t: f64, kind: ViolationKind, message: String) -> bool {
        self.fail(Violation { t, kind, message });
        false
    }

    pub fn finish(mut self) -> RunSummary {
        if let Some(iv) = self.open.take() {
            self.freeze.push(iv);
        }
        let xe = if self.xe_count > 0 && self.violation.is_none() {
            self.xe_sum / self.xe_count as f64
        } else {
            f64::NAN
        };
        RunSummary {
            pass: self.violation.is_none(),
            terminal_accuracy_xe: xe,
            terminal_accuracy_deg: pointing_angle_deg(xe),
            max_abs_rate_dps: self.max_rate.to_degrees(),
            max_eps_q: self.max_eps,
            min_zone_margin: self.min_margin,
            freeze_intervals: self.freeze,
            first_violation: self.violation,
        }
    }
}

/// Pointing angle for a pointing error `x_e = 1 − cos Θ`, deg.
pub fn pointing_angle_deg(x_e: f64) -> f64 {
    (2.0 * (0.5 * x_e).sqrt().clamp(0.0, 1.0).asin()).to_degrees()
}

/// Telemetry, boresight path and summary of one run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub telemetry: Vec<TelemetryRecord>,
    /// Inertial boresight direction at each telemetry time.
    pub boresight_path: Vec<(f64, Vec3)>,
    pub warnings: Vec<String>,
}

impl RunOutput {
    /// Whether the run stopped on a non-finite state.
    pub fn diverged(&self) -> bool {
        matches!(
            self.summary.first_violation,
            Some(Violation {
                kind: ViolationKind::NonFinite,
                ..
            })
        )
    }
}

fn record(t: f64, s: &ClosedLoopState, ev: &Evaluation) -> TelemetryRecord {
    let v3 = |v: &Vec3| [v.x, v.y, v.z];
    TelemetryRecord {
        t,
        x_e: ev.x_e,
        theta_deg: pointing_angle_deg(ev.x_e),
        eps_q: ev.eps,
        rho_q: s.rho,
        omega_q_raw: ev.omega_q.raw,
        omega_q: ev.omega_q.clamped,
        omega: v3(&s.plant.omega),
        torque: v3(&ev.torque),
        gamma: ev.gammas().collect(),
        theta_eff: v3(&ev.theta_eff),
        g_a: s.estimator.g_a,
        filt_err: (s.estimator.omega_hat - s.plant.omega).norm(),
        v_omega: ev.barrier.value,
        v_b: ev.v_b,
    }
}

/// Runs a scenario toward `target` (inertial). Monitors are checked at every
/// integration step; telemetry is decimated to the configured rate.
pub fn run_with_target(cfg: &ScenarioConfig, target: &Vec3) -> Result<RunOutput, ScenarioError> {
    let params = cfg.closed_loop_params(target)?;
    let warnings = cfg.warnings(target);
    let dt = cfg.run.dt;
    let steps = (cfg.run.t_final / dt).round() as usize;
    let every = ((1.0 / (cfg.run.telemetry_rate * dt)).round() as usize).max(1);
    let limits = MonitorLimits::from_params(&params, steps as f64 * dt);
    let mut summary = SummaryBuilder::new(limits);
    let mut telemetry = Vec::with_capacity(steps / every + 2);
    let mut path = Vec::with_capacity(steps / every + 2);

    let q0 = cfg.initial_quaternion()?;
    let mut state = match ClosedLoopState::initial(&params, q0, cfg.run.initial_rate, cfg.run.theta_guess) {
        Ok(s) => s,
        Err(e) => {
            summary.fail(Violation::from_error(0.0, &e));
            return Ok(RunOutput {
                summary: summary.finish(),
                telemetry,
                boresight_path: path,
                warnings,
            });
        }
    };

    for k in 0..=steps {
        let t = k as f64 * dt;
        let ev = match evaluate(t, &state, &params, None) {
            Ok(ev) => ev,
            Err(e) => {
                summary.fail(Violation::from_error(t, &e));
                break;
            }
        };
        let gammas: Vec<f64> = ev.gammas().collect();
        let w = state.plant.omega;
        let ok = summary.observe(&Observation {
            t,
            x_e: ev.x_e,
            eps_q: ev.eps,
            omega: [w.x, w.y, w.z],
            gamma: &gammas,
            omega_q: ev.omega_q.clamped,
        });
        if k % every == 0 || k == steps {
            telemetry.push(record(t, &state, &ev));
            path.push((t, state.plant.q.body_to_inertial(&params.boresight)));
        }
        if !ok || k == steps {
            break;
        }
        state = match step(t, dt, &state, &ev, &params) {
            Ok(s) => s,
            Err(e) => {
                summary.fail(Violation::from_error(t + dt, &e));
                break;
            }
        };
    }

    Ok(RunOutput {
        summary: summary.finish(),
        telemetry,
        boresight_path: path,
        warnings,
    })
}

/// Runs a scenario with its configured (or first sampled) target.
pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, ScenarioError> {
    run_with_target(cfg, &cfg.resolve_target()?)
}

/// Re-applies the monitors to recorded telemetry.
pub fn check_records(records: &[TelemetryRecord], limits: MonitorLimits) -> RunSummary {
    let mut s = SummaryBuilder::new(limits);
    for r in records {
        let ok = s.observe(&Observation {
            t: r.t,
            x_e: r.x_e,
            eps_q: r.eps_q,
            omega: r.omega,
            gamma: &r.gamma,
            omega_q: r.omega_q,
        });
        let values_finite = [r.rho_q, r.omega_q_raw, r.omega_q, r.g_a, r.filt_err, r.v_omega]
            .iter()
            .chain(&r.torque)
            .chain(&r.theta_eff)
            .all(|v| v.is_finite());
        if !values_finite {
            s.fail(Violation {
                t: r.t,
                kind: ViolationKind::NonFinite,
                message: "non-finite telemetry value".into(),
            });
            break;
        }
        if !ok {
            break;
        }
    }
    s.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::config::preset;

    fn limits() -> MonitorLimits {
        MonitorLimits {
            zone_boundaries: vec![0.9],
            max_rate: 0.05,
            envelope: true,
            terminal_window_start: 1.0,
        }
    }

    fn obs(t: f64, x_e: f64, eps_q: f64, gamma: &[f64], omega_q: f64) -> Observation<'_> {
        Observation {
            t,
            x_e,
            eps_q,
            omega: [0.01, 0.0, 0.0],
            gamma,
            omega_q,
        }
    }

    #[test]
    fn pointing_angle_examples() {
        assert_eq!(pointing_angle_deg(0.0), 0.0);
        assert!((pointing_angle_deg(1.0) - 90.0).abs() < 1e-12);
        assert!((pointing_angle_deg(2.0) - 180.0).abs() < 1e-12);
        let x = 1.0 - (0.05f64).to_radians().cos();
        assert!((pointing_angle_deg(x) - 0.05).abs() < 1e-9);
        assert!(pointing_angle_deg(f64::NAN).is_nan());
    }

    #[test]
    fn summary_tracks_freeze_intervals() {
        let mut s = SummaryBuilder::new(limits());
        let g = [0.0];
        for (i, w) in [0.0, 1.0, 1.0, 0.5, 1.0, 1.0, 1.0, 0.0].iter().enumerate() {
            assert!(s.observe(&obs(i as f64 * 0.1, 0.1, 0.5, &g, *w)));
        }
        let r = s.finish();
        assert!(r.pass);
        assert_eq!(r.freeze_intervals.len(), 2);
        assert_eq!(r.freeze_intervals[0].start, 0.1);
        assert_eq!(r.freeze_intervals[1].end, 0.6000000000000001);
        assert!(r.terminal_accuracy_xe.is_nan());
    }

    #[test]
    fn summary_records_first_breach() {
        let mut s = SummaryBuilder::new(limits());
        assert!(s.observe(&obs(0.0, 0.1, 0.5, &[0.5], 0.0)));
        assert!(!s.observe(&obs(0.1, 0.1, 0.5, &[0.95], 0.0)));
        s.fail(Violation {
            t: 0.2,
            kind: ViolationKind::Envelope,
            message: String::new(),
        });
        let r = s.finish();
        assert!(!r.pass);
        let v = r.first_violation.unwrap();
        assert_eq!(v.kind, ViolationKind::ForbiddenZone);
        assert_eq!(v.t, 0.1);
    }

    #[test]
    fn envelope_and_rate_monitors() {
        let mut s = SummaryBuilder::new(limits());
        assert!(!s.observe(&obs(0.0, 0.1, 1.0, &[0.0], 0.0)));
        assert_eq!(s.finish().first_violation.unwrap().kind, ViolationKind::Envelope);

        let mut l = limits();
        l.envelope = false;
        let mut s = SummaryBuilder::new(l);
        assert!(s.observe(&obs(0.0, 0.1, 3.0, &[0.0], 0.0)));
        let mut o = obs(0.1, 0.1, 3.0, &[0.0], 0.0);
        o.omega = [0.0, -0.05, 0.0];
        assert!(!s.observe(&o));
        assert_eq!(s.finish().first_violation.unwrap().kind, ViolationKind::RateLimit);
    }

    #[test]
    fn terminal_window_average() {
        let mut s = SummaryBuilder::new(limits());
        for i in 0..=20 {
            let t = i as f64 * 0.1;
            s.observe(&obs(t, if t >= 1.0 { 2e-6 } else { 1.0 }, 0.1, &[0.0], 0.0));
        }
        let r = s.finish();
        assert!((r.terminal_accuracy_xe - 2e-6).abs() < 1e-18);
    }

    #[test]
    fn short_run_is_deterministic_and_decimated() {
        let mut cfg = preset("two-cone").unwrap();
        cfg.run.t_final = 2.0;
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.telemetry, b.telemetry);
        assert_eq!(a.telemetry.len(), 21);
        assert_eq!(a.telemetry[0].t, 0.0);
        assert_eq!(a.telemetry[20].t, 2.0);
        assert!(a.summary.pass);
        assert_eq!(a.telemetry[0].gamma.len(), 2);
        let rerun = check_records(&a.telemetry, MonitorLimits::from_params(
            &cfg.closed_loop_params(&cfg.resolve_target().unwrap()).unwrap(),
            2.0,
        ));
        assert!(rerun.pass);
    }
}
