//! The coupled plant, envelope and estimator dynamics advanced as one flat
//! ODE.

use serde::{Deserialize, Serialize};

use crate::apf::{combined_gradient, velocity_barrier, ApfGains, FieldEval, ForbiddenZone, RateBarrier};
use crate::attitude::{pointing_error, UnitQuaternion, Vec3};
use crate::controller::{
    beta1, beta2, control_torque, delta_n, dsc_derivative, filter_derivative, nominal_control,
    theta_hat_rate, AdaptationInputs, ControllerGains, EstimatorState,
};
use crate::error::ControlError;
use crate::governor::{
    blf_value, indicators, omega_q, rho_dot, transformed_error, GovernorParams, Indicators, OmegaQ,
};
use crate::integrate::rk4_step;
use crate::plant::{disturbance, dynamics_derivative, saturate_torque, PlantParams, ReducedAttitudeState};

/// Which terms enter the nominal control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerMode {
    /// Potential fields plus the prescribed-performance terms.
    #[default]
    Full,
    /// Potential fields only: `∇_C = ∇_U` and `δ_n = 0`.
    ApfOnly,
}

/// Everything that stays fixed during a run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopParams {
    pub plant: PlantParams,
    pub apf: ApfGains,
    pub governor: GovernorParams,
    pub controller: ControllerGains,
    pub zones: Vec<ForbiddenZone>,
    /// Sensor axis in body coordinates.
    pub boresight: Vec3,
    /// Unit target direction in inertial coordinates.
    pub target: Vec3,
    pub disturbance: bool,
    pub mode: ControllerMode,
}

/// Integrated state: plant, envelope and estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosedLoopState {
    pub plant: ReducedAttitudeState,
    pub rho: f64,
    pub estimator: EstimatorState,
}

pub const STATE_LEN: usize = 19;

impl ClosedLoopState {
    fn pack(&self) -> [f64; STATE_LEN] {
        let mut x = [0.0; STATE_LEN];
        x[..7].copy_from_slice(&self.plant.pack());
        x[7] = self.rho;
        let e = &self.estimator;
        x[8..11].copy_from_slice(e.omega_hat.as_slice());
        x[11] = e.g_a;
        x[12..15].copy_from_slice(e.theta_hat.as_slice());
        x[15] = e.delta_filt;
        x[16..19].copy_from_slice(e.omega_filt.as_slice());
        x
    }

    fn unpack(x: &[f64; STATE_LEN]) -> Self {
        let v = |i: usize| Vec3::new(x[i], x[i + 1], x[i + 2]);
        Self {
            plant: ReducedAttitudeState::unpack(&x[..7]),
            rho: x[7],
            estimator: EstimatorState {
                omega_hat: v(8),
                g_a: x[11],
                theta_hat: v(12),
                delta_filt: x[15],
                omega_filt: v(16),
            },
        }
    }

    /// Initial state with the filter at the measured rate, `g_a = 0`, the
    /// low-pass states at their inputs and `θ̂` chosen so that `θ̂ + β`
    /// equals `theta_guess`.
    pub fn initial(
        params: &ClosedLoopParams,
        q: UnitQuaternion,
        omega: Vec3,
        theta_guess: Vec3,
    ) -> Result<Self, ControlError> {
        let mut s = Self {
            plant: ReducedAttitudeState { q, omega },
            rho: params.governor.rho0,
            estimator: EstimatorState {
                theta_hat: Vec3::zeros(),
                omega_hat: omega,
                g_a: 0.0,
                delta_filt: 0.0,
                omega_filt: omega,
            },
        };
        let ev = evaluate(0.0, &s, params, None)?;
        s.estimator.delta_filt = ev.delta_n;
        s.estimator.theta_hat = theta_guess - ev.beta;
        Ok(s)
    }

    /// Pointing error of this state.
    pub fn pointing_error(&self, params: &ClosedLoopParams) -> f64 {
        let r_b = self.plant.q.dcm().to_body(&params.target);
        pointing_error(&params.boresight, &r_b)
    }
}

/// Every intermediate signal of one closed-loop evaluation.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub x_e: f64,
    pub x_e_dot: f64,
    pub eps: f64,
    pub r_rho: f64,
    pub rho_dot: f64,
    pub omega_q: OmegaQ,
    pub indicators: Indicators,
    pub field: FieldEval,
    pub barrier: RateBarrier,
    pub grad_c: Vec3,
    pub delta_n: f64,
    pub u_n: Vec3,
    pub beta: Vec3,
    pub theta_eff: Vec3,
    /// Commanded torque before saturation.
    pub torque_cmd: Vec3,
    /// Applied torque.
    pub torque: Vec3,
    pub v_b: f64,
    pub derivative: [f64; STATE_LEN],
}

impl Evaluation {
    pub fn gammas(&self) -> impl Iterator<Item = f64> + '_ {
        self.field.zones.iter().map(|z| z.gamma)
    }
}

/// Evaluates the closed loop at `state`. `ppc_eps`, when given, replaces
/// `ε_q` as the argument of the performance indicator; the step holds it at
/// its start-of-step value across RK4 stages.
pub fn evaluate(
    t: f64,
    state: &ClosedLoopState,
    p: &ClosedLoopParams,
    ppc_eps: Option<f64>,
) -> Result<Evaluation, ControlError> {
    let w = state.plant.omega;
    let est = &state.estimator;
    let rho = state.rho;
    let dcm = state.plant.q.dcm();
    let b = p.boresight;
    let r_b = dcm.to_body(&p.target);
    let axes: Vec<Vec3> = p.zones.iter().map(|z| dcm.to_body(&z.axis)).collect();

    let x_e = pointing_error(&b, &r_b);
    let c = r_b.cross(&b);
    let x_e_dot = c.dot(&w);

    let field = combined_gradient(x_e, &b, &r_b, &p.zones, &axes, &p.apf)?;
    let barrier = velocity_barrier(&w, p.apf.k_rate, p.apf.max_rate)?;
    let full = p.mode == ControllerMode::Full;
    let (eps, r_rho) = if full {
        transformed_error(x_e, rho, p.governor.k_b)?
    } else {
        let eps = x_e / rho;
        (eps, p.governor.k_b / (1.0 - eps))
    };
    if !rho.is_finite() || rho <= 0.0 {
        return Err(ControlError::NonFiniteState {
            what: format!("envelope rho_q = {rho}"),
        });
    }

    let ppc_arg = ppc_eps.unwrap_or(eps);
    let zone_specs: Vec<_> = p.zones.iter().map(|z| z.indicator).collect();
    let gammas: Vec<f64> = field.zones.iter().map(|z| z.gamma).collect();
    let ind = indicators(
        &gammas,
        &zone_specs,
        [w.x * w.x, w.y * w.y, w.z * w.z],
        ppc_arg,
        rho,
        &p.governor,
    );
    let oq = omega_q(&ind, p.governor.k_s);
    let rd = rho_dot(rho, x_e, x_e_dot, oq.clamped, p.governor.k_rho, p.governor.rho_inf);

    let coef = r_rho / rho;
    let (dn, grad_c) = if full {
        (delta_n(r_rho, rd, eps, rho), field.gradient + coef * c)
    } else {
        (0.0, field.gradient)
    };
    let g = &p.controller;
    let u_n = nominal_control(&w, &grad_c, &barrier.weights, dn, g);

    let b2 = beta2(&w, &grad_c, dn, &barrier.weights, p.apf.k_rate, p.apf.max_rate, g);
    let beta = g.c_beta * (beta1(&est.omega_hat, &w) + b2.value);
    let theta_eff = est.theta_hat + beta;
    let torque_cmd = control_torque(&theta_eff, &w, &u_n);
    let torque = saturate_torque(&torque_cmd, p.plant.max_torque);
    let d = if p.disturbance {
        disturbance(t, p.plant.disturbance_freq)
    } else {
        Vec3::zeros()
    };
    let ((q_dot_v, q_dot_s), w_dot) = dynamics_derivative(&state.plant, &torque, &d, &p.plant.inertia);

    let (omega_hat_dot, g_a_dot) = filter_derivative(&est.omega_hat, &w, est.g_a, &u_n, g);
    let delta_rate = if full {
        dsc_derivative(dn, est.delta_filt, g.tau_dsc)
    } else {
        0.0
    };
    let omega_rate = (w - est.omega_filt) / g.tau_dsc;

    let mut grad_c_dot = field.gradient_rate(&w, &p.zones, &p.apf);
    if full {
        let eps_dot = (x_e_dot - rd * eps) / rho;
        let r_rho_dot = p.governor.k_b * eps_dot / ((1.0 - eps) * (1.0 - eps));
        let coef_dot = r_rho_dot / rho - r_rho * rd / (rho * rho);
        let c_dot = (-w.cross(&r_b)).cross(&b);
        grad_c_dot += coef_dot * c + coef * c_dot;
    }
    let beta2_rate = delta_rate * b2.d_delta + b2.d_grad.component_mul(&grad_c_dot);
    let theta_hat_dot = theta_hat_rate(
        &AdaptationInputs {
            omega: &w,
            omega_hat: &est.omega_hat,
            omega_hat_dot: &omega_hat_dot,
            omega_dot: &omega_rate,
            u_n: &u_n,
            beta2_partial_rate: &beta2_rate,
        },
        g.c_beta,
    );

    let mut derivative = [0.0; STATE_LEN];
    derivative[..3].copy_from_slice(q_dot_v.as_slice());
    derivative[3] = q_dot_s;
    derivative[4..7].copy_from_slice(w_dot.as_slice());
    derivative[7] = rd;
    derivative[8..11].copy_from_slice(omega_hat_dot.as_slice());
    derivative[11] = g_a_dot;
    derivative[12..15].copy_from_slice(theta_hat_dot.as_slice());
    derivative[15] = delta_rate;
    derivative[16..19].copy_from_slice(omega_rate.as_slice());
    if let Some(i) = derivative.iter().position(|v| !v.is_finite()) {
        return Err(ControlError::NonFiniteState {
            what: format!("closed-loop derivative component {i} at t = {t}"),
        });
    }

    Ok(Evaluation {
        x_e,
        x_e_dot,
        eps,
        r_rho,
        rho_dot: rd,
        omega_q: oq,
        indicators: ind,
        field,
        barrier,
        grad_c,
        delta_n: dn,
        u_n,
        beta,
        theta_eff,
        torque_cmd,
        torque,
        v_b: if full { blf_value(eps, p.governor.k_b) } else { f64::NAN },
        derivative,
    })
}

/// Advances the closed loop by one RK4 step. `start` must be the evaluation
/// of `state` at `t` and supplies the first stage.
pub fn step(
    t: f64,
    dt: f64,
    state: &ClosedLoopState,
    start: &Evaluation,
    p: &ClosedLoopParams,
) -> Result<ClosedLoopState, ControlError> {
    let ppc_eps = Some(start.eps);
    let mut first = true;
    let next = rk4_step(&state.pack(), t, dt, |ts, x| {
        if std::mem::take(&mut first) {
            return Ok(start.derivative);
        }
        evaluate(ts, &ClosedLoopState::unpack(x), p, ppc_eps).map(|e| e.derivative)
    })?;
    if let Some(i) = next.iter().position(|v| !v.is_finite()) {
        return Err(ControlError::NonFiniteState {
            what: format!("closed-loop state component {i} at t = {}", t + dt),
        });
    }
    let mut out = ClosedLoopState::unpack(&next);
    out.plant.q = out.plant.q.normalized();
    Ok(out)
}
