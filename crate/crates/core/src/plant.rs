//! Ground-truth rigid-body model: Euler dynamics, environmental disturbance
//! and actuator saturation.

use serde::{Deserialize, Serialize};

use crate::attitude::{UnitQuaternion, Vec3};
use crate::error::ControlError;
use crate::integrate::rk4_step;

/// Physical plant parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    /// Principal moments of inertia, kg·m².
    pub inertia: Vec3,
    /// Per-axis torque limit, N·m.
    pub max_torque: f64,
    /// Base frequency of the disturbance model, rad/s.
    pub disturbance_freq: f64,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            inertia: Vec3::new(2.0, 2.9, 2.3),
            max_torque: 0.05,
            disturbance_freq: 0.01,
        }
    }
}

impl PlantParams {
    pub fn validate(&self) -> Result<(), String> {
        if !self.inertia.iter().all(|&j| j.is_finite() && j > 0.0) {
            return Err(format!("inertia entries must be positive, got {:?}", self.inertia));
        }
        if !(self.max_torque.is_finite() && self.max_torque > 0.0) {
            return Err(format!("max_torque must be positive, got {}", self.max_torque));
        }
        if !self.disturbance_freq.is_finite() {
            return Err("disturbance_freq must be finite".into());
        }
        Ok(())
    }
}

/// Attitude and body rate of the spacecraft.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedAttitudeState {
    pub q: UnitQuaternion,
    pub omega: Vec3,
}

impl ReducedAttitudeState {
    pub fn at_rest(q: UnitQuaternion) -> Self {
        Self {
            q,
            omega: Vec3::zeros(),
        }
    }

    pub(crate) fn pack(&self) -> [f64; 7] {
        let [x, y, z, w] = self.q.xyzw();
        [x, y, z, w, self.omega.x, self.omega.y, self.omega.z]
    }

    pub(crate) fn unpack(s: &[f64]) -> Self {
        Self {
            q: UnitQuaternion {
                vector: Vec3::new(s[0], s[1], s[2]),
                scalar: s[3],
            },
            omega: Vec3::new(s[4], s[5], s[6]),
        }
    }
}

/// Three-channel sinusoidal environmental torque, N·m.
pub fn disturbance(t: f64, freq: f64) -> Vec3 {
    let w = freq * t;
    1e-3 * Vec3::new(
        4.0 * (3.0 * w).sin() + 3.0 * (10.0 * w).cos() - 4.0,
        -1.5 * (2.0 * w).sin() + 3.0 * (5.0 * w).cos() + 4.0,
        3.0 * (10.0 * w).sin() - 8.0 * (4.0 * w).cos() + 4.0,
    )
}

/// Component-wise clamp to `[-max, max]`.
pub fn saturate_torque(u: &Vec3, max: f64) -> Vec3 {
    u.map(|c| c.clamp(-max, max))
}

/// Time derivative of the plant state: quaternion rate (vector, scalar) and
/// `ω̇ = J⁻¹(−ω × Jω + u + d)`.
pub fn dynamics_derivative(
    state: &ReducedAttitudeState,
    torque: &Vec3,
    disturbance: &Vec3,
    inertia: &Vec3,
) -> ((Vec3, f64), Vec3) {
    let w = &state.omega;
    let h = inertia.component_mul(w);
    let omega_dot = (-w.cross(&h) + torque + disturbance).component_div(inertia);
    (state.q.rate(w), omega_dot)
}

/// Advances the plant alone by one RK4 step with the applied torque given as a
/// function of time and state (torque is re-evaluated at every stage). The
/// quaternion is renormalized afterwards.
pub fn step_plant(
    state: &ReducedAttitudeState,
    params: &PlantParams,
    t: f64,
    dt: f64,
    with_disturbance: bool,
    mut torque: impl FnMut(f64, &ReducedAttitudeState) -> Vec3,
) -> Result<ReducedAttitudeState, ControlError> {
    let x = state.pack();
    let next = rk4_step(&x, t, dt, |t, x| {
        let s = ReducedAttitudeState::unpack(x);
        let u = saturate_torque(&torque(t, &s), params.max_torque);
        let d = if with_disturbance {
            disturbance(t, params.disturbance_freq)
        } else {
            Vec3::zeros()
        };
        let ((qv, qs), wd) = dynamics_derivative(&s, &u, &d, &params.inertia);
        Ok::<_, ControlError>([qv.x, qv.y, qv.z, qs, wd.x, wd.y, wd.z])
    })?;
    if let Some(i) = next.iter().position(|v| !v.is_finite()) {
        return Err(ControlError::NonFiniteState {
            what: format!("plant state component {i}"),
        });
    }
    let mut out = ReducedAttitudeState::unpack(&next);
    out.q = out.q.normalized();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn disturbance_at_zero() {
        let d = disturbance(0.0, 0.01);
        assert_relative_eq!(d, Vec3::new(-1e-3, 7e-3, -4e-3), epsilon = 1e-18);
    }

    #[test]
    fn disturbance_is_bounded() {
        let bound = (0..=200_000)
            .map(|i| disturbance(i as f64 * 1e-3, 0.01).amax())
            .fold(0.0, f64::max);
        assert!(bound <= 1.5e-2, "{bound}");
    }

    #[test]
    fn disturbance_matches_independent_evaluation() {
        // Written per channel in expanded trig form, not via the vector code path.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let t: f64 = rng.gen_range(0.0..1000.0);
            let p = 0.01;
            let d1 = 0.004 * (3.0 * p * t).sin() + 0.003 * (10.0 * p * t).cos() - 0.004;
            let d2 = -0.0015 * (2.0 * p * t).sin() + 0.003 * (5.0 * p * t).cos() + 0.004;
            let d3 = 0.003 * (10.0 * p * t).sin() - 0.008 * (4.0 * p * t).cos() + 0.004;
            let d = disturbance(t, p);
            assert!((d.x - d1).abs() < 1e-15 && (d.y - d2).abs() < 1e-15 && (d.z - d3).abs() < 1e-15);
        }
    }

    #[test]
    fn disturbance_is_periodic() {
        // Channel frequencies are integer multiples of ω_p, so 2π/ω_p is a period.
        let period = 2.0 * std::f64::consts::PI / 0.01;
        for t in [0.0, 13.7, 150.0, 401.3] {
            assert!((disturbance(t, 0.01) - disturbance(t + period, 0.01)).amax() < 1e-12);
        }
    }

    #[test]
    fn saturation() {
        let u = Vec3::new(0.01, -0.02, 0.03);
        assert_eq!(saturate_torque(&u, 0.05), u);
        assert_eq!(
            saturate_torque(&Vec3::new(0.2, -0.2, 0.0), 0.05),
            Vec3::new(0.05, -0.05, 0.0)
        );
        assert_eq!(PlantParams::default().max_torque, 0.05);
    }

    #[test]
    fn saturation_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let u = Vec3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let once = saturate_torque(&u, 0.05);
            assert_eq!(saturate_torque(&once, 0.05), once);
        }
    }

    #[test]
    fn euler_equation_examples() {
        let j = Vec3::new(2.0, 2.9, 2.3);
        let zero = Vec3::zeros();
        let rest = ReducedAttitudeState::at_rest(UnitQuaternion::identity());
        assert_eq!(dynamics_derivative(&rest, &zero, &zero, &j).1, zero);

        let spin = ReducedAttitudeState {
            q: UnitQuaternion::identity(),
            omega: Vec3::new(0.01, 0.0, 0.0),
        };
        assert_eq!(dynamics_derivative(&spin, &zero, &zero, &j).1, zero);

        // −ω × Jω with ω = [0.01, 0.02, 0]: Jω = [0.02, 0.058, 0],
        // ω × Jω = [0, 0, 0.01·0.058 − 0.02·0.02] = [0, 0, 1.8e-4].
        let s = ReducedAttitudeState {
            q: UnitQuaternion::identity(),
            omega: Vec3::new(0.01, 0.02, 0.0),
        };
        let wd = dynamics_derivative(&s, &zero, &zero, &j).1;
        assert_relative_eq!(wd, Vec3::new(0.0, 0.0, -1.8e-4 / 2.3), epsilon = 1e-18);
    }

    #[test]
    fn rest_state_is_fixed_point() {
        let p = PlantParams::default();
        let s = ReducedAttitudeState::at_rest(UnitQuaternion::identity());
        let next = step_plant(&s, &p, 0.0, 1e-3, false, |_, _| Vec3::zeros()).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn torque_free_motion_conserves_energy_and_momentum() {
        let p = PlantParams::default();
        let j = p.inertia;
        let mut s = ReducedAttitudeState {
            q: UnitQuaternion::from_xyzw([0.1, 0.2, -0.3, 0.9]).unwrap(),
            omega: Vec3::new(0.03, -0.04, 0.05),
        };
        let energy = |s: &ReducedAttitudeState| s.omega.dot(&j.component_mul(&s.omega));
        let momentum = |s: &ReducedAttitudeState| j.component_mul(&s.omega).norm();
        let (e0, h0) = (energy(&s), momentum(&s));
        for i in 0..10_000 {
            s = step_plant(&s, &p, i as f64 * 1e-3, 1e-3, false, |_, _| Vec3::zeros()).unwrap();
        }
        assert!(((energy(&s) - e0) / e0).abs() < 1e-8);
        assert!(((momentum(&s) - h0) / h0).abs() < 1e-8);
        // Inertial angular momentum vector is conserved as well.
        let hi0 = UnitQuaternion::from_xyzw([0.1, 0.2, -0.3, 0.9])
            .unwrap()
            .body_to_inertial(&j.component_mul(&Vec3::new(0.03, -0.04, 0.05)));
        let hi = s.q.body_to_inertial(&j.component_mul(&s.omega));
        assert!((hi - hi0).norm() / hi0.norm() < 1e-8);
    }
}
