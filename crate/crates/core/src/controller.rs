//! Immersion-and-invariance adaptive law: the static term `u_n`, the
//! regulation functions `β₁`, `β₂`, the identification filter and the
//! parameter update.

use serde::{Deserialize, Serialize};

use crate::attitude::{l_operator, skew, Mat3, Vec3};

/// Adaptive-law gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    /// Damping gain `K_ω`.
    pub k_damp: f64,
    /// Adaptation gain `C_β`.
    pub c_beta: f64,
    /// Identification filter gain `K_f`.
    pub k_filter: f64,
    /// Adaptation rate of the filter gain, `K_a`.
    pub k_filter_adapt: f64,
    /// Time constant of the derivative-estimating low-pass filters, s.
    pub tau_dsc: f64,
    /// Below this rate norm the `1/‖ω‖²` and `ln‖ω‖²` terms are dropped.
    pub eps_omega: f64,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            k_damp: 0.05,
            c_beta: 0.05,
            k_filter: 30.0,
            k_filter_adapt: 10.0,
            tau_dsc: 0.01,
            eps_omega: 1e-3,
        }
    }
}

impl ControllerGains {
    pub fn validate(&self) -> Result<(), String> {
        for (name, v) in [
            ("k_damp", self.k_damp),
            ("c_beta", self.c_beta),
            ("k_filter", self.k_filter),
            ("tau_dsc", self.tau_dsc),
            ("eps_omega", self.eps_omega),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.k_filter_adapt.is_finite() && self.k_filter_adapt >= 0.0) {
            return Err("k_filter_adapt must be non-negative".into());
        }
        Ok(())
    }

    /// The convergence proof asks for `K_ω > 1/C_β` and `K_f > 1/C_β`.
    /// Returns the violated conditions, if any.
    pub fn proof_condition_warnings(&self) -> Vec<String> {
        let bound = 1.0 / self.c_beta;
        let mut out = Vec::new();
        if self.k_damp <= bound {
            out.push(format!("k_damp = {} does not exceed 1/c_beta = {bound}", self.k_damp));
        }
        if self.k_filter <= bound {
            out.push(format!("k_filter = {} does not exceed 1/c_beta = {bound}", self.k_filter));
        }
        out
    }
}

/// Adaptive states carried alongside the plant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorState {
    pub theta_hat: Vec3,
    pub omega_hat: Vec3,
    pub g_a: f64,
    /// Low-pass state tracking `δ_n`.
    pub delta_filt: f64,
    /// Low-pass state tracking `ω_s`, used for the `ω̇_s` surrogate.
    pub omega_filt: Vec3,
}

/// `δ_n = R_ρ ρ̇_q ε_q / ρ_q`.
pub fn delta_n(r_rho: f64, rho_dot: f64, eps: f64, rho: f64) -> f64 {
    r_rho * rho_dot * eps / rho
}

/// `u_n = −R_ω⁻¹ ∇_C − K_ω R_ω ω_s + R_ω⁻¹ δ_n ω_s/‖ω_s‖²`, the last term
/// gated off below `eps_omega`.
pub fn nominal_control(
    omega: &Vec3,
    grad_c: &Vec3,
    barrier_weights: &Vec3,
    delta_n: f64,
    gains: &ControllerGains,
) -> Vec3 {
    let n2 = omega.norm_squared();
    let mut u = -grad_c.component_div(barrier_weights)
        - gains.k_damp * barrier_weights.component_mul(omega);
    if n2.sqrt() >= gains.eps_omega {
        u += (delta_n / n2) * omega.component_div(barrier_weights);
    }
    u
}

/// `β₁ = Ψ̂₁ᵀ ω_s = L(ω_s)(ω̂_s × ω_s)`.
pub fn beta1(omega_hat: &Vec3, omega: &Vec3) -> Vec3 {
    omega.component_mul(&omega_hat.cross(omega))
}

/// `β₂` with its partial derivatives in `δ_n` and `∇_C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Beta2 {
    pub value: Vec3,
    pub d_delta: Vec3,
    pub d_grad: Vec3,
}

/// Component-wise
/// `β₂ᵢ = (M²ω_i − ω_i³/3)∇_Ci/k_ω − (K_ω k_ω/2) ln(1/R_ωi)
///        + δ_n/(2k_ω)[ln‖ω‖² (M² + ‖ω‖² − ω_i²) − ω_i²]`.
pub fn beta2(
    omega: &Vec3,
    grad_c: &Vec3,
    delta_n: f64,
    barrier_weights: &Vec3,
    k_rate: f64,
    max_rate: f64,
    gains: &ControllerGains,
) -> Beta2 {
    let m2 = max_rate * max_rate;
    let n2 = omega.norm_squared();
    let gated = n2.sqrt() < gains.eps_omega;
    let mut value = Vec3::zeros();
    let mut d_delta = Vec3::zeros();
    let mut d_grad = Vec3::zeros();
    for i in 0..3 {
        let w = omega[i];
        d_grad[i] = (m2 * w - w * w * w / 3.0) / k_rate;
        if !gated {
            d_delta[i] = (n2.ln() * (m2 + n2 - w * w) - w * w) / (2.0 * k_rate);
        }
        value[i] = d_grad[i] * grad_c[i] + 0.5 * gains.k_damp * k_rate * barrier_weights[i].ln()
            + delta_n * d_delta[i];
    }
    Beta2 {
        value,
        d_delta,
        d_grad,
    }
}

/// `Ψ₁ = −ω_s^× L(ω_s)`.
pub fn psi1(omega: &Vec3) -> Mat3 {
    -skew(omega) * l_operator(omega)
}

/// `Ψ₂ = L(−u_n)`.
pub fn psi2(u_n: &Vec3) -> Mat3 {
    l_operator(&-u_n)
}

/// `Ψ̂₁ = −ω̂_s^× L(ω_s)`.
pub fn psi1_hat(omega_hat: &Vec3, omega: &Vec3) -> Mat3 {
    -skew(omega_hat) * l_operator(omega)
}

/// `u = −Ψ θ_eff = ω_s × (θ_eff ∘ ω_s) + θ_eff ∘ u_n`.
pub fn control_torque(theta_eff: &Vec3, omega: &Vec3, u_n: &Vec3) -> Vec3 {
    omega.cross(&theta_eff.component_mul(omega)) + theta_eff.component_mul(u_n)
}

/// Identification filter rates `(ω̂̇_s, ġ_a)`.
pub fn filter_derivative(
    omega_hat: &Vec3,
    omega: &Vec3,
    g_a: f64,
    u_n: &Vec3,
    gains: &ControllerGains,
) -> (Vec3, f64) {
    let err = omega_hat - omega;
    (
        -(gains.k_filter + g_a) * err + u_n,
        gains.k_filter_adapt * err.norm_squared(),
    )
}

/// First-order low-pass derivative estimate `(x − x_f)/τ`, which is also the
/// rate of the filter state.
pub fn dsc_derivative(signal: f64, filtered: f64, tau: f64) -> f64 {
    (signal - filtered) / tau
}

/// Inputs to the parameter update at one instant.
#[derive(Debug, Clone, Copy)]
pub struct AdaptationInputs<'a> {
    pub omega: &'a Vec3,
    pub omega_hat: &'a Vec3,
    pub omega_hat_dot: &'a Vec3,
    /// Surrogate for `ω̇_s`.
    pub omega_dot: &'a Vec3,
    pub u_n: &'a Vec3,
    /// `β̄̇₂`, the rate of `β₂` excluding its dependence through `ω_s`.
    pub beta2_partial_rate: &'a Vec3,
}

/// `θ̂̇ = −C_β[Ψ̂̇₁ᵀω_s + (Ψ̂₁ + Ψ₂)ᵀu_n] − C_β β̄̇₂`.
pub fn theta_hat_rate(inp: &AdaptationInputs, c_beta: f64) -> Vec3 {
    let w = inp.omega;
    let psi_hat_dot_t_w = w.component_mul(&inp.omega_hat_dot.cross(w))
        + inp.omega_dot.component_mul(&inp.omega_hat.cross(w));
    let psi_t_un = w.component_mul(&inp.omega_hat.cross(inp.u_n)) - inp.u_n.component_mul(inp.u_n);
    -c_beta * (psi_hat_dot_t_w + psi_t_un + inp.beta2_partial_rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apf::velocity_barrier;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const M: f64 = 0.0524;
    const K_RATE: f64 = 0.03;

    fn rand_vec(rng: &mut ChaCha8Rng, r: f64) -> Vec3 {
        Vec3::from_fn(|_, _| rng.gen_range(-r..r))
    }

    #[test]
    fn nominal_control_at_equilibrium() {
        let g = ControllerGains::default();
        let rb = velocity_barrier(&Vec3::zeros(), K_RATE, M).unwrap();
        let u = nominal_control(&Vec3::zeros(), &Vec3::zeros(), &rb.weights, -0.3, &g);
        assert_eq!(u, Vec3::zeros());
    }

    #[test]
    fn nominal_control_at_rest_is_gradient_descent() {
        let g = ControllerGains::default();
        let rb = velocity_barrier(&Vec3::zeros(), K_RATE, M).unwrap();
        let grad = Vec3::new(0.3, -0.7, 1.1);
        let u = nominal_control(&Vec3::zeros(), &grad, &rb.weights, 0.02, &g);
        assert_relative_eq!(u, -grad * (M * M / K_RATE), epsilon = 1e-15);
    }

    #[test]
    fn nominal_control_gate() {
        let g = ControllerGains::default();
        let w = Vec3::new(5e-4, 0.0, 0.0);
        let rb = velocity_barrier(&w, K_RATE, M).unwrap();
        let without = nominal_control(&w, &Vec3::zeros(), &rb.weights, 0.0, &g);
        let with = nominal_control(&w, &Vec3::zeros(), &rb.weights, 1.0, &g);
        assert_eq!(with, without);
        let w = Vec3::new(2e-3, 0.0, 0.0);
        let rb = velocity_barrier(&w, K_RATE, M).unwrap();
        let with = nominal_control(&w, &Vec3::zeros(), &rb.weights, 1e-6, &g);
        let without = nominal_control(&w, &Vec3::zeros(), &rb.weights, 0.0, &g);
        assert_relative_eq!(with.x - without.x, 1e-6 / 2e-3 / rb.weights.x, max_relative = 1e-12);
    }

    #[test]
    fn beta1_examples() {
        let w = Vec3::new(0.01, 0.0, 0.0);
        assert_eq!(beta1(&w, &w), Vec3::zeros());
        assert_eq!(beta1(&Vec3::new(0.3, 0.1, 0.2), &Vec3::zeros()), Vec3::zeros());
    }

    #[test]
    fn beta1_matches_regression_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let (wh, w) = (rand_vec(&mut rng, 1.0), rand_vec(&mut rng, 1.0));
            let oracle = psi1_hat(&wh, &w).transpose() * w;
            assert!((beta1(&wh, &w) - oracle).amax() < 1e-14);
        }
    }

    #[test]
    fn beta2_at_rest() {
        let g = ControllerGains::default();
        let rb = velocity_barrier(&Vec3::zeros(), K_RATE, M).unwrap();
        let b = beta2(&Vec3::zeros(), &Vec3::zeros(), 0.7, &rb.weights, K_RATE, M, &g);
        let expected = -(0.05 * K_RATE / 2.0) * (M * M / K_RATE).ln();
        assert_relative_eq!(b.value, Vec3::repeat(expected), epsilon = 1e-15);
        assert_eq!(b.d_delta, Vec3::zeros());
    }

    #[test]
    fn beta2_diagonal_pde_first_two_terms() {
        let g = ControllerGains::default();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let w = rand_vec(&mut rng, 0.045);
            let grad = rand_vec(&mut rng, 2.0);
            let rb = velocity_barrier(&w, K_RATE, M).unwrap();
            let target = grad.component_div(&rb.weights) + g.k_damp * rb.weights.component_mul(&w);
            for i in 0..3 {
                let h = 1e-6;
                let (mut up, mut dn) = (w, w);
                up[i] += h;
                dn[i] -= h;
                let bu = beta2(&up, &grad, 0.0, &velocity_barrier(&up, K_RATE, M).unwrap().weights, K_RATE, M, &g);
                let bd = beta2(&dn, &grad, 0.0, &velocity_barrier(&dn, K_RATE, M).unwrap().weights, K_RATE, M, &g);
                let num = (bu.value[i] - bd.value[i]) / (2.0 * h);
                assert!(
                    (num - target[i]).abs() <= 1e-5 * target[i].abs().max(1e-6),
                    "axis {i}: {num} vs {}",
                    target[i]
                );
            }
        }
    }

    #[test]
    fn beta2_full_pde_residual_is_reported() {
        // The δ_n term is kept as written; its residual against −u_n is a
        // diagnostic only. This checks that the residual is finite and that
        // the first two terms account for everything when δ_n = 0.
        let g = ControllerGains::default();
        let w = Vec3::new(0.01, -0.02, 0.015);
        let grad = Vec3::new(0.2, 0.1, -0.3);
        let rb = velocity_barrier(&w, K_RATE, M).unwrap();
        let delta = 0.01;
        let u_n = nominal_control(&w, &grad, &rb.weights, delta, &g);
        let h = 1e-7;
        let mut up = w;
        up.x += h;
        let mut dn = w;
        dn.x -= h;
        let f = |v: &Vec3| beta2(v, &grad, delta, &velocity_barrier(v, K_RATE, M).unwrap().weights, K_RATE, M, &g).value.x;
        let residual = (f(&up) - f(&dn)) / (2.0 * h) + u_n.x;
        assert!(residual.is_finite());
    }

    #[test]
    fn beta2_is_linear_in_gradient() {
        let g = ControllerGains::default();
        let w = Vec3::new(0.01, -0.02, 0.015);
        let rb = velocity_barrier(&w, K_RATE, M).unwrap();
        let zero = beta2(&w, &Vec3::zeros(), 0.0, &rb.weights, K_RATE, M, &g).value;
        let a = Vec3::new(0.2, 0.1, -0.3);
        let one = beta2(&w, &a, 0.0, &rb.weights, K_RATE, M, &g).value - zero;
        let three = beta2(&w, &(3.0 * a), 0.0, &rb.weights, K_RATE, M, &g).value - zero;
        assert_relative_eq!(three, 3.0 * one, epsilon = 1e-15);
    }

    #[test]
    fn beta2_partials_match_finite_difference() {
        let g = ControllerGains::default();
        let w = Vec3::new(0.01, -0.02, 0.015);
        let rb = velocity_barrier(&w, K_RATE, M).unwrap();
        let grad = Vec3::new(0.2, 0.1, -0.3);
        let b = beta2(&w, &grad, 0.02, &rb.weights, K_RATE, M, &g);
        let h = 1e-6;
        let dd = (beta2(&w, &grad, 0.02 + h, &rb.weights, K_RATE, M, &g).value
            - beta2(&w, &grad, 0.02 - h, &rb.weights, K_RATE, M, &g).value)
            / (2.0 * h);
        assert_relative_eq!(dd, b.d_delta, max_relative = 1e-8);
        for i in 0..3 {
            let mut gu = grad;
            gu[i] += h;
            let num = (beta2(&w, &gu, 0.02, &rb.weights, K_RATE, M, &g).value[i] - b.value[i]) / h;
            assert_relative_eq!(num, b.d_grad[i], max_relative = 1e-6);
        }
    }

    #[test]
    fn regression_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..100 {
            let u = rand_vec(&mut rng, 1.0);
            let p2 = psi2(&u);
            assert_eq!(p2, Mat3::from_diagonal(&-u));
            let w = rand_vec(&mut rng, 1.0);
            assert_eq!(psi1_hat(&w, &w), psi1(&w));
            let wh = rand_vec(&mut rng, 1.0);
            let delta = psi1_hat(&wh, &w) - psi1(&w);
            // ‖ΔΨ‖ ≤ ‖ω‖ ‖ω̂ − ω‖ with the Frobenius norm of the skew factor.
            assert!(delta.norm() <= 2f64.sqrt() * w.amax() * (wh - w).norm() + 1e-15);
        }
    }

    #[test]
    fn control_torque_matches_regression_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let (th, w, un) = (rand_vec(&mut rng, 3.0), rand_vec(&mut rng, 0.05), rand_vec(&mut rng, 0.1));
            let oracle = -(psi1(&w) + psi2(&un)) * th;
            assert!((control_torque(&th, &w, &un) - oracle).amax() < 1e-15);
        }
        assert_eq!(control_torque(&Vec3::zeros(), &Vec3::x(), &Vec3::y()), Vec3::zeros());
    }

    #[test]
    fn perfect_estimate_yields_nominal_acceleration() {
        let j = Vec3::new(2.0, 2.9, 2.3);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..1000 {
            let w = rand_vec(&mut rng, 0.05);
            let un = rand_vec(&mut rng, 0.05);
            let u = control_torque(&j, &w, &un);
            let wd = (-w.cross(&j.component_mul(&w)) + u).component_div(&j);
            assert!((wd - un).amax() < 1e-12);
        }
    }

    #[test]
    fn filter_fixed_point() {
        let g = ControllerGains::default();
        let w = Vec3::new(0.01, 0.02, -0.03);
        assert_eq!(filter_derivative(&w, &w, 0.0, &Vec3::zeros(), &g), (Vec3::zeros(), 0.0));
    }

    #[test]
    fn filter_converges_at_gain_rate() {
        let g = ControllerGains::default();
        let w = Vec3::new(0.01, 0.02, -0.03);
        let mut wh = w + Vec3::new(1e-3, -2e-3, 5e-4);
        let mut ga = 0.0;
        let dt = 1e-4;
        let e0 = (wh - w).norm();
        let steps = 1000;
        for _ in 0..steps {
            let x = [wh.x, wh.y, wh.z, ga];
            let next = crate::integrate::rk4_step(&x, 0.0, dt, |_, x| {
                let (d, gd) = filter_derivative(&Vec3::new(x[0], x[1], x[2]), &w, x[3], &Vec3::zeros(), &g);
                assert!(gd >= 0.0);
                Ok::<_, std::convert::Infallible>([d.x, d.y, d.z, gd])
            })
            .unwrap();
            assert!(next[3] >= ga);
            wh = Vec3::new(next[0], next[1], next[2]);
            ga = next[3];
        }
        let t = steps as f64 * dt;
        let rate = -((wh - w).norm() / e0).ln() / t;
        assert!(rate >= 0.95 * g.k_filter, "{rate}");
    }

    #[test]
    fn dsc_tracks_ramp_slope() {
        let tau = 0.01;
        let c = 0.7;
        let dt = 1e-4;
        let mut filt = 0.0;
        let mut t = 0.0;
        while t < 5.0 * tau {
            let x = c * t;
            filt += dt * dsc_derivative(x, filt, tau);
            t += dt;
        }
        let est = dsc_derivative(c * t, filt, tau);
        assert!((est - c).abs() < 0.02 * c, "{est}");
        assert_eq!(dsc_derivative(2.0, 2.0, tau), 0.0);
    }

    #[test]
    fn theta_hat_rate_at_rest() {
        let z = Vec3::zeros();
        let inp = AdaptationInputs {
            omega: &z,
            omega_hat: &z,
            omega_hat_dot: &z,
            omega_dot: &z,
            u_n: &z,
            beta2_partial_rate: &z,
        };
        assert_eq!(theta_hat_rate(&inp, 0.05), z);
    }

    #[test]
    fn theta_hat_rate_matches_matrix_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let w = rand_vec(&mut rng, 0.05);
            let wh = rand_vec(&mut rng, 0.05);
            let whd = rand_vec(&mut rng, 0.01);
            let wd = rand_vec(&mut rng, 0.01);
            let un = rand_vec(&mut rng, 0.05);
            let b2 = rand_vec(&mut rng, 0.01);
            let psi_hat_dot = -skew(&whd) * l_operator(&w) - skew(&wh) * l_operator(&wd);
            let oracle = -0.05
                * (psi_hat_dot.transpose() * w + (psi1_hat(&wh, &w) + psi2(&un)).transpose() * un + b2);
            let inp = AdaptationInputs {
                omega: &w,
                omega_hat: &wh,
                omega_hat_dot: &whd,
                omega_dot: &wd,
                u_n: &un,
                beta2_partial_rate: &b2,
            };
            assert!((theta_hat_rate(&inp, 0.05) - oracle).amax() < 1e-16);
        }
    }

    #[test]
    fn paper_gains_flag_proof_conditions() {
        let w = ControllerGains::default().proof_condition_warnings();
        assert_eq!(w.len(), 1);
        assert!(w[0].starts_with("k_damp"));
    }

    proptest::proptest! {
        #[test]
        fn regression_mismatch_is_lipschitz_in_filter_error(
            w in proptest::array::uniform3(-0.0523f64..0.0523),
            e in proptest::array::uniform3(-0.1f64..0.1),
            un in proptest::array::uniform3(-1.0f64..1.0),
        ) {
            let (w, e, un) = (Vec3::from(w), Vec3::from(e), Vec3::from(un));
            let delta = psi1_hat(&(w + e), &w) + psi2(&un) - (psi1(&w) + psi2(&un));
            // Frobenius: ‖Δ_Ψ‖ ≤ ‖(ω̂ − ω)^×‖ ‖L(ω)‖₂ ≤ √2 M_ω ‖ω̂ − ω‖.
            proptest::prop_assert!(delta.norm() <= std::f64::consts::SQRT_2 * M * e.norm() * (1.0 + 1e-12));
            if e == Vec3::zeros() {
                proptest::prop_assert_eq!(delta, Mat3::zeros());
            }
        }
    }
}
