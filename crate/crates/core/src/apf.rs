//! Artificial potential fields: attraction on the pointing error, a
//! secant-type repulsion per forbidden cone with a finite acting region, and
//! the logarithmic angular-velocity barrier.

use serde::{Deserialize, Serialize};

use crate::attitude::Vec3;
use crate::error::ControlError;
use crate::governor::SwitchSpec;

/// Potential-field gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApfGains {
    /// Attraction gain `k_a`.
    pub k_attract: f64,
    /// Repulsion gain `k_r`.
    pub k_repulse: f64,
    /// Rate-barrier gain `k_ω`.
    pub k_rate: f64,
    /// Per-axis rate limit `M_ω`, rad/s.
    pub max_rate: f64,
}

impl Default for ApfGains {
    fn default() -> Self {
        Self {
            k_attract: 2.5,
            k_repulse: 0.5,
            k_rate: 0.03,
            max_rate: 0.0524,
        }
    }
}

impl ApfGains {
    pub fn validate(&self) -> Result<(), String> {
        let all = [self.k_attract, self.k_repulse, self.k_rate, self.max_rate];
        if all.iter().all(|g| g.is_finite() && *g > 0.0) {
            Ok(())
        } else {
            Err(format!("potential-field gains must be positive: {self:?}"))
        }
    }
}

/// A pointing-forbidden cone around an inertial axis.
///
/// The repulsion acts on `γ = B_iᵀ f_i ∈ [P₀, P₁)` with `P₁ = cos Θ_f` and
/// `P₀ = cos(Θ_f + margin)`; the segment is mapped linearly onto `[0, π/2)`
/// by `a γ + b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForbiddenZone {
    pub axis: Vec3,
    pub min_angle: f64,
    pub p0: f64,
    pub p1: f64,
    pub a: f64,
    pub b: f64,
    /// Switching indicator over `γ` used by the performance governor.
    pub indicator: SwitchSpec,
}

impl ForbiddenZone {
    /// Builds a zone with the given acting margin (rad) and indicator band
    /// `[cos(Θ_f + outer), cos(Θ_f + inner)]` with dimensionless steepness
    /// `p (S₁ − S₀) = steepness`.
    pub fn new(
        axis: Vec3,
        min_angle: f64,
        acting_margin: f64,
        indicator_outer: f64,
        indicator_inner: f64,
        steepness: f64,
    ) -> Result<Self, String> {
        let n = axis.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err("forbidden-zone axis must be a non-zero vector".into());
        }
        if !(min_angle > 0.0 && acting_margin > 0.0 && min_angle + acting_margin < std::f64::consts::PI) {
            return Err(format!(
                "invalid forbidden-zone angles: half-angle {min_angle} rad, margin {acting_margin} rad"
            ));
        }
        let p1 = min_angle.cos();
        let p0 = (min_angle + acting_margin).cos();
        let a = std::f64::consts::PI / (2.0 * (p1 - p0));
        let indicator = SwitchSpec::with_steepness(
            (min_angle + indicator_outer).cos(),
            (min_angle + indicator_inner).cos(),
            steepness,
        )?;
        if indicator.s1 >= p1 {
            return Err("forbidden-zone indicator must saturate before the cone boundary".into());
        }
        Ok(Self {
            axis: axis / n,
            min_angle,
            p0,
            p1,
            a,
            b: -a * p0,
            indicator,
        })
    }

    /// Zone with a 10° acting region and indicator band at +10°/+5°.
    pub fn with_defaults(axis: Vec3, min_angle: f64) -> Result<Self, String> {
        let deg = std::f64::consts::PI / 180.0;
        Self::new(axis, min_angle, 10.0 * deg, 10.0 * deg, 5.0 * deg, 2.0)
    }

    fn check(&self, gamma: f64) -> Result<(), ControlError> {
        if gamma < self.p1 && gamma.is_finite() {
            Ok(())
        } else {
            Err(ControlError::OutsideDomain {
                zone: 0,
                gamma,
                boundary: self.p1,
            })
        }
    }

    fn phase(&self, gamma: f64) -> f64 {
        self.a * gamma + self.b
    }
}

impl ControlError {
    pub(crate) fn in_zone(self, n: usize) -> Self {
        match self {
            ControlError::OutsideDomain { gamma, boundary, .. } => ControlError::OutsideDomain {
                zone: n,
                gamma,
                boundary,
            },
            other => other,
        }
    }
}

/// Single-zone repulsion `U_rᴺ(γ)`.
pub fn repulsion_value(gamma: f64, zone: &ForbiddenZone, k_r: f64) -> Result<f64, ControlError> {
    zone.check(gamma)?;
    if gamma < zone.p0 {
        Ok(1.0)
    } else {
        Ok(k_r / zone.phase(gamma).cos() + 1.0 - k_r)
    }
}

/// `∇_rN` such that `U̇_rᴺ = k_r ∇_rNᵀ ω_s`.
pub fn repulsion_gradient(
    gamma: f64,
    boresight: &Vec3,
    axis_body: &Vec3,
    zone: &ForbiddenZone,
) -> Result<Vec3, ControlError> {
    zone.check(gamma)?;
    if gamma < zone.p0 {
        return Ok(Vec3::zeros());
    }
    let p = zone.phase(gamma);
    let sec = 1.0 / p.cos();
    Ok(-zone.a * sec * p.tan() * axis_body.cross(boresight))
}

/// Per-zone quantities at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZoneTerm {
    pub gamma: f64,
    pub value: f64,
    pub gradient: Vec3,
    pub axis_body: Vec3,
}

/// Potential-field state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldEval {
    pub boresight: Vec3,
    pub target: Vec3,
    /// `U_a = k_a x_e`.
    pub attraction: f64,
    /// `U_r = Σ U_rᴺ`.
    pub repulsion: f64,
    pub zones: Vec<ZoneTerm>,
    /// `∇_U`, with `U̇ = ∇_Uᵀ ω_s`.
    pub gradient: Vec3,
}

impl FieldEval {
    /// Overall potential `U = U_a U_r`.
    pub fn potential(&self) -> f64 {
        self.attraction * self.repulsion
    }

    /// Time derivative of `∇_U` along the motion generated by body rate
    /// `omega` (inertial axes and target are static).
    pub fn gradient_rate(&self, omega: &Vec3, zones: &[ForbiddenZone], gains: &ApfGains) -> Vec3 {
        let (b, r) = (&self.boresight, &self.target);
        let c = r.cross(b);
        let c_dot = (-omega.cross(r)).cross(b);
        let xe_dot = c.dot(omega);

        let mut repulsion_dot = 0.0;
        let mut grad_sum = Vec3::zeros();
        let mut grad_sum_dot = Vec3::zeros();
        for (term, zone) in self.zones.iter().zip(zones) {
            if term.gamma < zone.p0 {
                continue;
            }
            let f = &term.axis_body;
            let f_dot = -omega.cross(f);
            let gamma_dot = b.dot(&f_dot);
            let p = zone.phase(term.gamma);
            let (sec, tan) = (1.0 / p.cos(), p.tan());
            let fxb = f.cross(b);
            repulsion_dot += gains.k_repulse * zone.a * sec * tan * gamma_dot;
            grad_sum += term.gradient;
            let dsec_tan = sec * tan * tan + sec * sec * sec;
            grad_sum_dot += -zone.a * zone.a * dsec_tan * gamma_dot * fxb
                - zone.a * sec * tan * f_dot.cross(b);
        }
        gains.k_attract * repulsion_dot * c
            + gains.k_attract * self.repulsion * c_dot
            + gains.k_repulse * gains.k_attract * xe_dot * grad_sum
            + gains.k_repulse * self.attraction * grad_sum_dot
    }
}

/// Evaluates attraction, all zone repulsions and the combined gradient
/// `∇_U = k_a U_r r_b^× B_b + k_r U_a Σ ∇_rN`.
pub fn combined_gradient(
    x_e: f64,
    boresight: &Vec3,
    target_body: &Vec3,
    zones: &[ForbiddenZone],
    axes_body: &[Vec3],
    gains: &ApfGains,
) -> Result<FieldEval, ControlError> {
    let attraction = gains.k_attract * x_e;
    let mut repulsion = 0.0;
    let mut grad_sum = Vec3::zeros();
    let mut terms = Vec::with_capacity(zones.len());
    for (n, (zone, f)) in zones.iter().zip(axes_body).enumerate() {
        let gamma = boresight.dot(f);
        let value = repulsion_value(gamma, zone, gains.k_repulse).map_err(|e| e.in_zone(n))?;
        let gradient = repulsion_gradient(gamma, boresight, f, zone).map_err(|e| e.in_zone(n))?;
        repulsion += value;
        grad_sum += gradient;
        terms.push(ZoneTerm {
            gamma,
            value,
            gradient,
            axis_body: *f,
        });
    }
    let gradient = gains.k_attract * repulsion * target_body.cross(boresight)
        + gains.k_repulse * attraction * grad_sum;
    Ok(FieldEval {
        boresight: *boresight,
        target: *target_body,
        attraction,
        repulsion,
        zones: terms,
        gradient,
    })
}

/// Rate barrier value `V_ω` and the diagonal of `R_ω`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateBarrier {
    pub value: f64,
    pub weights: Vec3,
}

/// `V_ω = (k_ω/2) Σ ln(M²/(M² − ω_i²))`, `R_ω = diag(k_ω/(M² − ω_i²))`.
pub fn velocity_barrier(omega: &Vec3, k_rate: f64, max_rate: f64) -> Result<RateBarrier, ControlError> {
    let m2 = max_rate * max_rate;
    let mut value = 0.0;
    let mut weights = Vec3::zeros();
    for i in 0..3 {
        let w = omega[i];
        if !(w.abs() < max_rate) {
            return Err(ControlError::RateLimitViolated {
                axis: i,
                rate: w,
                limit: max_rate,
            });
        }
        let gap = m2 - w * w;
        value += 0.5 * k_rate * (m2 / gap).ln();
        weights[i] = k_rate / gap;
    }
    Ok(RateBarrier { value, weights })
}
