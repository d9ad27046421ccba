//! Attitude mathematics: quaternions, direction cosine matrices and the
//! reduced-attitude pointing quantities.
//!
//! Conventions used throughout the crate:
//!
//! * Quaternions are Hamilton, stored scalar-last `[x, y, z, w]`.
//! * A quaternion `q` is the active rotation taking body-frame vectors to the
//!   inertial frame, so `B_i = R(q) B_b` and the inertial-to-body DCM is
//!   `A_bi = R(q)ᵀ`.
//! * Body rates `ω_s` are expressed in the body frame and the kinematics are
//!   `q̇ = ½ q ⊗ [ω_s, 0]`, equivalent to `Ȧ_bi = −ω_s^× A_bi`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Cross-product matrix: `skew(v) * w == v.cross(&w)`.
pub fn skew(v: &Vec3) -> Mat3 {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Linear operator with `J x = L(x) θ` for a diagonal inertia `J = diag(θ)`.
pub fn l_operator(x: &Vec3) -> Mat3 {
    Matrix3::from_diagonal(x)
}

/// Unit quaternion, scalar-last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitQuaternion {
    pub vector: Vec3,
    pub scalar: f64,
}

impl Default for UnitQuaternion {
    fn default() -> Self {
        Self::identity()
    }
}

impl UnitQuaternion {
    pub fn identity() -> Self {
        Self {
            vector: Vec3::zeros(),
            scalar: 1.0,
        }
    }

    /// Builds a quaternion from `[x, y, z, w]` and normalizes it. Returns
    /// `None` for a zero or non-finite input.
    pub fn from_xyzw(c: [f64; 4]) -> Option<Self> {
        let n = (c[0] * c[0] + c[1] * c[1] + c[2] * c[2] + c[3] * c[3]).sqrt();
        if !n.is_finite() || n == 0.0 {
            return None;
        }
        Some(Self {
            vector: Vec3::new(c[0] / n, c[1] / n, c[2] / n),
            scalar: c[3] / n,
        })
    }

    /// Rotation of `angle` radians about `axis` (need not be normalized).
    pub fn from_axis_angle(axis: &Vec3, angle: f64) -> Self {
        let n = axis.norm();
        if n == 0.0 || angle == 0.0 {
            return Self::identity();
        }
        let (s, c) = (0.5 * angle).sin_cos();
        Self {
            vector: axis * (s / n),
            scalar: c,
        }
    }

    pub fn xyzw(&self) -> [f64; 4] {
        [self.vector.x, self.vector.y, self.vector.z, self.scalar]
    }

    pub fn norm(&self) -> f64 {
        (self.vector.norm_squared() + self.scalar * self.scalar).sqrt()
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Self {
            vector: self.vector / n,
            scalar: self.scalar / n,
        }
    }

    /// Hamilton product `self ⊗ rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            vector: self.scalar * rhs.vector
                + rhs.scalar * self.vector
                + self.vector.cross(&rhs.vector),
            scalar: self.scalar * rhs.scalar - self.vector.dot(&rhs.vector),
        }
    }

    /// Body-to-inertial rotation matrix `R(q)`.
    pub fn rotation_matrix(&self) -> Mat3 {
        let (x, y, z, w) = (self.vector.x, self.vector.y, self.vector.z, self.scalar);
        Matrix3::new(
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - z * w),
            2.0 * (x * z + y * w),
            2.0 * (x * y + z * w),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - x * w),
            2.0 * (x * z - y * w),
            2.0 * (y * z + x * w),
            1.0 - 2.0 * (x * x + y * y),
        )
    }

    /// Inertial-to-body DCM `A_bi`.
    pub fn dcm(&self) -> Dcm {
        Dcm(self.rotation_matrix().transpose())
    }

    /// Rotates a body-frame vector into the inertial frame.
    pub fn body_to_inertial(&self, v: &Vec3) -> Vec3 {
        self.rotation_matrix() * v
    }

    /// Kinematic rate `½ q ⊗ [ω, 0]` as raw `(vector, scalar)` components.
    pub fn rate(&self, omega: &Vec3) -> (Vec3, f64) {
        (
            0.5 * (self.scalar * omega + self.vector.cross(omega)),
            -0.5 * self.vector.dot(omega),
        )
    }
}

/// Inertial-to-body direction cosine matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dcm(pub Mat3);

impl Dcm {
    pub fn to_body(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn to_inertial(&self, v: &Vec3) -> Vec3 {
        self.0.transpose() * v
    }

    /// Largest absolute entry of `AᵀA − I`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0.transpose() * self.0 - Mat3::identity()).abs().max()
    }
}

/// Body boresight together with an inertial target direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointingPair {
    pub boresight_body: Vec3,
    pub target_body: Vec3,
}

impl PointingPair {
    pub fn new(boresight_body: Vec3, target_inertial: &Vec3, dcm: &Dcm) -> Self {
        Self {
            boresight_body,
            target_body: dcm.to_body(target_inertial),
        }
    }

    pub fn error(&self) -> f64 {
        pointing_error(&self.boresight_body, &self.target_body)
    }

    /// `r_b^× B_b`, the gradient of `x_e` with respect to body rate.
    pub fn error_gradient(&self) -> Vec3 {
        self.target_body.cross(&self.boresight_body)
    }
}

/// `x_e = 1 − B_bᵀ r_b`.
///
/// Near alignment the cancellation in `1 − cos Θ` is avoided by evaluating
/// `sin²Θ / (1 + cos Θ)` instead.
pub fn pointing_error(boresight: &Vec3, target: &Vec3) -> f64 {
    let c = boresight.dot(target);
    if c > 0.5 {
        boresight.cross(target).norm_squared() / (1.0 + c)
    } else {
        1.0 - c
    }
}

/// Pointing error angle `Θ` in radians.
pub fn pointing_angle(boresight: &Vec3, target: &Vec3) -> f64 {
    boresight.cross(target).norm().atan2(boresight.dot(target))
}

/// Advances `q` by a constant body rate over `dt` using the exact
/// exponential map, then renormalizes.
pub fn propagate_attitude(q: &UnitQuaternion, omega: &Vec3, dt: f64) -> UnitQuaternion {
    let rate = omega.norm();
    if rate == 0.0 {
        return *q;
    }
    let delta = UnitQuaternion::from_axis_angle(omega, rate * dt);
    q.mul(&delta).normalized()
}
