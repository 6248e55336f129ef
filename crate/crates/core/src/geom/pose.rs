//! SE(3) elements stored as unit quaternion + translation.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3, Vector6};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{GeomError, GeomResult};

/// A rigid transform `p_out = R * p_in + t`.
///
/// The quaternion sign is canonicalized to `w >= 0` on construction so that
/// equal transforms compare equal component-wise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidPose {
    rotation: UnitQuaternion<f64>,
    translation: Vector3<f64>,
}

impl RigidPose {
    pub fn new(rotation: UnitQuaternion<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: canonicalize(rotation),
            translation,
        }
    }

    /// From quaternion components in (w, x, y, z) order; renormalizes.
    pub fn from_wxyz(q: [f64; 4], t: [f64; 3]) -> Self {
        let quat = Quaternion::new(q[0], q[1], q[2], q[3]);
        Self::new(UnitQuaternion::from_quaternion(quat), Vector3::from(t))
    }

    pub fn identity() -> Self {
        Self {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rot = if axis.norm() < 1e-300 {
            UnitQuaternion::identity()
        } else {
            UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle)
        };
        Self::new(rot, translation)
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        self.rotation
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        self.rotation.to_rotation_matrix().into_inner()
    }

    /// Quaternion components as (w, x, y, z).
    pub fn quaternion_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// `self` applied after `rhs`: `(self * rhs)(p) = self(rhs(p))`.
    pub fn compose(&self, rhs: &RigidPose) -> RigidPose {
        RigidPose::new(
            self.rotation * rhs.rotation,
            self.rotation * rhs.translation + self.translation,
        )
    }

    pub fn inverse(&self) -> RigidPose {
        let inv_rot = self.rotation.inverse();
        RigidPose::new(inv_rot, -(inv_rot * self.translation))
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn transform_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// Rotation angle of the relative transform `self⁻¹ * other`, radians.
    pub fn rotation_angle_to(&self, other: &RigidPose) -> f64 {
        self.rotation.angle_to(&other.rotation)
    }

    /// Translation distance to `other`, meters.
    pub fn translation_distance_to(&self, other: &RigidPose) -> f64 {
        (self.translation - other.translation).norm()
    }

    /// SE(3) exponential of a twist `[vx, vy, vz, wx, wy, wz]`.
    pub fn se3_exp(twist: &Vector6<f64>) -> RigidPose {
        let v = Vector3::new(twist[0], twist[1], twist[2]);
        let w = Vector3::new(twist[3], twist[4], twist[5]);
        let theta = w.norm();
        let rotation = if theta < SMALL_ANGLE {
            UnitQuaternion::from_quaternion(Quaternion::from_parts(1.0, w * 0.5))
        } else {
            UnitQuaternion::from_axis_angle(&nalgebra::Unit::new_normalize(w), theta)
        };
        let t = left_jacobian(&w) * v;
        RigidPose::new(rotation, t)
    }

    /// SE(3) logarithm as a twist `[v, w]`; fails within 1e-6 rad of a
    /// half-turn where the axis is numerically unstable.
    pub fn se3_log(&self) -> GeomResult<Vector6<f64>> {
        let angle = self.rotation.angle();
        if angle >= std::f64::consts::PI - 1e-6 {
            return Err(GeomError::NearPiRotation);
        }
        let w = match self.rotation.axis_angle() {
            Some((axis, ang)) => axis.into_inner() * ang,
            None => Vector3::zeros(),
        };
        let v = left_jacobian_inv(&w) * self.translation;
        Ok(Vector6::new(v[0], v[1], v[2], w[0], w[1], w[2]))
    }

    /// Right-multiplicative update used by the solvers:
    /// `self * exp(twist)`.
    pub fn boxplus(&self, twist: &Vector6<f64>) -> RigidPose {
        self.compose(&RigidPose::se3_exp(twist))
    }

    /// Jacobian of `(self * exp(twist)) * x` w.r.t. the twist at zero:
    /// `R * [I | -[x]ₓ]`.
    pub fn boxplus_point_jacobian(&self, x_local: &Vector3<f64>) -> nalgebra::Matrix3x6<f64> {
        let r = self.rotation_matrix();
        let s = skew(x_local);
        let mut j = nalgebra::Matrix3x6::zeros();
        j.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        j.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-r * s));
        j
    }
}

const SMALL_ANGLE: f64 = 1e-8;

fn canonicalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.quaternion().w < 0.0 {
        UnitQuaternion::from_quaternion(-q.quaternion())
    } else {
        q
    }
}

fn skew(w: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
}

/// Left Jacobian of SO(3): `V = I + (1-cosθ)/θ² [w]ₓ + (θ-sinθ)/θ³ [w]ₓ²`.
fn left_jacobian(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let wx = skew(w);
    if theta < SMALL_ANGLE {
        Matrix3::identity() + wx * 0.5
    } else {
        let t2 = theta * theta;
        Matrix3::identity() + wx * ((1.0 - theta.cos()) / t2)
            + wx * wx * ((theta - theta.sin()) / (t2 * theta))
    }
}

fn left_jacobian_inv(w: &Vector3<f64>) -> Matrix3<f64> {
    let theta = w.norm();
    let wx = skew(w);
    if theta < SMALL_ANGLE {
        Matrix3::identity() - wx * 0.5
    } else {
        let half = 0.5 * theta;
        let coeff = (1.0 - half * half.cos() / half.sin()) / (theta * theta);
        Matrix3::identity() - wx * 0.5 + wx * wx * coeff
    }
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl std::ops::Mul for RigidPose {
    type Output = RigidPose;
    fn mul(self, rhs: RigidPose) -> RigidPose {
        self.compose(&rhs)
    }
}

#[derive(Serialize, Deserialize)]
struct PoseRepr {
    q_wxyz: [f64; 4],
    t_xyz: [f64; 3],
}

impl Serialize for RigidPose {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        PoseRepr {
            q_wxyz: self.quaternion_wxyz(),
            t_xyz: [self.translation[0], self.translation[1], self.translation[2]],
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for RigidPose {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let repr = PoseRepr::deserialize(deserializer)?;
        let norm = Quaternion::new(
            repr.q_wxyz[0],
            repr.q_wxyz[1],
            repr.q_wxyz[2],
            repr.q_wxyz[3],
        )
        .norm();
        if !(norm.is_finite() && norm > 1e-6) {
            return Err(D::Error::custom("quaternion norm must be positive"));
        }
        Ok(RigidPose::from_wxyz(repr.q_wxyz, repr.t_xyz))
    }
}
